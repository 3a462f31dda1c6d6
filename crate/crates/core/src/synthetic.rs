//! A table-driven what-if cost model whose costs decompose exactly over
//! declared index groups, and a phased workload generator built on it.
//!
//! Each statement is an instance of a template. A template prices a
//! statement as `base − Σ_g benefit_g[X ∩ g] + Σ_{a∈X} penalty(a)`, where the
//! per-group benefit tables are monotone and `base` exceeds the largest
//! possible total benefit, so costs are always positive.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, IndexId, LocalSpace};
use crate::cost::{CostOracle, Statement, StatementKind, TransitionCostTable};
use crate::error::{Result, TuneError};
use crate::primitives::PartitionPlan;

/// Largest interaction group the generator and validator accept.
pub const MAX_GROUP_SIZE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSpec {
    pub id: IndexId,
    pub name: String,
    pub create: f64,
    pub drop: f64,
}

/// Benefit of every subset of one group, indexed by group-local mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBenefit {
    pub group: usize,
    pub table: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub kind: StatementKind,
    pub base: f64,
    #[serde(default)]
    pub benefits: Vec<GroupBenefit>,
    /// Maintenance cost charged per materialized index.
    #[serde(default)]
    pub penalties: Vec<(IndexId, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCatalog", into = "RawCatalog")]
pub struct SyntheticCatalog {
    indices: Vec<IndexSpec>,
    groups: Vec<Configuration>,
    templates: Vec<Template>,
    relevant: Vec<Configuration>,
    group_spaces: Vec<LocalSpace>,
}

#[derive(Serialize, Deserialize)]
struct RawCatalog {
    indices: Vec<IndexSpec>,
    groups: Vec<Configuration>,
    templates: Vec<Template>,
}

impl TryFrom<RawCatalog> for SyntheticCatalog {
    type Error = TuneError;
    fn try_from(r: RawCatalog) -> Result<Self> {
        SyntheticCatalog::new(r.indices, r.groups, r.templates)
    }
}

impl From<SyntheticCatalog> for RawCatalog {
    fn from(c: SyntheticCatalog) -> Self {
        RawCatalog {
            indices: c.indices,
            groups: c.groups,
            templates: c.templates,
        }
    }
}

fn invalid(msg: String) -> TuneError {
    TuneError::Config(msg)
}

impl SyntheticCatalog {
    /// Validates and indexes a catalog.
    ///
    /// Ids must be dense from 0, every index must belong to exactly one
    /// group, benefit tables must be monotone with zero at the empty set,
    /// and each template's base cost must exceed its largest total benefit.
    pub fn new(indices: Vec<IndexSpec>, groups: Vec<Configuration>, templates: Vec<Template>) -> Result<Self> {
        for (i, spec) in indices.iter().enumerate() {
            if spec.id.index() != i {
                return Err(invalid(format!("index ids must be dense; found {} at position {i}", spec.id)));
            }
        }
        let universe: Configuration = indices.iter().map(|s| s.id).collect();
        let mut seen = Configuration::new();
        for g in &groups {
            if g.is_empty() || g.len() > MAX_GROUP_SIZE {
                return Err(invalid(format!("group {g:?} must have 1..={MAX_GROUP_SIZE} members")));
            }
            if !g.is_subset(&universe) {
                return Err(TuneError::UnknownIndex(g.difference(&universe).iter().next().unwrap()));
            }
            if !g.is_disjoint(&seen) {
                return Err(invalid(format!("groups overlap on {:?}", g.intersection(&seen))));
            }
            seen = seen.union(g);
        }
        if seen != universe {
            return Err(invalid(format!(
                "indices {:?} belong to no group",
                universe.difference(&seen)
            )));
        }
        let group_spaces: Vec<LocalSpace> = groups.iter().map(LocalSpace::new).collect();
        let mut relevant = Vec::with_capacity(templates.len());
        for (t, tpl) in templates.iter().enumerate() {
            let mut rel = Configuration::new();
            let mut max_total = 0.0;
            let mut used = vec![false; groups.len()];
            for gb in &tpl.benefits {
                let space = group_spaces
                    .get(gb.group)
                    .ok_or_else(|| invalid(format!("template {t} names unknown group {}", gb.group)))?;
                if std::mem::replace(&mut used[gb.group], true) {
                    return Err(invalid(format!("template {t} lists group {} twice", gb.group)));
                }
                if gb.table.len() != space.size() {
                    return Err(invalid(format!("template {t}: benefit table size mismatch for group {}", gb.group)));
                }
                if gb.table[0] != 0.0 || gb.table.iter().any(|b| !b.is_finite() || *b < 0.0) {
                    return Err(invalid(format!("template {t}: benefits must be finite, nonnegative, zero at ∅")));
                }
                for m in 0..gb.table.len() {
                    for bit in 0..space.len() {
                        if gb.table[m | (1 << bit)] < gb.table[m] {
                            return Err(invalid(format!("template {t}: benefit table of group {} is not monotone", gb.group)));
                        }
                    }
                }
                let top = *gb.table.last().unwrap();
                if top > 0.0 {
                    rel = rel.union(&groups[gb.group]);
                }
                max_total += top;
            }
            for &(a, p) in &tpl.penalties {
                if !universe.contains(a) {
                    return Err(TuneError::UnknownIndex(a));
                }
                if !(p.is_finite() && p >= 0.0) {
                    return Err(invalid(format!("template {t}: penalty on {a} must be finite and nonnegative")));
                }
                if p > 0.0 {
                    rel.insert(a);
                }
            }
            if !(tpl.base.is_finite() && tpl.base > max_total) {
                return Err(invalid(format!(
                    "template {t}: base cost {} must exceed the largest total benefit {max_total}",
                    tpl.base
                )));
            }
            relevant.push(rel);
        }
        Ok(SyntheticCatalog {
            indices,
            groups,
            templates,
            relevant,
            group_spaces,
        })
    }

    pub fn indices(&self) -> &[IndexSpec] {
        &self.indices
    }

    pub fn groups(&self) -> &[Configuration] {
        &self.groups
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn universe(&self) -> Configuration {
        self.indices.iter().map(|s| s.id).collect()
    }

    pub fn name(&self, id: IndexId) -> Option<&str> {
        self.indices.get(id.index()).map(|s| s.name.as_str())
    }

    /// The declared groups as a partition.
    pub fn true_groups(&self) -> PartitionPlan {
        PartitionPlan::new(self.groups.clone()).expect("validated groups are disjoint")
    }

    pub fn transition_table(&self) -> TransitionCostTable {
        let pairs: Vec<(f64, f64)> = self.indices.iter().map(|s| (s.create, s.drop)).collect();
        TransitionCostTable::from_pairs(&pairs).expect("validated costs")
    }

    /// Statement `position` instantiating `template`.
    pub fn statement(&self, position: usize, template: u32) -> Result<Statement> {
        let tpl = self
            .templates
            .get(template as usize)
            .ok_or_else(|| TuneError::Oracle(format!("unknown template {template}")))?;
        Ok(Statement {
            position,
            kind: tpl.kind,
            payload: template,
            relevant: self.relevant[template as usize].clone(),
        })
    }
}

impl CostOracle for SyntheticCatalog {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64> {
        let tpl = self
            .templates
            .get(stmt.payload as usize)
            .ok_or_else(|| TuneError::Oracle(format!("unknown template {}", stmt.payload)))?;
        if let Some(a) = config.max_id().filter(|a| a.index() >= self.indices.len()) {
            return Err(TuneError::UnknownIndex(a));
        }
        let mut cost = tpl.base;
        for gb in &tpl.benefits {
            cost -= gb.table[self.group_spaces[gb.group].mask_of(config) as usize];
        }
        for &(a, p) in &tpl.penalties {
            if config.contains(a) {
                cost += p;
            }
        }
        Ok(cost.max(0.0))
    }
}

/// Parameters of the phased workload generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct WorkloadSpec {
    pub phases: usize,
    pub statements_per_phase: usize,
    /// Fraction of update statements, one value per phase or a single value
    /// for all phases.
    pub update_ratio: Vec<f64>,
    /// Adjacent phases share part of their focus.
    pub overlap: bool,
    pub seed: u64,
    /// Number of indices in the catalog.
    pub universe: usize,
    /// Query and update templates drawn per phase.
    pub query_templates: usize,
    pub update_templates: usize,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            phases: 8,
            statements_per_phase: 200,
            update_ratio: vec![0.2],
            overlap: true,
            seed: 0,
            universe: 300,
            query_templates: 12,
            update_templates: 3,
        }
    }
}

impl WorkloadSpec {
    /// The desk-scale setting: 8 phases of 50 statements over 24 indices.
    pub fn desk() -> Self {
        WorkloadSpec {
            statements_per_phase: 50,
            universe: 24,
            query_templates: 6,
            update_templates: 2,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases == 0 || self.statements_per_phase == 0 {
            return Err(invalid("phases and statements per phase must be positive".into()));
        }
        if self.universe == 0 {
            return Err(invalid("the index universe must not be empty".into()));
        }
        if self.update_ratio.len() != 1 && self.update_ratio.len() != self.phases {
            return Err(invalid(format!(
                "update ratio needs 1 or {} values, got {}",
                self.phases,
                self.update_ratio.len()
            )));
        }
        if self.update_ratio.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(invalid("update ratios must lie in [0, 1]".into()));
        }
        if self.query_templates == 0 {
            return Err(invalid("at least one query template per phase is required".into()));
        }
        Ok(())
    }

    fn ratio(&self, phase: usize) -> f64 {
        if self.update_ratio.len() == 1 {
            self.update_ratio[0]
        } else {
            self.update_ratio[phase]
        }
    }
}

/// A catalog, a statement sequence over it, and the starting configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorkload {
    pub catalog: SyntheticCatalog,
    pub statements: Vec<Statement>,
    pub s0: Configuration,
}

/// On-disk form: statements are template ids in workload order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadFile {
    pub catalog: SyntheticCatalog,
    pub statements: Vec<u32>,
    #[serde(default)]
    pub s0: Configuration,
}

/// Relevant indices per template stay at or below this many so that the
/// exhaustive statistics remain cheap.
const MAX_RELEVANT: usize = 10;

impl SyntheticWorkload {
    pub fn from_templates(catalog: SyntheticCatalog, templates: &[u32], s0: Configuration) -> Result<Self> {
        if !s0.is_subset(&catalog.universe()) {
            return Err(TuneError::UnknownIndex(s0.difference(&catalog.universe()).iter().next().unwrap()));
        }
        let statements = templates
            .iter()
            .enumerate()
            .map(|(i, &t)| catalog.statement(i + 1, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticWorkload { catalog, statements, s0 })
    }

    pub fn to_file(&self) -> WorkloadFile {
        WorkloadFile {
            catalog: self.catalog.clone(),
            statements: self.statements.iter().map(|s| s.payload).collect(),
            s0: self.s0.clone(),
        }
    }

    pub fn from_file(file: WorkloadFile) -> Result<Self> {
        Self::from_templates(file.catalog, &file.statements, file.s0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_file(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    /// Generates a phased workload; identical specs give identical output.
    pub fn generate(spec: &WorkloadSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

        let indices: Vec<IndexSpec> = (0..spec.universe)
            .map(|i| IndexSpec {
                id: IndexId(i as u32),
                name: format!("ix_{i:03}"),
                create: rng.gen_range(40..=160) as f64,
                drop: rng.gen_range(0..=5) as f64,
            })
            .collect();
        let mut groups = vec![];
        let mut next = 0;
        while next < spec.universe {
            let size = [1, 1, 2, 2, 2, 3, 3, 4, 5][rng.gen_range(0..9)].min(spec.universe - next);
            groups.push((next..next + size).map(|i| IndexId(i as u32)).collect::<Configuration>());
            next += size;
        }

        // phase focus: a contiguous block of groups, plus a slice of the
        // next block when phases overlap
        let mut order: Vec<usize> = (0..groups.len()).collect();
        order.shuffle(&mut rng);
        let blocks: Vec<Vec<usize>> = (0..spec.phases)
            .map(|p| {
                let n = order.len();
                if n < spec.phases {
                    vec![order[p % n]]
                } else {
                    order[p * n / spec.phases..(p + 1) * n / spec.phases].to_vec()
                }
            })
            .collect();
        let focus: Vec<Vec<usize>> = (0..spec.phases)
            .map(|p| {
                let mut f = blocks[p].clone();
                if spec.overlap && p + 1 < spec.phases {
                    let nb = &blocks[p + 1];
                    f.extend(nb.iter().take(nb.len().div_ceil(3)).filter(|g| !blocks[p].contains(g)));
                }
                f
            })
            .collect();

        let mut templates: Vec<Template> = vec![];
        let mut pools: Vec<(Vec<u32>, Vec<u32>)> = vec![];
        for f in &focus {
            let mut queries = vec![];
            for _ in 0..spec.query_templates {
                queries.push(templates.len() as u32);
                templates.push(query_template(&mut rng, f, &groups));
            }
            let mut updates = vec![];
            for _ in 0..spec.update_templates {
                updates.push(templates.len() as u32);
                templates.push(update_template(&mut rng, f, &groups));
            }
            pools.push((queries, updates));
        }

        let mut chosen = Vec::with_capacity(spec.phases * spec.statements_per_phase);
        for (p, (queries, updates)) in pools.iter().enumerate() {
            for _ in 0..spec.statements_per_phase {
                let update = !updates.is_empty() && rng.gen_bool(spec.ratio(p));
                let pool = if update { updates } else { queries };
                chosen.push(pool[rng.gen_range(0..pool.len())]);
            }
        }
        let catalog = SyntheticCatalog::new(indices, groups, templates)?;
        Self::from_templates(catalog, &chosen, Configuration::new())
    }
}

/// Picks up to three focus groups whose combined size stays within the
/// relevance budget.
fn pick_groups<R: Rng>(rng: &mut R, focus: &[usize], groups: &[Configuration], max: usize) -> Vec<usize> {
    let mut cands = focus.to_vec();
    cands.shuffle(rng);
    let want = rng.gen_range(1..=max);
    let mut picked = vec![];
    let mut size = 0;
    for g in cands {
        if picked.len() == want {
            break;
        }
        if size + groups[g].len() <= MAX_RELEVANT {
            size += groups[g].len();
            picked.push(g);
        }
    }
    picked.sort_unstable();
    picked
}

fn query_template<R: Rng>(rng: &mut R, focus: &[usize], groups: &[Configuration]) -> Template {
    let mut benefits = vec![];
    let mut max_total = 0.0;
    for g in pick_groups(rng, focus, groups, 3) {
        let k = groups[g].len();
        // individual benefits; alternatives within a group overlap (max),
        // and some pairs gain from being used together
        let single: Vec<f64> = (0..k)
            .map(|_| if rng.gen_bool(0.6) { rng.gen_range(5..=25) as f64 } else { 0.0 })
            .collect();
        let mut bonus = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i + 1..k {
                if rng.gen_bool(0.6) {
                    bonus[i][j] = rng.gen_range(10..=40) as f64;
                }
            }
        }
        let table: Vec<f64> = (0..1usize << k)
            .map(|m| {
                let mut b: f64 = 0.0;
                for i in (0..k).filter(|i| m & (1 << i) != 0) {
                    b = b.max(single[i]);
                    for j in (i + 1..k).filter(|j| m & (1 << j) != 0) {
                        b += bonus[i][j];
                    }
                }
                b
            })
            .collect();
        max_total += table.last().unwrap();
        benefits.push(GroupBenefit { group: g, table });
    }
    Template {
        kind: StatementKind::Query,
        base: max_total + rng.gen_range(5..=20) as f64,
        benefits,
        penalties: vec![],
    }
}

fn update_template<R: Rng>(rng: &mut R, focus: &[usize], groups: &[Configuration]) -> Template {
    let mut penalties = vec![];
    for g in pick_groups(rng, focus, groups, 2) {
        for a in groups[g].iter() {
            if rng.gen_bool(0.7) {
                penalties.push((a, rng.gen_range(5..=30) as f64));
            }
        }
    }
    Template {
        kind: StatementKind::Update,
        base: rng.gen_range(30..=80) as f64,
        benefits: vec![],
        penalties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_of;
    use crate::primitives::{benefit, stable_cost_identity_error};

    /// One index `a` (create 20, drop 0) and the three example statements.
    fn example() -> SyntheticCatalog {
        let indices = vec![IndexSpec {
            id: IndexId(0),
            name: "a".into(),
            create: 20.0,
            drop: 0.0,
        }];
        let q = |base: f64, gain: f64| Template {
            kind: StatementKind::Query,
            base,
            benefits: vec![GroupBenefit { group: 0, table: vec![0.0, gain] }],
            penalties: vec![],
        };
        let upd = Template {
            kind: StatementKind::Update,
            base: 15.0,
            benefits: vec![],
            penalties: vec![(IndexId(0), 5.0)],
        };
        SyntheticCatalog::new(indices, vec![config_of(&[0])], vec![q(15.0, 10.0), q(20.0, 18.0), upd]).unwrap()
    }

    #[test]
    fn example_costs() {
        let c = example();
        let a = config_of(&[0]);
        let e = Configuration::new();
        let costs: Vec<(f64, f64)> = (0..3)
            .map(|t| {
                let s = c.statement(t + 1, t as u32).unwrap();
                (c.what_if_cost(&s, &e).unwrap(), c.what_if_cost(&s, &a).unwrap())
            })
            .collect();
        assert_eq!(costs, vec![(15.0, 5.0), (20.0, 2.0), (15.0, 20.0)]);
        let q1 = c.statement(1, 0).unwrap();
        assert_eq!(benefit(&q1, &a, &e, &c).unwrap(), 10.0);
    }

    #[test]
    fn update_penalty_makes_benefit_negative() {
        let indices = vec![IndexSpec { id: IndexId(0), name: "a".into(), create: 1.0, drop: 1.0 }];
        let upd = Template {
            kind: StatementKind::Update,
            base: 10.0,
            benefits: vec![],
            penalties: vec![(IndexId(0), 3.0)],
        };
        let c = SyntheticCatalog::new(indices, vec![config_of(&[0])], vec![upd]).unwrap();
        let u = c.statement(1, 0).unwrap();
        assert_eq!(u.relevant, config_of(&[0]));
        assert_eq!(benefit(&u, &config_of(&[0]), &Configuration::new(), &c).unwrap(), -3.0);
    }

    #[test]
    fn validation_rejects_bad_catalogs() {
        let idx = |i: u32| IndexSpec { id: IndexId(i), name: format!("i{i}"), create: 1.0, drop: 1.0 };
        // index 1 has no group
        assert!(SyntheticCatalog::new(vec![idx(0), idx(1)], vec![config_of(&[0])], vec![]).is_err());
        // non-monotone table
        let t = Template {
            kind: StatementKind::Query,
            base: 100.0,
            benefits: vec![GroupBenefit { group: 0, table: vec![0.0, 5.0, 5.0, 4.0] }],
            penalties: vec![],
        };
        assert!(SyntheticCatalog::new(vec![idx(0), idx(1)], vec![config_of(&[0, 1])], vec![t.clone()]).is_err());
        // base too small
        let mut t2 = t;
        t2.benefits[0].table = vec![0.0, 5.0, 5.0, 6.0];
        t2.base = 6.0;
        assert!(SyntheticCatalog::new(vec![idx(0), idx(1)], vec![config_of(&[0, 1])], vec![t2]).is_err());
    }

    #[test]
    fn generator_shape_and_determinism() {
        let spec = WorkloadSpec { phases: 8, statements_per_phase: 200, ..Default::default() };
        let a = SyntheticWorkload::generate(&spec).unwrap();
        let b = SyntheticWorkload::generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.statements.len(), 1600);
        let touched = a
            .statements
            .iter()
            .fold(Configuration::new(), |acc, s| acc.union(&s.relevant));
        assert!(touched.len() >= 200 && touched.len() <= 300, "{}", touched.len());
        assert!(a.statements.iter().all(|s| s.relevant.len() <= MAX_RELEVANT));

        let none = WorkloadSpec { update_ratio: vec![0.0], ..WorkloadSpec::desk() };
        let w = SyntheticWorkload::generate(&none).unwrap();
        assert!(w.statements.iter().all(|s| s.kind == StatementKind::Query));
    }

    #[test]
    fn generated_costs_decompose_over_groups() {
        let w = SyntheticWorkload::generate(&WorkloadSpec::desk()).unwrap();
        let plan = w.catalog.true_groups();
        let universe = w.catalog.universe();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in w.statements.iter().take(60) {
            for _ in 0..10 {
                let x: Configuration = universe.iter().filter(|_| rng.gen_bool(0.4)).collect();
                assert_eq!(stable_cost_identity_error(q, &x, &plan, &w.catalog).unwrap(), 0.0);
                let c = w.catalog.what_if_cost(q, &x).unwrap();
                assert!(c > 0.0 && c.is_finite());
                assert_eq!(c, w.catalog.what_if_cost(q, &x.intersection(&q.relevant)).unwrap());
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let w = SyntheticWorkload::generate(&WorkloadSpec { phases: 2, statements_per_phase: 5, ..WorkloadSpec::desk() })
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        w.save(&path).unwrap();
        assert_eq!(SyntheticWorkload::load(&path).unwrap(), w);
    }

    #[test]
    fn unknown_index_in_configuration() {
        let c = example();
        let q = c.statement(1, 0).unwrap();
        assert_eq!(c.what_if_cost(&q, &config_of(&[3])), Err(TuneError::UnknownIndex(IndexId(3))));
    }
}
