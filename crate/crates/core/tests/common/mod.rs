//! Independent reference implementations and fixture generators shared by
//! the integration tests. Nothing here reuses the engine's algorithms.

#![allow(dead_code)]

use rand::Rng;
use wftune_core::config::{Configuration, IndexId, LocalSpace};
use wftune_core::cost::{CostOracle, Statement, StatementKind, TransitionCostTable};
use wftune_core::synthetic::{GroupBenefit, IndexSpec, SyntheticCatalog, Template};
use wftune_core::Result;

pub fn ids(n: usize) -> Configuration {
    (0..n as u32).map(IndexId).collect()
}

/// All subsets of `c`, in local-mask order.
pub fn subsets(c: &Configuration) -> Vec<Configuration> {
    let space = LocalSpace::new(c);
    (0..space.size() as u32).map(|m| space.config_of(m)).collect()
}

/// Lexicographic preference: `a` before `b` iff the smallest index in
/// their symmetric difference belongs to `a`.
pub fn lex_prefers(a: &Configuration, b: &Configuration) -> bool {
    match a.symmetric_difference(b).iter().next() {
        Some(x) => a.contains(x),
        None => false,
    }
}

/// Cost per statement position and configuration, stored explicitly.
pub struct ExplicitOracle {
    pub space: LocalSpace,
    /// `costs[payload][mask]`
    pub costs: Vec<Vec<f64>>,
}

impl CostOracle for ExplicitOracle {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64> {
        Ok(self.costs[stmt.payload as usize][self.space.mask_of(config) as usize])
    }
}

impl ExplicitOracle {
    pub fn workload(&self) -> Vec<Statement> {
        (0..self.costs.len())
            .map(|i| Statement {
                position: i + 1,
                kind: StatementKind::Query,
                payload: i as u32,
                relevant: self.space.as_configuration(),
            })
            .collect()
    }
}

/// Costs that decompose over `groups`: `base + Σ_k f_k[X ∩ G_k]` with
/// arbitrary integer `f_k` (zero at ∅).
pub struct GroupedOracle {
    pub groups: Vec<LocalSpace>,
    pub base: Vec<f64>,
    /// `f[stmt][group][mask]`
    pub f: Vec<Vec<Vec<f64>>>,
}

impl CostOracle for GroupedOracle {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64> {
        let i = stmt.payload as usize;
        let mut c = self.base[i];
        for (k, g) in self.groups.iter().enumerate() {
            c += self.f[i][k][g.mask_of(config) as usize];
        }
        Ok(c)
    }
}

impl GroupedOracle {
    pub fn random<R: Rng>(rng: &mut R, groups: &[Configuration], n: usize) -> Self {
        let spaces: Vec<LocalSpace> = groups.iter().map(LocalSpace::new).collect();
        let mut base = vec![];
        let mut f = vec![];
        for _ in 0..n {
            let mut per = vec![];
            let mut floor = 0.0;
            for g in &spaces {
                let mut t: Vec<f64> = (0..g.size()).map(|_| rng.gen_range(-30..=10) as f64).collect();
                t[0] = 0.0;
                floor += -t.iter().cloned().fold(0.0, f64::min);
                per.push(t);
            }
            base.push(floor + rng.gen_range(0..=20) as f64);
            f.push(per);
        }
        GroupedOracle { groups: spaces, base, f }
    }

    pub fn workload(&self) -> Vec<Statement> {
        let all = self
            .groups
            .iter()
            .fold(Configuration::new(), |acc, g| acc.union(&g.as_configuration()));
        (0..self.base.len())
            .map(|i| Statement {
                position: i + 1,
                kind: StatementKind::Query,
                payload: i as u32,
                relevant: all.clone(),
            })
            .collect()
    }
}

/// Splits `0..n` into `k` nonempty contiguous-free random groups.
pub fn random_groups<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<Configuration> {
    assert!(k >= 1 && k <= n);
    let mut groups = vec![Configuration::new(); k];
    let mut order: Vec<u32> = (0..n as u32).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    for (i, &a) in order.iter().enumerate() {
        let g = if i < k { i } else { rng.gen_range(0..k) };
        groups[g].insert(IndexId(a));
    }
    groups
}

pub fn random_table<R: Rng>(rng: &mut R, n: usize) -> TransitionCostTable {
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0..=30) as f64, rng.gen_range(0..=10) as f64))
        .collect();
    TransitionCostTable::from_pairs(&pairs).unwrap()
}

pub fn random_subset<R: Rng>(rng: &mut R, c: &Configuration) -> Configuration {
    c.iter().filter(|_| rng.gen_bool(0.5)).collect()
}

/// Straight-line work function algorithm over explicit configurations:
/// direct minimum over all predecessor states, p-sets by exact comparison,
/// score ties broken lexicographically.
pub struct ReferenceWfa {
    pub states: Vec<Configuration>,
    /// `delta[x][s]`, from state `x` to state `s`.
    pub delta: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub rec: usize,
}

impl ReferenceWfa {
    pub fn new(c: &Configuration, s0: &Configuration, table: &TransitionCostTable) -> Self {
        let states = subsets(c);
        let delta: Vec<Vec<f64>> = states
            .iter()
            .map(|a| states.iter().map(|b| table.transition(a, b).unwrap()).collect())
            .collect();
        let start = states.iter().position(|s| s == s0).expect("s0 within candidates");
        let w = delta[start].clone();
        ReferenceWfa {
            states,
            delta,
            w,
            rec: start,
        }
    }

    pub fn value(&self, s: &Configuration) -> f64 {
        self.w[self.states.iter().position(|x| x == s).unwrap()]
    }

    pub fn recommendation(&self) -> &Configuration {
        &self.states[self.rec]
    }

    pub fn step(&mut self, q: &Statement, oracle: &dyn CostOracle) -> Configuration {
        let cost: Vec<f64> = self
            .states
            .iter()
            .map(|s| oracle.what_if_cost(q, s).unwrap())
            .collect();
        self.step_costs(&cost)
    }

    pub fn step_costs(&mut self, cost: &[f64]) -> Configuration {
        let k = self.states.len();
        let mut next = vec![0.0; k];
        let mut in_p = vec![false; k];
        for s in 0..k {
            let mut best = f64::INFINITY;
            for x in 0..k {
                best = best.min(self.w[x] + cost[x] + self.delta[x][s]);
            }
            in_p[s] = best == self.w[s] + cost[s];
            next[s] = best;
        }
        let mut choice: Option<(usize, f64)> = None;
        for s in 0..k {
            if !in_p[s] {
                continue;
            }
            let score = next[s] + self.delta[s][self.rec];
            let better = match choice {
                None => true,
                Some((c, v)) => score < v || (score == v && lex_prefers(&self.states[s], &self.states[c])),
            };
            if better {
                choice = Some((s, score));
            }
        }
        self.w = next;
        self.rec = choice.expect("some state is in its own p-set").0;
        self.states[self.rec].clone()
    }
}

/// Minimum total work by enumerating every schedule (depth-first, with the
/// prefix sum carried along).
pub fn brute_force_opt(
    workload: &[Statement],
    c: &Configuration,
    s0: &Configuration,
    oracle: &dyn CostOracle,
    table: &TransitionCostTable,
) -> f64 {
    let states = subsets(c);
    let cost: Vec<Vec<f64>> = workload
        .iter()
        .map(|q| states.iter().map(|s| oracle.what_if_cost(q, s).unwrap()).collect())
        .collect();
    let delta: Vec<Vec<f64>> = states
        .iter()
        .map(|a| states.iter().map(|b| table.transition(a, b).unwrap()).collect())
        .collect();
    let start = states.iter().position(|s| s == s0).unwrap();
    fn go(n: usize, at: usize, acc: f64, cost: &[Vec<f64>], delta: &[Vec<f64>], best: &mut f64) {
        if n == cost.len() {
            *best = best.min(acc);
            return;
        }
        for s in 0..delta.len() {
            go(n + 1, s, acc + delta[at][s] + cost[n][s], cost, delta, best);
        }
    }
    let mut best = f64::INFINITY;
    go(0, start, 0.0, &cost, &delta, &mut best);
    if workload.is_empty() {
        0.0
    } else {
        best
    }
}

/// The three-statement single-index example: create 20, drop 0; costs
/// (15, 5), (20, 2), (15, 20) without and with the index.
pub fn example_catalog() -> SyntheticCatalog {
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
    SyntheticCatalog::new(
        indices,
        vec![wftune_core::config_of(&[0])],
        vec![q(15.0, 10.0), q(20.0, 18.0), upd],
    )
    .unwrap()
}
