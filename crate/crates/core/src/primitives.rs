//! Exact primitive computations shared by every algorithm: benefit, degree
//! of interaction, total work and stable partitions.

use serde::{Deserialize, Serialize};

use crate::config::{Configuration, IndexId, LocalSpace};
use crate::cost::{CostOracle, Statement, StatementCosts, TransitionCostTable};
use crate::error::{Result, TuneError};

/// Default bound on the number of relevant indices enumerated exhaustively
/// when computing benefits and interactions.
pub const DOI_ENUMERATION_CAP: usize = 14;

/// `cost(q, X) − cost(q, Y ∪ X)`; negative when `Y` only adds maintenance.
pub fn benefit(
    q: &Statement,
    y: &Configuration,
    x: &Configuration,
    oracle: &dyn CostOracle,
) -> Result<f64> {
    if !x.is_disjoint(y) {
        return Err(TuneError::Precondition(format!(
            "benefit requires disjoint sets, both contain {:?}",
            x.intersection(y)
        )));
    }
    let costs = StatementCosts::new(q, oracle);
    Ok(costs.cost(x)? - costs.cost(&x.union(y))?)
}

/// Exhaustive cost table of one statement over the subsets of a small
/// index space, from which maximum benefits and interaction degrees fall
/// out by enumeration.
pub struct SubsetCostTable {
    space: LocalSpace,
    costs: Vec<f64>,
}

impl SubsetCostTable {
    pub fn build(costs: &StatementCosts<'_>, space: LocalSpace, cap: usize) -> Result<Self> {
        if space.len() > cap {
            return Err(TuneError::EnumerationLimit {
                size: space.len(),
                cap,
            });
        }
        let table = costs.table(&space)?;
        Ok(SubsetCostTable {
            space,
            costs: table,
        })
    }

    pub fn space(&self) -> &LocalSpace {
        &self.space
    }

    pub fn cost(&self, mask: u32) -> f64 {
        self.costs[mask as usize]
    }

    /// `max_{X ⊆ space − {a}} benefit_q({a}, X)` for the member at bit `i`.
    pub fn max_benefit(&self, i: usize) -> f64 {
        let bit = 1u32 << i;
        (0..self.costs.len() as u32)
            .filter(|x| x & bit == 0)
            .map(|x| self.cost(x) - self.cost(x | bit))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Degree of interaction between the members at bits `i` and `j`.
    pub fn doi(&self, i: usize, j: usize) -> f64 {
        let (bi, bj) = (1u32 << i, 1u32 << j);
        (0..self.costs.len() as u32)
            .filter(|x| x & (bi | bj) == 0)
            .map(|x| {
                let with_a = self.cost(x) - self.cost(x | bi);
                let with_ab = self.cost(x | bj) - self.cost(x | bi | bj);
                (with_a - with_ab).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `doi_q(a, b)`: the largest change in the benefit of `a` caused by `b`,
/// over all contexts `X ⊆ J − {a, b}`.
///
/// The enumeration is restricted to `J ∩ q.relevant` since the cost cannot
/// depend on anything else; more than `cap` such indices is an error and
/// the caller must shrink `J`.
pub fn degree_of_interaction(
    q: &Statement,
    a: IndexId,
    b: IndexId,
    j: &Configuration,
    oracle: &dyn CostOracle,
    cap: usize,
) -> Result<f64> {
    if a == b {
        return Err(TuneError::Precondition("doi needs two distinct indices".into()));
    }
    if !j.contains(a) || !j.contains(b) {
        return Err(TuneError::Precondition(format!(
            "doi arguments {a} and {b} must belong to J"
        )));
    }
    let space = LocalSpace::new(&j.intersection(&q.relevant));
    if space.len() > cap {
        return Err(TuneError::EnumerationLimit {
            size: space.len(),
            cap,
        });
    }
    let (Some(i), Some(k)) = (space.position(a), space.position(b)) else {
        return Ok(0.0);
    };
    let costs = StatementCosts::new(q, oracle);
    Ok(SubsetCostTable::build(&costs, space, cap)?.doi(i, k))
}

/// Initial configuration plus the configuration adopted for each statement.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecommendationSchedule {
    pub initial: Configuration,
    pub steps: Vec<Configuration>,
}

impl RecommendationSchedule {
    pub fn new(initial: Configuration) -> Self {
        RecommendationSchedule {
            initial,
            steps: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `S_n` for `n` in `0..=len`.
    pub fn at(&self, n: usize) -> &Configuration {
        if n == 0 {
            &self.initial
        } else {
            &self.steps[n - 1]
        }
    }
}

/// Query cost plus transition cost along `schedule`.
pub fn total_work(
    schedule: &RecommendationSchedule,
    workload: &[Statement],
    oracle: &dyn CostOracle,
    table: &TransitionCostTable,
) -> Result<f64> {
    if schedule.len() != workload.len() {
        return Err(TuneError::Precondition(format!(
            "schedule has {} steps for {} statements",
            schedule.len(),
            workload.len()
        )));
    }
    let mut total = 0.0;
    let mut prev = &schedule.initial;
    for (q, s) in workload.iter().zip(&schedule.steps) {
        total += oracle.what_if_cost(q, &s.intersection(&q.relevant))? + table.transition(prev, s)?;
        prev = s;
    }
    Ok(total)
}

/// A disjoint family of index sets, kept in canonical order (parts sorted by
/// smallest member) so that equal partitions compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Configuration>", into = "Vec<Configuration>")]
pub struct PartitionPlan {
    parts: Vec<Configuration>,
}

impl PartitionPlan {
    /// Validates disjointness; empty parts are dropped.
    pub fn new(parts: Vec<Configuration>) -> Result<Self> {
        let mut seen = Configuration::new();
        let mut kept = Vec::with_capacity(parts.len());
        for p in parts {
            if p.is_empty() {
                continue;
            }
            if !p.is_disjoint(&seen) {
                return Err(TuneError::Precondition(format!(
                    "partition parts overlap on {:?}",
                    p.intersection(&seen)
                )));
            }
            seen = seen.union(&p);
            kept.push(p);
        }
        kept.sort_by_key(|p| p.iter().next());
        Ok(PartitionPlan { parts: kept })
    }

    pub fn singletons(set: &Configuration) -> Self {
        PartitionPlan {
            parts: set.iter().map(Configuration::singleton).collect(),
        }
    }

    pub fn parts(&self) -> &[Configuration] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn union(&self) -> Configuration {
        self.parts
            .iter()
            .fold(Configuration::new(), |acc, p| acc.union(p))
    }

    /// `Σ_k 2^|P_k|`, the number of work-function entries tracked.
    pub fn state_count(&self) -> usize {
        self.parts.iter().map(|p| 1usize << p.len()).sum()
    }

    pub fn max_part_size(&self) -> usize {
        self.parts.iter().map(|p| p.len()).max().unwrap_or(0)
    }

    pub fn part_of(&self, id: IndexId) -> Option<usize> {
        self.parts.iter().position(|p| p.contains(id))
    }

    /// True when every part of `self` lies inside some part of `coarser`.
    pub fn refines(&self, coarser: &PartitionPlan) -> bool {
        self.parts
            .iter()
            .all(|p| coarser.parts.iter().any(|c| p.is_subset(c)))
    }

    /// The partition induced on `set`: each part intersected with it.
    pub fn restrict(&self, set: &Configuration) -> PartitionPlan {
        PartitionPlan {
            parts: self
                .parts
                .iter()
                .map(|p| p.intersection(set))
                .filter(|p| !p.is_empty())
                .collect(),
        }
    }
}

impl TryFrom<Vec<Configuration>> for PartitionPlan {
    type Error = TuneError;
    fn try_from(v: Vec<Configuration>) -> Result<Self> {
        PartitionPlan::new(v)
    }
}

impl From<PartitionPlan> for Vec<Configuration> {
    fn from(p: PartitionPlan) -> Self {
        p.parts
    }
}

/// Connected components of the interaction graph over `j`.
pub fn minimal_stable_partition(
    j: &Configuration,
    interacts: impl Fn(IndexId, IndexId) -> bool,
) -> PartitionPlan {
    let members = j.to_vec();
    let mut parent: Vec<usize> = (0..members.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..members.len() {
        for k in i + 1..members.len() {
            if interacts(members[i], members[k]) {
                let (ri, rk) = (find(&mut parent, i), find(&mut parent, k));
                if ri != rk {
                    parent[ri.max(rk)] = ri.min(rk);
                }
            }
        }
    }
    let mut parts: Vec<Configuration> = vec![Configuration::new(); members.len()];
    for (i, &id) in members.iter().enumerate() {
        let r = find(&mut parent, i);
        parts[r].insert(id);
    }
    PartitionPlan::new(parts).expect("components are disjoint")
}

/// Deviation of `cost(q, X)` from the additive decomposition over `plan`.
/// Zero whenever the plan is stable for `q`.
pub fn stable_cost_identity_error(
    q: &Statement,
    x: &Configuration,
    plan: &PartitionPlan,
    oracle: &dyn CostOracle,
) -> Result<f64> {
    let costs = StatementCosts::new(q, oracle);
    let empty = costs.cost(&Configuration::new())?;
    let mut decomposed = empty;
    for part in plan.parts() {
        decomposed -= empty - costs.cost(&x.intersection(part))?;
    }
    Ok((costs.cost(x)? - decomposed).abs())
}
