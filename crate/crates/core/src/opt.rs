//! The offline optimum: minimum total work over a candidate space and one
//! schedule attaining it, plus the prescient feedback streams derived from
//! that schedule.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::{lex_cmp_mask, Configuration, LocalSpace};
use crate::cost::{CostOracle, Statement, StatementCosts, TransitionCostTable};
use crate::error::{Result, TuneError};
use crate::primitives::{PartitionPlan, RecommendationSchedule};
use crate::wfa::MAX_PART_SIZE;
use crate::wfit::FeedbackEvent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    /// Optimal total work of every prefix; `per_prefix[0] = 0`.
    pub per_prefix: Vec<f64>,
    /// A schedule attaining `per_prefix[N]`.
    pub schedule: RecommendationSchedule,
}

impl OptResult {
    pub fn total(&self) -> f64 {
        *self.per_prefix.last().unwrap_or(&0.0)
    }
}

/// Forward pass over one candidate space. `d[n][X]` is the cheapest way to
/// process `q_1..q_{n+1}` ending with `q_{n+1}` served in `X`.
struct Pass {
    space: LocalSpace,
    d: Vec<Vec<f64>>,
}

fn forward(
    workload: &[StatementCosts<'_>],
    part: &Configuration,
    s0: &Configuration,
    table: &TransitionCostTable,
) -> Result<Pass> {
    if part.len() > MAX_PART_SIZE {
        return Err(TuneError::Capacity {
            size: part.len(),
            cap: MAX_PART_SIZE,
        });
    }
    let space = LocalSpace::new(part);
    let trans = table.local(&space)?;
    let start = space.mask_of(s0);
    let mut w: Vec<f64> = (0..space.size() as u32).map(|s| trans.delta(start, s)).collect();
    let mut d = Vec::with_capacity(workload.len());
    for costs in workload {
        let served: Vec<f64> = costs
            .table(&space)?
            .iter()
            .zip(&w)
            .map(|(c, w)| c + w)
            .collect();
        // w_n(S) = min_X served[X] + δ(X, S), one candidate at a time
        let mut next = served.clone();
        for bit in 0..space.len() {
            let b = 1usize << bit;
            let (create, drop) = (trans.create[bit], trans.drop[bit]);
            for lo in (0..next.len()).filter(|m| m & b == 0) {
                let (without, with) = (next[lo], next[lo | b]);
                next[lo] = without.min(with + drop);
                next[lo | b] = with.min(without + create);
            }
        }
        d.push(served);
        w = next;
    }
    Ok(Pass { space, d })
}

fn lex_argmin(values: impl Iterator<Item = (u32, f64)>) -> u32 {
    let mut best: Option<(u32, f64)> = None;
    for (m, v) in values {
        best = match best {
            Some((bm, bv)) if v > bv || (v == bv && lex_cmp_mask(m, bm) != Ordering::Less) => {
                Some((bm, bv))
            }
            _ => Some((m, v)),
        };
    }
    best.map_or(0, |b| b.0)
}

impl Pass {
    fn per_prefix(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(
                self.d
                    .iter()
                    .map(|row| row.iter().cloned().fold(f64::INFINITY, f64::min)),
            )
            .collect()
    }

    fn schedule(&self, table: &TransitionCostTable) -> Result<Vec<Configuration>> {
        let trans = table.local(&self.space)?;
        let n = self.d.len();
        let mut masks = vec![0u32; n];
        if n == 0 {
            return Ok(vec![]);
        }
        masks[n - 1] = lex_argmin(self.d[n - 1].iter().enumerate().map(|(m, &v)| (m as u32, v)));
        for i in (0..n - 1).rev() {
            let to = masks[i + 1];
            masks[i] = lex_argmin(
                self.d[i]
                    .iter()
                    .enumerate()
                    .map(|(m, &v)| (m as u32, v + trans.delta(m as u32, to))),
            );
        }
        Ok(masks.into_iter().map(|m| self.space.config_of(m)).collect())
    }
}

/// Optimal total work for every prefix over the subsets of `candidates`.
pub fn optimal_total_work(
    workload: &[Statement],
    candidates: &Configuration,
    s0: &Configuration,
    oracle: &dyn CostOracle,
    table: &TransitionCostTable,
) -> Result<Vec<f64>> {
    Ok(optimal_schedule(workload, candidates, s0, oracle, table)?.per_prefix)
}

/// Optimal total work and a lexicographically tie-broken optimal schedule.
pub fn optimal_schedule(
    workload: &[Statement],
    candidates: &Configuration,
    s0: &Configuration,
    oracle: &dyn CostOracle,
    table: &TransitionCostTable,
) -> Result<OptResult> {
    let plan = PartitionPlan::new(vec![candidates.clone()])?;
    optimal_schedule_partitioned(workload, &plan, s0, oracle, table)
}

/// Optimum over the subsets of `∪ plan` when `plan` is stable for every
/// statement: the parts are solved independently and recombined as
/// `Σ_k OPT_k − (K−1)·Σ_i cost(q_i, ∅)`.
pub fn optimal_schedule_partitioned(
    workload: &[Statement],
    plan: &PartitionPlan,
    s0: &Configuration,
    oracle: &dyn CostOracle,
    table: &TransitionCostTable,
) -> Result<OptResult> {
    let costs: Vec<StatementCosts<'_>> = workload.iter().map(|q| StatementCosts::new(q, oracle)).collect();
    let candidates = plan.union();
    if !s0.is_subset(&candidates) {
        return Err(TuneError::Precondition(format!(
            "initial configuration leaves {:?} outside the candidates",
            s0.difference(&candidates)
        )));
    }
    let mut per_prefix = vec![0.0; workload.len() + 1];
    let mut steps = vec![Configuration::new(); workload.len()];
    let parts: Vec<Configuration> = if plan.is_empty() {
        vec![Configuration::new()]
    } else {
        plan.parts().to_vec()
    };
    for part in &parts {
        let pass = forward(&costs, part, &s0.intersection(part), table)?;
        for (acc, v) in per_prefix.iter_mut().zip(pass.per_prefix()) {
            *acc += v;
        }
        for (acc, s) in steps.iter_mut().zip(pass.schedule(table)?) {
            *acc = acc.union(&s);
        }
    }
    let extra = parts.len() as f64 - 1.0;
    if extra > 0.0 {
        let mut empty_sum = 0.0;
        for (n, c) in costs.iter().enumerate() {
            empty_sum += c.cost(&Configuration::new())?;
            per_prefix[n + 1] -= extra * empty_sum;
        }
    }
    Ok(OptResult {
        per_prefix,
        schedule: RecommendationSchedule {
            initial: s0.clone(),
            steps,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Good,
    Bad,
}

/// Votes of a DBA who knows the optimal schedule: whenever it changes for
/// statement `n`, an event placed after `q_n` endorses the change (or, for
/// the bad polarity, opposes it).
pub fn synthesize_feedback(schedule: &RecommendationSchedule, polarity: Polarity) -> Vec<FeedbackEvent> {
    let mut events = vec![];
    for n in 1..=schedule.len() {
        let (prev, cur) = (schedule.at(n - 1), schedule.at(n));
        if prev == cur {
            continue;
        }
        let (created, dropped) = (cur.difference(prev), prev.difference(cur));
        let (positive, negative) = match polarity {
            Polarity::Good => (created, dropped),
            Polarity::Bad => (dropped, created),
        };
        events.push(FeedbackEvent {
            positive,
            negative,
            after_statement: n,
            seq: 0,
        });
    }
    events
}
