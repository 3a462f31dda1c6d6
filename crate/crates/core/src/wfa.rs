//! The work function algorithm over a single candidate set.
//!
//! Work-function values are kept for every subset of the candidates, indexed
//! by local bitmask. The recurrence `w'[S] = min_X w[X] + cost(q,X) + δ(X,S)`
//! is evaluated with a per-bit relaxation: δ is a sum of independent per-index
//! terms, so the min-plus product factorizes into one pass per candidate and
//! costs O(k·2^k) instead of O(4^k).

use std::cmp::Ordering;

use crate::config::{lex_cmp_mask, Configuration, LocalSpace};
use crate::cost::{CostOracle, LocalTransitions, Statement, StatementCosts, TransitionCostTable};
use crate::error::{Result, TuneError};

/// Largest candidate set a single instance accepts (2^12 states).
pub const MAX_PART_SIZE: usize = 12;

/// Work-function state of one instance: `w[S]` for all `S ⊆ C` and the
/// current recommendation.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkFunction {
    space: LocalSpace,
    trans: LocalTransitions,
    w: Vec<f64>,
    rec: u32,
}

impl WorkFunction {
    /// `w[S] = δ(S0, S)` and `currRec = S0`.
    pub fn new(
        candidates: &Configuration,
        s0: &Configuration,
        table: &TransitionCostTable,
    ) -> Result<Self> {
        if !s0.is_subset(candidates) {
            return Err(TuneError::Precondition(format!(
                "initial configuration {:?} is not within the candidates",
                s0.difference(candidates)
            )));
        }
        let space = Self::checked_space(candidates)?;
        let trans = table.local(&space)?;
        let start = space.mask_of(s0);
        let w = (0..space.size() as u32)
            .map(|s| trans.delta(start, s))
            .collect();
        Ok(WorkFunction {
            space,
            trans,
            w,
            rec: start,
        })
    }

    /// Builds an instance from explicit values, as repartitioning does.
    pub fn from_values(
        candidates: &Configuration,
        table: &TransitionCostTable,
        w: Vec<f64>,
        rec: &Configuration,
    ) -> Result<Self> {
        let space = Self::checked_space(candidates)?;
        if w.len() != space.size() {
            return Err(TuneError::Precondition(format!(
                "{} work-function values for {} states",
                w.len(),
                space.size()
            )));
        }
        if !rec.is_subset(candidates) {
            return Err(TuneError::Precondition(
                "recommendation outside the candidates".into(),
            ));
        }
        let trans = table.local(&space)?;
        let rec = space.mask_of(rec);
        Ok(WorkFunction { space, trans, w, rec })
    }

    fn checked_space(candidates: &Configuration) -> Result<LocalSpace> {
        if candidates.len() > MAX_PART_SIZE {
            return Err(TuneError::Capacity {
                size: candidates.len(),
                cap: MAX_PART_SIZE,
            });
        }
        Ok(LocalSpace::new(candidates))
    }

    pub fn space(&self) -> &LocalSpace {
        &self.space
    }

    pub fn candidates(&self) -> Configuration {
        self.space.as_configuration()
    }

    pub fn transitions(&self) -> &LocalTransitions {
        &self.trans
    }

    /// Work-function values indexed by local mask.
    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// `w[S ∩ C]`.
    pub fn value(&self, s: &Configuration) -> f64 {
        self.w[self.space.mask_of(s) as usize]
    }

    pub fn recommendation_mask(&self) -> u32 {
        self.rec
    }

    pub fn recommend(&self) -> Configuration {
        self.space.config_of(self.rec)
    }

    /// Processes one statement given its cost for every local mask.
    /// Returns the scores `w'[S] + δ(S, previous currRec)` of the states
    /// that were eligible (`S ∈ p[S]`); ineligible states score `+∞`.
    pub fn analyze_costs(&mut self, costs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(costs.len(), self.w.len());
        let before: Vec<f64> = self.w.iter().zip(costs).map(|(w, c)| w + c).collect();
        let mut next = before.clone();
        for bit in 0..self.trans.bits() {
            let b = 1usize << bit;
            let (create, drop) = (self.trans.create[bit], self.trans.drop[bit]);
            for lo in 0..next.len() {
                if lo & b != 0 {
                    continue;
                }
                let (without, with) = (next[lo], next[lo | b]);
                next[lo] = without.min(with + drop);
                next[lo | b] = with.min(without + create);
            }
        }
        let prev = self.rec;
        let mut scores = vec![f64::INFINITY; next.len()];
        let mut best: Option<u32> = None;
        for s in 0..next.len() {
            // S ∈ p[S]: staying at S already attains the minimum
            if next[s] != before[s] {
                continue;
            }
            let score = next[s] + self.trans.delta(s as u32, prev);
            scores[s] = score;
            best = match best {
                None => Some(s as u32),
                Some(b) => {
                    let bs = scores[b as usize];
                    if score < bs || (score == bs && lex_cmp_mask(s as u32, b) == Ordering::Less) {
                        Some(s as u32)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        self.w = next;
        self.rec = best.expect("the minimum of w' is always attained by a state in its own p-set");
        scores
    }

    /// Fetches the statement's costs through `costs` and processes it.
    pub fn analyze_statement(&mut self, costs: &StatementCosts<'_>) -> Result<Vec<f64>> {
        let table = costs.table(&self.space)?;
        Ok(self.analyze_costs(&table))
    }

    pub fn analyze_query(&mut self, q: &Statement, oracle: &dyn CostOracle) -> Result<Configuration> {
        self.analyze_statement(&StatementCosts::new(q, oracle))?;
        Ok(self.recommend())
    }

    /// Forces the recommendation to agree with the votes and raises work
    /// values so that every state's score clears the reconsideration
    /// threshold `δ(S, S_cons) + δ(S_cons, S)`.
    ///
    /// `plus` and `minus` are local masks and must be disjoint.
    pub fn apply_feedback(&mut self, plus: u32, minus: u32) {
        debug_assert_eq!(plus & minus, 0);
        self.rec = (self.rec & !minus) | plus;
        let rec = self.rec;
        let w_rec = self.w[rec as usize];
        for s in 0..self.w.len() as u32 {
            let cons = (s & !minus) | plus;
            let min_diff = self.trans.delta(s, cons) + self.trans.delta(cons, s);
            let diff = self.w[s as usize] + self.trans.delta(s, rec) - w_rec;
            if diff < min_diff {
                self.w[s as usize] += min_diff - diff;
            }
        }
    }
}
