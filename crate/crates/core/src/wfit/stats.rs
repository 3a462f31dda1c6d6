//! Recency-weighted benefit and interaction statistics.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::config::{Configuration, IndexId, LocalSpace};
use crate::cost::StatementCosts;
use crate::error::Result;
use crate::primitives::SubsetCostTable;

/// The most recent `(n, value)` observations with `value > 0`, newest first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatRing {
    entries: VecDeque<(usize, f64)>,
}

impl StatRing {
    /// Records an observation; non-positive values are ignored and the
    /// oldest entry is evicted beyond `cap`.
    pub fn push(&mut self, n: usize, value: f64, cap: usize) {
        if value <= 0.0 || cap == 0 {
            return;
        }
        debug_assert!(self.entries.front().is_none_or(|&(m, _)| m < n));
        self.entries.push_front((n, value));
        self.entries.truncate(cap);
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `max_ℓ (v_1 + … + v_ℓ) / (N − n_ℓ + 1)`, or 0 without entries.
    pub fn windowed(&self, now: usize) -> f64 {
        let mut sum = 0.0;
        let mut best: f64 = 0.0;
        for &(n, v) in &self.entries {
            sum += v;
            best = best.max(sum / (now + 1 - n) as f64);
        }
        best
    }
}

/// Per-index and per-pair observation histories.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TuningStats {
    hist_size: usize,
    benefits: BTreeMap<IndexId, StatRing>,
    interactions: BTreeMap<(IndexId, IndexId), StatRing>,
}

fn ordered(a: IndexId, b: IndexId) -> (IndexId, IndexId) {
    (a.min(b), a.max(b))
}

impl TuningStats {
    pub fn new(hist_size: usize) -> Self {
        TuningStats {
            hist_size,
            ..Default::default()
        }
    }

    pub fn benefit_ring(&self, a: IndexId) -> Option<&StatRing> {
        self.benefits.get(&a)
    }

    pub fn interaction_ring(&self, a: IndexId, b: IndexId) -> Option<&StatRing> {
        self.interactions.get(&ordered(a, b))
    }

    /// `benefit*_N(a)`.
    pub fn current_benefit(&self, a: IndexId, now: usize) -> f64 {
        self.benefits.get(&a).map_or(0.0, |r| r.windowed(now))
    }

    /// `doi*_N(a, b)`.
    pub fn current_doi(&self, a: IndexId, b: IndexId, now: usize) -> f64 {
        self.interactions
            .get(&ordered(a, b))
            .map_or(0.0, |r| r.windowed(now))
    }

    /// Pairs within `set` with positive `doi*`, in ascending pair order.
    pub fn interacting_pairs(&self, set: &Configuration, now: usize) -> Vec<(IndexId, IndexId, f64)> {
        self.interactions
            .iter()
            .filter(|((a, b), _)| set.contains(*a) && set.contains(*b))
            .map(|(&(a, b), r)| (a, b, r.windowed(now)))
            .filter(|&(_, _, d)| d > 0.0)
            .collect()
    }

    pub fn record_benefit(&mut self, a: IndexId, n: usize, value: f64) {
        if value > 0.0 {
            let cap = self.hist_size;
            self.benefits.entry(a).or_default().push(n, value, cap);
        }
    }

    pub fn record_interaction(&mut self, a: IndexId, b: IndexId, n: usize, value: f64) {
        if value > 0.0 {
            let cap = self.hist_size;
            self.interactions
                .entry(ordered(a, b))
                .or_default()
                .push(n, value, cap);
        }
    }

    /// Observes statement `n` over the indices `relevant`: the maximum
    /// benefit of each index and the interaction degree of each pair.
    ///
    /// When more than `cap` indices are relevant, only the `cap` with the
    /// largest individual benefit `cost(q, ∅) − cost(q, {a})` are analyzed.
    pub fn observe(
        &mut self,
        n: usize,
        costs: &StatementCosts<'_>,
        relevant: &Configuration,
        cap: usize,
    ) -> Result<()> {
        let relevant = if relevant.len() > cap {
            truncate_by_benefit(costs, relevant, cap)?
        } else {
            relevant.clone()
        };
        if relevant.is_empty() {
            return Ok(());
        }
        let table = SubsetCostTable::build(costs, LocalSpace::new(&relevant), cap)?;
        let members = table.space().members().to_vec();
        for (i, &a) in members.iter().enumerate() {
            self.record_benefit(a, n, table.max_benefit(i));
        }
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                self.record_interaction(members[i], members[j], n, table.doi(i, j));
            }
        }
        Ok(())
    }
}

fn truncate_by_benefit(
    costs: &StatementCosts<'_>,
    relevant: &Configuration,
    cap: usize,
) -> Result<Configuration> {
    let empty = costs.cost(&Configuration::new())?;
    let mut scored = relevant
        .iter()
        .map(|a| Ok((empty - costs.cost(&Configuration::singleton(a))?, a)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    Ok(scored.into_iter().take(cap).map(|(_, a)| a).collect())
}
