//! Transition costs, workload statements and the what-if cost oracle.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::config::{Configuration, IndexId, LocalSpace};
use crate::error::{Result, TuneError};

/// Per-index creation and drop costs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionCostTable {
    create: Vec<f64>,
    drop: Vec<f64>,
}

impl TransitionCostTable {
    /// Builds a table from `(create, drop)` pairs for ids `0..n`.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let mut t = Self::default();
        for (i, &(c, d)) in pairs.iter().enumerate() {
            t.set(IndexId(i as u32), c, d)?;
        }
        Ok(t)
    }

    pub fn set(&mut self, id: IndexId, create: f64, drop: f64) -> Result<()> {
        if !(create.is_finite() && drop.is_finite() && create >= 0.0 && drop >= 0.0) {
            return Err(TuneError::Config(format!(
                "transition costs for {id} must be finite and nonnegative"
            )));
        }
        let i = id.index();
        if self.create.len() <= i {
            self.create.resize(i + 1, f64::NAN);
            self.drop.resize(i + 1, f64::NAN);
        }
        self.create[i] = create;
        self.drop[i] = drop;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.create.len()
    }

    pub fn is_empty(&self) -> bool {
        self.create.is_empty()
    }

    pub fn knows(&self, id: IndexId) -> bool {
        self.create.get(id.index()).is_some_and(|c| !c.is_nan())
    }

    pub fn create(&self, id: IndexId) -> Result<f64> {
        self.create
            .get(id.index())
            .copied()
            .filter(|c| !c.is_nan())
            .ok_or(TuneError::UnknownIndex(id))
    }

    pub fn drop_cost(&self, id: IndexId) -> Result<f64> {
        self.drop
            .get(id.index())
            .copied()
            .filter(|c| !c.is_nan())
            .ok_or(TuneError::UnknownIndex(id))
    }

    /// Cost to move the materialized set from `from` to `to`.
    pub fn transition(&self, from: &Configuration, to: &Configuration) -> Result<f64> {
        let mut total = 0.0;
        for a in to.difference(from).iter() {
            total += self.create(a)?;
        }
        for a in from.difference(to).iter() {
            total += self.drop_cost(a)?;
        }
        Ok(total)
    }

    /// Largest transition cost between two subsets of `candidates`.
    pub fn max_transition(&self, candidates: &Configuration) -> Result<f64> {
        let mut mu = 0.0;
        for a in candidates.iter() {
            mu += self.create(a)?.max(self.drop_cost(a)?);
        }
        Ok(mu)
    }

    /// Local per-bit cost vectors for a candidate space.
    pub fn local(&self, space: &LocalSpace) -> Result<LocalTransitions> {
        let create = space
            .members()
            .iter()
            .map(|&a| self.create(a))
            .collect::<Result<Vec<_>>>()?;
        let drop = space
            .members()
            .iter()
            .map(|&a| self.drop_cost(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(LocalTransitions::new(create, drop))
    }
}

/// Transition costs over the masks of a [`LocalSpace`], with per-mask
/// prefix sums so that a transition is two table lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTransitions {
    pub(crate) create: Vec<f64>,
    pub(crate) drop: Vec<f64>,
    create_sum: Vec<f64>,
    drop_sum: Vec<f64>,
}

impl LocalTransitions {
    pub fn new(create: Vec<f64>, drop: Vec<f64>) -> Self {
        let k = create.len();
        let size = 1usize << k;
        let mut create_sum = vec![0.0; size];
        let mut drop_sum = vec![0.0; size];
        for mask in 1..size {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            create_sum[mask] = create_sum[rest] + create[low];
            drop_sum[mask] = drop_sum[rest] + drop[low];
        }
        LocalTransitions {
            create,
            drop,
            create_sum,
            drop_sum,
        }
    }

    pub fn bits(&self) -> usize {
        self.create.len()
    }

    #[inline]
    pub fn delta(&self, from: u32, to: u32) -> f64 {
        self.create_sum[(to & !from) as usize] + self.drop_sum[(from & !to) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatementKind {
    Query,
    Update,
}

/// One workload statement as seen by the tuner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    /// 1-based position in the workload.
    pub position: usize,
    pub kind: StatementKind,
    /// Opaque descriptor interpreted by the cost oracle.
    pub payload: u32,
    /// Indices whose presence can change the cost of this statement.
    pub relevant: Configuration,
}

/// The what-if interface: estimated cost of a statement under a
/// hypothetical configuration.
///
/// Implementations must be deterministic, and the cost may only depend on
/// `config ∩ stmt.relevant`.
pub trait CostOracle: Send + Sync {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64>;

    /// Indices worth considering for `stmt`.
    fn extract_indices(&self, stmt: &Statement) -> Configuration {
        stmt.relevant.clone()
    }
}

impl<T: CostOracle + ?Sized> CostOracle for &T {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64> {
        (**self).what_if_cost(stmt, config)
    }
    fn extract_indices(&self, stmt: &Statement) -> Configuration {
        (**self).extract_indices(stmt)
    }
}

impl<T: CostOracle + ?Sized> CostOracle for Arc<T> {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64> {
        (**self).what_if_cost(stmt, config)
    }
    fn extract_indices(&self, stmt: &Statement) -> Configuration {
        (**self).extract_indices(stmt)
    }
}

/// Counts what-if calls passing through to an inner oracle.
#[derive(Debug, Default)]
pub struct CountingOracle<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O: CostOracle> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: CostOracle> CostOracle for CountingOracle<O> {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.what_if_cost(stmt, config)
    }
    fn extract_indices(&self, stmt: &Statement) -> Configuration {
        self.inner.extract_indices(stmt)
    }
}

/// Memoized costs of one statement, keyed by `config ∩ relevant`.
///
/// Shared by every work-function instance processing the statement, so a
/// subset that several parts reduce to (typically ∅) is priced once.
pub struct StatementCosts<'a> {
    stmt: &'a Statement,
    oracle: &'a dyn CostOracle,
    memo: Mutex<HashMap<Configuration, f64>>,
}

impl<'a> StatementCosts<'a> {
    pub fn new(stmt: &'a Statement, oracle: &'a dyn CostOracle) -> Self {
        StatementCosts {
            stmt,
            oracle,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn statement(&self) -> &Statement {
        self.stmt
    }

    pub fn cost(&self, config: &Configuration) -> Result<f64> {
        let key = config.intersection(&self.stmt.relevant);
        if let Some(&c) = self.memo.lock().unwrap().get(&key) {
            return Ok(c);
        }
        let c = self.oracle.what_if_cost(self.stmt, &key)?;
        if !(c.is_finite() && c >= 0.0) {
            return Err(TuneError::Oracle(format!(
                "cost {c} for statement {} is not a finite nonnegative value",
                self.stmt.position
            )));
        }
        self.memo.lock().unwrap().insert(key, c);
        Ok(c)
    }

    /// Costs of every subset of `space`, indexed by local mask.
    pub fn table(&self, space: &LocalSpace) -> Result<Vec<f64>> {
        (0..space.size() as u32)
            .map(|mask| self.cost(&space.config_of(mask)))
            .collect()
    }
}

/// An explicit cost table over the subsets of a small index space, one
/// table per statement payload. Used for fixtures and randomized checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableOracle {
    space: LocalSpace,
    tables: Vec<Vec<f64>>,
}

impl TableOracle {
    pub fn new(space: LocalSpace, tables: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(t) = tables.iter().find(|t| t.len() != space.size()) {
            return Err(TuneError::Config(format!(
                "cost table has {} entries, expected {}",
                t.len(),
                space.size()
            )));
        }
        Ok(TableOracle { space, tables })
    }

    pub fn space(&self) -> &LocalSpace {
        &self.space
    }

    /// A statement for payload `payload` relevant to the whole space.
    pub fn statement(&self, position: usize, payload: u32) -> Statement {
        Statement {
            position,
            kind: StatementKind::Query,
            payload,
            relevant: self.space.as_configuration(),
        }
    }
}

impl CostOracle for TableOracle {
    fn what_if_cost(&self, stmt: &Statement, config: &Configuration) -> Result<f64> {
        let table = self
            .tables
            .get(stmt.payload as usize)
            .ok_or_else(|| TuneError::Oracle(format!("no cost table for payload {}", stmt.payload)))?;
        if let Some(a) = config.difference(&self.space.as_configuration()).iter().next() {
            return Err(TuneError::UnknownIndex(a));
        }
        let effective = config.intersection(&stmt.relevant);
        Ok(table[self.space.mask_of(&effective) as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_of;

    #[test]
    fn transition_examples() {
        let t = TransitionCostTable::from_pairs(&[(20.0, 0.0), (8.0, 3.0)]).unwrap();
        let x = config_of(&[0, 1]);
        assert_eq!(t.transition(&x, &x).unwrap(), 0.0);
        assert_eq!(t.transition(&config_of(&[]), &config_of(&[0])).unwrap(), 20.0);
        assert_eq!(t.transition(&config_of(&[0]), &config_of(&[])).unwrap(), 0.0);

        let t = TransitionCostTable::from_pairs(&[(5.0, 1.0), (8.0, 2.0)]).unwrap();
        // create b (8) + drop a (1)
        assert_eq!(t.transition(&config_of(&[0]), &config_of(&[1])).unwrap(), 9.0);
    }

    #[test]
    fn unknown_index_is_a_catalog_error() {
        let t = TransitionCostTable::from_pairs(&[(1.0, 1.0)]).unwrap();
        assert_eq!(
            t.transition(&config_of(&[]), &config_of(&[4])),
            Err(TuneError::UnknownIndex(IndexId(4)))
        );
    }

    #[test]
    fn negative_costs_rejected() {
        assert!(TransitionCostTable::from_pairs(&[(-1.0, 0.0)]).is_err());
    }

    #[test]
    fn local_delta_matches_global() {
        let t = TransitionCostTable::from_pairs(&[(3.0, 1.0), (7.0, 2.0), (11.0, 5.0)]).unwrap();
        let space = LocalSpace::new(&config_of(&[0, 1, 2]));
        let local = t.local(&space).unwrap();
        for x in 0..8u32 {
            for y in 0..8u32 {
                let g = t.transition(&space.config_of(x), &space.config_of(y)).unwrap();
                assert_eq!(local.delta(x, y), g);
            }
        }
        assert_eq!(t.max_transition(&space.as_configuration()).unwrap(), 21.0);
    }

    #[test]
    fn statement_costs_memoize_on_relevant_projection() {
        let space = LocalSpace::new(&config_of(&[0, 1]));
        let oracle = CountingOracle::new(TableOracle::new(space, vec![vec![9.0, 4.0, 6.0, 1.0]]).unwrap());
        let mut stmt = oracle.inner().statement(1, 0);
        stmt.relevant = config_of(&[0]);
        let costs = StatementCosts::new(&stmt, &oracle);
        assert_eq!(costs.cost(&config_of(&[1])).unwrap(), 9.0);
        assert_eq!(costs.cost(&config_of(&[])).unwrap(), 9.0);
        assert_eq!(costs.cost(&config_of(&[0, 1])).unwrap(), 4.0);
        assert_eq!(oracle.calls(), 2);
    }
}
