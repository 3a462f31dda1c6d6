//! The semi-automatic tuner: partitioned work functions plus DBA feedback,
//! repartitioning, and automatic candidate and partition maintenance.

pub mod partition;
pub mod stats;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, IndexId};
use crate::cost::{CostOracle, Statement, StatementCosts, TransitionCostTable};
use crate::error::{Result, TuneError};
use crate::primitives::{PartitionPlan, DOI_ENUMERATION_CAP};
use crate::wfa_plus::WfaPlus;

pub use partition::{choose_partition, loss_of_partition, top_indices, InteractionGraph};
pub use stats::{StatRing, TuningStats};

/// Tuning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct TunerConfig {
    /// Maximum number of monitored candidates.
    pub idx_cnt: usize,
    /// Bound on `Σ_k 2^|C_k|`.
    pub state_cnt: usize,
    /// Observations kept per index and per pair.
    pub hist_size: usize,
    /// Randomized runs per partition search.
    pub rand_cnt: usize,
    pub seed: u64,
    /// Relevant-index cap for exhaustive statistics.
    pub doi_cap: usize,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            idx_cnt: 40,
            state_cnt: 500,
            hist_size: 100,
            rand_cnt: 100,
            seed: 0,
            doi_cap: DOI_ENUMERATION_CAP,
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.idx_cnt == 0 {
            return Err(TuneError::Config("idxCnt must be positive".into()));
        }
        if self.state_cnt < 2 * self.idx_cnt {
            return Err(TuneError::Config(format!(
                "stateCnt {} is below 2·idxCnt = {}; every candidate needs a singleton part of 2 states",
                self.state_cnt,
                2 * self.idx_cnt
            )));
        }
        if self.hist_size == 0 {
            return Err(TuneError::Config("histSize must be positive".into()));
        }
        if self.doi_cap == 0 || self.doi_cap > 20 {
            return Err(TuneError::Config("doi cap must be within 1..=20".into()));
        }
        Ok(())
    }
}

/// How the candidate partition evolves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "parts")]
pub enum PartitionMode {
    /// A fixed partition; candidate selection is the identity.
    Fixed(PartitionPlan),
    /// Candidates and partition chosen from recent statistics.
    Auto,
}

/// One DBA vote: indices to keep and indices to avoid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub positive: Configuration,
    pub negative: Configuration,
    /// Number of statements that precede the event.
    pub after_statement: usize,
    /// Order among events sharing the same gap between statements.
    pub seq: usize,
}

#[derive(Debug, Clone)]
pub struct Tuner {
    config: TunerConfig,
    auto: bool,
    table: TransitionCostTable,
    s0: Configuration,
    wfa: WfaPlus,
    universe: Configuration,
    stats: TuningStats,
    materialized: Configuration,
    vote_plus: Configuration,
    vote_minus: Configuration,
    statements: usize,
    repartitions: usize,
    rng: ChaCha8Rng,
}

impl Tuner {
    /// Starts a session at configuration `s0`, which is taken to be
    /// materialized.
    pub fn new(
        config: TunerConfig,
        mode: PartitionMode,
        table: TransitionCostTable,
        s0: Configuration,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(a) = s0.iter().find(|a| !table.knows(*a)) {
            return Err(TuneError::UnknownIndex(a));
        }
        let (auto, plan) = match mode {
            PartitionMode::Fixed(plan) => {
                let mut parts = plan.parts().to_vec();
                parts.extend(s0.difference(&plan.union()).iter().map(Configuration::singleton));
                (false, PartitionPlan::new(parts)?)
            }
            PartitionMode::Auto => {
                if s0.len() > config.idx_cnt {
                    return Err(TuneError::Config(format!(
                        "{} initially materialized indices exceed idxCnt {}",
                        s0.len(),
                        config.idx_cnt
                    )));
                }
                (true, PartitionPlan::singletons(&s0))
            }
        };
        let wfa = WfaPlus::new(plan, &s0, &table)?;
        Ok(Tuner {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            stats: TuningStats::new(config.hist_size),
            universe: wfa.candidates(),
            config,
            auto,
            table,
            materialized: s0.clone(),
            s0,
            wfa,
            vote_plus: Configuration::new(),
            vote_minus: Configuration::new(),
            statements: 0,
            repartitions: 0,
        })
    }

    pub fn config(&self) -> &TunerConfig {
        &self.config
    }

    pub fn is_auto(&self) -> bool {
        self.auto
    }

    pub fn table(&self) -> &TransitionCostTable {
        &self.table
    }

    pub fn initial(&self) -> &Configuration {
        &self.s0
    }

    pub fn partition(&self) -> &PartitionPlan {
        self.wfa.plan()
    }

    pub fn candidates(&self) -> Configuration {
        self.wfa.candidates()
    }

    pub fn wfa(&self) -> &WfaPlus {
        &self.wfa
    }

    pub fn universe(&self) -> &Configuration {
        &self.universe
    }

    pub fn stats(&self) -> &TuningStats {
        &self.stats
    }

    pub fn materialized(&self) -> &Configuration {
        &self.materialized
    }

    /// Accumulated votes `(Fc+, Fc−)` since the last statement.
    pub fn pending_votes(&self) -> (&Configuration, &Configuration) {
        (&self.vote_plus, &self.vote_minus)
    }

    /// Statements analyzed so far (`N`).
    pub fn statements(&self) -> usize {
        self.statements
    }

    pub fn repartitions(&self) -> usize {
        self.repartitions
    }

    pub fn current_benefit(&self, a: IndexId) -> f64 {
        self.stats.current_benefit(a, self.statements)
    }

    pub fn current_doi(&self, a: IndexId, b: IndexId) -> f64 {
        self.stats.current_doi(a, b, self.statements)
    }

    pub fn recommend(&self) -> Configuration {
        self.wfa.recommend()
    }

    /// Processes the next workload statement and returns the new
    /// recommendation. Closes the feedback consistency window.
    pub fn analyze_query(&mut self, q: &Statement, oracle: &dyn CostOracle) -> Result<Configuration> {
        self.vote_plus = Configuration::new();
        self.vote_minus = Configuration::new();
        self.statements += 1;
        let costs = StatementCosts::new(q, oracle);
        let plan = self.choose_cands(&costs, oracle)?;
        if let Some(plan) = plan {
            if &plan != self.wfa.plan() {
                debug!(
                    "statement {}: repartition into {} parts over {} candidates",
                    self.statements,
                    plan.len(),
                    plan.union().len()
                );
                self.repartition(plan)?;
            }
        }
        self.wfa.analyze_statement(&costs)?;
        Ok(self.recommend())
    }

    /// Extends the universe and statistics with `q`, then in automatic mode
    /// returns the partition to monitor next.
    fn choose_cands(
        &mut self,
        costs: &StatementCosts<'_>,
        oracle: &dyn CostOracle,
    ) -> Result<Option<PartitionPlan>> {
        let q = costs.statement();
        let extracted = oracle.extract_indices(q);
        if let Some(a) = extracted.iter().find(|a| !self.table.knows(*a)) {
            return Err(TuneError::UnknownIndex(a));
        }
        self.universe = self.universe.union(&extracted);
        let relevant = q.relevant.intersection(&self.universe);
        self.stats
            .observe(self.statements, costs, &relevant, self.config.doi_cap)?;
        if !self.auto {
            return Ok(None);
        }
        let keep = self.materialized.union(&self.recommend());
        if keep.len() > self.config.idx_cnt {
            return Err(TuneError::Config(format!(
                "{} materialized or recommended indices exceed idxCnt {}",
                keep.len(),
                self.config.idx_cnt
            )));
        }
        let now = self.statements;
        let monitored = self.candidates();
        let top = top_indices(
            &self.universe.difference(&keep),
            self.config.idx_cnt - keep.len(),
            &monitored,
            |a| self.stats.current_benefit(a, now),
            &self.table,
        )?;
        let d = keep.union(&top);
        let graph = InteractionGraph::from_edges(self.stats.interacting_pairs(&d, now));
        let plan = choose_partition(
            &d,
            self.config.state_cnt,
            self.wfa.plan(),
            &graph,
            self.config.rand_cnt,
            &mut self.rng,
        )?;
        Ok(Some(plan))
    }

    /// Replaces the monitored partition; it must cover every materialized
    /// and every recommended index.
    pub fn repartition(&mut self, plan: PartitionPlan) -> Result<()> {
        let uncovered = self.materialized.difference(&plan.union());
        if !uncovered.is_empty() {
            return Err(TuneError::Coverage(uncovered.to_vec()));
        }
        if let Some(a) = plan.union().iter().find(|a| !self.table.knows(*a)) {
            return Err(TuneError::UnknownIndex(a));
        }
        self.wfa.repartition(plan, &self.s0, &self.table)?;
        self.universe = self.universe.union(&self.wfa.candidates());
        self.repartitions += 1;
        Ok(())
    }

    /// Applies a DBA vote. Positive votes on unmonitored indices first add
    /// them as singleton parts.
    pub fn feedback(&mut self, plus: &Configuration, minus: &Configuration) -> Result<Configuration> {
        let overlap = plus.intersection(minus);
        if !overlap.is_empty() {
            return Err(TuneError::OverlappingVotes(overlap.to_vec()));
        }
        if let Some(a) = plus.union(minus).iter().find(|a| !self.table.knows(*a)) {
            return Err(TuneError::UnknownIndex(a));
        }
        self.universe = self.universe.union(plus).union(minus);
        let fresh = plus.difference(&self.candidates());
        if !fresh.is_empty() {
            let mut parts = self.partition().parts().to_vec();
            parts.extend(fresh.iter().map(Configuration::singleton));
            self.repartition(PartitionPlan::new(parts)?)?;
        }
        for wf in self.wfa.instances_mut() {
            let space = wf.space().clone();
            wf.apply_feedback(space.mask_of(plus), space.mask_of(minus));
        }
        self.vote_plus = self.vote_plus.difference(minus).union(plus);
        self.vote_minus = self.vote_minus.difference(plus).union(minus);
        Ok(self.recommend())
    }

    /// Records out-of-band index creation and removal, which count as
    /// positive and negative votes respectively.
    pub fn materialize(&mut self, create: &Configuration, drop: &Configuration) -> Result<Configuration> {
        let overlap = create.intersection(drop);
        if !overlap.is_empty() {
            return Err(TuneError::OverlappingVotes(overlap.to_vec()));
        }
        let missing = drop.difference(&self.materialized);
        if !missing.is_empty() {
            return Err(TuneError::Precondition(format!(
                "cannot drop indices that are not materialized: {missing:?}"
            )));
        }
        let rec = self.feedback(create, drop)?;
        self.materialized = self.materialized.difference(drop).union(create);
        Ok(rec)
    }

    /// The DBA adopts the current recommendation wholesale: every
    /// recommended index is endorsed, every other materialized index is
    /// voted down, and the recommendation becomes the materialized set.
    pub fn accept_recommendation(&mut self) -> Result<Configuration> {
        let rec = self.recommend();
        let dropped = self.materialized.difference(&rec);
        self.feedback(&rec, &dropped)?;
        self.materialized = rec.clone();
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{config_of, LocalSpace};
    use crate::cost::TableOracle;

    fn fig2_tuner() -> (Tuner, TableOracle) {
        let table = TransitionCostTable::from_pairs(&[(20.0, 0.0)]).unwrap();
        let cfg = TunerConfig {
            idx_cnt: 1,
            state_cnt: 2,
            ..Default::default()
        };
        let plan = PartitionPlan::singletons(&config_of(&[0]));
        let t = Tuner::new(cfg, PartitionMode::Fixed(plan), table, Configuration::new()).unwrap();
        let oracle = TableOracle::new(
            LocalSpace::new(&config_of(&[0])),
            vec![vec![15.0, 5.0], vec![20.0, 2.0], vec![15.0, 20.0]],
        )
        .unwrap();
        (t, oracle)
    }

    #[test]
    fn fixed_mode_follows_the_example() {
        let (mut t, o) = fig2_tuner();
        let recs: Vec<_> = (0..3)
            .map(|i| t.analyze_query(&o.statement(i + 1, i as u32), &o).unwrap())
            .collect();
        assert_eq!(recs, vec![config_of(&[]), config_of(&[0]), config_of(&[0])]);
        assert_eq!(t.repartitions(), 0);
    }

    #[test]
    fn vote_window_closes_on_next_statement() {
        let (mut t, o) = fig2_tuner();
        t.analyze_query(&o.statement(1, 0), &o).unwrap();
        let rec = t.feedback(&config_of(&[0]), &config_of(&[])).unwrap();
        assert!(rec.contains(IndexId(0)));
        assert_eq!(t.pending_votes().0, &config_of(&[0]));
        t.analyze_query(&o.statement(2, 1), &o).unwrap();
        assert!(t.pending_votes().0.is_empty() && t.pending_votes().1.is_empty());
    }

    #[test]
    fn most_recent_vote_wins() {
        let (mut t, _) = fig2_tuner();
        t.feedback(&config_of(&[0]), &config_of(&[])).unwrap();
        let rec = t.feedback(&config_of(&[]), &config_of(&[0])).unwrap();
        assert!(rec.is_empty());
        assert_eq!(t.pending_votes(), (&config_of(&[]), &config_of(&[0])));
    }

    #[test]
    fn overlapping_votes_rejected() {
        let (mut t, _) = fig2_tuner();
        assert_eq!(
            t.feedback(&config_of(&[0]), &config_of(&[0])),
            Err(TuneError::OverlappingVotes(vec![IndexId(0)]))
        );
    }

    #[test]
    fn config_validation() {
        let bad = TunerConfig {
            idx_cnt: 40,
            state_cnt: 79,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(TuneError::Config(_))));
        assert!(TunerConfig::default().validate().is_ok());
    }

    #[test]
    fn materialize_rules() {
        let table = TransitionCostTable::from_pairs(&[(20.0, 0.0), (5.0, 1.0)]).unwrap();
        let cfg = TunerConfig {
            idx_cnt: 2,
            state_cnt: 4,
            ..Default::default()
        };
        let mut t = Tuner::new(cfg, PartitionMode::Auto, table, Configuration::new()).unwrap();
        assert!(t.materialize(&config_of(&[]), &config_of(&[1])).is_err());
        // index 1 is not monitored yet: the extension path adds it
        let rec = t.materialize(&config_of(&[1]), &config_of(&[])).unwrap();
        assert_eq!(rec, config_of(&[1]));
        assert_eq!(t.materialized(), &config_of(&[1]));
        assert_eq!(t.candidates(), config_of(&[1]));
        let rec = t.materialize(&config_of(&[]), &config_of(&[1])).unwrap();
        assert!(rec.is_empty());
        assert!(t.materialized().is_empty());
    }
}
