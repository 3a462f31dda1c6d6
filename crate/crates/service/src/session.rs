//! One tuning session: a generated workload, a tuner, a cursor into the
//! workload, and the log of everything that happened to it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wftune_core::cost::{CostOracle, CountingOracle};
use wftune_core::harness::{prepare_experiment, scenario_tuner, Experiment, MetricsRow, Scenario};
use wftune_core::synthetic::{SyntheticCatalog, SyntheticWorkload, WorkloadSpec};
use wftune_core::{Configuration, IndexId, Tuner, TunerConfig};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionChoice {
    /// The offline experimental partition, held fixed.
    #[default]
    Fixed,
    /// Candidates and partition maintained online.
    Auto,
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct CreateSession {
    pub workload: WorkloadSpec,
    pub tuner: TunerConfig,
    pub partition: PartitionChoice,
}

impl Default for CreateSession {
    fn default() -> Self {
        CreateSession {
            workload: WorkloadSpec::desk(),
            tuner: TunerConfig {
                state_cnt: 128,
                ..Default::default()
            },
            partition: PartitionChoice::Fixed,
        }
    }
}

/// Everything that changes a session, in arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Event {
    /// Statement `position` was analyzed.
    Statement { position: usize },
    Feedback {
        position: usize,
        positive: Configuration,
        negative: Configuration,
    },
    Materialize {
        position: usize,
        create: Configuration,
        drop: Configuration,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRef {
    pub id: IndexId,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateView {
    pub id: IndexId,
    pub name: String,
    /// Windowed recent benefit.
    pub benefit: f64,
    pub create: f64,
    pub drop: f64,
    pub recommended: bool,
    pub materialized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartitionView {
    pub parts: Vec<Vec<IndexRef>>,
    pub state_count: usize,
    pub state_cnt: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotesView {
    pub positive: Vec<IndexRef>,
    pub negative: Vec<IndexRef>,
}

/// Body of `GET /sessions/{id}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SessionView {
    pub id: String,
    pub cursor: usize,
    pub length: usize,
    pub partition_mode: PartitionChoice,
    pub recommendation: Vec<IndexRef>,
    pub materialized: Vec<IndexRef>,
    pub pending_votes: VotesView,
    pub partition: PartitionView,
    pub candidates: Vec<CandidateView>,
    pub repartitions: usize,
    pub metrics: Vec<MetricsRow>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepResult {
    pub cursor: usize,
    pub recommendation: Vec<IndexRef>,
    pub rows: Vec<MetricsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackResult {
    pub recommendation: Vec<IndexRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterializeResult {
    pub materialized: Vec<IndexRef>,
    pub recommendation: Vec<IndexRef>,
}

/// A persisted session: enough to rebuild it by replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub spec: CreateSession,
    pub events: Vec<Event>,
}

pub struct Session {
    id: String,
    spec: CreateSession,
    exp: Arc<Experiment>,
    oracle: CountingOracle<Arc<SyntheticCatalog>>,
    tuner: Tuner,
    cursor: usize,
    prev: Configuration,
    total: f64,
    metrics: Vec<MetricsRow>,
    events: Vec<Event>,
}

impl Session {
    pub fn create(id: String, spec: CreateSession) -> Result<Self, ApiError> {
        let workload = SyntheticWorkload::generate(&spec.workload).map_err(ApiError::invalid)?;
        let exp = prepare_experiment(workload, spec.tuner.clone()).map_err(ApiError::invalid)?;
        let tuner = scenario_tuner(&exp, Self::scenario_of(spec.partition)).map_err(ApiError::invalid)?;
        let catalog = Arc::new(exp.workload.catalog.clone());
        Ok(Session {
            id,
            prev: exp.workload.s0.clone(),
            oracle: CountingOracle::new(catalog),
            exp: Arc::new(exp),
            spec,
            tuner,
            cursor: 0,
            total: 0.0,
            metrics: vec![],
            events: vec![],
        })
    }

    /// Rebuilds a session by re-applying its event log.
    pub fn replay(record: &SessionRecord) -> Result<Self, ApiError> {
        let mut s = Session::create(record.id.clone(), record.spec.clone())?;
        for ev in &record.events {
            match ev {
                Event::Statement { .. } => {
                    s.step(1)?;
                }
                Event::Feedback { positive, negative, .. } => {
                    s.feedback(positive, negative)?;
                }
                Event::Materialize { create, drop, .. } => {
                    s.materialize(create, drop)?;
                }
            }
        }
        Ok(s)
    }

    fn scenario_of(p: PartitionChoice) -> Scenario {
        match p {
            PartitionChoice::Fixed => Scenario::Baseline,
            PartitionChoice::Auto => Scenario::AutoPartition,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn tuner(&self) -> &Tuner {
        &self.tuner
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            id: self.id.clone(),
            spec: self.spec.clone(),
            events: self.events.clone(),
        }
    }

    fn refs(&self, set: &Configuration) -> Vec<IndexRef> {
        let catalog = &self.exp.workload.catalog;
        set.iter()
            .map(|id| IndexRef {
                id,
                name: catalog.name(id).unwrap_or_default().to_string(),
            })
            .collect()
    }

    fn check_known(&self, sets: &[&Configuration]) -> Result<(), ApiError> {
        let universe = self.exp.workload.catalog.universe();
        for set in sets {
            if let Some(a) = set.difference(&universe).iter().next() {
                return Err(ApiError::invalid(wftune_core::TuneError::UnknownIndex(a)));
            }
        }
        Ok(())
    }

    /// Analyzes the next `count` statements. The count is checked against
    /// the remaining workload before anything runs.
    pub fn step(&mut self, count: usize) -> Result<StepResult, ApiError> {
        let len = self.exp.workload.statements.len();
        if count == 0 {
            return Err(ApiError::unprocessable("count must be at least 1"));
        }
        if self.cursor + count > len {
            return Err(ApiError::conflict(format!(
                "cannot step {count} from {}: the workload has {len} statements",
                self.cursor
            )));
        }
        let exp = Arc::clone(&self.exp);
        let table = self.tuner.table().clone();
        let algo = Self::scenario_of(self.spec.partition).to_string();
        let mut rows = Vec::with_capacity(count);
        for _ in 0..count {
            let q = &exp.workload.statements[self.cursor];
            self.tuner.analyze_query(q, &self.oracle).map_err(ApiError::from_tuner)?;
            self.cursor += 1;
            let n = self.cursor;
            let current = self.tuner.recommend();
            let charge = exp.workload.catalog.what_if_cost(q, &current).map_err(ApiError::internal)?
                + table.transition(&self.prev, &current).map_err(ApiError::internal)?;
            self.total += charge;
            self.prev = current;
            let opt = exp.opt.per_prefix[n];
            let row = MetricsRow {
                n,
                algo: algo.clone(),
                tot_work: self.total,
                opt_tot_work: opt,
                ratio: if self.total > 0.0 { opt / self.total } else { 1.0 },
                oracle_calls: self.oracle.calls(),
                wall_ms: 0,
            };
            self.metrics.push(row.clone());
            rows.push(row);
            self.events.push(Event::Statement { position: n });
        }
        Ok(StepResult {
            cursor: self.cursor,
            recommendation: self.refs(&self.tuner.recommend()),
            rows,
        })
    }

    pub fn feedback(&mut self, positive: &Configuration, negative: &Configuration) -> Result<FeedbackResult, ApiError> {
        self.check_known(&[positive, negative])?;
        let rec = self.tuner.feedback(positive, negative).map_err(ApiError::from_tuner)?;
        self.events.push(Event::Feedback {
            position: self.cursor,
            positive: positive.clone(),
            negative: negative.clone(),
        });
        Ok(FeedbackResult {
            recommendation: self.refs(&rec),
        })
    }

    pub fn materialize(&mut self, create: &Configuration, drop: &Configuration) -> Result<MaterializeResult, ApiError> {
        self.check_known(&[create, drop])?;
        let rec = self.tuner.materialize(create, drop).map_err(ApiError::from_tuner)?;
        self.events.push(Event::Materialize {
            position: self.cursor,
            create: create.clone(),
            drop: drop.clone(),
        });
        Ok(MaterializeResult {
            materialized: self.refs(self.tuner.materialized()),
            recommendation: self.refs(&rec),
        })
    }

    pub fn view(&self) -> SessionView {
        let t = &self.tuner;
        let catalog = &self.exp.workload.catalog;
        let rec = t.recommend();
        let (plus, minus) = t.pending_votes();
        let candidates = t
            .candidates()
            .iter()
            .map(|a| {
                let spec = &catalog.indices()[a.index()];
                CandidateView {
                    id: a,
                    name: spec.name.clone(),
                    benefit: t.current_benefit(a),
                    create: spec.create,
                    drop: spec.drop,
                    recommended: rec.contains(a),
                    materialized: t.materialized().contains(a),
                }
            })
            .collect();
        SessionView {
            id: self.id.clone(),
            cursor: self.cursor,
            length: self.exp.workload.statements.len(),
            partition_mode: self.spec.partition,
            recommendation: self.refs(&rec),
            materialized: self.refs(t.materialized()),
            pending_votes: VotesView {
                positive: self.refs(plus),
                negative: self.refs(minus),
            },
            partition: PartitionView {
                parts: t.partition().parts().iter().map(|p| self.refs(p)).collect(),
                state_count: t.partition().state_count(),
                state_cnt: t.config().state_cnt,
            },
            candidates,
            repartitions: t.repartitions(),
            metrics: self.metrics.clone(),
            events: self.events.clone(),
        }
    }
}
