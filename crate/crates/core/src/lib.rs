//! Online index tuning with the work function algorithm.
//!
//! The crate provides the single-instance algorithm ([`wfa`]), its
//! partitioned form ([`wfa_plus`]), the feedback-aware tuner with automatic
//! candidate maintenance ([`wfit`]), an exact offline optimum ([`opt`]), a
//! synthetic what-if cost model ([`synthetic`]) and the scenario runner used
//! for evaluation ([`harness`]).

pub mod config;
pub mod cost;
pub mod error;
pub mod harness;
pub mod opt;
pub mod primitives;
pub mod synthetic;
pub mod wfa;
pub mod wfa_plus;
pub mod wfit;

pub use config::{config_of, Configuration, IndexId, LocalSpace};
pub use cost::{
    CostOracle, CountingOracle, Statement, StatementCosts, StatementKind, TableOracle,
    TransitionCostTable,
};
pub use error::{Result, TuneError};
pub use primitives::{PartitionPlan, RecommendationSchedule};
pub use wfa::WorkFunction;
pub use wfa_plus::WfaPlus;
pub use wfit::{FeedbackEvent, PartitionMode, Tuner, TunerConfig};
