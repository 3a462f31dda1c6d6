//! Scenario runner: drives a tuner over a synthetic workload, injects the
//! scenario's feedback, and reports cumulative total work against the
//! offline optimum.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Configuration, IndexId};
use crate::cost::{CostOracle, CountingOracle, StatementCosts};
use crate::error::{Result, TuneError};
use crate::opt::{optimal_schedule_partitioned, synthesize_feedback, OptResult, Polarity};
use crate::primitives::PartitionPlan;
use crate::synthetic::SyntheticWorkload;
use crate::wfit::{choose_partition, FeedbackEvent, InteractionGraph, PartitionMode, Tuner, TunerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Fixed experimental partition, no feedback.
    Baseline,
    /// Every candidate in its own part.
    WfitInd,
    /// Votes that endorse each change of the optimal schedule.
    GoodFeedback,
    /// Votes that oppose each change of the optimal schedule.
    BadFeedback,
    /// The DBA adopts the recommendation every `T` statements.
    Lagged(usize),
    /// Candidates and partition maintained online.
    AutoPartition,
}

impl Scenario {
    /// The scenarios run by `all`, in output order.
    pub fn standard(lag: usize) -> Vec<Scenario> {
        vec![
            Scenario::Baseline,
            Scenario::WfitInd,
            Scenario::GoodFeedback,
            Scenario::BadFeedback,
            Scenario::Lagged(lag),
            Scenario::AutoPartition,
        ]
    }

    /// Parses a scenario name; `lagged` takes its period from `lag`.
    pub fn parse(name: &str, lag: Option<usize>) -> Result<Scenario> {
        let s = match name {
            "baseline" => Scenario::Baseline,
            "wfit-ind" => Scenario::WfitInd,
            "good-feedback" => Scenario::GoodFeedback,
            "bad-feedback" => Scenario::BadFeedback,
            "auto-partition" => Scenario::AutoPartition,
            "lagged" => Scenario::Lagged(lag.unwrap_or(1)),
            other => match other.strip_prefix("lagged-") {
                Some(t) => Scenario::Lagged(
                    t.parse()
                        .map_err(|_| TuneError::Config(format!("bad lag in scenario name {other}")))?,
                ),
                None => return Err(TuneError::Config(format!("unknown scenario {other}"))),
            },
        };
        if s == Scenario::Lagged(0) {
            return Err(TuneError::Config("lag must be at least 1".into()));
        }
        Ok(s)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Baseline => write!(f, "baseline"),
            Scenario::WfitInd => write!(f, "wfit-ind"),
            Scenario::GoodFeedback => write!(f, "good-feedback"),
            Scenario::BadFeedback => write!(f, "bad-feedback"),
            Scenario::Lagged(t) => write!(f, "lagged-{t}"),
            Scenario::AutoPartition => write!(f, "auto-partition"),
        }
    }
}

impl FromStr for Scenario {
    type Err = TuneError;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::parse(s, None)
    }
}

/// Cumulative metrics after statement `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n: usize,
    pub algo: String,
    pub tot_work: f64,
    pub opt_tot_work: f64,
    /// `opt_tot_work / tot_work`.
    pub ratio: f64,
    pub oracle_calls: u64,
    pub wall_ms: u64,
}

/// Everything scenarios share: the workload, the fixed experimental
/// partition, and the optimum over its candidates.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub workload: SyntheticWorkload,
    pub tuner: TunerConfig,
    pub plan: PartitionPlan,
    pub opt: OptResult,
}

impl Experiment {
    pub fn candidates(&self) -> Configuration {
        self.plan.union()
    }
}

/// Offline candidate and partition choice from whole-workload averages of
/// maximum benefit and interaction degree.
pub fn offline_partition(workload: &SyntheticWorkload, config: &TunerConfig) -> Result<PartitionPlan> {
    let oracle = &workload.catalog;
    let n = workload.statements.len().max(1) as f64;
    let mut benefit: std::collections::BTreeMap<IndexId, f64> = Default::default();
    let mut doi: std::collections::BTreeMap<(IndexId, IndexId), f64> = Default::default();
    for q in &workload.statements {
        let costs = StatementCosts::new(q, oracle);
        let mut stats = crate::wfit::TuningStats::new(1);
        stats.observe(q.position, &costs, &q.relevant, config.doi_cap)?;
        for a in q.relevant.iter() {
            if let Some(r) = stats.benefit_ring(a) {
                *benefit.entry(a).or_default() += r.entries().map(|e| e.1).sum::<f64>();
            }
        }
        for (a, b, d) in stats.interacting_pairs(&q.relevant, q.position) {
            *doi.entry((a, b)).or_default() += d;
        }
    }
    let s0 = &workload.s0;
    if s0.len() > config.idx_cnt {
        return Err(TuneError::Config(format!(
            "{} initially materialized indices exceed idxCnt {}",
            s0.len(),
            config.idx_cnt
        )));
    }
    let mut ranked: Vec<(f64, IndexId)> = benefit
        .iter()
        .filter(|(a, b)| **b > 0.0 && !s0.contains(**a))
        .map(|(&a, &b)| (b / n, a))
        .collect();
    ranked.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let d: Configuration = s0
        .iter()
        .chain(ranked.iter().take(config.idx_cnt - s0.len()).map(|r| r.1))
        .collect();
    let graph = InteractionGraph::from_edges(doi.into_iter().map(|((a, b), v)| (a, b, v / n)));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    choose_partition(
        &d,
        config.state_cnt,
        &PartitionPlan::default(),
        &graph,
        config.rand_cnt,
        &mut rng,
    )
}

/// Chooses the experimental partition and solves the optimum over its
/// candidates, which is exact because the declared groups are stable.
pub fn prepare_experiment(workload: SyntheticWorkload, tuner: TunerConfig) -> Result<Experiment> {
    tuner.validate()?;
    let plan = offline_partition(&workload, &tuner)?;
    let groups = workload.catalog.true_groups().restrict(&plan.union());
    let opt = optimal_schedule_partitioned(
        &workload.statements,
        &groups,
        &workload.s0,
        &workload.catalog,
        &workload.catalog.transition_table(),
    )?;
    info!(
        "experiment: {} statements, {} candidates in {} parts, OPT {}",
        workload.statements.len(),
        plan.union().len(),
        plan.len(),
        opt.total()
    );
    Ok(Experiment {
        workload,
        tuner,
        plan,
        opt,
    })
}

/// Feedback events a scenario injects, in arrival order.
pub fn scenario_feedback(exp: &Experiment, scenario: Scenario) -> Vec<FeedbackEvent> {
    match scenario {
        Scenario::GoodFeedback => synthesize_feedback(&exp.opt.schedule, Polarity::Good),
        Scenario::BadFeedback => synthesize_feedback(&exp.opt.schedule, Polarity::Bad),
        _ => vec![],
    }
}

/// Builds the tuner a scenario starts from.
pub fn scenario_tuner(exp: &Experiment, scenario: Scenario) -> Result<Tuner> {
    let mode = match scenario {
        Scenario::WfitInd => PartitionMode::Fixed(PartitionPlan::singletons(&exp.candidates())),
        Scenario::AutoPartition => PartitionMode::Auto,
        _ => PartitionMode::Fixed(exp.plan.clone()),
    };
    Tuner::new(
        exp.tuner.clone(),
        mode,
        exp.workload.catalog.transition_table(),
        exp.workload.s0.clone(),
    )
}

/// Runs one scenario and returns one row per statement.
pub fn run_scenario(exp: &Experiment, scenario: Scenario, timing: bool) -> Result<Vec<MetricsRow>> {
    let start = Instant::now();
    let oracle = CountingOracle::new(&exp.workload.catalog);
    let table = exp.workload.catalog.transition_table();
    let mut tuner = scenario_tuner(exp, scenario)?;
    let events = scenario_feedback(exp, scenario);
    let mut next_event = 0;
    let mut prev = exp.workload.s0.clone();
    let mut total = 0.0;
    let mut rows = Vec::with_capacity(exp.workload.statements.len());
    for (i, q) in exp.workload.statements.iter().enumerate() {
        let n = i + 1;
        tuner.analyze_query(q, &oracle)?;
        while next_event < events.len() && events[next_event].after_statement <= n {
            let ev = &events[next_event];
            tuner.feedback(&ev.positive, &ev.negative)?;
            next_event += 1;
        }
        let current = match scenario {
            Scenario::Lagged(t) => {
                if n % t == 0 {
                    tuner.accept_recommendation()?;
                }
                tuner.materialized().clone()
            }
            _ => tuner.recommend(),
        };
        total += exp.workload.catalog.what_if_cost(q, &current)? + table.transition(&prev, &current)?;
        prev = current;
        let opt = exp.opt.per_prefix[n];
        rows.push(MetricsRow {
            n,
            algo: scenario.to_string(),
            tot_work: total,
            opt_tot_work: opt,
            ratio: if total > 0.0 { opt / total } else { 1.0 },
            oracle_calls: oracle.calls(),
            wall_ms: if timing { start.elapsed().as_millis() as u64 } else { 0 },
        });
    }
    info!(
        "{scenario}: totWork {total}, ratio {:.4}, {} repartitions",
        rows.last().map_or(1.0, |r| r.ratio),
        tuner.repartitions()
    );
    Ok(rows)
}

/// Runs scenarios in parallel; rows come back grouped by scenario in the
/// order given.
pub fn run_scenarios(exp: &Experiment, scenarios: &[Scenario], timing: bool) -> Result<Vec<MetricsRow>> {
    let results: Vec<Result<Vec<MetricsRow>>> = scenarios
        .par_iter()
        .map(|&s| run_scenario(exp, s, timing))
        .collect();
    let mut rows = vec![];
    for r in results {
        rows.extend(r?);
    }
    Ok(rows)
}

pub fn write_csv<W: std::io::Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["n", "algo", "tot_work", "opt_tot_work", "ratio", "oracle_calls", "wall_ms"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_csv(rows, std::fs::File::create(path)?)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<MetricsRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(TuneError::from))
        .collect()
}

/// Final row of each algorithm, in first-appearance order.
pub fn final_rows(rows: &[MetricsRow]) -> Vec<&MetricsRow> {
    let mut out: Vec<&MetricsRow> = vec![];
    for r in rows {
        match out.iter_mut().find(|o| o.algo == r.algo) {
            Some(o) if o.n <= r.n => *o = r,
            Some(_) => {}
            None => out.push(r),
        }
    }
    out
}
