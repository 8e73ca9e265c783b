//! Batch experiment runner.
//!
//! A single TOML config names a protocol, a graph, a scheduler, an initial
//! configuration policy, seeds, and budgets. [`run_experiment`] executes all
//! seeds (in parallel), measures stabilization per run, attaches the unison
//! invariant monitors where they apply, and aggregates a report whose JSON
//! form is byte-identical across re-executions — wall-clock timings are
//! opt-in for exactly that reason. The resolved config, defaults included,
//! is echoed into the report for provenance. [`sweep`] repeats a base config
//! along one axis and tabulates the aggregates.

use crate::engine::{
    run, InitPolicy, Protocol, ProtocolError, RunSpec, SchedulerKind, StateId, StopCondition,
    Trace,
};
use crate::failed_unison::FailedUnison;
use crate::le::LeProtocol;
use crate::mis::MisProtocol;
use crate::restart::WithRestart;
use crate::synchronizer::Synchronized;
use crate::topology::{Graph, TopologyError};
use crate::unison::UnisonProtocol;
use crate::verification::{
    attach_monitors, measure_stabilization, standard_monitors, StabilizationReport, TaskChecker,
    Violation,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Display;
use thiserror::Error;

/// Environment variable naming the default worker-thread count.
pub const JOBS_ENV: &str = "FLINT_JOBS";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("graph: {0}")]
    Topology(#[from] TopologyError),
}

fn cfg_err(path: &str, msg: impl Display) -> ExperimentError {
    ExperimentError::Config(format!("{path}: {msg}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: ProtocolKind,
    pub graph: GraphSpec,
    #[serde(default)]
    pub scheduler: SchedulerSpec,
    /// Diameter bound `D` handed to the protocol; defaults to the graph's
    /// diameter and must not undercut it.
    #[serde(default)]
    pub d: Option<u32>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub init: InitSpec,
    pub seeds: SeedsSpec,
    pub budget: Budget,
    /// Stabilization window in rounds. Defaults to four clock cycles for the
    /// unison variants and `2D + 4` for the static tasks.
    #[serde(default)]
    pub window: Option<u32>,
    /// Run the unison invariant monitors on every trace (`au` only).
    #[serde(default = "default_true")]
    pub monitors: bool,
    /// Include wall-clock fields in the report, forfeiting byte-identical
    /// re-execution.
    #[serde(default)]
    pub include_timing: bool,
    /// Where the caller intends to write the report; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    /// The asynchronous unison clock on its own.
    Au,
    /// Maximal independent set under the restart wrapper (synchronous).
    Mis,
    /// Leader election under the restart wrapper (synchronous).
    Le,
    /// The synchronizer product running wrapped MIS.
    SyncMis,
    /// The synchronizer product running wrapped leader election.
    SyncLe,
    /// The flawed unison variant with the reset chain.
    FailedAu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Path { n: usize },
    Cycle { n: usize },
    Complete { n: usize },
    Wheel { n: usize },
    Random { n: usize, d: u32, #[serde(default = "default_extra_edge_prob")] extra_edge_prob: f64, seed: u64 },
    /// Inline edge-list text, one `u v` pair per line.
    EdgeList { text: String },
}

fn default_extra_edge_prob() -> f64 {
    0.15
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph, ExperimentError> {
        Ok(match *self {
            GraphSpec::Path { n } => Graph::path(n)?,
            GraphSpec::Cycle { n } => Graph::cycle(n)?,
            GraphSpec::Complete { n } => Graph::complete(n)?,
            GraphSpec::Wheel { n } => Graph::wheel(n)?,
            GraphSpec::Random { n, d, extra_edge_prob, seed } => {
                Graph::random_bounded_diameter(n, d, extra_edge_prob, seed)?
            }
            GraphSpec::EdgeList { ref text } => Graph::parse_edge_list(text)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchedulerSpec {
    Synchronous,
    RoundRobin,
    RandomFair { #[serde(default = "default_fair_window")] fair_window: u32 },
    /// Script text in the one-step-per-line format.
    Scripted { script: String, #[serde(default)] cycle: bool },
}

fn default_fair_window() -> u32 {
    3
}

impl Default for SchedulerSpec {
    fn default() -> Self {
        SchedulerSpec::Synchronous
    }
}

impl SchedulerSpec {
    fn build(&self, n: usize) -> Result<SchedulerKind, ExperimentError> {
        Ok(match self {
            SchedulerSpec::Synchronous => SchedulerKind::Synchronous,
            SchedulerSpec::RoundRobin => SchedulerKind::RoundRobin,
            SchedulerSpec::RandomFair { fair_window } => {
                if *fair_window == 0 {
                    return Err(cfg_err("scheduler.fair_window", "must be at least 1"));
                }
                SchedulerKind::RandomFair { fair_window: *fair_window }
            }
            SchedulerSpec::Scripted { script, cycle } => {
                SchedulerKind::parse_script(script, n, *cycle)
                    .map_err(|e| cfg_err("scheduler.script", e))?
            }
        })
    }

    fn is_synchronous(&self) -> bool {
        matches!(self, SchedulerSpec::Synchronous)
    }
}

/// Protocol parameters; unused fields are ignored by protocols that do not
/// take them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Candidacy-keeping probability for MIS and flag-keeping for LE.
    #[serde(default = "default_p0")]
    pub p0: f64,
    /// Temporary-identifier range for MIS trials and LE verification.
    #[serde(default = "default_k_id")]
    pub k_id: u32,
    /// Clock-range multiplier of the flawed unison variant.
    #[serde(default = "default_c")]
    pub c: u32,
}

fn default_p0() -> f64 {
    0.25
}

fn default_k_id() -> u32 {
    4
}

fn default_c() -> u32 {
    2
}

impl Default for Params {
    fn default() -> Self {
        Self { p0: default_p0(), k_id: default_k_id(), c: default_c() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    /// Every node in the protocol's designated initial state.
    Initial,
    /// Adversarial: uniform over the full state universe.
    Random,
    /// Explicit states by display name, one per node.
    Explicit { states: Vec<String> },
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec::Random
    }
}

impl InitSpec {
    fn build(&self, protocol: &dyn Protocol, n: usize) -> Result<InitPolicy, ExperimentError> {
        Ok(match self {
            InitSpec::Initial => InitPolicy::AllInitial,
            InitSpec::Random => InitPolicy::RandomUniform,
            InitSpec::Explicit { states } => {
                if states.len() != n {
                    return Err(cfg_err(
                        "init.states",
                        format!("{} states for {} nodes", states.len(), n),
                    ));
                }
                let parsed: Vec<StateId> = states
                    .iter()
                    .map(|name| protocol.parse_state(name))
                    .collect::<Result<_, _>>()
                    .map_err(|e| cfg_err("init.states", e))?;
                InitPolicy::Explicit(parsed)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedsSpec {
    /// Seeds `1..=count`.
    Count { count: u64 },
    List { list: Vec<u64> },
}

impl SeedsSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedsSpec::Count { count } => (1..=*count).collect(),
            SeedsSpec::List { list } => list.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    /// Trace length per run.
    pub max_steps: u64,
    /// Stabilization-round budget; runs stabilizing later (or not at all)
    /// count as budget overruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<u64>,
    /// When set, budget overruns fail the whole batch (exit code 3).
    #[serde(default)]
    pub hard: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// The config with every default filled in, as echoed into reports.
    fn resolved(&self, d: u32, window: u32) -> ExperimentConfig {
        let mut c = self.clone();
        c.d = Some(d);
        c.window = Some(window);
        c
    }
}

/// A constructed protocol instance; owns the concrete type behind the
/// kind-specific stabilization checker.
enum Instance {
    Au(UnisonProtocol),
    Mis(WithRestart<MisProtocol>),
    Le(WithRestart<LeProtocol>),
    SyncMis(Synchronized<WithRestart<MisProtocol>>),
    SyncLe(Synchronized<WithRestart<LeProtocol>>),
    FailedAu(FailedUnison),
}

impl Instance {
    fn build(kind: ProtocolKind, d: u32, params: &Params) -> Result<Self, ExperimentError> {
        let p = params;
        Ok(match kind {
            ProtocolKind::Au => Instance::Au(UnisonProtocol::new(d)?),
            ProtocolKind::Mis => {
                Instance::Mis(WithRestart::new(MisProtocol::new(d, p.p0, p.k_id)?, d)?)
            }
            ProtocolKind::Le => {
                Instance::Le(WithRestart::new(LeProtocol::new(d, p.p0, p.k_id)?, d)?)
            }
            ProtocolKind::SyncMis => Instance::SyncMis(Synchronized::new(
                WithRestart::new(MisProtocol::new(d, p.p0, p.k_id)?, d)?,
                d,
            )?),
            ProtocolKind::SyncLe => Instance::SyncLe(Synchronized::new(
                WithRestart::new(LeProtocol::new(d, p.p0, p.k_id)?, d)?,
                d,
            )?),
            ProtocolKind::FailedAu => Instance::FailedAu(FailedUnison::new(p.c, d)?),
        })
    }

    fn protocol(&self) -> &dyn Protocol {
        match self {
            Instance::Au(p) => p,
            Instance::Mis(p) => p,
            Instance::Le(p) => p,
            Instance::SyncMis(p) => p,
            Instance::SyncLe(p) => p,
            Instance::FailedAu(p) => p,
        }
    }

    fn default_window(&self, d: u32) -> u32 {
        match self {
            Instance::Au(p) => TaskChecker::au_default_window(p),
            Instance::FailedAu(p) => 4 * p.span(),
            _ => TaskChecker::static_default_window(d),
        }
    }

    fn measure(
        &self,
        trace: &Trace,
        graph: &Graph,
        d: u32,
        window: u32,
    ) -> StabilizationReport {
        let checker = match self {
            Instance::Au(p) => TaskChecker::Au {
                protocol: p,
                diameter: d,
                liveness: vec![1, 3],
                window,
            },
            Instance::Mis(_) | Instance::SyncMis(_) => TaskChecker::Mis { window },
            Instance::Le(_) | Instance::SyncLe(_) => TaskChecker::Le { window },
            Instance::FailedAu(p) => return measure_failed_au(trace, graph, p, window as usize),
        };
        measure_stabilization(trace, graph, self.protocol(), &checker)
    }

    fn monitor(&self, graph: &Graph, trace: &Trace) -> Result<Vec<Violation>, ProtocolError> {
        match self {
            Instance::Au(p) => {
                let mut monitors = standard_monitors(p);
                attach_monitors(p, graph, trace, &mut monitors)
            }
            _ => Ok(Vec::new()),
        }
    }
}

/// Stabilization for the flawed clock: the first round from which every
/// configuration in the window has all nodes on the main chain with
/// neighboring values at most one apart on the `cD + 1` cycle.
fn measure_failed_au(
    trace: &Trace,
    graph: &Graph,
    protocol: &FailedUnison,
    window: usize,
) -> StabilizationReport {
    let rounds = trace.rounds();
    let report = |round: Option<usize>| StabilizationReport {
        stabilized: round.is_some(),
        stabilization_round: round,
        rounds_available: rounds,
        steps_used: trace.steps.len(),
    };
    if rounds < window {
        return report(None);
    }
    let span = protocol.span() as i64;
    let legal = |config: &[StateId]| {
        let outputs: Option<Vec<i64>> =
            config.iter().map(|&s| protocol.output(s)).collect();
        let Some(outputs) = outputs else { return false };
        graph.edges().iter().all(|&(u, v)| {
            let diff = (outputs[u as usize] - outputs[v as usize]).rem_euclid(span);
            diff <= 1 || diff == span - 1
        })
    };
    let configs = trace.steps.len() + 1;
    let mut bad_before = vec![0usize; configs + 1];
    for c in 0..configs {
        bad_before[c + 1] = bad_before[c] + usize::from(!legal(trace.config_at(c as i64 - 1)));
    }
    for i in 0..=(rounds - window) {
        let a = trace.round_starts[i] as usize;
        let b = trace.round_starts[i + window] as usize;
        if bad_before[b + 1] - bad_before[a] == 0 {
            return report(Some(i));
        }
    }
    report(None)
}

/// One seed's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub stabilized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilization_round: Option<usize>,
    pub rounds_available: usize,
    pub steps: usize,
    pub violations: Vec<Violation>,
    pub budget_exceeded: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub runs: usize,
    pub stabilized: usize,
    /// Lower median over the stabilized runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_stabilization_round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_stabilization_round: Option<usize>,
    pub total_violations: usize,
    pub budget_exceeded: usize,
}

fn summarize(records: &[RunRecord]) -> Summary {
    let mut rounds: Vec<usize> = records.iter().filter_map(|r| r.stabilization_round).collect();
    rounds.sort_unstable();
    Summary {
        runs: records.len(),
        stabilized: records.iter().filter(|r| r.stabilized).count(),
        median_stabilization_round: if rounds.is_empty() {
            None
        } else {
            Some(rounds[(rounds.len() - 1) / 2])
        },
        max_stabilization_round: rounds.last().copied(),
        total_violations: records.iter().map(|r| r.violations.len()).sum(),
        budget_exceeded: records.iter().filter(|r| r.budget_exceeded).count(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    /// At least one monitor violation anywhere in the batch.
    Violation,
    /// A hard budget was declared and at least one run overran it.
    BudgetExceeded,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Ok => 0,
            Verdict::Violation => 1,
            Verdict::BudgetExceeded => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    /// The fully-resolved config this batch ran under.
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub records: Vec<RunRecord>,
}

impl BatchReport {
    pub fn verdict(&self) -> Verdict {
        if self.summary.total_violations > 0 {
            Verdict::Violation
        } else if self.config.budget.hard && self.summary.budget_exceeded > 0 {
            Verdict::BudgetExceeded
        } else {
            Verdict::Ok
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize infallibly")
    }
}

/// Worker-thread count: explicit request, else the `FLINT_JOBS` environment
/// variable, else rayon's default.
pub fn worker_threads(requested: Option<usize>) -> Option<usize> {
    requested.or_else(|| {
        std::env::var(JOBS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&j| j > 0)
    })
}

fn in_pool<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> T {
    match worker_threads(jobs) {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .expect("thread pool construction")
            .install(work),
        None => work(),
    }
}

/// A validated config with everything built and defaults resolved.
struct Prepared {
    graph: Graph,
    d: u32,
    window: u32,
    instance: Instance,
    scheduler: SchedulerKind,
    init: InitPolicy,
}

fn prepare(config: &ExperimentConfig) -> Result<Prepared, ExperimentError> {
    let graph = config.graph.build()?;
    let diameter = graph.diameter().map_err(|e| cfg_err("graph", e))?;
    let d = config.d.unwrap_or_else(|| diameter.max(1));
    if d < diameter {
        return Err(cfg_err(
            "d",
            format!("{d} is below the graph diameter {diameter}"),
        ));
    }
    if d == 0 {
        return Err(cfg_err("d", "must be at least 1"));
    }
    if matches!(config.protocol, ProtocolKind::Mis | ProtocolKind::Le)
        && !config.scheduler.is_synchronous()
    {
        return Err(cfg_err(
            "scheduler",
            "the restart-wrapped protocols are defined for the synchronous schedule only; \
             use the sync-* product variants for other schedulers",
        ));
    }
    if config.budget.max_steps == 0 {
        return Err(cfg_err("budget.max_steps", "must be positive"));
    }
    if config.budget.max_rounds == Some(0) {
        return Err(cfg_err("budget.max_rounds", "must be positive"));
    }

    let instance = Instance::build(config.protocol, d, &config.params)
        .map_err(|e| cfg_err("params", e))?;
    let window = match config.window {
        Some(0) => return Err(cfg_err("window", "must be at least 1")),
        Some(w) => w,
        None => instance.default_window(d),
    };
    let scheduler = config.scheduler.build(graph.node_count())?;
    let init = config.init.build(instance.protocol(), graph.node_count())?;
    Ok(Prepared { graph, d, window, instance, scheduler, init })
}

/// Execute a single seed of a config and return its trace, for trace
/// recording and replay checks.
pub fn record_trace(config: &ExperimentConfig, seed: u64) -> Result<Trace, ExperimentError> {
    let p = prepare(config)?;
    let outcome = run(RunSpec {
        protocol: p.instance.protocol(),
        graph: &p.graph,
        scheduler: p.scheduler,
        seed,
        init: p.init,
        stop: StopCondition::Steps(config.budget.max_steps),
    })?;
    Ok(outcome.trace)
}

pub fn run_experiment(
    config: &ExperimentConfig,
    jobs: Option<usize>,
) -> Result<BatchReport, ExperimentError> {
    let Prepared { graph, d, window, instance, scheduler, init } = prepare(config)?;
    let seeds = config.seeds.seeds();
    if seeds.is_empty() {
        return Err(cfg_err("seeds", "at least one seed is required"));
    }

    let run_one = |&seed: &u64| -> Result<RunRecord, ExperimentError> {
        let started = std::time::Instant::now();
        let outcome = run(RunSpec {
            protocol: instance.protocol(),
            graph: &graph,
            scheduler: scheduler.clone(),
            seed,
            init: init.clone(),
            stop: StopCondition::Steps(config.budget.max_steps),
        })?;
        let measure = instance.measure(&outcome.trace, &graph, d, window);
        let violations = if config.monitors {
            instance.monitor(&graph, &outcome.trace)?
        } else {
            Vec::new()
        };
        let budget_exceeded = match measure.stabilization_round {
            Some(r) => config.budget.max_rounds.is_some_and(|b| r as u64 > b),
            None => true,
        };
        Ok(RunRecord {
            seed,
            stabilized: measure.stabilized,
            stabilization_round: measure.stabilization_round,
            rounds_available: measure.rounds_available,
            steps: measure.steps_used,
            violations,
            budget_exceeded,
            wall_ms: config
                .include_timing
                .then(|| started.elapsed().as_millis() as u64),
        })
    };
    let records: Vec<RunRecord> =
        in_pool(jobs, || seeds.par_iter().map(run_one).collect::<Result<_, _>>())?;

    let summary = summarize(&records);
    Ok(BatchReport {
        config: config.resolved(d, window),
        summary,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Node count of the graph family.
    N,
    /// Diameter bound handed to the protocol.
    D,
    /// Fairness window of the random-fair scheduler.
    SchedulerB,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: u64,
    pub summary: Summary,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub base: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn verdict(&self) -> Verdict {
        if self.rows.iter().any(|r| r.summary.total_violations > 0) {
            Verdict::Violation
        } else if self.base.budget.hard
            && self.rows.iter().any(|r| r.summary.budget_exceeded > 0)
        {
            Verdict::BudgetExceeded
        } else {
            Verdict::Ok
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize infallibly")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "value,runs,stabilized,median_stabilization_round,max_stabilization_round,\
             total_violations,budget_exceeded\n",
        );
        let cell = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let s = &row.summary;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.value,
                s.runs,
                s.stabilized,
                cell(s.median_stabilization_round),
                cell(s.max_stabilization_round),
                s.total_violations,
                s.budget_exceeded,
            ));
        }
        out
    }
}

fn apply_axis(
    config: &ExperimentConfig,
    axis: SweepAxis,
    value: u64,
) -> Result<ExperimentConfig, ExperimentError> {
    let mut c = config.clone();
    match axis {
        SweepAxis::N => {
            let n = value as usize;
            match &mut c.graph {
                GraphSpec::Path { n: slot }
                | GraphSpec::Cycle { n: slot }
                | GraphSpec::Complete { n: slot }
                | GraphSpec::Wheel { n: slot }
                | GraphSpec::Random { n: slot, .. } => *slot = n,
                GraphSpec::EdgeList { .. } => {
                    return Err(cfg_err("sweep", "cannot sweep n over an explicit edge list"))
                }
            }
        }
        SweepAxis::D => c.d = Some(value as u32),
        SweepAxis::SchedulerB => {
            c.scheduler = SchedulerSpec::RandomFair { fair_window: value as u32 }
        }
    }
    Ok(c)
}

pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[u64],
    jobs: Option<usize>,
) -> Result<SweepReport, ExperimentError> {
    if values.is_empty() {
        return Err(cfg_err("sweep.values", "at least one value is required"));
    }
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let config = apply_axis(base, axis, value)?;
        let report = run_experiment(&config, jobs)?;
        rows.push(SweepRow { value, summary: report.summary });
    }
    Ok(SweepReport { axis, base: base.clone(), rows })
}

/// Rebuild the protocol a trace header names, for replay.
pub fn protocol_from_header(
    name: &str,
    params: &serde_json::Value,
) -> Result<Box<dyn Protocol>, ExperimentError> {
    let bad = |what: &str| cfg_err("trace.params", format!("missing or invalid {what}"));
    let get_u32 = |v: &serde_json::Value, key: &str| {
        v.get(key).and_then(|x| x.as_u64()).map(|x| x as u32).ok_or_else(|| bad(key))
    };
    let get_f64 =
        |v: &serde_json::Value, key: &str| v.get(key).and_then(|x| x.as_f64()).ok_or_else(|| bad(key));
    let host_of = |params: &serde_json::Value| -> Result<(serde_json::Value, u32), ExperimentError> {
        let host = params.get("host").cloned().ok_or_else(|| bad("host"))?;
        Ok((host, get_u32(params, "d")?))
    };

    Ok(match name {
        "unison" => Box::new(UnisonProtocol::new(get_u32(params, "d")?)?),
        "unison-mutant" => Box::new(UnisonProtocol::without_good_guard(get_u32(params, "d")?)?),
        "mis" => Box::new(MisProtocol::new(
            get_u32(params, "d")?,
            get_f64(params, "p0")?,
            get_u32(params, "k_id")?,
        )?),
        "le" => Box::new(LeProtocol::new(
            get_u32(params, "d")?,
            get_f64(params, "p0")?,
            get_u32(params, "k_id")?,
        )?),
        "mis-restart" => {
            let (host, d) = host_of(params)?;
            Box::new(WithRestart::new(
                MisProtocol::new(get_u32(&host, "d")?, get_f64(&host, "p0")?, get_u32(&host, "k_id")?)?,
                d,
            )?)
        }
        "le-restart" => {
            let (host, d) = host_of(params)?;
            Box::new(WithRestart::new(
                LeProtocol::new(get_u32(&host, "d")?, get_f64(&host, "p0")?, get_u32(&host, "k_id")?)?,
                d,
            )?)
        }
        "sync:mis-restart" | "sync:le-restart" => {
            let d = get_u32(params, "d")?;
            let pi = params.get("pi").ok_or_else(|| bad("pi"))?;
            let pi_params = pi.get("params").ok_or_else(|| bad("pi.params"))?;
            let (host, host_d) = host_of(pi_params)?;
            if name == "sync:mis-restart" {
                Box::new(Synchronized::new(
                    WithRestart::new(
                        MisProtocol::new(
                            get_u32(&host, "d")?,
                            get_f64(&host, "p0")?,
                            get_u32(&host, "k_id")?,
                        )?,
                        host_d,
                    )?,
                    d,
                )?)
            } else {
                Box::new(Synchronized::new(
                    WithRestart::new(
                        LeProtocol::new(
                            get_u32(&host, "d")?,
                            get_f64(&host, "p0")?,
                            get_u32(&host, "k_id")?,
                        )?,
                        host_d,
                    )?,
                    d,
                )?)
            }
        }
        "failed-unison" => {
            Box::new(FailedUnison::new(get_u32(params, "c")?, get_u32(params, "d")?)?)
        }
        other => return Err(cfg_err("trace.protocol", format!("unknown protocol {other:?}"))),
    })
}

/// Re-execute a trace from its header and compare byte for byte.
pub fn replay_matches(trace: &Trace) -> Result<bool, ExperimentError> {
    let header = &trace.header;
    let protocol = protocol_from_header(&header.protocol, &header.params)?;
    let graph = Graph::new(header.n, &header.edges)?;
    let scheduler: SchedulerKind = serde_json::from_value(header.scheduler.clone())
        .map_err(|e| cfg_err("trace.scheduler", e))?;
    let outcome = run(RunSpec {
        protocol: protocol.as_ref(),
        graph: &graph,
        scheduler,
        seed: header.seed,
        init: InitPolicy::Explicit(header.init.clone()),
        stop: StopCondition::Steps(trace.steps.len() as u64),
    })?;
    Ok(outcome.trace.to_jsonl_string() == trace.to_jsonl_string())
}
