//! Command-line front end: seeded experiment batches, axis sweeps, the
//! flawed-clock counterexample replay, graph generation, and trace replay
//! verification.
//!
//! Exit codes: 0 success, 1 property violation (monitor hit, failed
//! counterexample check, replay mismatch), 2 configuration or i/o error,
//! 3 hard budget exceeded.

use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use flint_core::engine::Trace;
use flint_core::experiment::{
    record_trace, replay_matches, run_experiment, sweep, ExperimentConfig, Summary, SweepAxis,
};
use flint_core::failed_unison::run_livelock_check;
use flint_core::topology::Graph;

#[derive(Parser)]
#[command(name = "flint", version, about = "Protocol simulation and verification workbench")]
struct Cli {
    /// Worker threads for batch runs; defaults to $FLINT_JOBS, then all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and emit the batch report as JSON.
    Run {
        /// Experiment config file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Report destination; stdout when neither this nor the config's
        /// `output` field is set.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-run a config along one axis and tabulate the per-value aggregates.
    Sweep {
        /// Base experiment config file (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<u64>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// JSON report destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Replay the flawed clock's fair schedule that never lets it advance,
    /// checking every step against the protocol rules.
    Counterexample,
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Trace utilities.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    /// Node count of the graph family.
    N,
    /// Diameter bound handed to the protocol.
    D,
    /// Fairness window of the random-fair scheduler.
    SchedulerB,
}

impl From<Axis> for SweepAxis {
    fn from(axis: Axis) -> Self {
        match axis {
            Axis::N => SweepAxis::N,
            Axis::D => SweepAxis::D,
            Axis::SchedulerB => SweepAxis::SchedulerB,
        }
    }
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Generate a graph and print its edge list.
    Gen {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long)]
        n: usize,
        /// Diameter bound (random family only).
        #[arg(long)]
        d: Option<u32>,
        /// Extra-edge probability (random family only).
        #[arg(long, default_value_t = 0.15)]
        extra_edge_prob: f64,
        /// Generator seed (random family only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge-list destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Path,
    Cycle,
    Complete,
    Wheel,
    Random,
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Run a single seed of an experiment config and save its trace.
    Record {
        /// Experiment config file (TOML).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Trace destination (JSON lines); stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Re-execute a trace from its header and verify byte-identical output.
    Replay {
        /// Trace file (JSON lines).
        #[arg(long)]
        trace: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}

fn execute(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Run { config, output } => cmd_run(&config, output, cli.jobs),
        Command::Sweep { config, axis, values, csv, output } => {
            cmd_sweep(&config, axis, &values, csv, output, cli.jobs)
        }
        Command::Counterexample => Ok(cmd_counterexample()),
        Command::Graph { command } => cmd_graph(command),
        Command::Trace { command } => cmd_trace(command),
    }
}

fn load_config(path: &PathBuf) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    Ok(ExperimentConfig::from_toml(&text)?)
}

fn emit(json: String, output: Option<PathBuf>) -> anyhow::Result<()> {
    match output {
        Some(path) => {
            fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn summary_line(s: &Summary) -> String {
    format!(
        "{}/{} runs stabilized (median round {}, max {}), {} violations, {} over budget",
        s.stabilized,
        s.runs,
        s.median_stabilization_round.map_or_else(|| "-".into(), |r| r.to_string()),
        s.max_stabilization_round.map_or_else(|| "-".into(), |r| r.to_string()),
        s.total_violations,
        s.budget_exceeded,
    )
}

fn cmd_run(path: &PathBuf, output: Option<PathBuf>, jobs: Option<usize>) -> anyhow::Result<i32> {
    let config = load_config(path)?;
    let report = run_experiment(&config, jobs)?;
    eprintln!("{}", summary_line(&report.summary));
    let destination = output.or_else(|| report.config.output.clone().map(PathBuf::from));
    emit(report.to_json(), destination)?;
    Ok(report.verdict().exit_code())
}

fn cmd_sweep(
    path: &PathBuf,
    axis: Axis,
    values: &[u64],
    csv: Option<PathBuf>,
    output: Option<PathBuf>,
    jobs: Option<usize>,
) -> anyhow::Result<i32> {
    let config = load_config(path)?;
    let report = sweep(&config, axis.into(), values, jobs)?;
    for row in &report.rows {
        eprintln!("value {}: {}", row.value, summary_line(&row.summary));
    }
    if let Some(path) = csv {
        fs::write(&path, report.to_csv())
            .with_context(|| format!("writing {}", path.display()))?;
        eprintln!("csv written to {}", path.display());
    }
    emit(report.to_json(), output)?;
    Ok(report.verdict().exit_code())
}

fn cmd_counterexample() -> i32 {
    let report = run_livelock_check();
    println!("flawed clock on the 8-node wheel (c = 2, D = 2), 56-step fair schedule");
    println!("first block of activations:");
    for s in &report.first_block {
        println!(
            "  step {}: v{} {:>2} -> {:<2} ({})",
            s.step, s.node, s.before.to_string(), s.after.to_string(), s.kind
        );
    }
    println!("main-turn advances across all 56 steps: {}", report.advances_seen);
    println!(
        "rim rotation after each 8-step block: {}",
        if report.rotations_ok { "reproduced" } else { "MISMATCH" }
    );
    println!(
        "orbit closed (step 56 equals the initial configuration): {}",
        if report.orbit_closed { "yes" } else { "NO" }
    );
    if report.is_livelock() {
        println!("verdict: pass — the schedule is fair yet no clock ever advances");
        0
    } else {
        for failure in &report.failures {
            eprintln!("check failure: {failure}");
        }
        println!("verdict: FAILED — the replay deviated from the published behavior");
        1
    }
}

fn cmd_graph(command: GraphCommand) -> anyhow::Result<i32> {
    let GraphCommand::Gen { family, n, d, extra_edge_prob, seed, output } = command;
    let graph = match family {
        Family::Path => Graph::path(n)?,
        Family::Cycle => Graph::cycle(n)?,
        Family::Complete => Graph::complete(n)?,
        Family::Wheel => Graph::wheel(n)?,
        Family::Random => {
            let d = d.context("--d is required for the random family")?;
            Graph::random_bounded_diameter(n, d, extra_edge_prob, seed)?
        }
    };
    eprintln!(
        "n = {}, edges = {}, diameter = {}",
        graph.node_count(),
        graph.edges().len(),
        graph.diameter()?
    );
    match output {
        Some(path) => fs::write(&path, graph.to_edge_list())
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", graph.to_edge_list()),
    }
    Ok(0)
}

fn cmd_trace(command: TraceCommand) -> anyhow::Result<i32> {
    match command {
        TraceCommand::Record { config, seed, output } => {
            let config = load_config(&config)?;
            let trace = record_trace(&config, seed)?;
            match output {
                Some(path) => {
                    fs::write(&path, trace.to_jsonl_string())
                        .with_context(|| format!("writing {}", path.display()))?;
                    eprintln!(
                        "trace written to {} ({} steps)",
                        path.display(),
                        trace.steps.len()
                    );
                }
                None => print!("{}", trace.to_jsonl_string()),
            }
            Ok(0)
        }
        TraceCommand::Replay { trace: path } => {
            let file = fs::File::open(&path)
                .with_context(|| format!("opening trace {}", path.display()))?;
            let trace = Trace::read_jsonl(BufReader::new(file))?;
            if replay_matches(&trace)? {
                println!(
                    "replay matches: {} steps on {} nodes reproduced byte for byte",
                    trace.steps.len(),
                    trace.header.n
                );
                Ok(0)
            } else {
                println!("replay MISMATCH: the trace does not reproduce from its header");
                Ok(1)
            }
        }
    }
}
