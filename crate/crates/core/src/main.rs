//! Command line driver: single simulation runs, snapshot legitimacy checks,
//! and property campaigns over graph/seed batches.
//!
//! Exit codes are the cross-process contract: 0 success/converged/legitimate,
//! 1 usage or I/O error, 2 round cap reached, 3 snapshot not legitimate,
//! 4 campaign found violations.

use clap::{Args, Parser, Subcommand};
use railelect::analysis::{is_legitimate, layer_stations, train_value};
use railelect::campaign::{run_campaign, CampaignConfig, CampaignError, Suite};
use railelect::engine::{
    run, ConvergenceDetector, EngineError, Observer, RandomSource, RunOutcome, ScriptError,
    ScriptTable,
};
use railelect::fuzz::{generate, FuzzError, FuzzSpec};
use railelect::graph::{GraphError, GraphSpec};
use railelect::params::ParamsError;
use railelect::trace::{
    read_snapshot, MarkedTracker, MetricsWriter, Summary, TraceError, TraceWriter,
};
use railelect::{ProtocolParams, Wagon};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use thiserror::Error;

#[derive(Parser)]
#[command(name = "railelect", version, about = "Anonymous leader election simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write trace, metrics, and summary records.
    Simulate(SimulateArgs),
    /// Check whether a snapshot is a legitimate configuration.
    Check(CheckArgs),
    /// Run one property suite over a batch of seeded runs.
    Campaign(CampaignArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Graph spec: ring:N, path:N, complete:N, grid:RxC, tree:N:SEED,
    /// gnp:N:P:SEED, or file:PATH.
    #[arg(long)]
    graph: String,
    /// Train length (wagons per complete train, counter bit width).
    #[arg(long, default_value_t = 5)]
    bign: u8,
    /// Seed for the round randomness and any init mode without its own seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Initial configuration: uniform, no-leader-coherent, all-leaders,
    /// near-overflow[:SEED[:DEFICIT]], colliding-marked, from-file:PATH.
    /// A mode takes an optional :SEED.
    #[arg(long, default_value = "uniform")]
    init: String,
    #[arg(long, default_value_t = 1_000_000)]
    max_rounds: u64,
    /// Write one configuration record per round to PATH.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write one metrics record per round to PATH.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Round randomness: seeded, zero, one, or script:PATH.
    #[arg(long, default_value = "seeded")]
    rng: String,
    /// Rounds a legitimate configuration must persist before the run counts
    /// as converged.
    #[arg(long, default_value_t = 1000)]
    verify_window: u64,
    /// Run even when the train length is below 1 + ceil(log2 n). The summary
    /// is labeled out-of-regime; single-leader convergence is not guaranteed
    /// there.
    #[arg(long = "allow-small-N")]
    allow_small_n: bool,
}

#[derive(Args)]
struct CheckArgs {
    /// File holding configuration records; the last one is checked.
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    graph: String,
    #[arg(long, default_value_t = 5)]
    bign: u8,
}

#[derive(Args)]
struct CampaignArgs {
    /// One of: closure, leader-creation, marked-vanish, train-incr, leg-grow,
    /// convergence, local-error-purge.
    #[arg(long)]
    suite: String,
    /// Comma-separated graph specs.
    #[arg(long)]
    graphs: String,
    #[arg(long, default_value_t = 5)]
    bign: u8,
    /// Runs per graph; run k uses seed SEED + k.
    #[arg(long, default_value_t = 10)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report to PATH instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Override the suite's round cap.
    #[arg(long)]
    max_rounds: Option<u64>,
    /// Override the suite's post-legitimacy watch window.
    #[arg(long)]
    verify_window: Option<u64>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Fuzz(#[from] FuzzError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(
        "train length {got} is below the bound {need} for this graph; \
         pass --allow-small-N to run anyway"
    )]
    OutOfRegime { got: u8, need: u8 },
    #[error("unknown rng mode {0:?} (expected seeded, zero, one, or script:PATH)")]
    BadRng(String),
    #[error("snapshot has {got} nodes but the graph has {want}")]
    SnapshotMismatch { got: usize, want: usize },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests land here too; keep their exit at 0
            // and reserve 1 for actual usage errors (2 means round cap).
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Check(args) => cmd_check(args),
        Command::Campaign(args) => cmd_campaign(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn parse_rng(spec: &str, seed: u64) -> Result<RandomSource, CliError> {
    match spec {
        "seeded" => Ok(RandomSource::seeded(seed)),
        "zero" => Ok(RandomSource::forced_zero()),
        "one" => Ok(RandomSource::forced_one()),
        other => match other.strip_prefix("script:") {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.into(),
                    source,
                })?;
                Ok(RandomSource::scripted(ScriptTable::parse(&text)?))
            }
            None => Err(CliError::BadRng(other.to_string())),
        },
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })
}

fn cmd_simulate(args: SimulateArgs) -> Result<u8, CliError> {
    let graph = args.graph.parse::<GraphSpec>()?.build()?;
    let params = ProtocolParams::new(args.bign)?;
    let need = ProtocolParams::min_len_for_nodes(graph.node_count());
    let in_regime = args.bign >= need;
    if !in_regime && !args.allow_small_n {
        return Err(CliError::OutOfRegime {
            got: args.bign,
            need,
        });
    }
    let init = FuzzSpec::parse(&args.init, args.seed)?;
    let initial = generate(&init, &graph, &params)?;
    let rng = parse_rng(&args.rng, args.seed)?;

    let budget = railelect::analysis::DEFAULT_EXPANSION_BUDGET;
    let mut tracer = match &args.trace {
        Some(path) => Some(TraceWriter::new(create(path)?, 1, false, budget)),
        None => None,
    };
    let mut metrics = match &args.metrics {
        Some(path) => Some(MetricsWriter::new(create(path)?, budget)),
        None => None,
    };
    let mut marked = MarkedTracker::default();
    let mut detector = ConvergenceDetector::new(args.verify_window);
    let mut observers: Vec<&mut dyn Observer> = Vec::new();
    if let Some(t) = tracer.as_mut() {
        observers.push(t);
    }
    if let Some(m) = metrics.as_mut() {
        observers.push(m);
    }
    observers.push(&mut marked);
    observers.push(&mut detector);

    let result = run(
        initial,
        &graph,
        &rng,
        &params,
        args.max_rounds,
        &mut observers,
    )?;
    let summary = Summary::from_run(&result, &graph, &params, marked.last_marked_round, in_regime);
    let line = summary.render();
    if let Some(t) = tracer {
        t.finish().map_err(EngineError::from)?;
    }
    if let Some(m) = metrics {
        let mut out = m.into_inner();
        writeln!(out, "{line}").map_err(EngineError::from)?;
        out.flush().map_err(EngineError::from)?;
    }
    println!("{line}");
    Ok(match result.outcome {
        RunOutcome::Converged { .. } => 0,
        RunOutcome::RoundCap => 2,
    })
}

fn cmd_check(args: CheckArgs) -> Result<u8, CliError> {
    let graph = args.graph.parse::<GraphSpec>()?.build()?;
    let params = ProtocolParams::new(args.bign)?;
    let config = read_snapshot(&args.snapshot, &params)?;
    if config.node_count() != graph.node_count() {
        return Err(CliError::SnapshotMismatch {
            got: config.node_count(),
            want: graph.node_count(),
        });
    }
    let Some(leader) = is_legitimate(&config, &graph, &params) else {
        println!("not-legitimate");
        return Ok(3);
    };
    println!("legitimate leader={leader}");
    let b: Vec<Wagon> = layer_stations(&config, &graph, leader)
        .iter()
        .map(|layer| layer.stations[0].1.expect("legitimate layers are loaded"))
        .collect();
    for (k, w) in b.iter().enumerate() {
        let q = w.idx as usize;
        let m = k.min(params.train_len() as usize - 1 - q);
        let span: Vec<Wagon> = (0..=m).map(|j| b[k - j]).collect();
        println!(
            "layer={k} idx={q} value={} expected={}",
            train_value(&span),
            (k as u64) >> q,
        );
    }
    Ok(0)
}

fn cmd_campaign(args: CampaignArgs) -> Result<u8, CliError> {
    let suite: Suite = args.suite.parse()?;
    let graphs = args
        .graphs
        .split(',')
        .map(|g| g.parse::<GraphSpec>())
        .collect::<Result<Vec<_>, _>>()?;
    let config = CampaignConfig {
        suite,
        graphs,
        train_len: args.bign,
        runs: args.runs,
        seed0: args.seed,
        max_rounds: args.max_rounds,
        verify_window: args.verify_window,
    };
    let report = run_campaign(&config)?;
    let text = report.render();
    match &args.report {
        Some(path) => std::fs::write(path, &text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{text}"),
    }
    Ok(if report.total_violations() > 0 { 4 } else { 0 })
}
