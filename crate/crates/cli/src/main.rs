mod local;
mod remote;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use activediag_core::model::FaultSemantics;
use activediag_core::policies::Policy;

/// Active diagnosis of combinational circuits: reasoning, control-vector
/// policies, scenario harness and session service.
#[derive(Debug, Parser)]
#[command(name = "activediag", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a netlist and report its encoding.
    Parse {
        #[command(flatten)]
        model: ModelArgs,
        /// Print the netlist back in bench form.
        #[arg(long)]
        emit: bool,
    },
    /// Minimal-cardinality diagnoses for an observation.
    Diagnose {
        #[command(flatten)]
        model: ModelArgs,
        /// Observation, e.g. `a=0,b=0,i=1,o1=0` or `!a & !b & i & !o1`.
        #[arg(long)]
        obs: String,
    },
    /// Expected number of remaining diagnoses after applying a control vector.
    Expect {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        obs: String,
        /// Control vector to evaluate; defaults to the controls in `--obs`.
        #[arg(long)]
        control: Option<String>,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[arg(long, value_enum, default_value_t = EvalMode::Auto)]
        eval: EvalMode,
    },
    /// One policy step from an observation.
    Suggest {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        obs: String,
        #[arg(long, value_parser = parse_policy, default_value = "greedy")]
        policy: Policy,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Closed-loop scenarios against injected faults.
    Run {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated policies.
        #[arg(long, value_delimiter = ',', value_parser = parse_policy, default_value = "greedy")]
        policy: Vec<Policy>,
        #[command(flatten)]
        sampler: SamplerArgs,
        /// Step budget per scenario.
        #[arg(long, default_value_t = 15)]
        steps: usize,
        /// Scenarios per policy; scenario `i` uses seed `seed + i`.
        #[arg(long, default_value_t = 1)]
        scenarios: u64,
        #[arg(long, default_value_t = 2)]
        cardinality: usize,
        /// Keep inputs fixed across steps (`stationary`) or redraw them (`random`).
        #[arg(long, value_enum, default_value_t = Inputs::Stationary)]
        inputs: Inputs,
        /// Directory for per-scenario traces and `summary.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a benchmark of hard-to-isolate injected faults.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        faults: usize,
        #[arg(long, default_value_t = 100)]
        top: usize,
        #[arg(long, default_value_t = 2)]
        cardinality: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit `n0 * p^k + n_inf` to a series read from CSV.
    Fit {
        /// A trace CSV (uses `k`, `remaining`), a two-column `x,y` CSV, or
        /// one value per line.
        file: PathBuf,
    },
    /// Start the session service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Extra `*.bench` models, with optional `<stem>.controls` sidecars.
        #[arg(long)]
        models_dir: Option<PathBuf>,
        /// Append-only session log, replayed at startup.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Talk to a running session service.
    Session {
        #[arg(long, env = "ACTIVEDIAG_URL", default_value = "http://127.0.0.1:8080")]
        url: String,
        #[command(subcommand)]
        command: remote::SessionCommand,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Built-in circuit name (`demux`, `74182`) or a bench netlist path.
    #[arg(long, default_value = "74182")]
    model: String,
    /// Comma-separated control inputs; `none` for no controls. Built-ins
    /// default to their usual selection.
    #[arg(long)]
    controls: Option<String>,
    #[arg(long, value_parser = parse_semantics, default_value = "strong")]
    semantics: FaultSemantics,
}

impl ModelArgs {
    fn controls(&self) -> Vec<String> {
        match self.controls.as_deref() {
            Some("none") | Some("") => Vec::new(),
            Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            None => match self.model.as_str() {
                "demux" => vec!["a".into(), "b".into()],
                "74182" => ["P0", "P1", "P2", "P3"].map(String::from).to_vec(),
                _ => Vec::new(),
            },
        }
    }
}

#[derive(Debug, Args)]
struct SamplerArgs {
    /// SEM threshold for the sampled expectation.
    #[arg(long, default_value_t = 0.1)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Auto,
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Inputs {
    Stationary,
    Random,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::parse(s).ok_or_else(|| format!("unknown policy `{s}` (greedy, atpg, probe, random, exhaustive)"))
}

fn parse_semantics(s: &str) -> Result<FaultSemantics, String> {
    FaultSemantics::parse(s).ok_or_else(|| format!("unknown semantics `{s}` (weak, strong)"))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "activediag_service=info,warn".into()),
        )
        .init();
    match Cli::parse().command {
        Command::Serve { addr, models_dir, log } => remote::serve(&addr, models_dir.as_deref(), log.as_deref()).await,
        Command::Session { url, command } => remote::session(&url, command).await,
        other => tokio::task::spawn_blocking(move || local::run(other)).await?,
    }
}
