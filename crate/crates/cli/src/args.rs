use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use disttomo_core::experiment::Ensemble;
use disttomo_core::NodePartition;

#[derive(Debug, Parser)]
#[command(
    name = "disttomo",
    version,
    about = "Distributed-node projected least-squares tomography"
)]
pub struct Cli {
    /// Worker threads for the simulation pool.
    #[arg(long, global = true, env = "DISTTOMO_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the MUB designs for k = 1..max-k qubits and check them.
    VerifyDesigns(VerifyArgs),
    /// Run a tomography experiment and write one CSV row per run.
    Simulate(SimulateArgs),
    /// Fit the empirical error scaling law to simulation CSV files.
    Fit(FitArgs),
    /// Evaluate the error bounds and sample complexity.
    Bounds(BoundsArgs),
    /// Draw a log-log scatter plot of a CSV file as SVG.
    Plot(PlotArgs),
    /// Run a distributed acquisition session and print its frequency table.
    Session(SessionArgs),
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 5)]
    pub max_k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnsembleArg {
    Haar,
    NoisyGhz,
    LocallyRandomGhz,
}

impl From<EnsembleArg> for Ensemble {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::Haar => Ensemble::Haar,
            EnsembleArg::NoisyGhz => Ensemble::NoisyGhz,
            EnsembleArg::LocallyRandomGhz => Ensemble::LocallyRandomGhz,
        }
    }
}

fn parse_partition(s: &str) -> Result<NodePartition, String> {
    s.parse().map_err(|e: disttomo_core::Error| e.to_string())
}

/// Accepts plain integers and exact floating forms such as `1e5`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a count"))?;
    if v >= 0.0 && v.fract() == 0.0 && v < u64::MAX as f64 {
        Ok(v as u64)
    } else {
        Err(format!("{s:?} is not a non-negative integer"))
    }
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// JSON file with experiment settings; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n_qubits: Option<usize>,
    /// Node partition such as `2,1` or `2+1`; repeat for several.
    #[arg(long = "partition", value_parser = parse_partition)]
    pub partitions: Vec<NodePartition>,
    #[arg(long, value_enum)]
    pub ensemble: Option<EnsembleArg>,
    #[arg(long)]
    pub num_states: Option<usize>,
    /// Comma-separated shot counts.
    #[arg(long, value_delimiter = ',', value_parser = parse_count)]
    pub shots: Vec<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Two-node split for GHZ ensembles.
    #[arg(long, value_parser = parse_partition)]
    pub node_split: Option<NodePartition>,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Lift the desk-scale limits (n ≤ 5, N ≤ 10⁶).
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Also write the coefficients as CSV.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, value_parser = parse_partition)]
    pub partition: NodePartition,
    #[arg(long, value_parser = parse_count)]
    pub shots: u64,
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    /// Target trace-norm accuracy for the sample complexity and failure
    /// probability.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "dimension")]
    pub x: String,
    #[arg(long, default_value = "trace_error")]
    pub y: String,
    #[arg(long, default_value = "partition")]
    pub group: String,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransportArg {
    InProcess,
    Stream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SessionState {
    Haar,
    Ghz,
}

#[derive(Debug, Args)]
pub struct SessionArgs {
    #[arg(long, value_parser = parse_partition)]
    pub partition: NodePartition,
    #[arg(long, value_parser = parse_count, default_value = "1000")]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = TransportArg::InProcess)]
    pub transport: TransportArg,
    #[arg(long, value_enum, default_value_t = SessionState::Haar)]
    pub state: SessionState,
    /// Write the frequency table here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
