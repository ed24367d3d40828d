use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use pyrewire::data::Propagation;
use pyrewire::gnn::{Activation, PlanSource};

#[derive(Debug, Parser)]
#[command(
    name = "pyrewire",
    version,
    about = "Train, prune and rewire graph convolutional networks; simulate consensus dynamics",
    after_help = "Every flag can also be given in a JSON file via --config. Keys are the long \
flag names without dashes, e.g. {\"epochs\": 50, \"lr\": 0.2, \"sbm\": true, \"hidden\": [16]}. \
Flags on the command line override the file.",
    args_override_self = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model; writes metrics.csv, spectra.csv, model.ckpt, summary.json
    Train(TrainCmd),
    /// Train, shrink to a planned width, fine-tune; writes width_plan.json, prune_summary.json, model.ckpt
    Prune(PruneCmd),
    /// Train with weight rewiring over a grid of coupling coefficients;
    /// writes convergence.csv, rewire_events.csv, rewire_summary.json
    Rewire(RewireCmd),
    /// Run a consensus system; writes trajectory.csv and verdict.json
    Consensus(ConsensusCmd),
    /// Replay a checkpoint and report hidden-state singular values; writes spectra.csv
    Spectra(SpectraCmd),
}

fn existing_dir(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_dir() {
        Ok(p)
    } else {
        Err(format!("directory {s:?} does not exist"))
    }
}

fn existing_file(s: &str) -> Result<PathBuf, String> {
    let p = PathBuf::from(s);
    if p.is_file() {
        Ok(p)
    } else {
        Err(format!("file {s:?} does not exist"))
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON file of default flag values
    #[arg(long, value_parser = existing_file)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory holding NAME.edges, NAME.features, NAME.labels
    #[arg(long, value_parser = existing_dir, conflicts_with = "sbm")]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "cora")]
    pub name: String,
    /// Use a synthetic stochastic block model instead of files
    #[arg(long)]
    pub sbm: bool,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 100)]
    pub nodes_per_block: usize,
    #[arg(long, default_value_t = 0.1)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 2.0)]
    pub feature_gap: f64,
    /// Training nodes per class [default: 20]
    #[arg(long)]
    pub train_per_class: Option<usize>,
    /// Validation nodes [default: 100 for files, 40 for --sbm]
    #[arg(long)]
    pub val: Option<usize>,
    /// Test nodes [default: 1000 for files, 120 for --sbm]
    #[arg(long)]
    pub test: Option<usize>,
    /// renormalized or raw
    #[arg(long, default_value = "renormalized")]
    pub propagation: Propagation,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Learning rate; no default, typical values are 0.2 to 0.5
    #[arg(long)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub momentum: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    /// L1 weight penalty, for the sparsity-pruning comparison
    #[arg(long, default_value_t = 0.0)]
    pub l1: f64,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "16")]
    pub hidden: Vec<usize>,
    /// swish, relu or identity
    #[arg(long, default_value = "swish")]
    pub activation: Activation,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}

#[derive(Debug, Args)]
pub struct PruneCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, default_value_t = pyrewire::lowrank::DEFAULT_ENERGY_THRESHOLD)]
    pub energy_threshold: f64,
    #[arg(long, default_value_t = 50)]
    pub finetune_epochs: usize,
    /// hidden, features or both
    #[arg(long, default_value = "hidden")]
    pub plan_source: PlanSource,
    /// Smallest planned width [default: class count]
    #[arg(long)]
    pub min_width: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum RewireMode {
    /// Rewire the layer weight graphs during training
    Weights,
    /// Only score candidate links of the data graph
    Data,
}

#[derive(Debug, Args)]
pub struct RewireCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long, value_enum, default_value = "weights")]
    pub mode: RewireMode,
    /// Coupling coefficients to sweep, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub warmup: usize,
    #[arg(long, default_value_t = 10)]
    pub cadence: usize,
    /// Weights with |w| at most this fraction of max|W| are not edges
    #[arg(long, default_value_t = 0.1)]
    pub threshold: f64,
    /// Links added per flagged vertex
    #[arg(long, default_value_t = 1)]
    pub budget: usize,
    /// 0-based layers to watch, comma separated [default: all]
    #[arg(long, value_delimiter = ',')]
    pub layers: Vec<usize>,
    /// Sign-flip this fraction of one layer's weights mid-training
    #[arg(long)]
    pub inject_fraction: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub inject_epoch: usize,
    /// Layer to corrupt [default: last]
    #[arg(long)]
    pub inject_layer: Option<usize>,
    /// Data mode: number of candidate links to report
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct ConsensusCmd {
    #[command(flatten)]
    pub common: Common,
    /// Matrix text followed by one line of initial states
    #[arg(long, value_parser = existing_file, conflicts_with = "graph", required_unless_present = "graph")]
    pub system: Option<PathBuf>,
    /// Edge-list file; the system is I − eps·L
    #[arg(long, value_parser = existing_file)]
    pub graph: Option<PathBuf>,
    /// Step gain for --graph [default: 1/(max degree + 1)]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Initial states for --graph, comma separated [default: 0, 1, …, n-1]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Vec<f64>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
}

#[derive(Debug, Args)]
pub struct SpectraCmd {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = existing_file)]
    pub checkpoint: PathBuf,
    /// Activation the checkpoint was trained with
    #[arg(long, default_value = "swish")]
    pub activation: Activation,
    /// Value of the epoch column
    #[arg(long, default_value_t = 0)]
    pub epoch: usize,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Train(c) => &c.common,
            Command::Prune(c) => &c.common,
            Command::Rewire(c) => &c.common,
            Command::Consensus(c) => &c.common,
            Command::Spectra(c) => &c.common,
        }
    }
}

pub fn out_path(common: &Common, file: &str) -> PathBuf {
    Path::new(&common.out).join(file)
}
