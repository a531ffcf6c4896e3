use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "splitgnn", version, about = "Weighted MaxSAT: instance generation, exact labels, message-passing prediction and solution boosting")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Wall-clock limit per instance, in seconds.
    #[arg(long, global = true, default_value_t = 10.0)]
    pub time_limit: f64,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Cap on boosting steps per instance.
    #[arg(long, global = true)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded dataset of instances, optionally with exact labels.
    Generate(GenerateArgs),
    /// Solve instances and emit run records plus solution files.
    Solve(SolveArgs),
    /// Fit the message-passing model on a labeled dataset.
    Train(TrainArgs),
    /// Summarize run records: mean cost, VarAcc and maximum regret.
    Eval(EvalArgs),
    /// Exact optimum by branch and bound.
    Oracle(OracleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Uf,
    Pl,
    Php,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Literals per clause.
    #[arg(short = 'k', long = "clause-len")]
    pub k: Option<usize>,
    /// Number of variables.
    #[arg(short = 'n', long = "vars")]
    pub n: Option<usize>,
    /// Number of clauses.
    #[arg(short = 'm', long = "clauses")]
    pub m: Option<usize>,
    /// Power-law exponent.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Random clause weights in 1..=100 instead of unit weights.
    #[arg(long)]
    pub weighted: bool,
    #[arg(short = 'p', long)]
    pub pigeons: Option<usize>,
    #[arg(long)]
    pub holes: Option<usize>,
    /// Pigeonhole only: at-most-one clauses become hard.
    #[arg(long)]
    pub hard: bool,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Run the exact oracle and write labels.jsonl.
    #[arg(long)]
    pub label: bool,
    /// Node budget for the oracle; unproven labels are flagged.
    #[arg(long)]
    pub node_budget: Option<u64>,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Usb,
    Mp,
    #[value(name = "mp+usb")]
    MpUsb,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Usb => "usb",
            Mode::Mp => "mp",
            Mode::MpUsb => "mp+usb",
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance files or dataset directories.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Usb)]
    pub mode: Mode,
    /// Model checkpoint (modes mp and mp+usb).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Directory for `<id>.sol` files and `records.jsonl`; records go to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solver name written to records (defaults to the mode).
    #[arg(long)]
    pub solver_name: Option<String>,
    /// Initial real values, whitespace separated (single instance, mode usb).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Gradient step size.
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    /// Steps granted after each improvement before restarting.
    #[arg(long, default_value_t = 100)]
    pub len: usize,
    /// Most variables flipped per greedy step.
    #[arg(long, default_value_t = 10)]
    pub flips: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    /// Write wall_time_ms as null so reruns are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PairingArg {
    Swapped,
    Aligned,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled dataset directory.
    pub dataset: PathBuf,
    /// Checkpoint to write.
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Per-epoch CSV (defaults to the checkpoint path with a .csv extension).
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Continue from a checkpoint, including its optimizer state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Embedding width (default 16).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Message-passing rounds (default 8).
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long, value_enum, default_value_t = PairingArg::Swapped)]
    pub pairing: PairingArg,
    #[arg(long, default_value_t = 2e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// Stop once training VarAcc (percent) reaches this value.
    #[arg(long)]
    pub target_var_acc: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSONL run-record files.
    pub records: Vec<PathBuf>,
    /// Dataset the records refer to; used to re-verify costs and read labels.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// External results: lines of `<instance id> <cost>`; solver named after the file stem.
    #[arg(long)]
    pub external: Vec<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Instance files or dataset directories.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub node_budget: Option<u64>,
    /// Write labels.jsonl into each dataset directory given.
    #[arg(long)]
    pub write_labels: bool,
}
