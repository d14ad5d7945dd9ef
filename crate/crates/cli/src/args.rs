use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypersat_core::model::DropoutSite;
use hypersat_core::solver::Monitor;
use hypersat_core::{HypergraphMode, SolveConfig};

use crate::bench::Method;

/// Unsupervised hypergraph neural solver for Weighted MaxSAT.
#[derive(Debug, Parser)]
#[command(name = "hypersat", version)]
pub struct Cli {
    /// Base seed; per-instance seeds are derived from it and the instance name.
    #[arg(long, global = true, env = "HYPERSAT_SEED", default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random weighted 3-SAT instances as WCNF files.
    Gen(GenArgs),
    /// Train on each instance and report the sampled assignment.
    Solve(SolveArgs),
    /// Run methods over a directory of instances and write a CSV.
    Bench(BenchArgs),
    /// Run a reference solver (exhaustive or local search).
    Oracle(OracleArgs),
    /// Compare model gradients against finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Variables per instance.
    #[arg(short, long, required_unless_present = "family")]
    pub n: Option<usize>,
    /// Clauses per instance.
    #[arg(short, long, required_unless_present = "family")]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub weight_lo: u64,
    #[arg(long, default_value_t = 10)]
    pub weight_hi: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// File name prefix for plain random instances.
    #[arg(long, default_value = "rand3sat")]
    pub prefix: String,
    /// Generate a SATLIB-shaped family instead (uf100-430, uuf250-1065, ...),
    /// keeping only candidates classified as satisfiable (uf) or not (uuf).
    #[arg(long, conflicts_with_all = ["n", "m"])]
    pub family: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SiteArg {
    Probs,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MonitorArg {
    Total,
    Task,
}

/// Overrides applied on top of the default [`SolveConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Shared-representation loss weight (0 disables it).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Bernoulli samples drawn from the final probabilities.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Attention dropout probability.
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, value_enum)]
    pub dropout_site: Option<SiteArg>,
    /// Loss watched by early stopping.
    #[arg(long, value_enum)]
    pub monitor: Option<MonitorArg>,
    /// Drop the cross-attention transformer block.
    #[arg(long)]
    pub no_transformer: bool,
    /// One node per variable instead of per literal (sigmoid head).
    #[arg(long)]
    pub variable_nodes: bool,
}

impl ConfigArgs {
    pub fn apply(&self, mut config: SolveConfig) -> SolveConfig {
        if let Some(v) = self.epochs {
            config.max_epochs = v;
        }
        if let Some(v) = self.lr {
            config.learning_rate = v;
        }
        if let Some(v) = self.lambda {
            config.lambda = v;
        }
        if let Some(v) = self.patience {
            config.early_stop_patience = v;
        }
        if let Some(v) = self.tolerance {
            config.early_stop_tolerance = v;
        }
        if let Some(v) = self.samples {
            config.num_samples = v;
        }
        if let Some(v) = self.dropout {
            config.attention_dropout = v;
        }
        if let Some(site) = self.dropout_site {
            config.dropout_site = match site {
                SiteArg::Probs => DropoutSite::AttentionProbs,
                SiteArg::Output => DropoutSite::AttentionOutput,
            };
        }
        if let Some(m) = self.monitor {
            config.monitor = match m {
                MonitorArg::Total => Monitor::Total,
                MonitorArg::Task => Monitor::Task,
            };
        }
        if self.no_transformer {
            config.use_transformer = false;
        }
        if self.variable_nodes {
            config.mode = HypergraphMode::Variable;
        }
        config
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// WCNF/CNF files, directories or glob patterns.
    #[arg(required = true)]
    pub inputs: Vec<String>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Write JSON lines here instead of stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Parallel workers (default: number of cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Directory of WCNF/CNF files; its name is the dataset label.
    pub dataset: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "hypersat")]
    pub methods: Vec<Method>,
    /// Seeds to run each method with (default: the global seed).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Use only the first N instances (sorted by file name).
    #[arg(long)]
    pub limit: Option<usize>,
    /// CSV destination (default: stdout, with the summary on stderr).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Flips per local-search run.
    #[arg(long, default_value_t = 100_000)]
    pub ls_steps: u64,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleMethod {
    Exhaustive,
    LocalSearch,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(required = true)]
    pub inputs: Vec<String>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    pub method: OracleMethod,
    /// Flips for local search.
    #[arg(long, default_value_t = 100_000)]
    pub steps: u64,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Variables in the random instance (at most 12).
    #[arg(short, long, default_value_t = 6)]
    pub n: usize,
    /// Clauses (default: round(4.26 n)).
    #[arg(short, long)]
    pub m: Option<usize>,
    /// Override the hidden width (the default is 1 for n < 9).
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}
