use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "l1ssl",
    version,
    about = "Semi-supervised learning with L1-norm Laplacian regularization"
)]
pub struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub workers: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-moons comparison of L1-SSL and L2-SSL under label noise.
    MoonsDemo(MoonsArgs),
    /// Classify a feature matrix from a partial labeling.
    Classify(ClassifyArgs),
    /// Accuracy of both methods over a grid of label-noise fractions.
    NoiseSweep(SweepArgs),
    /// Co-refine a visual and a textual bag-of-words matrix.
    RefineBow(RefineArgs),
    /// Smallest eigenpairs of a graph's normalized Laplacian.
    EigenDump(EigenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// k = 4, λ = 0.01, m = 20, σ = 1
    MnistStyle,
    /// k = 15, λ = 0.010, γ = 0.005, m = 30
    Table2Visual,
    /// k = 15, λ = 0.005, γ = 0.075, m = 35
    Table2Textual,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Neighbors per vertex in the k-NN graph.
    #[arg(long)]
    pub k: Option<usize>,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Number of Laplacian eigenvectors in the basis.
    #[arg(long)]
    pub m: Option<usize>,
    /// Keep only mutual k-NN edges instead of the union.
    #[arg(long)]
    pub mutual: bool,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Debug, Clone, Args)]
pub struct MoonsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Regularization weight of L1-SSL.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Regularization weight of the L2-SSL baseline.
    #[arg(long)]
    pub lambda_l2: Option<f64>,
    /// Number of points (even).
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub labels_per_class: usize,
    /// Fraction of each class's labels that is flipped.
    #[arg(long, default_value_t = 0.2)]
    pub noise_fraction: f64,
    #[arg(long, default_value_t = 25)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; metrics go to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Feature CSV, one sample per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Labeled points, `index,class` per line.
    #[arg(long)]
    pub labels: PathBuf,
    /// Ground-truth classes, one per line.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for predictions and metrics.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda_l2: Option<f64>,
    /// Feature CSV; two-moons data is generated per run when omitted.
    #[arg(long, requires = "truth")]
    pub input: Option<PathBuf>,
    /// Ground-truth classes for `--input`.
    #[arg(long, requires = "input")]
    pub truth: Option<PathBuf>,
    /// Number of generated two-moons points.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Comma-separated noise fractions.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4")]
    pub noise_fraction: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub labels_per_class: usize,
    #[arg(long, default_value_t = 25)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct RefineArgs {
    /// Visual then textual BOW file.
    #[arg(long, num_args = 1, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Clamp refined scores at zero.
    #[arg(long)]
    pub clamp: bool,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EigenArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Feature CSV.
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    pub input: Option<PathBuf>,
    /// Weighted edge list `i,j,w` used instead of a k-NN graph.
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}
