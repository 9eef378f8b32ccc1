//! `lrga` — experiment and verification runner.
//!
//! Every subcommand writes a machine-readable data file plus a
//! `<command>.manifest.json` run record into the output directory (`--out`,
//! then `$LRGA_OUT_DIR`, then the working directory). Exit codes: 0 on
//! success, 1 when a checked property is violated, 2 on usage or input
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lrga_core::alloc_track::CountingAllocator;
use lrga_core::wl::RefinementKind;

mod commands;
mod output;

use output::{ReportFormat, RunContext};

// Counts every heap allocation so the bench subcommand can report the peak
// auxiliary footprint of a forward pass.
#[global_allocator]
static ALLOCATOR: CountingAllocator = CountingAllocator::new();

#[derive(Parser)]
#[command(name = "lrga", version, about = "Low-rank attention experiment runner")]
struct Cli {
    /// Base RNG seed for randomized subcommands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory for reports (default: $LRGA_OUT_DIR, then ".").
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Data-file format; each subcommand has a natural default.
    #[arg(long, global = true, value_enum)]
    format: Option<ReportFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pairwise refinement-based isomorphism screening of graph6 files.
    Iso(IsoArgs),
    /// Run the polynomial-kernel and monomial-decomposition identity suites.
    KernelCheck(KernelCheckArgs),
    /// Time the low-rank attention forward pass across input sizes.
    LrgaBench(LrgaBenchArgs),
    /// Random-feature factorization concentration sweep.
    Factorize(FactorizeArgs),
    /// Monomial-regression sample-complexity experiment.
    Learn(LearnArgs),
}

#[derive(Args)]
struct IsoArgs {
    /// Refinement algorithm deciding the verdicts.
    #[arg(long, value_enum, default_value_t = Algorithm::Fwl2)]
    algorithm: Algorithm,
    /// graph6 files; all records across all files are compared pairwise
    /// (at least two records in total).
    #[arg(required = true, num_args = 1..)]
    files: Vec<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Wl1,
    Fwl2,
}

impl Algorithm {
    fn kind(self) -> RefinementKind {
        match self {
            Algorithm::Wl1 => RefinementKind::Wl1,
            Algorithm::Fwl2 => RefinementKind::Fwl2,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Algorithm::Wl1 => "wl1",
            Algorithm::Fwl2 => "fwl2",
        }
    }
}

#[derive(Args)]
struct KernelCheckArgs {
    /// Random (blocks, exponent) cases for the kernel identity.
    #[arg(long, default_value_t = 200)]
    kernel_cases: usize,
    /// Maximum total degree of the sampled exponents.
    #[arg(long, default_value_t = 4)]
    max_degree: u32,
    /// Maximum input dimension of the sampled vectors.
    #[arg(long, default_value_t = 4)]
    max_dim: usize,
    /// Random evaluation points per monomial in the decomposition suite.
    #[arg(long, default_value_t = 20)]
    lemma_points: usize,
    /// Corrupt one feature vector to prove the suite detects violations.
    #[arg(long, hide = true)]
    inject_perturbation: bool,
}

#[derive(Args)]
struct LrgaBenchArgs {
    /// Comma-separated node counts, strictly ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    /// Attention rank.
    #[arg(long, default_value_t = 32)]
    kappa: usize,
    /// Input feature width.
    #[arg(long, default_value_t = 16)]
    d_in: usize,
    /// Timed repetitions per size (the median is reported).
    #[arg(long, default_value_t = 5)]
    trials: usize,
}

#[derive(Args)]
struct FactorizeArgs {
    /// Number of nodes.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Comma-separated random-feature dimensions.
    #[arg(long, value_delimiter = ',', required = true)]
    d_list: Vec<usize>,
    /// Feature distribution (unit variance either way).
    #[arg(long, value_enum, default_value_t = DistKind::Uniform)]
    dist: DistKind,
    /// Independent draws per dimension.
    #[arg(long, default_value_t = 3)]
    trials: u64,
    /// Edge probability of the random test graph.
    #[arg(long, default_value_t = 0.5)]
    edge_prob: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistKind {
    Uniform,
    Gaussian,
}

#[derive(Args)]
struct LearnArgs {
    /// Monomial exponents, comma-separated (dimension = number of entries).
    #[arg(long, value_delimiter = ',', required = true)]
    delta: Vec<u32>,
    /// Training sample sizes, strictly ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    m_grid: Vec<usize>,
    /// Seeds over which per-size medians are taken.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    seeds: Vec<u64>,
    /// Hidden-layer width.
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Gradient-descent learning rate.
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// Gradient-descent steps; 0 emits an initial-loss-only report.
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Minibatch size (full batch when absent).
    #[arg(long)]
    batch: Option<usize>,
    /// First-layer weight scale at initialization.
    #[arg(long, default_value_t = 1.0)]
    init_scale: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match RunContext::new(cli.seed, cli.out.clone(), cli.format) {
        Ok(ctx) => ctx,
        Err(e) => return e.report(),
    };
    let result = match &cli.command {
        Command::Iso(args) => commands::run_iso(&ctx, args),
        Command::KernelCheck(args) => commands::run_kernel_check(&ctx, args),
        Command::LrgaBench(args) => commands::run_lrga_bench(&ctx, args),
        Command::Factorize(args) => commands::run_factorize(&ctx, args),
        Command::Learn(args) => commands::run_learn(&ctx, args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
