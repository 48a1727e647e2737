//! Command-line front end for the Newcomblike decision-problem workbench.

mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "newcomblike",
    version,
    about = "Workbench for Newcomblike sequential decision problems",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem for structural violations and report its shape
    Validate(ValidateArgs),
    /// Exact chain quantities and the ex ante gradient at a policy
    Analyze(AnalyzeArgs),
    /// Self-locating belief report at a policy
    Beliefs(BeliefsArgs),
    /// Ratifiability report at a policy
    Ratify(RatifyArgs),
    /// Stationary policies and ex ante optima
    Solve(SolveArgs),
    /// Synthesize samplers, unroll the simulation, and check the expansion
    CompileSim(CompileSimArgs),
    /// Sampler-budget convergence study over a list of budgets
    Approx(ApproxArgs),
    /// Monte Carlo validation of the exact solver
    Simulate(SimulateArgs),
    /// Run the full acceptance suite over the built-in fixtures
    VerifyPaper(VerifyPaperArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Gt,
    Gsgt,
    Lsgt,
    Ggt,
}

#[derive(Args)]
struct OutputArgs {
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report to this file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Problem file, fixture name, or name under ANTHROPIC_CDT_FIXTURES
    problem: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    problem: String,
    /// Comma-separated action probabilities; defaults to uniform
    #[arg(long)]
    policy: Option<String>,
    /// Belief construction for the advantage column of csv sweeps
    #[arg(long, value_enum, default_value_t = Kind::Ggt)]
    kind: Kind,
    /// Comma-separated dependant weights (ggt only)
    #[arg(long)]
    rho: Option<String>,
    /// Sweep resolution for csv output
    #[arg(long, default_value_t = 200)]
    grid: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BeliefsArgs {
    problem: String,
    /// Comma-separated action probabilities
    #[arg(long)]
    policy: String,
    #[arg(long, value_enum, default_value_t = Kind::Ggt)]
    kind: Kind,
    /// Comma-separated dependant weights (ggt only)
    #[arg(long)]
    rho: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RatifyArgs {
    problem: String,
    /// Comma-separated action probabilities
    #[arg(long)]
    policy: String,
    #[arg(long, value_enum, default_value_t = Kind::Ggt)]
    kind: Kind,
    /// Comma-separated dependant weights (ggt only)
    #[arg(long)]
    rho: Option<String>,
    /// Ratifiability tolerance on unit-scaled utilities
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SolveArgs {
    problem: String,
    /// Edge-scan subdivisions
    #[arg(long, default_value_t = 2000)]
    grid: usize,
    /// Multi-start count for interior searches
    #[arg(long, default_value_t = 24)]
    restarts: usize,
    /// Ratifiability tolerance on unit-scaled utilities
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CompileSimArgs {
    problem: String,
    /// Policy at which the expansion is checked; defaults to uniform
    #[arg(long)]
    policy: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ApproxArgs {
    problem: String,
    /// Comma-separated sampler budgets
    #[arg(long, default_value = "4,8,16,32,64")]
    n_list: String,
    #[arg(long, default_value_t = 2000)]
    grid: usize,
    #[arg(long, default_value_t = 24)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    problem: String,
    /// Comma-separated action probabilities
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 100_000)]
    rollouts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyPaperArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = commands::run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}
