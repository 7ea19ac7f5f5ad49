//! `fforge`: compute and check F-manifold structures from the command line.
//!
//! Exit codes: 0 when every check passes, 1 when a mathematical check
//! fails, 2 for usage or input errors.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "fforge", version, about = "Exact and numeric checks of F-manifold and Frobenius manifold structures")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance for numeric checks (exact checks always demand zero).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Also write the report as JSON to this file.
    #[arg(long, global = true, value_name = "FILE")]
    json: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for genus-zero curve counts of a projective space.
    Gw(GwArgs),
    /// Check a scalar potential against WDVV, flat identity and Euler data.
    Wdvv(WdvvArgs),
    /// Check associativity of a vector potential or structure tensor.
    Assoc(AssocArgs),
    /// Verify the Frobenius structure on the A_n unfolding numerically.
    An(AnArgs),
    /// Build the permutohedral fan and locate vectors in it.
    Fan(FanArgs),
    /// Twist an algebra by an invertible element.
    Twist(TwistArgs),
    /// Verify, decompose and list the spectrum of an algebra.
    Algebra(AlgebraArgs),
}

#[derive(Args, Debug)]
pub struct GwArgs {
    /// Dimension of the projective space.
    #[arg(long)]
    pub r: u32,
    /// Largest curve degree to solve for.
    #[arg(long)]
    pub max_degree: u32,
    /// Build the potential and check WDVV, flat identity and Euler homogeneity.
    #[arg(long)]
    pub check: bool,
    /// Write the potential as a series document.
    #[arg(long, value_name = "FILE")]
    pub potential_out: Option<PathBuf>,
    /// Write the metric document.
    #[arg(long, value_name = "FILE")]
    pub metric_out: Option<PathBuf>,
    /// Write the Euler field document.
    #[arg(long, value_name = "FILE")]
    pub euler_out: Option<PathBuf>,
    /// Write the table as a JSON document.
    #[arg(long, value_name = "FILE")]
    pub table_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct WdvvArgs {
    /// Series document of the potential.
    #[arg(long, value_name = "FILE")]
    pub potential: PathBuf,
    /// Metric document.
    #[arg(long, value_name = "FILE")]
    pub metric: PathBuf,
    /// Euler field document; enables the homogeneity check.
    #[arg(long, value_name = "FILE")]
    pub euler: Option<PathBuf>,
    /// Coordinate index of the flat identity.
    #[arg(long, default_value_t = 0)]
    pub identity: usize,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct AssocInput {
    /// Vector potential document `{"components": [series, ...]}`.
    #[arg(long, value_name = "FILE")]
    pub potential: Option<PathBuf>,
    /// Structure tensor document.
    #[arg(long, value_name = "FILE")]
    pub tensor: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AssocArgs {
    #[command(flatten)]
    pub input: AssocInput,
}

#[derive(Args, Debug)]
pub struct AnArgs {
    /// Degree parameter of the singularity z^{n+1}.
    #[arg(long, value_parser = clap::value_parser!(u32).range(2..=12))]
    pub n: u32,
    /// JSON list of the n coefficients a_1..a_n, each a number or [re, im].
    #[arg(long, value_name = "FILE", conflicts_with = "random")]
    pub coeffs: Option<PathBuf>,
    /// Draw seeded random coefficient samples.
    #[arg(long)]
    pub random: bool,
    /// Number of random samples.
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Finite-difference step relative to the smallest canonical gap.
    #[arg(long)]
    pub fd_step: Option<f64>,
    /// Sheet of the covering: 0 keeps critical points sorted.
    #[arg(long, default_value_t = 0)]
    pub ordering: u64,
}

#[derive(Args, Debug)]
pub struct FanArgs {
    /// Size of the ground set.
    #[arg(long)]
    pub n: usize,
    /// Check counts, pairwise intersections (n <= 4) and location consistency.
    #[arg(long)]
    pub verify: bool,
    /// Comma-separated integer vector to locate.
    #[arg(long, value_name = "V", allow_hyphen_values = true)]
    pub locate: Option<String>,
    /// Print every cone as JSON.
    #[arg(long)]
    pub list: bool,
}

#[derive(Args, Debug)]
pub struct TwistArgs {
    /// Algebra document.
    #[arg(long, value_name = "FILE")]
    pub algebra: PathBuf,
    /// Comma-separated coordinates of the twisting element; rationals such as
    /// 3/2, or re:im for complex algebras.
    #[arg(long, allow_hyphen_values = true)]
    pub epsilon: String,
    /// Write the twisted algebra here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AlgebraArgs {
    /// Algebra document.
    #[arg(long, value_name = "FILE")]
    pub algebra: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gw(args) => commands::gw(args),
        Command::Wdvv(args) => commands::wdvv(args),
        Command::Assoc(args) => commands::assoc(args),
        Command::An(args) => commands::an(args, cli.seed, cli.tol),
        Command::Fan(args) => commands::fan(args, cli.seed),
        Command::Twist(args) => commands::twist(args),
        Command::Algebra(args) => commands::algebra(args, cli.seed, cli.tol),
    };
    let report = match result {
        Ok(report) => report,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(2);
        }
    };
    print!("{}", report.render());
    if let Some(path) = &cli.json {
        if let Err(err) = std::fs::write(path, report.to_json()) {
            eprintln!("error: cannot write {}: {err}", path.display());
            return ExitCode::from(2);
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
