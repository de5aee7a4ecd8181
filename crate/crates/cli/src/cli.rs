use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;

use ergostat_core::rational::parse_rational;
use ergostat_core::verify::{DEFAULT_SEARCH_LIMIT, DEFAULT_TRACE_LIMIT};
use ergostat_core::{
    BoundVariant, CounterFunction, LpSpace, Modulus, NamedOp, OperatorRecipe, DEFAULT_DIGIT_BUDGET,
};

/// Explicit metastability bounds for Cesàro means and their empirical checks.
#[derive(Debug, Parser)]
#[command(name = "ergostat", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Seed for every random choice; recorded in the output.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for batch runs (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Largest exact bound, in decimal digits, before switching to log₁₀ enclosures.
    #[arg(long, global = true, env = "ERGOSTAT_DIGIT_BUDGET", default_value_t = DEFAULT_DIGIT_BUDGET)]
    pub digit_budget: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a bound Φ(ε, g, b, η).
    Bound(BoundArgs),
    /// Search for the least metastability witness and compare it with Φ.
    Verify(VerifyArgs),
    /// Instantiate every step of the proof on one trajectory.
    Trace(TraceArgs),
    /// The greatest-lower-bound lemma: Θ, h^K(1) and a brute-force check.
    Glb(GlbArgs),
    /// Tabulate our bound against the earlier Hilbert-space bound.
    Compare(CompareArgs),
    /// Sweep Monte Carlo estimates of Clarkson's modulus.
    Modulus(ModulusArgs),
}

pub fn rational(s: &str) -> Result<BigRational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

/// `SEED` or `SEED:DEPTH`.
pub fn recipe(s: &str) -> Result<OperatorRecipe, String> {
    let bad =
        || format!("cannot parse operator recipe from {s:?}: expected <seed> or <seed>:<depth>");
    let (seed, depth) = match s.split_once(':') {
        Some((a, b)) => (a, b.parse().map_err(|_| bad())?),
        None => (s, 2),
    };
    Ok(OperatorRecipe::new(
        seed.trim().parse().map_err(|_| bad())?,
        depth,
    ))
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long, value_parser = rational)]
    pub epsilon: BigRational,

    #[arg(long, value_parser = rational)]
    pub b: BigRational,

    #[arg(long, default_value = "hilbert")]
    pub modulus: Modulus,

    #[arg(long, default_value = "const:1")]
    pub g: CounterFunction,

    /// Use the factorized modulus η̃.
    #[arg(long)]
    pub refined: bool,

    #[arg(long, default_value = "ours")]
    pub variant: BoundVariant,

    /// Closed form with K = ⌈512b²/ε²⌉ (Hilbert modulus, refined).
    #[arg(long, conflicts_with_all = ["variant", "estimate"])]
    pub closed_form: bool,

    /// Only the log₁₀ enclosure, without exact iteration.
    #[arg(long)]
    pub estimate: bool,
}

#[derive(Debug, Args)]
pub struct InstanceArgs {
    #[arg(long, default_value = "lp:2:2")]
    pub space: LpSpace,

    /// Named operator: identity, neg-identity, swap, half-swap or zero.
    #[arg(long, conflicts_with_all = ["op_recipe", "op_csv"])]
    pub op: Option<NamedOp>,

    /// Random by-construction operator, `SEED` or `SEED:DEPTH`.
    #[arg(long, value_parser = recipe, conflicts_with = "op_csv")]
    pub op_recipe: Option<OperatorRecipe>,

    /// Dense d×d matrix, one row per line.
    #[arg(long)]
    pub op_csv: Option<PathBuf>,

    /// Start vector; a random one of norm at most 1 when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,

    /// Required unless `--trials` draws the instances.
    #[arg(long, value_parser = rational)]
    pub epsilon: Option<BigRational>,

    #[arg(long, default_value = "const:1")]
    pub g: CounterFunction,

    /// Defaults to the modulus of the space.
    #[arg(long)]
    pub modulus: Option<Modulus>,

    /// Upper bound on ‖x‖; defaults to ‖x‖ rounded up to 10⁻¹².
    #[arg(long, value_parser = rational)]
    pub b: Option<BigRational>,

    #[arg(long)]
    pub refined: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,

    #[arg(long, default_value_t = DEFAULT_SEARCH_LIMIT)]
    pub search_limit: usize,

    /// Attach a proof trace to the report.
    #[arg(long)]
    pub trace: bool,

    #[arg(long, default_value_t = DEFAULT_TRACE_LIMIT)]
    pub trace_limit: usize,

    /// Verify this many randomized instances, seeded SEED, SEED+1, …,
    /// instead of the one described by the instance flags.
    #[arg(long, conflicts_with_all = ["op", "op_recipe", "op_csv", "x", "epsilon", "trace"])]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,

    #[arg(long, default_value_t = DEFAULT_TRACE_LIMIT)]
    pub trace_limit: usize,
}

#[derive(Debug, Args)]
pub struct GlbArgs {
    #[arg(long, value_parser = rational)]
    pub epsilon: BigRational,

    #[arg(long, value_parser = rational)]
    pub b: BigRational,

    #[arg(long, default_value = "affine:1:1")]
    pub g: CounterFunction,

    /// Random sequences to check by brute force.
    #[arg(long, default_value_t = 0)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Values of b/ε (with ε = 1).
    #[arg(long = "ratio", value_parser = rational, default_values = ["1", "2", "4"])]
    pub ratios: Vec<BigRational>,

    #[arg(long = "g", default_values = ["const:1", "affine:1:0"])]
    pub gs: Vec<CounterFunction>,
}

#[derive(Debug, Args)]
pub struct ModulusArgs {
    #[arg(long, default_value = "lp:2:2")]
    pub space: LpSpace,

    /// Compared against the estimates; defaults to the modulus of the space.
    #[arg(long)]
    pub modulus: Option<Modulus>,

    #[arg(long, value_delimiter = ',', default_values = ["0.5", "1", "1.5", "2"])]
    pub epsilon: Vec<f64>,

    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
}
