//! `npd`: build nested periodic dictionaries, evaluate coherence measures and
//! recovery conditions, recover periodic signals and run recovery experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod signal;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use npd_core::DictionaryFamily;

#[derive(Debug, Parser)]
#[command(name = "npd", version, about = "Period estimation with nested periodic dictionaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a dictionary and write it in the npd text format
    Dict(DictArgs),
    /// Coherence measures as CSV rows `measure,k,m,s,p,value`
    Coherence(CoherenceArgs),
    /// Evaluate a recovery condition and, optionally, its noise threshold
    Bounds(BoundsArgs),
    /// Recover the sparse representation and period of a signal
    Recover(RecoverArgs),
    /// Phase transition of the refined condition over (k, s)
    Phase(ExperimentArgs),
    /// Noise-free recovery success and RMSE against k
    SweepRecovery(ExperimentArgs),
    /// Recovery under bounded noise against the coefficient floor gamma
    SweepBounded(ExperimentArgs),
    /// Recovery under Gaussian noise against the threshold scale alpha
    SweepGaussian(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Rpt,
    Farey,
}

impl From<FamilyArg> for DictionaryFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Rpt => DictionaryFamily::Rpt,
            FamilyArg::Farey => DictionaryFamily::Farey,
        }
    }
}

#[derive(Debug, Args)]
struct DictArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// Largest period
    #[arg(long)]
    pmax: u64,
    /// Number of samples (rows)
    #[arg(long)]
    len: usize,
    /// Keep the integer/unit-modulus entries instead of unit-norm columns
    #[arg(long)]
    no_normalize: bool,
    /// Output file; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where the dictionary comes from: a file, or built from parameters (normalized).
#[derive(Debug, Args)]
struct DictSource {
    /// Dictionary file written by `npd dict`
    #[arg(long, conflicts_with_all = ["family", "pmax", "len"])]
    dict: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    pmax: Option<u64>,
    #[arg(long)]
    len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Measure {
    Mu,
    Mu1,
    Npi,
    Npa,
    Cnpi,
    Cnpa,
    ZetaP,
    NuP,
    ErcBaseline,
    MinEig,
}

#[derive(Debug, Args)]
struct CoherenceArgs {
    #[command(flatten)]
    source: DictSource,
    #[arg(long, value_enum, default_value = "mu")]
    measure: Measure,
    /// Sparsity level(s): a number or an inclusive range `a..b`
    #[arg(long)]
    k: Option<String>,
    /// Number of hidden periods
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Cumulative sparsity s (all of 1..=k when omitted)
    #[arg(long)]
    s: Option<usize>,
    /// Period(s) for zeta-p / nu-p: a number or a range `a..b`
    #[arg(long)]
    p: Option<String>,
    /// Hidden periods for min-eig, comma separated
    #[arg(long, value_delimiter = ',')]
    periods: Vec<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ConditionArg {
    ClassicMu,
    ClassicMu1,
    Thm1,
    Thm2,
    Cor1,
    Refined,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    source: DictSource,
    #[arg(long, value_enum)]
    condition: ConditionArg,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// For `refined`; every s in 1..=k when omitted
    #[arg(long)]
    s: Option<usize>,
    /// Hidden periods for thm2, comma separated
    #[arg(long, value_delimiter = ',')]
    periods: Vec<u64>,
    /// Bounded-noise level; adds the coefficient threshold column
    #[arg(long, conflicts_with = "sigma")]
    eps: Option<f64>,
    /// Gaussian noise standard deviation; adds the coefficient threshold column
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Omp,
    Bp,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[command(flatten)]
    source: DictSource,
    /// Signal file: one sample per line, `re` or `re,im`; `#` starts a comment
    #[arg(long)]
    signal: PathBuf,
    #[arg(long, value_enum, default_value = "omp")]
    method: MethodArg,
    /// OMP: stop once the residual norm is at most this
    #[arg(long)]
    stop_eps: Option<f64>,
    /// OMP: stop after selecting this many atoms
    #[arg(long)]
    stop_k: Option<usize>,
    /// OMP: iteration cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// Basis pursuit equality tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Basis pursuit: relative magnitude below which coefficients are dropped
    #[arg(long, default_value_t = 1e-6)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// JSON config; flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    #[arg(long)]
    pmax: Option<u64>,
    #[arg(long)]
    len: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Inclusive k range `a..b`, or a single k
    #[arg(long)]
    k: Option<String>,
    /// Inclusive s range `a..b`, or a single s
    #[arg(long)]
    s: Option<String>,
    /// Trials per point
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed hidden periods for the noise sweeps, comma separated
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<u64>>,
    /// Coefficient floor for noise-free experiments
    #[arg(long)]
    gamma: Option<f64>,
    /// Swept gamma or alpha values, comma separated
    #[arg(long, value_delimiter = ',', conflicts_with = "level_range")]
    levels: Option<Vec<f64>>,
    /// Swept values as `start:stop:step`
    #[arg(long)]
    level_range: Option<String>,
    /// Bounded-noise level
    #[arg(long, conflicts_with = "sigma")]
    eps: Option<f64>,
    /// Gaussian noise standard deviation
    #[arg(long)]
    sigma: Option<f64>,
    /// Solvers to run, comma separated
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<MethodArg>>,
    /// Phase transition: also run recovery trials at every grid point
    #[arg(long)]
    empirical: bool,
    /// Output base path: writes `<base>.csv`, `<base>.svg` and `<base>.config.json`.
    /// The CSV goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: available parallelism); results do not depend on it
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(commands::CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
