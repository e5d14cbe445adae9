use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use loopdecay::config::{ExperimentKind, RunConfig};
use loopdecay::experiment::{read_fit_points, run_experiment};
use loopdecay::fit::fit_exponential;
use loopdecay::report::OutputDir;
use loopdecay::{Error, Result};

/// Random-loop simulator and verification suite for transverse correlations
/// in quantum Heisenberg models.
#[derive(Parser, Debug)]
#[command(name = "loopdecay", version)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for Monte Carlo batches.
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact-diagonalization values (oracle-sweep).
    Oracle,
    /// Monte Carlo partition and two-point function (mc-sweep).
    Estimate,
    /// Monte Carlo Schwinger functions against the oracle (schwinger-sweep).
    Schwinger,
    /// Quenched two-point function over random fields (quenched-sweep).
    Quenched,
    /// Passage-time tail probabilities and decay fit (fpp-sweep).
    Fpp,
    /// Weighted tail versus the Poisson tail (domination-check).
    Dominate,
    /// Two-point ≤ loop bound ≤ passage-time split (full-pipeline).
    VerifyChain,
    /// Exponential fit of a result CSV.
    Fit(FitArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    /// CSV with a `norm` column plus mean and stderr columns.
    input: PathBuf,
    #[arg(long, default_value = "mean")]
    mean_col: String,
    #[arg(long, default_value = "stderr")]
    se_col: String,
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Command::Oracle => ExperimentKind::OracleSweep,
            Command::Estimate => ExperimentKind::McSweep,
            Command::Schwinger => ExperimentKind::SchwingerSweep,
            Command::Quenched => ExperimentKind::QuenchedSweep,
            Command::Fpp => ExperimentKind::FppSweep,
            Command::Dominate => ExperimentKind::DominationCheck,
            Command::VerifyChain => ExperimentKind::FullPipeline,
            Command::Fit(_) => return None,
        })
    }
}

/// Process exit codes. Clap's own usage errors also exit with 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Json(_) => 1,
        Error::Config(_) | Error::Parse(_) | Error::Malformed(_) => 2,
        Error::Precondition(_) | Error::DimensionBudget { .. } => 3,
        Error::UnderSampled(_) => 4,
        Error::Acceptance(_) => 5,
        Error::Fit(_) => 6,
    }
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    let Some(k) = threads else { return Ok(()) };
    if k == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(k)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("note: built without the `parallel` feature; --threads {k} ignored");
    Ok(())
}

fn experiment(cli: &Cli, kind: ExperimentKind) -> Result<()> {
    let path = cli.config.as_deref().ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let text = std::fs::read_to_string(path)?;
    let mut config = RunConfig::from_toml_for(&text, kind)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", kind.as_str(), config.seed)));
    config.out = Some(out.clone());
    let result = run_experiment(&config, &out);
    match &result {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Err(_) => eprintln!("artifacts in {}", out.display()),
    }
    result.map(|_| ())
}

fn fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let points = read_fit_points(&args.input, &args.mean_col, &args.se_col)?;
    let f = fit_exponential(&points)?;
    println!(
        "C={:e} c={:e} ± {:e} R2={:.6} used={} dropped={}",
        f.amplitude, f.rate, f.rate_stderr, f.r_squared, f.used, f.dropped
    );
    if let Some(out) = &cli.out {
        let mut dir = OutputDir::create(out, "fit", cli.seed.unwrap_or(0))?;
        dir.json("fit.json", &json!({"input": args.input, "mean_col": args.mean_col, "se_col": args.se_col, "fit": f}))?;
        dir.log(format!("input={}", display(&args.input)));
        dir.log(format!("C={:e} c={:e} rate_stderr={:e} R2={}", f.amplitude, f.rate, f.rate_stderr, f.r_squared));
        dir.finish()?;
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = set_threads(cli.threads).and_then(|()| match (&cli.command, cli.command.kind()) {
        (Command::Fit(args), _) => fit(&cli, args),
        (_, Some(kind)) => experiment(&cli, kind),
        (_, None) => unreachable!("every experiment subcommand has a kind"),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let codes = [
            exit_code(&Error::Io(std::io::Error::other("x"))),
            exit_code(&Error::Config("x".into())),
            exit_code(&Error::Precondition("x".into())),
            exit_code(&Error::UnderSampled("x".into())),
            exit_code(&Error::Acceptance("x".into())),
            exit_code(&Error::Fit("x".into())),
        ];
        let mut sorted = codes.to_vec();
        sorted.dedup();
        assert_eq!(sorted, codes);
        assert!(codes.iter().all(|c| *c != 0));
    }

    #[test]
    fn cli_parses() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
        let cli = Cli::try_parse_from(["loopdecay", "fit", "a.csv", "--seed", "3", "--mean-col", "estimate"]).unwrap();
        assert_eq!(cli.seed, Some(3));
        assert!(matches!(cli.command, Command::Fit(ref a) if a.mean_col == "estimate"));
    }
}
