use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use levy_sir_cli::verify::{self, Level};
use levy_sir_cli::{cmd_compare, cmd_print_summary, cmd_run, load_config, CliError, NoiseKind, Overrides};

#[derive(Parser)]
#[command(name = "sim", version, about = "Spatial SIR simulator with jump noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct OverrideArgs {
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Number of ensemble paths
    #[arg(long)]
    paths: Option<u64>,
    /// Time step
    #[arg(long)]
    dt: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed,
            paths: a.paths,
            dt: a.dt,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured regime and write CSV output
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run several noise regimes on the same parameters
    Compare {
        config: PathBuf,
        /// Comma-separated subset of det,gauss,levy
        #[arg(long, value_delimiter = ',')]
        regimes: Vec<String>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run the invariant suite
    Verify {
        /// Include convergence-order and Monte Carlo checks
        #[arg(long)]
        full: bool,
    },
    /// Print the summary of a finished run
    PrintSummary { run_dir: PathBuf },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load_config(&config, overrides.into())?;
            let dir = cmd_run(&cfg)?;
            print!("{}", cmd_print_summary(&dir)?);
            println!("output written to {}", dir.display());
        }
        Command::Compare {
            config,
            regimes,
            overrides,
        } => {
            let cfg = load_config(&config, overrides.into())?;
            let kinds = regimes
                .iter()
                .filter(|r| !r.is_empty())
                .map(|r| {
                    NoiseKind::from_label(r).ok_or_else(|| CliError::Config {
                        key: "--regimes".into(),
                        reason: format!("unknown regime `{r}` (expected det, gauss or levy)"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let dir = cmd_compare(&cfg, &kinds)?;
            print!("{}", cmd_print_summary(&dir)?);
            println!("output written to {}", dir.display());
        }
        Command::Verify { full } => {
            let level = if full { Level::Full } else { Level::Quick };
            let results = verify::run_checks(level);
            print!("{}", verify::render(&results));
            if let Some(bad) = results.iter().find(|r| !r.passed) {
                return Err(CliError::Verify(format!("{}: {}", bad.module, bad.name)));
            }
        }
        Command::PrintSummary { run_dir } => print!("{}", cmd_print_summary(&run_dir)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
