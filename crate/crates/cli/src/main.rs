use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ep_dimer_cli::ep::{cmd_ep, EpRequest};
use ep_dimer_cli::plotdata::cmd_plotdata;
use ep_dimer_cli::sweep::cmd_sweep;
use ep_dimer_cli::verify::{cmd_verify, Fault};
use ep_dimer_cli::{CliError, ParamArgs, SweepArgs, SweepConfig};

#[derive(Debug, Parser)]
#[command(name = "ep-dimer", version, about = "Spectra and exceptional points of a saturable non-Hermitian dimer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve over a detuning grid and write one row per (delta, method, branch)
    Sweep {
        /// TOML file with sweep settings; flags override it
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Compare the analytic EP with one detected in a local sweep
    Ep {
        #[command(flatten)]
        params: ParamArgs,
        /// Largest accepted discrepancy in delta and mu
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        /// Half-width of the local sweep around the analytic EP
        #[arg(long, default_value_t = 0.05)]
        span: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// Run the built-in self-test suite
    Verify {
        #[arg(long, value_enum, default_value_t = Fault::None, hide = true)]
        inject_fault: Fault,
    },
    /// Turn a sweep file into per-branch, per-panel data files
    Plotdata {
        /// Sweep output (CSV or JSON)
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("EP_DIMER_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::config("EP_DIMER_THREADS", format!("not a thread count: `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::config("EP_DIMER_THREADS", e.to_string()))
}

fn run(cli: Cli) -> Result<u8, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Sweep { config, args } => {
            let merged = match config {
                Some(path) => args.over(&SweepArgs::from_file(&path)?),
                None => args,
            };
            let config = SweepConfig::resolve(&merged)?;
            let manifest = cmd_sweep(&config)?;
            let mut out = std::io::stdout().lock();
            for count in &manifest.counts {
                writeln!(out, "{}: {} rows", count.method, count.rows).map_err(stdout_error)?;
            }
            for ep in &manifest.detected_eps {
                writeln!(
                    out,
                    "EP ({}): delta = {}, mu = {}{:+}i",
                    ep.method, ep.delta, ep.mu_re, ep.mu_im
                )
                .map_err(stdout_error)?;
            }
            writeln!(
                out,
                "wrote {} and {}",
                config.output_path.display(),
                config.manifest_path().display()
            )
            .map_err(stdout_error)?;
            Ok(0)
        }
        Command::Ep {
            params,
            tol,
            span,
            steps,
        } => {
            let mut request = EpRequest::new(params.resolve()?);
            request.centre = params.delta;
            request.tol = tol;
            request.span = span;
            request.steps = steps;
            let outcome = cmd_ep(&request, &mut std::io::stdout().lock())?;
            Ok(outcome.exit_code() as u8)
        }
        Command::Verify { inject_fault } => {
            let report = cmd_verify(inject_fault, &mut std::io::stdout().lock())?;
            match report.first_failure() {
                Some(check) => {
                    eprintln!("verify failed: {}", check.name);
                    Ok(1)
                }
                None => Ok(0),
            }
        }
        Command::Plotdata { input, out_dir } => {
            let files = cmd_plotdata(&input, &out_dir)?;
            writeln!(
                std::io::stdout().lock(),
                "wrote {} panel files and {} EP marker(s) to {}",
                files.panels.len(),
                files.marker_count,
                out_dir.display()
            )
            .map_err(stdout_error)?;
            Ok(0)
        }
    }
}

fn stdout_error(err: std::io::Error) -> CliError {
    CliError::io("<stdout>", err)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        // reader went away, e.g. `ep-dimer sweep | head`
        Err(CliError::Io { source, .. }) if source.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
