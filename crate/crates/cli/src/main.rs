use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cavitybus_core::experiments::{run, Experiment, ExperimentConfig, Overrides};
use cavitybus_core::{Error, ErrorKind};
use clap::{Parser, Subcommand};

const THREADS_ENV: &str = "CAVITYBUS_THREADS";

#[derive(Parser, Debug)]
#[command(name = "cavitybus", version, about = "Cavity-mediated two-qubit gate simulations; results are written as CSV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config with dotted keys; defaults are used for anything not set
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output CSV file (default: standard output)
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Master seed of the noise samples
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Noise samples per cell
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,
    /// Propagation time step in picoseconds
    #[arg(long = "dt-ps", global = true, value_name = "X")]
    dt_ps: Option<f64>,
    /// Worker threads (overrides CAVITYBUS_THREADS; default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Print the resolved config as TOML and exit
    #[arg(long, global = true)]
    print_config: bool,
    /// Log progress to standard error
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Dressed spin splitting versus detuning
    Splittings,
    /// Exchange coupling versus the shared Zeeman frequency
    Coupling,
    /// Pulsed √iSWAP fidelity and leakage traces
    Gate,
    /// Noisy gate infidelity for spin and charge qubits
    Noise,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Splittings => Experiment::Splittings,
            Command::Coupling => Experiment::CouplingSweep,
            Command::Gate => Experiment::PulseGate,
            Command::Noise => Experiment::NoiseSweep,
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::InvalidInput => 1,
        ErrorKind::Numerical => 2,
        ErrorKind::Io => 3,
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{s}`")))?,
            ),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Error::Config("thread count must be at least 1".into()));
    }
    Ok(n)
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let exp = cli.command.experiment();
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            ExperimentConfig::from_toml_str(&text, Some(exp))?
        }
        None => ExperimentConfig::default_for(exp),
    };
    cfg.apply_overrides(&Overrides {
        seed: cli.seed,
        samples: cli.samples,
        dt_ps: cli.dt_ps,
    })?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Error> {
    let cfg = load_config(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    if let Some(n) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}")))?;
    }
    log::info!("running {} on {} threads", cfg.experiment().name(), rayon::current_num_threads());
    let table = run(&cfg)?;
    match &cli.out {
        Some(path) => {
            let file = fs::File::create(path)
                .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
            let mut w = io::BufWriter::new(file);
            table.write_csv(&mut w)?;
            w.flush()?;
            log::info!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            table.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(exit_code(ErrorKind::InvalidInput))
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
