use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use specsense::experiment::{
    emit_csv, emit_plot_script, run_sweep, table1_check_with, thread_pool_from_env,
    ExperimentConfig, Figure, SweepResult,
};
use specsense::metrics::Strategy;
use specsense::Error;

const EXIT_MISMATCH: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "specsense", version, about = "Compare spectrum-sensing strategies analytically and by simulation")]
struct Cli {
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the Monte Carlo trial count.
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write CSV plus plot scripts.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the sweep with Monte Carlo cross-checks and print the report.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the ordinal performance summary at the configured SNRs.
    Table1 {
        #[arg(long)]
        config: PathBuf,
    },
}

enum Failure {
    Config(Error),
    Mismatch,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e)
    }
}

fn load(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cfg.sweep.as_mut() {
        if let Some(seed) = cli.seed {
            s.seed = seed;
        }
        if let Some(n) = cli.trials {
            s.n_trials = n;
        }
    }
    Ok(cfg)
}

fn report_point_errors(result: &SweepResult) -> bool {
    for e in &result.errors {
        eprintln!(
            "error at grid point {} ({} = {}), {}: {}",
            e.grid_index,
            result.grid_param.code(),
            e.grid_value,
            e.strategy,
            e.message
        );
    }
    !result.errors.is_empty()
}

fn sweep(cli: &Cli, config: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = load(config, cli)?;
    let spec = cfg.sweep_spec()?;
    let pool = thread_pool_from_env()?;
    let result = pool.install(|| run_sweep(&spec))?;
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let Format::Csv = cli.format;
    let csv_name = "sweep.csv";
    emit_csv(&result, &out.join(csv_name))?;
    println!("wrote {}", out.join(csv_name).display());
    for fig in Figure::ALL {
        if fig.supported_by(&result) {
            let path = out.join(format!("{}.gp", fig.name()));
            emit_plot_script(&result, fig, &path, csv_name)?;
            println!("wrote {}", path.display());
        }
    }
    let had_errors = report_point_errors(&result);
    let mut mismatch = false;
    if let Some(report) = &result.validation {
        let path = out.join("validation.txt");
        std::fs::write(&path, report.to_string()).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        })?;
        println!("wrote {}", path.display());
        for c in report.failures().chain(report.flags()) {
            println!("{c}");
        }
        mismatch = !report.passed();
    }
    if had_errors {
        return Err(Failure::Config(Error::Config("some grid points failed".into())));
    }
    if mismatch {
        return Err(Failure::Mismatch);
    }
    Ok(())
}

fn validate(cli: &Cli, config: &Path) -> Result<(), Failure> {
    let cfg = load(config, cli)?;
    let mut spec = cfg.sweep_spec()?;
    spec.validation = true;
    let pool = thread_pool_from_env()?;
    let result = pool.install(|| run_sweep(&spec))?;
    let report = result.validation.as_ref().expect("validation requested");
    print!("{report}");
    if report_point_errors(&result) {
        return Err(Failure::Config(Error::Config("some grid points failed".into())));
    }
    if !report.passed() {
        return Err(Failure::Mismatch);
    }
    Ok(())
}

fn table1(cli: &Cli, config: &Path) -> Result<(), Failure> {
    let cfg = load(config, cli)?;
    let (low, high, step) = cfg.table1_snrs()?;
    let strategies = cfg
        .sweep
        .as_ref()
        .map(|s| s.strategies.clone())
        .unwrap_or_else(|| Strategy::ALL.to_vec());
    let report = table1_check_with(&cfg.system, low, high, &strategies, step)
        .map_err(|e| Error::Config(e.to_string()))?;
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Sweep { config, out } => sweep(&cli, config, out),
        Command::Validate { config } => validate(&cli, config),
        Command::Table1 { config } => table1(&cli, config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch) => ExitCode::from(EXIT_MISMATCH),
        Err(Failure::Config(e)) => {
            eprintln!("specsense: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
