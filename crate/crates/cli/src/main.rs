use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use survquack::commands::{self, AnalyzeOptions, PivotCliOptions, SimulateOptions};
use survquack::config::DesignFile;
use survquack::dataset::write_dataset;
use survquack::{CliError, ReportDocument};
use survquack_core::estim::Measure;

/// Efficacy measures for overall survival: log-rank and Cox tests, time
/// ratios, living-longer probability, stratified audits and simulation of
/// the log-rank-then-compare-medians decision procedure.
#[derive(Debug, Parser)]
#[command(name = "survquack", version)]
struct Cli {
    /// Seed for Monte Carlo work. Overrides the config file's seed.
    #[arg(long, global = true, env = "SURVQUACK_SEED")]
    seed: Option<u64>,
    /// Write the report (or generated dataset) here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write flat CSV tables for tabular sections into this directory.
    #[arg(long, global = true)]
    tables: Option<PathBuf>,
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze a two-arm dataset (CSV with time, event, arm, s:<factor> columns).
    Analyze {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Confidence level of reported intervals.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Stratification factors to audit, comma separated.
        #[arg(long, value_delimiter = ',')]
        strata: Vec<String>,
        /// Measures to report: hr, tr (comma separated).
        #[arg(long, value_delimiter = ',', value_parser = parse_measure, default_value = "hr,tr")]
        measure: Vec<Measure>,
    },
    /// Run the directional-error simulation described by a scenario config.
    Simulate {
        config: PathBuf,
        /// Replace the config's replication count.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Confidence set for the hazard ratio by inverting the Mann-Whitney test.
    PivotCi {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 0.02)]
        grid_min: f64,
        #[arg(long, default_value_t = 50.0)]
        grid_max: f64,
        #[arg(long, default_value_t = 200)]
        grid_points: usize,
        /// Monte Carlo replicates per grid point (at least 2000).
        #[arg(long, default_value_t = 2000)]
        reps: usize,
    },
    /// Worked example of naive log-averaging of stratum hazard ratios.
    Eq1Demo,
    /// Write the synthetic stratified dataset described by a design config.
    Generate { config: PathBuf },
}

fn parse_measure(s: &str) -> Result<Measure, String> {
    match s.to_ascii_lowercase().as_str() {
        "hr" => Ok(Measure::Hr),
        "tr" => Ok(Measure::Tr),
        "rr" => Ok(Measure::Rr),
        "llp" => Ok(Measure::Llp),
        _ => Err(format!("unknown measure '{s}' (expected hr or tr)")),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Write { path: p.into(), source }),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| CliError::Write { path: "<stdout>".into(), source }),
    }
}

fn write_tables(dir: &Path, report: &ReportDocument) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.into(), source })?;
    for (stem, body) in report.tables() {
        let p = dir.join(format!("{stem}.csv"));
        std::fs::write(&p, body).map_err(|source| CliError::Write { path: p, source })?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let report = match cli.command {
        Command::Analyze { dataset, alpha, level, strata, measure } => {
            commands::analyze(&dataset, &AnalyzeOptions { alpha, level, strata, measures: measure })?
        }
        Command::Simulate { config, replications } => {
            commands::simulate(&config, &SimulateOptions { seed: cli.seed, replications, workers: cli.workers })?
        }
        Command::PivotCi { dataset, level, grid_min, grid_max, grid_points, reps } => {
            let opts = PivotCliOptions { level, grid_min, grid_max, grid_points, reps, seed: cli.seed.unwrap_or(0) };
            commands::pivot_ci(&dataset, &opts)?
        }
        Command::Eq1Demo => commands::eq1_demo()?,
        Command::Generate { config } => {
            let mut design = DesignFile::load(&config)?.design();
            if let Some(s) = cli.seed {
                design.seed = s;
            }
            let sample = design.generate()?;
            let mut buf = Vec::new();
            write_dataset(&sample, &mut buf).expect("writing to memory");
            return emit(cli.out.as_deref(), &buf);
        }
    };
    if let Some(dir) = &cli.tables {
        write_tables(dir, &report)?;
    }
    emit(cli.out.as_deref(), report.to_json().as_bytes())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
