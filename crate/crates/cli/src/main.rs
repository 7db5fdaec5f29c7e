use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gtkf_core::config::load_experiment;
use gtkf_core::decoder::decode;
use gtkf_core::group_testing::{is_d_disjunct, DISJUNCT_BUDGET};
use gtkf_core::harness::generate_run;
use gtkf_core::report::{errors_csv, measurements_csv, rmse_csv, sweep_csv, tests_csv, trajectory_csv, write_file};
use gtkf_core::{run_experiment, run_sweep, DecoderConfig, Error, ExperimentConfig, Method, OutcomeVector, Result, SamplingMatrix};
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "gtkf", version, about = "Kalman filtering with group-testing fault localization")]
struct Cli {
    /// TOML experiment configuration; defaults to the reference scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Number of Monte-Carlo runs.
    #[arg(long, global = true)]
    runs: Option<usize>,

    /// Restrict to these methods (repeatable).
    #[arg(long = "method", global = true)]
    methods: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the configured experiment and write rmse.csv, errors.csv and tests.csv.
    Simulate {
        /// Also write truth.csv and measurements.csv for the first run.
        #[arg(long)]
        dump: bool,
    },
    /// Decode a fault vector from a matrix file and an outcome file.
    Decode {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        outcome: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
    },
    /// Check whether a matrix file is d-disjunct.
    Disjunct {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        d: usize,
    },
    /// Repeat the experiment over a list of bias variances.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [100.0, 1000.0, 5000.0, 10000.0, 50000.0])]
        rb: Vec<f64>,
    },
}

fn experiment(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => load_experiment(path)?,
        None => ExperimentConfig::reference(1e4)?,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(r) = cli.runs {
        cfg.n_runs = r;
    }
    if !cli.methods.is_empty() {
        cfg.methods = cli.methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate { dump } => {
            let cfg = experiment(cli)?;
            let report = run_experiment(&cfg)?;
            write_file(&cli.out, "rmse.csv", &rmse_csv(&report))?;
            write_file(&cli.out, "errors.csv", &errors_csv(std::slice::from_ref(&report)))?;
            write_file(&cli.out, "tests.csv", &tests_csv(std::slice::from_ref(&report)))?;
            if *dump {
                let data = generate_run(&cfg, 0)?;
                let steps: Vec<_> = data.measurements.into_iter().flatten().collect();
                write_file(&cli.out, "truth.csv", &trajectory_csv(&data.truth))?;
                write_file(&cli.out, "measurements.csv", &measurements_csv(&steps))?;
            }
            for r in &report.reports {
                let n = r.rmse_position().len();
                let tail = n.saturating_sub(20);
                let mean = |v: &[f64]| v[tail..].iter().sum::<f64>() / (n - tail).max(1) as f64;
                println!(
                    "{}",
                    json!({
                        "method": r.method.name(),
                        "rmse_pos_tail": mean(r.rmse_position()),
                        "rmse_vel_tail": mean(r.rmse_velocity()),
                        "pfa": r.p_fa(),
                        "pm": r.p_m(),
                        "avg_tests": r.avg_chi2_tests,
                    })
                );
            }
        }
        Command::Decode {
            matrix,
            outcome,
            lambda,
            threshold,
        } => {
            let phi: SamplingMatrix = read(matrix)?.parse()?;
            let g: OutcomeVector = read(outcome)?.parse()?;
            let cfg = DecoderConfig {
                lambda: *lambda,
                round_threshold: *threshold,
            };
            let f = decode(&phi, &g, &cfg)?;
            for (sensor, step) in f.faulty_pairs() {
                println!("{}@{}", sensor + 1, step + 1);
            }
        }
        Command::Disjunct { matrix, d } => {
            let phi: SamplingMatrix = read(matrix)?.parse()?;
            let ok = is_d_disjunct(&phi, *d, DISJUNCT_BUDGET)?;
            println!("{}", json!({ "d": d, "disjunct": ok }));
        }
        Command::Sweep { rb } => {
            let cfg = experiment(cli)?;
            let reports = run_sweep(&cfg, rb)?;
            write_file(&cli.out, "errors.csv", &errors_csv(&reports))?;
            write_file(&cli.out, "tests.csv", &tests_csv(&reports))?;
            let sweep = sweep_csv(&reports);
            write_file(&cli.out, "sweep.csv", &sweep)?;
            print!("{sweep}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match &e {
                Error::Numeric(_) | Error::BudgetExceeded { .. } => ("numeric", 3),
                Error::Io(_) => ("io", 2),
                Error::Parse(_) => ("parse", 2),
                _ => ("config", 2),
            };
            eprintln!("{}", json!({ "error": kind, "message": e.to_string() }));
            ExitCode::from(code)
        }
    }
}
