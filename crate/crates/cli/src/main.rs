//! `airy-epr`: run the measurement campaigns, the oracle cross-checks, dump
//! SLM masks and print Schmidt spectra.
//!
//! Exit codes: 0 success, 1 failed oracle check or runtime error, 2 config
//! error, 3 a fit did not converge.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airy_epr::biphoton::{schmidt_number, schmidt_spectrum};
use airy_epr::config::ExperimentConfig;
use airy_epr::experiment::{self, Campaign};
use airy_epr::witness::write_table;
use airy_epr::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "airy-epr", version, about = "Airy-beam EPR witness simulator")]
struct Cli {
    /// Experiment config file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the scan RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run campaigns and write scans, fits and witness reports.
    Run {
        /// free, crystal_face_airy or propagated_plane_airy; all when omitted.
        #[arg(long = "campaign")]
        campaigns: Vec<String>,
        /// Calibrate σ₋ against the target free-propagation product first.
        #[arg(long)]
        calibrate: bool,
    },
    /// Run the oracle checks listed in the config and write oracle.json.
    Oracle,
    /// Write the SLM transmittance for mask parameter `z` as CSV.
    MaskDump {
        #[arg(long, default_value_t = 0.0)]
        z: f64,
    },
    /// Schmidt spectrum of the configured source.
    Schmidt {
        /// Number of leading coefficients to print.
        #[arg(long, default_value_t = 10)]
        modes: usize,
    },
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::InvalidParameter { .. } | Error::InvalidGrid(_) => 2,
            Error::NotConverged(_) => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: 1,
        message: format!("{}: {e}", path.display()),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure {
                code: 2,
                message: format!("{}: {e}", path.display()),
            })?;
            ExperimentConfig::parse(&text).map_err(|e| Failure {
                code: 2,
                message: format!("{}: {e}", path.display()),
            })?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli, campaigns: &[String], calibrate: bool) -> Result<(), Failure> {
    let mut cfg = load_config(cli)?;
    let selected = if campaigns.is_empty() {
        Campaign::ALL.to_vec()
    } else {
        campaigns
            .iter()
            .map(|name| {
                Campaign::parse(name).ok_or_else(|| Failure {
                    code: 2,
                    message: format!("unknown campaign `{name}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?
    };
    fs::create_dir_all(&cli.out).map_err(|e| io_failure(&cli.out, e))?;
    if calibrate || cfg.calibrate {
        let cal = experiment::calibrate(&cfg)?;
        eprintln!(
            "calibrated sigma_minus/sigma_plus = {:.6} (product {:.6}, {} steps)",
            cal.ratio, cal.product, cal.iterations
        );
        cfg.sigma_minus = cal.sigma_minus;
        let path = cli.out.join("calibration.json");
        let json = serde_json::to_string_pretty(&cal).map_err(Error::from)? + "\n";
        fs::write(&path, json).map_err(|e| io_failure(&path, e))?;
    }
    let path = cli.out.join("config.txt");
    fs::write(&path, cfg.to_text()).map_err(|e| io_failure(&path, e))?;

    let mut converged = true;
    let stdout = io::stdout();
    for campaign in selected {
        let outcome = experiment::run_campaign(&cfg, campaign)?;
        experiment::write_artifacts(&outcome, &cli.out)?;
        let mut lock = stdout.lock();
        writeln!(lock, "# {}", campaign.name()).map_err(|e| io_failure(Path::new("stdout"), e))?;
        write_table(&mut lock, &outcome.reports())?;
        if !outcome.all_converged() {
            converged = false;
            eprintln!("{}: at least one fit did not converge", campaign.name());
        }
    }
    if converged {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: "fit convergence failure".into(),
        })
    }
}

fn oracle(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let report = experiment::run_oracle_suite(&cfg);
    let json = report.to_json()?;
    fs::create_dir_all(&cli.out).map_err(|e| io_failure(&cli.out, e))?;
    let path = cli.out.join("oracle.json");
    fs::write(&path, &json).map_err(|e| io_failure(&path, e))?;
    print!("{json}");
    if report.passed {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "oracle checks failed".into(),
        })
    }
}

fn mask_dump(cli: &Cli, z: f64) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| io_failure(&cli.out, e))?;
    let path = cli.out.join(format!("mask_z{z}.csv"));
    let file = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
    experiment::dump_mask(&cfg, z, BufWriter::new(file))?;
    println!("{}", path.display());
    Ok(())
}

fn schmidt(cli: &Cli, modes: usize) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let source = experiment::build_source(&cfg)?;
    let spectrum = schmidt_spectrum(&source);
    let report = serde_json::json!({
        "schmidt_number": schmidt_number(&spectrum),
        "coefficients": &spectrum[..modes.min(spectrum.len())],
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run {
            campaigns,
            calibrate,
        } => run(&cli, campaigns, *calibrate),
        Command::Oracle => oracle(&cli),
        Command::MaskDump { z } => mask_dump(&cli, *z),
        Command::Schmidt { modes } => schmidt(&cli, *modes),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
