use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use photon_wigner::experiment::{self, RunConfig};
use photon_wigner::photon_statistics::FidelityConvention;
use photon_wigner::{Error, Result};

#[derive(Parser)]
#[command(
    version,
    about = "Simulated direct-detection Wigner reconstruction of classical light"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate shot records for every (probe amplitude, efficiency) pair.
    Simulate(RunArgs),
    /// Fit the detector gain from the calibration records of a run.
    Calibrate(RunDir),
    /// Re-bin the section records and reconstruct the Wigner section.
    Reconstruct {
        #[command(flatten)]
        run: RunDir,
        /// Gain to use instead of the one in calibration.json.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_parser = parse_fidelity)]
        fidelity: Option<FidelityConvention>,
    },
    /// simulate, calibrate and reconstruct, then check acceptance thresholds.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: vacuum, phase-averaged or thermal.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the master seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `runs/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_parser = parse_fidelity)]
    fidelity: Option<FidelityConvention>,
}

#[derive(Args)]
struct RunDir {
    /// Run directory written by `simulate` (or its manifest.json).
    #[arg(long, alias = "manifest", default_value = ".")]
    out: PathBuf,
}

fn parse_fidelity(s: &str) -> std::result::Result<FidelityConvention, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl RunArgs {
    fn resolve(&self) -> Result<(RunConfig, PathBuf)> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::preset(name)?,
            (None, None) => {
                return Err(Error::Config(vec![
                    "one of --config or --preset is required".into(),
                ]))
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(f) = self.fidelity {
            cfg.fidelity = f;
        }
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
        Ok((cfg, out))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let (cfg, out) = args.resolve()?;
            let m = experiment::simulate(&cfg, &out, args.workers)?;
            println!("{} records written to {}", m.records.len(), out.display());
        }
        Command::Calibrate(dir) => {
            let cal = experiment::calibrate(&dir.out)?;
            let r = cal.result;
            println!(
                "gamma_hat = {:.6} +- {:.6}  slope = {:.3e} +- {:.3e}  R^2 = {:.4}",
                r.gamma_hat, r.stderr_gamma, r.slope_hat, r.stderr_slope, r.r_squared
            );
        }
        Command::Reconstruct {
            run,
            gamma,
            fidelity,
        } => {
            let rep = experiment::reconstruct(&run.out, gamma, fidelity)?;
            println!(
                "epsilon = {:.4e}  mean fidelity corrected = {:.6}  uncorrected = {:.6}",
                rep.mean_error, rep.mean_fidelity_corrected, rep.mean_fidelity_uncorrected
            );
        }
        Command::Pipeline(args) => {
            let (cfg, out) = args.resolve()?;
            let s = experiment::pipeline(&cfg, &out, args.workers)?;
            println!(
                "{}: gamma_hat = {:.5}, epsilon = {:.4e}, fidelity {:.6} / {:.6}; summary in {}",
                s.name,
                s.gamma_hat,
                s.mean_error,
                s.mean_fidelity_corrected,
                s.mean_fidelity_uncorrected,
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
