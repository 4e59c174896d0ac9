//! The `simulate`, `calibrate`, `reconstruct` and `pipeline` commands.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::manifest::{Manifest, RecordEntry, RecordRole, MANIFEST_FILE};
use crate::calibration::{calibrate as fit_records, rebin, CalibrationResult, FanoPoint};
use crate::detector::{acquire, derive_seed, DetectorModel};
use crate::error::{Error, Result};
use crate::field_states::{mixed_cutoff, theoretical_mixed_dist, ProbeSetting, SignalState};
use crate::photon_statistics::io::fmt_exact;
use crate::photon_statistics::{fidelity, FidelityConvention, ProbDist};
use crate::wigner::{
    common_meta, mean_error, section_from_distributions, PhaseSpacePoint, SectionInput,
    SectionMeta, WignerSection,
};

pub const CALIBRATION_FILE: &str = "calibration.json";
pub const FANO_FILE: &str = "fano_points.csv";
pub const DISTRIBUTIONS_FILE: &str = "distributions.csv";
pub const FIDELITIES_FILE: &str = "fidelities.csv";
pub const SECTION_CSV: &str = "wigner_section.csv";
pub const SECTION_JSON: &str = "wigner_section.json";
pub const RECONSTRUCTION_FILE: &str = "reconstruction.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn manifest_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Runs `f` on a pool of `workers` threads, or on the global pool when `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None | Some(0) => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::Config(vec![format!("workers: {e}")])),
    }
}

struct Job {
    entry: RecordEntry,
    probe: ProbeSetting,
}

fn plan_jobs(cfg: &RunConfig) -> Result<Vec<Job>> {
    let ext = cfg.record_format.extension();
    let mut jobs = Vec::new();
    let mut push = |role, file: String, alpha: f64, eta: f64| -> Result<()> {
        let seed = derive_seed(cfg.seed, jobs.len() as u64);
        jobs.push(Job {
            entry: RecordEntry {
                file,
                role,
                alpha_mag: alpha,
                eta,
                seed,
            },
            probe: ProbeSetting::new(alpha, cfg.probe.phase, cfg.probe.xi)?,
        });
        Ok(())
    };
    for (i, &alpha) in cfg.probe.amplitudes.iter().enumerate() {
        for (j, &eta) in cfg.detector.etas.iter().enumerate() {
            push(
                RecordRole::Sweep,
                format!("records/sweep_a{i:02}_e{j:02}.{ext}"),
                alpha,
                eta,
            )?;
        }
    }
    if let Some(alpha) = cfg.probe.calibration_amplitude {
        for (j, &eta) in cfg.detector.etas.iter().enumerate() {
            push(
                RecordRole::Calibration,
                format!("records/calibration_e{j:02}.{ext}"),
                alpha,
                eta,
            )?;
        }
    }
    Ok(jobs)
}

/// Simulates one record per (probe amplitude, efficiency) pair, plus the
/// calibration series if configured, and writes them with a manifest.
pub fn simulate(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<Manifest> {
    cfg.validate()?;
    let jobs = plan_jobs(cfg)?;
    let det_for = |eta| -> Result<DetectorModel> {
        DetectorModel {
            eta,
            gamma: cfg.detector.gamma,
            noise_sigma: cfg.detector.noise(),
            dark_counts: cfg.detector.dark_counts,
        }
        .validated()
    };
    let rendered: Vec<String> = with_workers(workers, || {
        jobs.par_iter()
            .map(|job| {
                let det = det_for(job.entry.eta)?;
                let rec = acquire(&cfg.state, &job.probe, &det, cfg.shots, job.entry.seed)?;
                match cfg.record_format {
                    super::config::RecordFormat::Csv => Ok(rec.to_csv()),
                    super::config::RecordFormat::Json => rec.to_json(),
                }
            })
            .collect::<Result<Vec<_>>>()
    })??;

    // single writer keeps the directory and manifest consistent
    for (job, text) in jobs.iter().zip(&rendered) {
        write(&out.join(&job.entry.file), text)?;
    }
    let manifest = Manifest {
        config: cfg.clone(),
        reconstruct_eta: cfg.detector.reconstruction_eta(),
        records: jobs.into_iter().map(|j| j.entry).collect(),
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    write(&out.join("config.toml"), &cfg.to_toml()?)?;
    info!(
        "simulated {} records of {} shots into {}",
        manifest.records.len(),
        cfg.shots,
        out.display()
    );
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(flatten)]
    pub result: CalibrationResult,
    pub gamma_true: Option<f64>,
    pub probe_amplitude: f64,
    pub points: Vec<FanoPoint>,
}

/// Fits the gain from the calibration records listed in a manifest.
pub fn calibrate(manifest_path: &Path) -> Result<CalibrationFile> {
    let manifest_path = Manifest::resolve(manifest_path);
    let manifest = Manifest::load(&manifest_path)?;
    let dir = manifest_dir(&manifest_path);
    let entries = manifest.calibration_entries();
    let etas: BTreeSet<u64> = entries.iter().map(|e| e.eta.to_bits()).collect();
    if etas.len() < 3 {
        return Err(Error::CalibrationInput(format!(
            "calibration needs records at >= 3 distinct efficiencies, manifest has {}",
            etas.len()
        )));
    }
    let records = Manifest::load_records(&dir, &entries)?;
    let probe_amplitude = entries[0].alpha_mag;
    if entries.iter().any(|e| e.alpha_mag != probe_amplitude) {
        return Err(Error::CalibrationInput(
            "calibration records mix probe settings".into(),
        ));
    }
    let report = fit_records(&records)?;
    let file = CalibrationFile {
        result: report.result,
        gamma_true: records[0].meta.gamma_true,
        probe_amplitude,
        points: report.points,
    };
    write_json(&dir.join(CALIBRATION_FILE), &file)?;
    let mut table = String::from("eta,v_bar,f_v,n_shots\n");
    for p in &file.points {
        let _ = writeln!(
            table,
            "{},{},{},{}",
            fmt_exact(p.eta_label),
            fmt_exact(p.v_bar),
            fmt_exact(p.f_v),
            p.n_shots
        );
    }
    write(&dir.join(FANO_FILE), &table)?;
    info!(
        "gamma_hat = {:.5} +- {:.5}, slope = {:.3e} +- {:.1e}",
        file.result.gamma_hat,
        file.result.stderr_gamma,
        file.result.slope_hat,
        file.result.stderr_slope
    );
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub beta_re: f64,
    pub beta_im: f64,
    pub beta_mag: f64,
    pub fidelity_corrected: f64,
    pub fidelity_uncorrected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub gamma_hat: f64,
    pub fidelity_convention: FidelityConvention,
    pub mean_error: f64,
    pub mean_fidelity_corrected: f64,
    pub mean_fidelity_uncorrected: f64,
    pub points: Vec<PointReport>,
    pub section: WignerSection,
}

/// Theory distributions for one probe point: with the actual overlap and
/// with the probe assumed fully mode-matched.
pub fn theory_pair(
    detected_state: &SignalState,
    beta: PhaseSpacePoint,
    xi: f64,
    cutoff: usize,
) -> Result<(ProbDist, ProbDist)> {
    let b = beta.as_complex();
    let cutoff = cutoff
        .max(mixed_cutoff(detected_state, b, xi))
        .max(mixed_cutoff(detected_state, b, 1.0));
    Ok((
        theoretical_mixed_dist(detected_state, b, xi, cutoff)?,
        theoretical_mixed_dist(detected_state, b, 1.0, cutoff)?,
    ))
}

fn gamma_from_dir(dir: &Path) -> Result<f64> {
    let path = dir.join(CALIBRATION_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let cal: CalibrationFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok(cal.result.gamma_hat)
}

/// Re-bins the sweep records, compares them with theory and reconstructs the
/// Wigner section. Without an explicit gain the calibration file next to
/// the manifest is used.
pub fn reconstruct(
    manifest_path: &Path,
    gamma: Option<f64>,
    convention: Option<FidelityConvention>,
) -> Result<ReconstructionReport> {
    let manifest_path = Manifest::resolve(manifest_path);
    let manifest = Manifest::load(&manifest_path)?;
    let dir = manifest_dir(&manifest_path);
    let gamma_hat = match gamma {
        Some(g) => g,
        None => gamma_from_dir(&dir)?,
    };
    if !(gamma_hat > 0.0 && gamma_hat.is_finite()) {
        return Err(Error::Domain(format!("gain {gamma_hat} must be positive")));
    }
    let convention = convention.unwrap_or(manifest.config.fidelity);
    let records = Manifest::load_records(&dir, &manifest.section_entries())?;
    let (state, eta, xi) = common_meta(&records)?;
    let detected_state = state.attenuated(eta);

    struct Row {
        point: PhaseSpacePoint,
        measured: ProbDist,
        corrected: ProbDist,
        uncorrected: ProbDist,
        n_shots: usize,
    }
    let mut rows = records
        .par_iter()
        .map(|r| {
            let point: PhaseSpacePoint = r.detected_probe().into();
            let measured = rebin(r, gamma_hat)?;
            let (corrected, uncorrected) =
                theory_pair(&detected_state, point, xi, measured.cutoff())?;
            Ok(Row {
                point,
                measured,
                corrected,
                uncorrected,
                n_shots: r.voltages.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.point.beta_mag().total_cmp(&b.point.beta_mag()));

    let section = section_from_distributions(
        rows.iter()
            .map(|r| SectionInput {
                point: r.point,
                dist: r.measured.clone(),
                n_shots: Some(r.n_shots),
            })
            .collect(),
        SectionMeta {
            state,
            gamma_hat: Some(gamma_hat),
            eta,
            xi,
        },
    )?;
    let eps = mean_error(&section)?;

    let points: Vec<PointReport> = rows
        .iter()
        .map(|r| PointReport {
            beta_re: r.point.beta_re,
            beta_im: r.point.beta_im,
            beta_mag: r.point.beta_mag(),
            fidelity_corrected: fidelity(&r.measured, &r.corrected, convention),
            fidelity_uncorrected: fidelity(&r.measured, &r.uncorrected, convention),
        })
        .collect();
    let k = points.len() as f64;
    let report = ReconstructionReport {
        gamma_hat,
        fidelity_convention: convention,
        mean_error: eps,
        mean_fidelity_corrected: points.iter().map(|p| p.fidelity_corrected).sum::<f64>() / k,
        mean_fidelity_uncorrected: points.iter().map(|p| p.fidelity_uncorrected).sum::<f64>() / k,
        points,
        section,
    };

    let mut dists = String::from("beta_re,beta_im,m,p_measured,p_corrected,p_uncorrected\n");
    for r in &rows {
        for m in 0..=r.corrected.cutoff().max(r.measured.cutoff()) {
            let _ = writeln!(
                dists,
                "{},{},{m},{},{},{}",
                fmt_exact(r.point.beta_re),
                fmt_exact(r.point.beta_im),
                fmt_exact(r.measured.get(m)),
                fmt_exact(r.corrected.get(m)),
                fmt_exact(r.uncorrected.get(m)),
            );
        }
    }
    write(&dir.join(DISTRIBUTIONS_FILE), &dists)?;
    let mut fids =
        String::from("beta_re,beta_im,beta_mag,fidelity_corrected,fidelity_uncorrected\n");
    for p in &report.points {
        let _ = writeln!(
            fids,
            "{},{},{},{},{}",
            fmt_exact(p.beta_re),
            fmt_exact(p.beta_im),
            fmt_exact(p.beta_mag),
            fmt_exact(p.fidelity_corrected),
            fmt_exact(p.fidelity_uncorrected)
        );
    }
    write(&dir.join(FIDELITIES_FILE), &fids)?;
    write(&dir.join(SECTION_CSV), &report.section.to_csv())?;
    write(&dir.join(SECTION_JSON), &report.section.to_json()?)?;
    write_json(&dir.join(RECONSTRUCTION_FILE), &report)?;
    info!(
        "epsilon = {eps:.3e}, mean fidelity {:.6} (corrected) vs {:.6} (uncorrected)",
        report.mean_fidelity_corrected, report.mean_fidelity_uncorrected
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub state: String,
    pub gamma_true: Option<f64>,
    pub gamma_hat: f64,
    pub stderr_gamma: f64,
    pub gamma_rel_error: Option<f64>,
    pub slope_hat: f64,
    pub stderr_slope: f64,
    pub mean_error: f64,
    pub fidelity_convention: FidelityConvention,
    pub mean_fidelity_corrected: f64,
    pub mean_fidelity_uncorrected: f64,
    pub points: Vec<PointReport>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn build_checks(cfg: &RunConfig, summary: &Summary) -> Vec<Check> {
    let mut checks = Vec::new();
    let Some(acc) = &cfg.acceptance else {
        return checks;
    };
    if let (Some(max), Some(rel)) = (acc.max_gamma_rel_error, summary.gamma_rel_error) {
        checks.push(Check {
            name: "gamma_rel_error".into(),
            value: rel.abs(),
            threshold: max,
            passed: rel.abs() <= max,
        });
    }
    if let Some(max) = acc.max_abs_mean_error {
        checks.push(Check {
            name: "abs_mean_error".into(),
            value: summary.mean_error.abs(),
            threshold: max,
            passed: summary.mean_error.abs() <= max,
        });
    }
    if let Some(min) = acc.min_fidelity {
        let worst = summary
            .points
            .iter()
            .map(|p| p.fidelity_corrected)
            .fold(f64::INFINITY, f64::min);
        checks.push(Check {
            name: "min_fidelity_corrected".into(),
            value: worst,
            threshold: min,
            passed: worst >= min,
        });
    }
    if acc.require_correction_gain {
        let gain = summary.mean_fidelity_corrected - summary.mean_fidelity_uncorrected;
        checks.push(Check {
            name: "correction_fidelity_gain".into(),
            value: gain,
            threshold: 0.0,
            passed: gain >= 0.0,
        });
    }
    checks
}

/// simulate, calibrate and reconstruct in one go, then check thresholds.
///
/// The summary is written before an acceptance failure is reported.
pub fn pipeline(cfg: &RunConfig, out: &Path, workers: Option<usize>) -> Result<Summary> {
    let start = Instant::now();
    simulate(cfg, out, workers)?;
    let cal = calibrate(out)?;
    let rec = with_workers(workers, || {
        reconstruct(out, Some(cal.result.gamma_hat), None)
    })??;
    let mut summary = Summary {
        name: cfg.name.clone(),
        state: cfg.state.to_string(),
        gamma_true: cal.gamma_true,
        gamma_hat: cal.result.gamma_hat,
        stderr_gamma: cal.result.stderr_gamma,
        gamma_rel_error: cal.gamma_true.map(|g| cal.result.gamma_hat / g - 1.0),
        slope_hat: cal.result.slope_hat,
        stderr_slope: cal.result.stderr_slope,
        mean_error: rec.mean_error,
        fidelity_convention: rec.fidelity_convention,
        mean_fidelity_corrected: rec.mean_fidelity_corrected,
        mean_fidelity_uncorrected: rec.mean_fidelity_uncorrected,
        points: rec.points,
        checks: Vec::new(),
        passed: true,
    };
    summary.checks = build_checks(cfg, &summary);
    summary.passed = summary.checks.iter().all(|c| c.passed);
    write_json(&out.join(SUMMARY_FILE), &summary)?;
    write_json(
        &out.join(TIMING_FILE),
        &serde_json::json!({ "runtime_seconds": start.elapsed().as_secs_f64() }),
    )?;
    if !summary.passed {
        return Err(Error::Acceptance(
            summary
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| {
                    format!(
                        "{} = {:.4e} (threshold {:.4e})",
                        c.name, c.value, c.threshold
                    )
                })
                .collect(),
        ));
    }
    Ok(summary)
}
