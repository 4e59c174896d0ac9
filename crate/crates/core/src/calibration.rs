//! Self-consistent gain calibration.
//!
//! For a linear detector the voltage Fano factor obeys
//! `F_v = (Q / n) * v_bar + gamma`: the field enters only through the slope,
//! so the intercept of `F_v` against `v_bar` over an efficiency sweep is the
//! gain. Once the gain is known, voltages are divided by it and re-binned into
//! unit-width bins to give the detected-photon distribution.

use serde::{Deserialize, Serialize};

use crate::detector::ShotRecord;
use crate::error::{Error, Result};
use crate::photon_statistics::ProbDist;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoPoint {
    pub v_bar: f64,
    pub f_v: f64,
    pub eta_label: f64,
    pub n_shots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub gamma_hat: f64,
    pub slope_hat: f64,
    pub stderr_gamma: f64,
    pub stderr_slope: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

impl CalibrationResult {
    /// Whether the slope is within `k` standard errors of zero.
    pub fn slope_consistent_with_zero(&self, k: f64) -> bool {
        self.slope_hat.abs() <= k * self.stderr_slope
    }
}

/// Fit result together with the points it was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    #[serde(flatten)]
    pub result: CalibrationResult,
    pub points: Vec<FanoPoint>,
}

/// Sample mean and Fano factor (unbiased variance over mean) of a record.
pub fn fano_point(rec: &ShotRecord) -> Result<FanoPoint> {
    let v = &rec.voltages;
    if v.len() < 2 {
        return Err(Error::CalibrationInput(format!(
            "need at least 2 shots for a variance, got {}",
            v.len()
        )));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::CalibrationInput(format!(
            "mean voltage {mean} is not positive"
        )));
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(FanoPoint {
        v_bar: mean,
        f_v: var / mean,
        eta_label: rec.meta.eta,
        n_shots: v.len(),
    })
}

/// Unweighted least-squares line `f_v = slope * v_bar + gamma`.
///
/// Points are sorted by `v_bar` first so the result does not depend on the
/// order in which they are supplied.
pub fn fit_gamma(points: &[FanoPoint]) -> Result<CalibrationResult> {
    if points.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 Fano points, got {}",
            points.len()
        )));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.v_bar.total_cmp(&b.v_bar).then(a.f_v.total_cmp(&b.f_v)));
    if pts
        .iter()
        .any(|p| !(p.v_bar.is_finite() && p.f_v.is_finite()))
    {
        return Err(Error::Fit("non-finite Fano point".into()));
    }

    let n = pts.len() as f64;
    let x_bar = pts.iter().map(|p| p.v_bar).sum::<f64>() / n;
    let y_bar = pts.iter().map(|p| p.f_v).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &pts {
        let (dx, dy) = (p.v_bar - x_bar, p.f_v - y_bar);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let spread = pts.last().unwrap().v_bar - pts[0].v_bar;
    if sxx <= 0.0 || spread <= 1e-12 * x_bar.abs().max(1.0) {
        return Err(Error::Fit(format!(
            "mean voltages are degenerate (spread {spread:e}); the sweep needs distinct efficiencies"
        )));
    }

    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let sse = pts
        .iter()
        .map(|p| {
            let r = p.f_v - (slope * p.v_bar + intercept);
            r * r
        })
        .sum::<f64>();
    let s2 = sse / (n - 2.0);
    let stderr_slope = (s2 / sxx).sqrt();
    let stderr_gamma = (s2 * (1.0 / n + x_bar * x_bar / sxx)).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };

    if intercept <= 0.0 {
        return Err(Error::CalibrationFailure {
            gamma_hat: intercept,
        });
    }
    Ok(CalibrationResult {
        gamma_hat: intercept,
        slope_hat: slope,
        stderr_gamma,
        stderr_slope,
        r_squared,
        points_used: pts.len(),
    })
}

/// Fano points for every record, then the fit.
pub fn calibrate(records: &[ShotRecord]) -> Result<CalibrationReport> {
    let points = records.iter().map(fano_point).collect::<Result<Vec<_>>>()?;
    let result = fit_gamma(&points)?;
    Ok(CalibrationReport { result, points })
}

/// Nearest detected-photon bin of one voltage; ties round away from zero and
/// negative voltages land in bin 0.
#[inline]
pub fn bin_voltage(v: f64, gamma_hat: f64) -> u64 {
    let m = (v / gamma_hat).round();
    if m > 0.0 {
        m as u64
    } else {
        0
    }
}

/// Histogram of binned voltages, indexed by detected-photon number.
pub fn rebin_counts(voltages: &[f64], gamma_hat: f64) -> Result<Vec<u64>> {
    if !(gamma_hat > 0.0 && gamma_hat.is_finite()) {
        return Err(Error::Domain(format!("gain {gamma_hat} must be positive")));
    }
    let mut counts: Vec<u64> = vec![0];
    for &v in voltages {
        let m = bin_voltage(v, gamma_hat) as usize;
        if m >= counts.len() {
            counts.resize(m + 1, 0);
        }
        counts[m] += 1;
    }
    Ok(counts)
}

/// Detected-photon distribution of a record.
pub fn rebin(rec: &ShotRecord, gamma_hat: f64) -> Result<ProbDist> {
    ProbDist::from_counts(&rebin_counts(&rec.voltages, gamma_hat)?)
}
