//! Wigner-function estimation from detected-photon distributions and the
//! analytic reference surfaces of the classical states.
//!
//! The estimator is the alternating parity sum `(2/pi) sum_m (-1)^m p[m]` of
//! the counts recorded with the probe set to `beta`. Every quantity here is
//! at the detected level, where `beta = sqrt(eta) * alpha`.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::rebin;
use crate::detector::ShotRecord;
use crate::error::{Error, Result};
use crate::field_states::{check_overlap, SignalState};
use crate::photon_statistics::io::fmt_exact;
use crate::photon_statistics::ProbDist;
use crate::quadrature::integrate_square;
use crate::special::bessel_i0e;

/// Below this value of `1 - eta` the loss kernel is treated as a delta.
const LOSSLESS_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpacePoint {
    pub beta_re: f64,
    pub beta_im: f64,
}

impl PhaseSpacePoint {
    pub fn new(beta_re: f64, beta_im: f64) -> Self {
        Self { beta_re, beta_im }
    }

    pub fn from_polar(mag: f64, phase: f64) -> Self {
        Complex64::from_polar(mag, phase).into()
    }

    pub fn origin() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn beta_mag(&self) -> f64 {
        self.beta_re.hypot(self.beta_im)
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.beta_re, self.beta_im)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::new(k * self.beta_re, k * self.beta_im)
    }
}

impl From<Complex64> for PhaseSpacePoint {
    fn from(c: Complex64) -> Self {
        Self::new(c.re, c.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerSample {
    pub point: PhaseSpacePoint,
    pub w_est: f64,
    /// Statistical standard error of `w_est`; zero for exact distributions.
    pub stderr: f64,
    pub trunc_bound: f64,
    pub w_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionMeta {
    pub state: SignalState,
    pub gamma_hat: Option<f64>,
    pub eta: f64,
    pub xi: f64,
}

/// Samples along a cut of phase space, ordered by `|beta|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerSection {
    pub samples: Vec<WignerSample>,
    pub meta: SectionMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WignerEstimate {
    pub w_est: f64,
    /// Bound on the contribution of counts beyond the cutoff.
    pub trunc_bound: f64,
}

/// Alternating parity sum of a detected-photon distribution.
pub fn wigner_from_dist(p: &ProbDist) -> WignerEstimate {
    let parity: f64 = p
        .probs()
        .iter()
        .enumerate()
        .map(|(m, &x)| if m % 2 == 0 { x } else { -x })
        .sum();
    WignerEstimate {
        w_est: FRAC_2_PI * parity,
        trunc_bound: FRAC_2_PI * p.tail_mass(),
    }
}

/// Standard error of the parity estimator from `n_shots` shots.
///
/// Each shot contributes `+-2/pi`, so the estimator is a scaled Bernoulli
/// mean with variance `(2/pi)^2 (1 - w_norm^2) / N`.
pub fn parity_stderr(w_est: f64, n_shots: usize) -> f64 {
    let w_norm = (w_est / FRAC_2_PI).clamp(-1.0, 1.0);
    FRAC_2_PI * ((1.0 - w_norm * w_norm) / n_shots as f64).sqrt()
}

/// Non-squeezed Gaussian state with `m_th` thermal photons centred on `beta0`.
pub fn analytic_gaussian_wigner(
    m_th: f64,
    beta0: PhaseSpacePoint,
    beta: PhaseSpacePoint,
) -> Result<f64> {
    if !(m_th >= 0.0 && m_th.is_finite()) {
        return Err(Error::Domain(format!("m_th must be >= 0, got {m_th}")));
    }
    let width = 2.0 * m_th + 1.0;
    let d2 = (beta.as_complex() - beta0.as_complex()).norm_sqr();
    Ok(FRAC_2_PI / width * (-2.0 * d2 / width).exp())
}

/// Phase-averaged coherent state of modulus `beta0_mag`:
/// `(2/pi) I0(4 |b| |b0|) exp(-2 (|b|^2 + |b0|^2))`.
///
/// Evaluated through the scaled Bessel function as
/// `(2/pi) I0e(4 |b| |b0|) exp(-2 (|b| - |b0|)^2)` to avoid overflow.
pub fn analytic_phase_avg_wigner(beta0_mag: f64, beta_mag: f64) -> Result<f64> {
    if !(beta0_mag >= 0.0 && beta_mag >= 0.0) {
        return Err(Error::Domain(format!(
            "magnitudes must be >= 0, got |b0|={beta0_mag}, |b|={beta_mag}"
        )));
    }
    let x = 4.0 * beta_mag * beta0_mag;
    let d = beta_mag - beta0_mag;
    Ok(FRAC_2_PI * bessel_i0e(x) * (-2.0 * d * d).exp())
}

/// Analytic Wigner function of a state at `beta`, without mode mismatch.
pub fn reference_wigner(state: &SignalState, beta: PhaseSpacePoint) -> f64 {
    let res = match *state {
        SignalState::Vacuum => analytic_gaussian_wigner(0.0, PhaseSpacePoint::origin(), beta),
        SignalState::Coherent { amplitude, phase } => {
            analytic_gaussian_wigner(0.0, PhaseSpacePoint::from_polar(amplitude, phase), beta)
        }
        SignalState::Thermal { m_th } => {
            analytic_gaussian_wigner(m_th, PhaseSpacePoint::origin(), beta)
        }
        SignalState::PhaseAveragedCoherent { amplitude } => {
            analytic_phase_avg_wigner(amplitude, beta.beta_mag())
        }
    };
    res.expect("validated state")
}

/// Wigner function seen through a loss channel of efficiency `eta`:
///
/// `(2 / (pi eta (1-eta))) * integral d^2b' exp(-2 |b - b'|^2 / (1-eta)) W(b' / sqrt(eta))`
///
/// The `1/eta` is the Jacobian of `b' = sqrt(eta) a`; it keeps the result
/// normalised, so a Gaussian maps onto the Gaussian with detected parameters.
/// `w` is the photon-level Wigner function and must be bounded by `2/pi`.
/// The integral runs over a square centred on `beta`, large enough that the
/// discarded kernel mass costs at most a tenth of `tol`; the rest of the
/// budget goes to adaptive cubature.
pub fn loss_smoothed_wigner<W>(w: W, eta: f64, beta: PhaseSpacePoint, tol: f64) -> Result<f64>
where
    W: Fn(PhaseSpacePoint) -> f64,
{
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Domain(format!("efficiency {eta} outside (0, 1]")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let inv_sqrt_eta = 1.0 / eta.sqrt();
    let loss = 1.0 - eta;
    if loss < LOSSLESS_GAP {
        return Ok(w(beta.scaled(inv_sqrt_eta)) / eta);
    }
    let half_width = (0.5 * loss * (10.0 * FRAC_2_PI / (eta * tol)).ln()).sqrt();
    let norm = 2.0 / (PI * loss * eta);
    let est = integrate_square(
        |x, y| {
            let (dx, dy) = (x - beta.beta_re, y - beta.beta_im);
            let kernel = norm * (-2.0 * (dx * dx + dy * dy) / loss).exp();
            kernel * w(PhaseSpacePoint::new(x * inv_sqrt_eta, y * inv_sqrt_eta))
        },
        beta.beta_re,
        beta.beta_im,
        half_width,
        0.9 * tol,
    )
    .map_err(|e| match e {
        Error::Quadrature(msg) => Error::Quadrature(format!(
            "loss smoothing at beta=({}, {}), eta={eta}: {msg}",
            beta.beta_re, beta.beta_im
        )),
        other => other,
    })?;
    Ok(est.value)
}

/// Wigner function measured with only a fraction `xi` of the probe intensity
/// mode-matched: the ideal function at the matched displacement times the
/// parity factor `exp(-2 (1 - xi) |beta|^2)` of the residual Poissonian probe.
pub fn mismatch_corrected_wigner<W>(w_ideal: W, xi: f64, beta: PhaseSpacePoint) -> Result<f64>
where
    W: Fn(PhaseSpacePoint) -> f64,
{
    check_overlap(xi)?;
    if xi == 1.0 {
        return Ok(w_ideal(beta));
    }
    let residual = (1.0 - xi) * beta.as_complex().norm_sqr();
    Ok(w_ideal(beta.scaled(xi.sqrt())) * (-2.0 * residual).exp())
}

/// Signed mean of `w_ref - w_est` over the section.
pub fn mean_error(section: &WignerSection) -> Result<f64> {
    if section.samples.is_empty() {
        return Err(Error::Input("empty Wigner section".into()));
    }
    let mut sum = 0.0;
    for (k, s) in section.samples.iter().enumerate() {
        let r = s
            .w_ref
            .ok_or_else(|| Error::Input(format!("sample {k} has no reference value")))?;
        sum += r - s.w_est;
    }
    Ok(sum / section.samples.len() as f64)
}

/// One point of a section before assembly.
#[derive(Debug, Clone)]
pub struct SectionInput {
    pub point: PhaseSpacePoint,
    pub dist: ProbDist,
    /// Shots behind `dist`; `None` for exact distributions.
    pub n_shots: Option<usize>,
}

/// Builds a section from detected-photon distributions, attaching
/// mismatch-corrected references for `meta.state` observed at `meta.eta`.
pub fn section_from_distributions(
    inputs: Vec<SectionInput>,
    meta: SectionMeta,
) -> Result<WignerSection> {
    if inputs.is_empty() {
        return Err(Error::Input("no records for the section".into()));
    }
    check_overlap(meta.xi)?;
    let detected_state = meta.state.attenuated(meta.eta);
    let mut samples = inputs
        .iter()
        .map(|inp| {
            let est = wigner_from_dist(&inp.dist);
            let w_ref = mismatch_corrected_wigner(
                |b| reference_wigner(&detected_state, b),
                meta.xi,
                inp.point,
            )?;
            Ok(WignerSample {
                point: inp.point,
                w_est: est.w_est,
                stderr: inp.n_shots.map_or(0.0, |n| parity_stderr(est.w_est, n)),
                trunc_bound: est.trunc_bound,
                w_ref: Some(w_ref),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.point.beta_mag().total_cmp(&b.point.beta_mag()));
    if let Some(w) = samples
        .windows(2)
        .find(|w| w[0].point.beta_mag() == w[1].point.beta_mag())
    {
        return Err(Error::Input(format!(
            "two records share |beta| = {}; a section needs distinct probe amplitudes",
            w[0].point.beta_mag()
        )));
    }
    Ok(WignerSection { samples, meta })
}

/// Checks that records describe one state, detector and overlap.
pub fn common_meta(records: &[ShotRecord]) -> Result<(SignalState, f64, f64)> {
    let first = records
        .first()
        .ok_or_else(|| Error::Input("no records for the section".into()))?;
    let m0 = &first.meta;
    for (k, r) in records.iter().enumerate().skip(1) {
        let m = &r.meta;
        let mut bad = Vec::new();
        if m.state != m0.state {
            bad.push(format!("state {} vs {}", m.state, m0.state));
        }
        if m.eta != m0.eta {
            bad.push(format!("eta {} vs {}", m.eta, m0.eta));
        }
        if m.probe.overlap_xi != m0.probe.overlap_xi {
            bad.push(format!(
                "xi {} vs {}",
                m.probe.overlap_xi, m0.probe.overlap_xi
            ));
        }
        if m.gamma_true != m0.gamma_true || m.noise_sigma != m0.noise_sigma {
            bad.push("detector model differs".into());
        }
        if !bad.is_empty() {
            return Err(Error::Input(format!(
                "record {k} is inconsistent with record 0: {}",
                bad.join(", ")
            )));
        }
    }
    Ok((m0.state, m0.eta, m0.probe.overlap_xi))
}

/// Re-bins every record with `gamma_hat` and assembles the section.
pub fn reconstruct_section(records: &[ShotRecord], gamma_hat: f64) -> Result<WignerSection> {
    let (state, eta, xi) = common_meta(records)?;
    let inputs = records
        .par_iter()
        .map(|r| {
            Ok(SectionInput {
                point: r.detected_probe().into(),
                dist: rebin(r, gamma_hat)?,
                n_shots: Some(r.voltages.len()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    section_from_distributions(
        inputs,
        SectionMeta {
            state,
            gamma_hat: Some(gamma_hat),
            eta,
            xi,
        },
    )
}

impl WignerSection {
    /// Columns `beta_re,beta_im,w_est,stderr,trunc_bound,w_ref`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta_re,beta_im,w_est,stderr,trunc_bound,w_ref\n");
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt_exact(s.point.beta_re),
                fmt_exact(s.point.beta_im),
                fmt_exact(s.w_est),
                fmt_exact(s.stderr),
                fmt_exact(s.trunc_bound),
                s.w_ref.map(fmt_exact).unwrap_or_default()
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_statistics::{phase_avg_coherent_dist, poisson_dist, thermal_dist};

    // written out rather than taken from std so the oracle is independent
    #[allow(clippy::approx_constant)]
    const TWO_OVER_PI: f64 = 0.636_619_772_367_581_4;

    #[test]
    fn vacuum_peak() {
        let e = wigner_from_dist(&ProbDist::delta(0, 5));
        assert_eq!(e.w_est, TWO_OVER_PI);
        assert_eq!(e.trunc_bound, 0.0);
    }

    #[test]
    fn alternating_sum_closed_forms() {
        for mu in [0.1, 1.0, 2.5, 4.0] {
            let p = poisson_dist(mu, 80).unwrap();
            let e = wigner_from_dist(&p);
            assert!((e.w_est - TWO_OVER_PI * (-2.0 * mu).exp()).abs() < 1e-12);
        }
        // (2/pi) / (1 + 2 * 1.96) = 0.12939426267633767
        let e = wigner_from_dist(&thermal_dist(1.96, 200).unwrap());
        assert!((e.w_est - 0.129_394_262_676_337_67).abs() < 1e-12);
    }

    #[test]
    fn truncation_bound_uses_missing_mass() {
        let p = ProbDist::new(vec![0.5, 0.3]).unwrap();
        let e = wigner_from_dist(&p);
        assert!((e.w_est - TWO_OVER_PI * 0.2).abs() < 1e-15);
        assert!((e.trunc_bound - TWO_OVER_PI * 0.2).abs() < 1e-15);
    }

    #[test]
    fn gaussian_reference_values() {
        let o = PhaseSpacePoint::origin();
        assert_eq!(analytic_gaussian_wigner(0.0, o, o).unwrap(), TWO_OVER_PI);
        let one = PhaseSpacePoint::new(0.0, 1.0);
        // (2/pi) e^{-2} = 0.0861571172073945...
        let v = analytic_gaussian_wigner(0.0, o, one).unwrap();
        assert!((v - 0.086_157_117_207_394_5).abs() < 1e-15);
        let t = analytic_gaussian_wigner(1.96, o, o).unwrap();
        assert!((t - 0.129_394_262_676_337_67).abs() < 1e-15);
        assert!(analytic_gaussian_wigner(-0.1, o, o).is_err());
    }

    #[test]
    fn phase_averaged_reference_values() {
        for b in [0.0, 0.3, 1.1, 2.0] {
            let v = analytic_phase_avg_wigner(0.0, b).unwrap();
            assert!((v - TWO_OVER_PI * (-2.0 * b * b).exp()).abs() < 1e-16);
        }
        // (2/pi) e^{-2.82} = 0.0379463216791200...
        let v = analytic_phase_avg_wigner(1.41f64.sqrt(), 0.0).unwrap();
        assert!((v - TWO_OVER_PI * (-2.82f64).exp()).abs() < 1e-16);
        assert!((v - 0.037_946_321_679_120_07).abs() < 1e-15);
        assert!(analytic_phase_avg_wigner(-1.0, 0.0).is_err());
        assert!(analytic_phase_avg_wigner(30.0, 30.0).unwrap().is_finite());
    }

    #[test]
    fn phase_averaged_matches_series() {
        let b0 = 1.41f64.sqrt();
        for b in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let p = phase_avg_coherent_dist(b0 * b0, b * b, 80).unwrap();
            let e = wigner_from_dist(&p);
            let r = analytic_phase_avg_wigner(b0, b).unwrap();
            assert!((e.w_est - r).abs() <= 1e-6 + e.trunc_bound, "b={b}");
        }
    }

    #[test]
    fn mismatch_correction_identity_and_domain() {
        let w = |b: PhaseSpacePoint| (-b.beta_mag()).exp();
        let beta = PhaseSpacePoint::new(0.3, -0.8);
        assert_eq!(mismatch_corrected_wigner(w, 1.0, beta).unwrap(), w(beta));
        assert!(mismatch_corrected_wigner(w, 1.01, beta).is_err());
        assert!(mismatch_corrected_wigner(w, -0.01, beta).is_err());
    }

    #[test]
    fn loss_smoothing_lossless_limit() {
        let narrow = |b: PhaseSpacePoint| {
            analytic_gaussian_wigner(0.0, PhaseSpacePoint::new(0.2, 0.0), b).unwrap()
        };
        let beta = PhaseSpacePoint::new(0.25, 0.1);
        let eta = 1.0 - 1e-7;
        let v = loss_smoothed_wigner(narrow, eta, beta, 1e-6).unwrap();
        assert_eq!(v, narrow(beta.scaled(1.0 / eta.sqrt())) / eta);
        let near = loss_smoothed_wigner(narrow, 0.999, beta, 1e-8).unwrap();
        assert!((near - narrow(beta.scaled(1.0 / 0.999f64.sqrt())) / 0.999).abs() < 1e-3);
        assert!(loss_smoothed_wigner(narrow, 0.0, beta, 1e-6).is_err());
    }

    #[test]
    fn mean_error_linearity() {
        let meta = SectionMeta {
            state: SignalState::Vacuum,
            gamma_hat: None,
            eta: 1.0,
            xi: 1.0,
        };
        let sample = |w_est: f64, w_ref: f64| WignerSample {
            point: PhaseSpacePoint::origin(),
            w_est,
            stderr: 0.0,
            trunc_bound: 0.0,
            w_ref: Some(w_ref),
        };
        let mut section = WignerSection {
            samples: vec![sample(0.1, 0.1), sample(0.3, 0.3)],
            meta,
        };
        assert_eq!(mean_error(&section).unwrap(), 0.0);
        section.samples = vec![sample(0.1, 0.15), sample(0.3, 0.35)];
        assert!((mean_error(&section).unwrap() - 0.05).abs() < 1e-15);
        section.samples[0].w_ref = None;
        assert!(mean_error(&section).is_err());
        section.samples.clear();
        assert!(mean_error(&section).is_err());
    }

    #[test]
    fn section_requires_records() {
        assert!(matches!(
            reconstruct_section(&[], 1.0),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn parity_stderr_limits() {
        assert_eq!(parity_stderr(TWO_OVER_PI, 100), 0.0);
        assert!((parity_stderr(0.0, 100) - TWO_OVER_PI / 10.0).abs() < 1e-15);
    }
}
