//! Signal states entering the beam splitter, their mixing with the coherent
//! probe, and the exact count distribution of the mixed field.
//!
//! Mode mismatch is an intensity partition: a fraction `xi` of the probe
//! intensity interferes with the signal, the remaining `1 - xi` reaches the
//! detector as independent Poissonian light.
//!
//! The probe enters with a relative sign, so a probe of amplitude `alpha`
//! displaces the signal by `-alpha`. The alternating parity sum of the counts
//! then samples the Wigner function at `alpha` itself.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photon_statistics::{
    default_cutoff, displaced_thermal_dist, phase_avg_coherent_dist, poisson_dist, ProbDist,
    TAIL_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalState {
    Vacuum,
    /// Coherent state; `amplitude` in sqrt(photons), `phase` in radians.
    Coherent {
        amplitude: f64,
        phase: f64,
    },
    /// Single-mode thermal state with mean photon number `m_th`.
    Thermal {
        m_th: f64,
    },
    /// Coherent state of fixed modulus whose phase is uniformly random.
    #[serde(rename = "phase-averaged")]
    PhaseAveragedCoherent {
        amplitude: f64,
    },
}

fn require_non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{key} must be finite and >= 0, got {v}"
        )))
    }
}

impl SignalState {
    pub fn coherent(amplitude: f64, phase: f64) -> Result<Self> {
        Self::Coherent { amplitude, phase }.validated()
    }

    pub fn thermal(m_th: f64) -> Result<Self> {
        Self::Thermal { m_th }.validated()
    }

    pub fn phase_averaged(amplitude: f64) -> Result<Self> {
        Self::PhaseAveragedCoherent { amplitude }.validated()
    }

    /// Checks ranges and reduces the coherent phase into `[0, 2pi)`.
    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Vacuum => Ok(self),
            Self::Coherent { amplitude, phase } => {
                require_non_negative("coherent amplitude", amplitude)?;
                if !phase.is_finite() {
                    return Err(Error::Domain(format!(
                        "coherent phase {phase} is not finite"
                    )));
                }
                Ok(Self::Coherent {
                    amplitude,
                    phase: phase.rem_euclid(TAU),
                })
            }
            Self::Thermal { m_th } => require_non_negative("m_th", m_th).map(|_| self),
            Self::PhaseAveragedCoherent { amplitude } => {
                require_non_negative("phase-averaged amplitude", amplitude).map(|_| self)
            }
        }
    }

    pub fn mean_photons(&self) -> f64 {
        match *self {
            Self::Vacuum => 0.0,
            Self::Coherent { amplitude, .. } | Self::PhaseAveragedCoherent { amplitude } => {
                amplitude * amplitude
            }
            Self::Thermal { m_th } => m_th,
        }
    }

    /// The same state after a loss channel of efficiency `eta`; amplitudes
    /// scale by `sqrt(eta)` and mean thermal numbers by `eta`.
    pub fn attenuated(&self, eta: f64) -> Self {
        let s = eta.sqrt();
        match *self {
            Self::Vacuum => Self::Vacuum,
            Self::Coherent { amplitude, phase } => Self::Coherent {
                amplitude: amplitude * s,
                phase,
            },
            Self::Thermal { m_th } => Self::Thermal { m_th: m_th * eta },
            Self::PhaseAveragedCoherent { amplitude } => Self::PhaseAveragedCoherent {
                amplitude: amplitude * s,
            },
        }
    }

    /// Draws a latent complex amplitude from the state's P-function.
    pub fn sample_amplitude<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        match *self {
            Self::Vacuum => Complex64::new(0.0, 0.0),
            Self::Coherent { amplitude, phase } => Complex64::from_polar(amplitude, phase),
            Self::Thermal { m_th } => {
                if m_th == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let quad = Normal::new(0.0, (0.5 * m_th).sqrt()).expect("finite width");
                Complex64::new(quad.sample(rng), quad.sample(rng))
            }
            Self::PhaseAveragedCoherent { amplitude } => {
                Complex64::from_polar(amplitude, rng.random::<f64>() * TAU)
            }
        }
    }
}

impl fmt::Display for SignalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Vacuum => write!(f, "vacuum"),
            Self::Coherent { amplitude, phase } => {
                write!(f, "coherent(amplitude={amplitude},phase={phase})")
            }
            Self::Thermal { m_th } => write!(f, "thermal(m_th={m_th})"),
            Self::PhaseAveragedCoherent { amplitude } => {
                write!(f, "phase-averaged(amplitude={amplitude})")
            }
        }
    }
}

impl FromStr for SignalState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "vacuum" {
            return Ok(Self::Vacuum);
        }
        let bad = || Error::Input(format!("unrecognised state description `{s}`"));
        let (kind, rest) = s.split_once('(').ok_or_else(bad)?;
        let body = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut params = Vec::new();
        for kv in body.split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            params.push((k.trim(), v));
        }
        let get = |key: &str| {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Input(format!("state `{s}` lacks `{key}`")))
        };
        match kind.trim() {
            "coherent" => Self::coherent(get("amplitude")?, get("phase")?),
            "thermal" => Self::thermal(get("m_th")?),
            "phase-averaged" => Self::phase_averaged(get("amplitude")?),
            _ => Err(bad()),
        }
    }
}

/// Probe amplitude at the signal's photon level, its phase, and the fraction
/// of its intensity that is mode-matched to the signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSetting {
    pub alpha_mag: f64,
    pub phase: f64,
    pub overlap_xi: f64,
}

impl ProbeSetting {
    pub fn new(alpha_mag: f64, phase: f64, overlap_xi: f64) -> Result<Self> {
        require_non_negative("probe amplitude", alpha_mag)?;
        if !phase.is_finite() {
            return Err(Error::Domain(format!("probe phase {phase} is not finite")));
        }
        check_overlap(overlap_xi)?;
        Ok(Self {
            alpha_mag,
            phase,
            overlap_xi,
        })
    }

    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(self.alpha_mag, self.phase)
    }
}

pub(crate) fn check_overlap(xi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&xi) {
        Ok(())
    } else {
        Err(Error::Domain(format!("mode overlap {xi} outside [0, 1]")))
    }
}

fn poisson_draw<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as u64
}

/// One draw of the photon number of the signal mixed with the probe.
pub fn sample_mixed_photons<R: Rng + ?Sized>(
    state: &SignalState,
    probe: &ProbeSetting,
    rng: &mut R,
) -> u64 {
    let matched = probe.overlap_xi.sqrt() * probe.amplitude();
    let a = state.sample_amplitude(rng);
    let n_matched = poisson_draw((a - matched).norm_sqr(), rng);
    let residual = (1.0 - probe.overlap_xi) * probe.alpha_mag * probe.alpha_mag;
    n_matched + poisson_draw(residual, rng)
}

/// Mean and variance of the mixed-field counts.
pub fn mixed_moments(state: &SignalState, beta: Complex64, xi: f64) -> (f64, f64) {
    let probe_sq = beta.norm_sqr();
    let mean = match *state {
        SignalState::Coherent { amplitude, phase } => {
            let a = Complex64::from_polar(amplitude, phase);
            (a - xi.sqrt() * beta).norm_sqr() + (1.0 - xi) * probe_sq
        }
        _ => state.mean_photons() + probe_sq,
    };
    let excess = match *state {
        SignalState::Vacuum | SignalState::Coherent { .. } => 0.0,
        SignalState::Thermal { m_th } => m_th * m_th + 2.0 * m_th * xi * probe_sq,
        SignalState::PhaseAveragedCoherent { amplitude } => {
            2.0 * amplitude * amplitude * xi * probe_sq
        }
    };
    (mean, mean + excess)
}

/// Default cutoff for [`theoretical_mixed_dist`].
///
/// Thermal light has a geometric tail with scale `1 + m_th`, which ten
/// standard deviations do not always cover, so a margin for that tail is added.
pub fn mixed_cutoff(state: &SignalState, beta: Complex64, xi: f64) -> usize {
    let (mean, var) = mixed_moments(state, beta, xi);
    let base = default_cutoff(mean, var);
    match *state {
        SignalState::Thermal { m_th } => {
            base + ((1.0 + m_th) * (1.0 / TAIL_TOL).ln()).ceil() as usize
        }
        _ => base,
    }
}

/// Exact count distribution of `state` mixed with a probe of amplitude `beta`
/// and overlap `xi`.
///
/// Both `state` and `beta` are expressed at the level the counts are taken,
/// so for detected-photon statistics pass `state.attenuated(eta)` and
/// `sqrt(eta) * alpha`.
pub fn theoretical_mixed_dist(
    state: &SignalState,
    beta: Complex64,
    xi: f64,
    cutoff: usize,
) -> Result<ProbDist> {
    check_overlap(xi)?;
    let state = state.validated()?;
    if !(beta.re.is_finite() && beta.im.is_finite()) {
        return Err(Error::Domain(format!(
            "probe amplitude {beta} is not finite"
        )));
    }
    let matched_sq = xi * beta.norm_sqr();
    let core = match state {
        SignalState::Vacuum => poisson_dist(matched_sq, cutoff)?,
        SignalState::Coherent { amplitude, phase } => {
            let a = Complex64::from_polar(amplitude, phase);
            poisson_dist((a - xi.sqrt() * beta).norm_sqr(), cutoff)?
        }
        SignalState::Thermal { m_th } => displaced_thermal_dist(m_th, matched_sq, cutoff)?,
        SignalState::PhaseAveragedCoherent { amplitude } => {
            phase_avg_coherent_dist(amplitude * amplitude, matched_sq, cutoff)?
        }
    };
    if xi == 1.0 {
        return Ok(core);
    }
    let residual = poisson_dist((1.0 - xi) * beta.norm_sqr(), cutoff)?;
    Ok(core.convolve(&residual).with_cutoff(cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &ProbDist, b: &ProbDist) -> f64 {
        let n = a.cutoff().max(b.cutoff());
        (0..=n)
            .map(|m| (a.get(m) - b.get(m)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn state_validation() {
        assert!(SignalState::thermal(-1.0).is_err());
        assert!(SignalState::phase_averaged(f64::NAN).is_err());
        match SignalState::coherent(1.0, -0.5).unwrap() {
            SignalState::Coherent { phase, .. } => assert!((phase - (TAU - 0.5)).abs() < 1e-15),
            _ => unreachable!(),
        }
        assert!(ProbeSetting::new(1.0, 0.0, 1.2).is_err());
        assert!(ProbeSetting::new(-1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn state_text_round_trip() {
        for s in [
            SignalState::Vacuum,
            SignalState::coherent(1.25, 0.3).unwrap(),
            SignalState::thermal(6.322580645161291).unwrap(),
            SignalState::phase_averaged(2.13).unwrap(),
        ] {
            assert_eq!(s.to_string().parse::<SignalState>().unwrap(), s);
        }
        assert!("squeezed(r=1)".parse::<SignalState>().is_err());
        assert!("thermal(mean=1)".parse::<SignalState>().is_err());
    }

    #[test]
    fn state_serde_tagging() {
        let s: SignalState = serde_json::from_str(r#"{"kind":"thermal","m_th":2.0}"#).unwrap();
        assert_eq!(s, SignalState::Thermal { m_th: 2.0 });
        let p: SignalState =
            serde_json::from_str(r#"{"kind":"phase-averaged","amplitude":1.0}"#).unwrap();
        assert_eq!(p, SignalState::PhaseAveragedCoherent { amplitude: 1.0 });
    }

    #[test]
    fn vacuum_without_probe_never_clicks() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let probe = ProbeSetting::new(0.0, 0.0, 0.4).unwrap();
        assert!(
            (0..10_000).all(|_| sample_mixed_photons(&SignalState::Vacuum, &probe, &mut rng) == 0)
        );
    }

    #[test]
    fn perfect_overlap_has_no_residual_branch() {
        let state = SignalState::thermal(1.3).unwrap();
        let beta = Complex64::new(0.8, -0.4);
        let d = theoretical_mixed_dist(&state, beta, 1.0, 50).unwrap();
        let core = displaced_thermal_dist(1.3, beta.norm_sqr(), 50).unwrap();
        assert_eq!(d, core);
    }

    #[test]
    fn vacuum_mixture_is_poisson_for_any_overlap() {
        let beta = Complex64::new(1.5, 0.0);
        let direct = poisson_dist(2.25, 40).unwrap();
        for xi in [1.0, 0.5, 0.0] {
            let d = theoretical_mixed_dist(&SignalState::Vacuum, beta, xi, 40).unwrap();
            assert!(max_abs_diff(&d, &direct) < 1e-14, "xi={xi}");
        }
    }

    #[test]
    fn phase_averaged_without_probe_is_poisson() {
        let s = SignalState::phase_averaged(1.2).unwrap();
        let d = theoretical_mixed_dist(&s, Complex64::new(0.0, 0.0), 0.91, 40).unwrap();
        assert!(max_abs_diff(&d, &poisson_dist(1.44, 40).unwrap()) < 1e-15);
    }

    #[test]
    fn analytic_moments_match_distribution() {
        let beta = Complex64::new(1.1, 0.7);
        for state in [
            SignalState::Vacuum,
            SignalState::coherent(0.9, 1.0).unwrap(),
            SignalState::thermal(1.96).unwrap(),
            SignalState::phase_averaged(1.41f64.sqrt()).unwrap(),
        ] {
            let (mean, var) = mixed_moments(&state, beta, 0.65);
            let cutoff = mixed_cutoff(&state, beta, 0.65) + 40;
            let m = theoretical_mixed_dist(&state, beta, 0.65, cutoff)
                .unwrap()
                .moments();
            assert!((m.mean - mean).abs() < 1e-8, "{state}");
            assert!((m.variance - var).abs() < 1e-7, "{state}");
        }
    }

    #[test]
    fn rejects_bad_overlap() {
        let r = theoretical_mixed_dist(&SignalState::Vacuum, Complex64::new(1.0, 0.0), 1.1, 10);
        assert!(matches!(r, Err(Error::Domain(_))));
    }
}
