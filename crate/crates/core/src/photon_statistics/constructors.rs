//! Analytic photon-number distributions of the classical states in use.

use log::warn;

use super::{ProbDist, TAIL_TOL};
use crate::error::{Error, Result};
use crate::quadrature::periodic_mean;
use crate::special::{ln_factorial_table, poisson_pmf};

const PHASE_NODES: usize = 2048;
const PHASE_NODES_MAX: usize = 1 << 16;
const PHASE_TOL: f64 = 1e-10;

fn check_non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{name} must be finite and non-negative, got {value}"
        )))
    }
}

fn finish(probs: Vec<f64>, what: &str) -> ProbDist {
    let dist = ProbDist::from_raw(probs);
    let tail = dist.tail_mass();
    if tail > TAIL_TOL {
        warn!(
            "{what}: truncation at M={} leaves tail mass {tail:.3e}",
            dist.cutoff()
        );
    }
    dist
}

/// Poisson law with mean `mu`.
pub fn poisson_dist(mu: f64, cutoff: usize) -> Result<ProbDist> {
    check_non_negative("Poisson mean", mu)?;
    Ok(finish(poisson_pmf(mu, cutoff), "poisson_dist"))
}

/// Bose–Einstein law `m_th^m / (1 + m_th)^(m+1)`.
pub fn thermal_dist(m_th: f64, cutoff: usize) -> Result<ProbDist> {
    check_non_negative("thermal mean", m_th)?;
    let ratio = m_th / (1.0 + m_th);
    let mut probs = Vec::with_capacity(cutoff + 1);
    let mut p = 1.0 / (1.0 + m_th);
    for _ in 0..=cutoff {
        probs.push(p);
        p *= ratio;
    }
    Ok(finish(probs, "thermal_dist"))
}

fn ln_pow(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        0.0
    } else {
        exp as f64 * base.ln()
    }
}

/// Thermal state of mean `m_th` displaced by an amplitude of squared modulus
/// `disp_sq`, via the Laguerre-polynomial closed form
///
/// `p[m] = e^{-D/(1+n)} / (1+n) * sum_k C(m,k) t^(m-k) u^k / k!`
///
/// with `t = n/(1+n)` and `u = D/(1+n)^2`, which stays finite as `n -> 0`.
pub fn displaced_thermal_dist(m_th: f64, disp_sq: f64, cutoff: usize) -> Result<ProbDist> {
    check_non_negative("thermal mean", m_th)?;
    check_non_negative("displacement intensity", disp_sq)?;
    let lf = ln_factorial_table(cutoff);
    let t = m_th / (1.0 + m_th);
    let u = disp_sq / ((1.0 + m_th) * (1.0 + m_th));
    let prefactor = (-disp_sq / (1.0 + m_th)).exp() / (1.0 + m_th);
    let probs = (0..=cutoff)
        .map(|m| {
            let sum: f64 = (0..=m)
                .filter(|&k| (t > 0.0 || k == m) && (u > 0.0 || k == 0))
                .map(|k| {
                    (lf[m] - lf[k] - lf[m - k] + ln_pow(t, m - k) + ln_pow(u, k) - lf[k]).exp()
                })
                .sum();
            prefactor * sum
        })
        .collect();
    Ok(finish(probs, "displaced_thermal_dist"))
}

/// Same distribution as [`displaced_thermal_dist`] by direct averaging of
/// Poisson counts over the Gaussian P-function of the thermal field.
///
/// In polar coordinates with `s = |a|^2 / m_th` the weight becomes `e^{-s} ds
/// dphi / 2pi`; the phase average is done with the periodic trapezoid rule and
/// the `s` integral with composite 15-point Kronrod panels on `[0, 45]`.
pub fn displaced_thermal_dist_quadrature(
    m_th: f64,
    disp_sq: f64,
    cutoff: usize,
) -> Result<ProbDist> {
    check_non_negative("thermal mean", m_th)?;
    check_non_negative("displacement intensity", disp_sq)?;
    if m_th == 0.0 {
        return poisson_dist(disp_sq, cutoff);
    }
    const S_MAX: f64 = 45.0;
    const PHASE: usize = 512;
    let panel = 0.25 / m_th.max(1.0);
    let panels = (S_MAX / panel).ceil() as usize;
    let mut probs = vec![0.0; cutoff + 1];
    let mut inner = vec![0.0; cutoff + 1];
    for i in 0..panels {
        let (a, b) = (i as f64 * panel, (i + 1) as f64 * panel);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w, _) in crate::quadrature::rule15() {
            let s = c + h * x;
            let weight = w * h * (-s).exp();
            phase_averaged_poisson(m_th * s, disp_sq, PHASE, &mut inner);
            for (p, q) in probs.iter_mut().zip(&inner) {
                *p += weight * q;
            }
        }
    }
    Ok(finish(probs, "displaced_thermal_dist_quadrature"))
}

// Phase average of Poisson(a + b + 2 sqrt(ab) cos phi) with `nodes` trapezoid nodes.
fn phase_averaged_poisson(a: f64, b: f64, nodes: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let cross = 2.0 * (a * b).sqrt();
    let step = std::f64::consts::TAU / nodes as f64;
    for k in 0..nodes {
        let intensity = (a + b + cross * (k as f64 * step).cos()).max(0.0);
        let mut p = (-intensity).exp();
        for (m, o) in out.iter_mut().enumerate() {
            if m > 0 {
                p *= intensity / m as f64;
            }
            *o += p;
        }
    }
    let n = nodes as f64;
    out.iter_mut().for_each(|x| *x /= n);
}

/// Counts of a coherent signal with intensity `sig_sq` mixed with a probe of
/// intensity `probe_sq` at a uniformly random relative phase.
///
/// The phase average uses the periodic trapezoid rule, doubling the node count
/// from 2048 until successive refinements agree to 1e-10 in every entry.
pub fn phase_avg_coherent_dist(sig_sq: f64, probe_sq: f64, cutoff: usize) -> Result<ProbDist> {
    check_non_negative("signal intensity", sig_sq)?;
    check_non_negative("probe intensity", probe_sq)?;
    if sig_sq == 0.0 || probe_sq == 0.0 {
        return poisson_dist(sig_sq + probe_sq, cutoff);
    }
    let mut coarse = vec![0.0; cutoff + 1];
    let mut fine = vec![0.0; cutoff + 1];
    let mut nodes = PHASE_NODES;
    phase_averaged_poisson(sig_sq, probe_sq, nodes, &mut coarse);
    loop {
        phase_averaged_poisson(sig_sq, probe_sq, 2 * nodes, &mut fine);
        let diff = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if diff <= PHASE_TOL {
            break;
        }
        nodes *= 2;
        if 2 * nodes > PHASE_NODES_MAX {
            return Err(Error::Quadrature(format!(
                "phase average did not settle: refinement difference {diff:e} at {nodes} nodes"
            )));
        }
        std::mem::swap(&mut coarse, &mut fine);
    }
    Ok(finish(fine, "phase_avg_coherent_dist"))
}

/// Mean of a single entry of [`phase_avg_coherent_dist`]; handy for spot checks.
pub fn phase_avg_coherent_entry(sig_sq: f64, probe_sq: f64, m: usize) -> f64 {
    let lf = ln_factorial_table(m)[m];
    let cross = 2.0 * (sig_sq * probe_sq).sqrt();
    periodic_mean(
        |phi| {
            let i = (sig_sq + probe_sq + cross * phi.cos()).max(0.0);
            crate::special::poisson_term(i, m, lf)
        },
        PHASE_NODES,
    )
}
