//! Special functions used by the photon-statistics and Wigner modules.

use std::f64::consts::PI;

/// Crossover between the power series and the asymptotic expansion of I0.
const I0_SERIES_MAX: f64 = 25.0;

/// `ln(k!)` for `k = 0..=n`.
pub fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Poisson probabilities `e^{-mu} mu^m / m!` for `m = 0..=cutoff`.
///
/// `mu` must be non-negative; callers validate it.
pub fn poisson_pmf(mu: f64, cutoff: usize) -> Vec<f64> {
    let mut probs = vec![0.0; cutoff + 1];
    if mu == 0.0 {
        probs[0] = 1.0;
        return probs;
    }
    let ln_mu = mu.ln();
    let mut ln_fact = 0.0;
    for (m, p) in probs.iter_mut().enumerate() {
        if m > 0 {
            ln_fact += (m as f64).ln();
        }
        *p = (m as f64 * ln_mu - mu - ln_fact).exp();
    }
    probs
}

/// Single Poisson probability, used inside quadrature loops.
#[inline]
pub fn poisson_term(mu: f64, m: usize, ln_fact_m: f64) -> f64 {
    if mu == 0.0 {
        return if m == 0 { 1.0 } else { 0.0 };
    }
    (m as f64 * mu.ln() - mu - ln_fact_m).exp()
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= I0_SERIES_MAX {
        i0_series(ax)
    } else {
        i0e_asymptotic(ax) * ax.exp()
    }
}

/// Exponentially scaled `e^{-|x|} I0(x)`; finite for every finite `x`.
pub fn bessel_i0e(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= I0_SERIES_MAX {
        i0_series(ax) * (-ax).exp()
    } else {
        i0e_asymptotic(ax)
    }
}

// sum_k (x^2/4)^k / (k!)^2, all terms positive
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

// e^{-x} I0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)
fn i0e_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * x);
        if next.abs() >= term.abs() || next.abs() <= sum * 1e-17 {
            sum += next;
            break;
        }
        term = next;
        sum += term;
        k += 1.0;
    }
    sum / (2.0 * PI * x).sqrt()
}
