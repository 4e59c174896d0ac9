#![allow(dead_code)]

use photon_wigner::photon_statistics::ProbDist;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Significance level for the goodness-of-fit tests. Seeds are fixed, so a
/// pass is reproducible; the level only guards against a wrong model.
pub const ALPHA: f64 = 1e-4;

/// Pearson chi-square p-value of observed counts against `expected`.
/// Bins with fewer than 5 expected events are pooled into the upper tail.
pub fn chi_square_p(counts: &[u64], expected: &ProbDist) -> f64 {
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    let top = counts.len().max(expected.cutoff() + 1);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for m in 0..top {
        obs_acc += counts.get(m).copied().unwrap_or(0) as f64;
        exp_acc += n * expected.get(m);
        if exp_acc >= 5.0 {
            bins.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    // leftover mass, including anything past the cutoff
    let exp_rest = n - bins.iter().map(|b| b.1).sum::<f64>();
    let obs_rest = obs_acc;
    if exp_rest >= 5.0 {
        bins.push((obs_rest, exp_rest));
    } else if let Some(last) = bins.last_mut() {
        last.0 += obs_rest;
        last.1 += exp_rest.max(0.0);
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = (bins.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

pub fn histogram(samples: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut counts = vec![0u64];
    for m in samples {
        let m = m as usize;
        if m >= counts.len() {
            counts.resize(m + 1, 0);
        }
        counts[m] += 1;
    }
    counts
}
