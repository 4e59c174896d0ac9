//! Discrete photon-number distributions and the maps between them.
//!
//! A [`ProbDist`] is a truncated probability vector over counts `m = 0..=M`.
//! Analytic constructors live in [`constructors`]; CSV/JSON encodings in [`io`].

pub mod constructors;
pub mod io;

pub use constructors::{
    displaced_thermal_dist, displaced_thermal_dist_quadrature, phase_avg_coherent_dist,
    poisson_dist, thermal_dist,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_factorial_table;

/// Mass that an analytic constructor may leave beyond its cutoff.
pub const TAIL_TOL: f64 = 1e-9;

/// Slack allowed above unit total mass for accumulated rounding.
const MASS_SLACK: f64 = 1e-9;

/// Cutoff `ceil(mean + 10 sqrt(variance + 1))`.
pub fn default_cutoff(mean: f64, variance: f64) -> usize {
    (mean + 10.0 * (variance + 1.0).sqrt()).ceil() as usize
}

/// Probability distribution over photon (or detected-photon) counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "io::ProbDistRepr", into = "io::ProbDistRepr")]
pub struct ProbDist {
    probs: Vec<f64>,
}

impl ProbDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some((m, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {m} is {p}, expected a finite non-negative value"
            )));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + MASS_SLACK {
            return Err(Error::InvalidDistribution(format!(
                "total mass {total} exceeds 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Empirical distribution from a histogram of counts.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidDistribution(
                "histogram has no entries".into(),
            ));
        }
        let n = n as f64;
        Ok(Self {
            probs: counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }

    /// Point mass at `m`, padded with zeros up to `cutoff`.
    pub fn delta(m: usize, cutoff: usize) -> Self {
        let mut probs = vec![0.0; cutoff.max(m) + 1];
        probs[m] = 1.0;
        Self { probs }
    }

    // Constructors that already guarantee the invariants.
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        debug_assert!(!probs.is_empty());
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    /// Truncation `M`; the support is `0..=M`.
    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    /// `p[m]`, zero beyond the cutoff.
    pub fn get(&self, m: usize) -> f64 {
        self.probs.get(m).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability not assigned to `0..=M`.
    pub fn tail_mass(&self) -> f64 {
        (1.0 - self.total_mass()).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(m, p)| m as f64 * p)
            .sum()
    }

    pub fn moments(&self) -> Moments {
        let (mut s1, mut s2) = (0.0, 0.0);
        for (m, p) in self.probs.iter().enumerate() {
            let m = m as f64;
            s1 += m * p;
            s2 += m * m * p;
        }
        Moments::from_mean_variance(s1, (s2 - s1 * s1).max(0.0))
    }

    /// Binomial thinning: each photon survives independently with probability `eta`.
    pub fn bernoulli_loss(&self, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::Domain(format!("efficiency {eta} outside [0, 1]")));
        }
        let cutoff = self.cutoff();
        if eta == 1.0 {
            return Ok(self.clone());
        }
        let mut out = vec![0.0; cutoff + 1];
        if eta == 0.0 {
            out[0] = self.total_mass();
            return Ok(Self { probs: out });
        }
        let lf = ln_factorial_table(cutoff);
        let (ln_eta, ln_loss) = (eta.ln(), (1.0 - eta).ln());
        for (n, &pn) in self.probs.iter().enumerate() {
            if pn == 0.0 {
                continue;
            }
            for (m, o) in out.iter_mut().enumerate().take(n + 1) {
                let ln_b = lf[n] - lf[m] - lf[n - m] + m as f64 * ln_eta + (n - m) as f64 * ln_loss;
                *o += ln_b.exp() * pn;
            }
        }
        Ok(Self { probs: out })
    }

    /// Distribution of the sum of two independent counts, support `0..=M_p + M_q`.
    pub fn convolve(&self, other: &ProbDist) -> Self {
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (j, &pj) in self.probs.iter().enumerate() {
            if pj == 0.0 {
                continue;
            }
            for (l, &ql) in other.probs.iter().enumerate() {
                out[j + l] += pj * ql;
            }
        }
        Self { probs: out }
    }

    /// Zero-pads (or truncates) to the given cutoff.
    pub fn with_cutoff(&self, cutoff: usize) -> Self {
        let mut probs = self.probs.clone();
        probs.resize(cutoff + 1, 0.0);
        Self { probs }
    }
}

/// First two moments and the derived noise figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean`; absent when the mean vanishes.
    pub fano: Option<f64>,
    /// `fano - 1`; absent when the mean vanishes.
    pub mandel_q: Option<f64>,
}

impl Moments {
    pub fn from_mean_variance(mean: f64, variance: f64) -> Self {
        let fano = (mean > 0.0).then(|| variance / mean);
        Self {
            mean,
            variance,
            fano,
            mandel_q: fano.map(|f| f - 1.0),
        }
    }
}

/// How two distributions are compared by [`fidelity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityConvention {
    /// `sum sqrt(p q)`; equals 1 for identical normalized distributions.
    #[default]
    Bhattacharyya,
    /// Plain overlap `sum p q`.
    #[serde(alias = "paper-literal")]
    ProductSum,
}

impl std::str::FromStr for FidelityConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bhattacharyya" => Ok(Self::Bhattacharyya),
            "paper-literal" | "product-sum" => Ok(Self::ProductSum),
            other => Err(Error::Input(format!(
                "unknown fidelity convention `{other}` (expected bhattacharyya or paper-literal)"
            ))),
        }
    }
}

/// Similarity of two distributions summed over `m = 0..=min(M_p, M_q)`.
pub fn fidelity(p: &ProbDist, q: &ProbDist, convention: FidelityConvention) -> f64 {
    let terms = p.probs.iter().zip(&q.probs);
    match convention {
        FidelityConvention::Bhattacharyya => terms.map(|(a, b)| (a * b).sqrt()).sum(),
        FidelityConvention::ProductSum => terms.map(|(a, b)| a * b).sum(),
    }
}
