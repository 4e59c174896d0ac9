//! Linear-gain detector: binomial photodetection, conversion to voltage with
//! additive Gaussian noise, and acquisition of shot records.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_states::{sample_mixed_photons, ProbeSetting, SignalState};

/// Shots generated from one random stream; the unit of parallel work.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Overall detection efficiency in (0, 1].
    pub eta: f64,
    /// Volts per detected photon.
    pub gamma: f64,
    /// Width of the additive voltage noise, volts.
    pub noise_sigma: f64,
    /// Mean number of dark counts per pulse.
    #[serde(default)]
    pub dark_counts: f64,
}

impl DetectorModel {
    /// Detector with the default noise of one tenth of a photon step and no dark counts.
    pub fn new(eta: f64, gamma: f64) -> Result<Self> {
        Self::with_noise(eta, gamma, 0.1 * gamma)
    }

    pub fn with_noise(eta: f64, gamma: f64, noise_sigma: f64) -> Result<Self> {
        Self {
            eta,
            gamma,
            noise_sigma,
            dark_counts: 0.0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Domain(format!(
                "efficiency {} outside (0, 1]",
                self.eta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Domain(format!(
                "gain {} must be positive",
                self.gamma
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Domain(format!(
                "noise width {} must be non-negative",
                self.noise_sigma
            )));
        }
        if !(self.dark_counts >= 0.0 && self.dark_counts.is_finite()) {
            return Err(Error::Domain(format!(
                "dark-count mean {} must be non-negative",
                self.dark_counts
            )));
        }
        Ok(self)
    }
}

/// Binomial thinning of `n` photons with survival probability `eta`.
pub fn detect<R: Rng + ?Sized>(n: u64, eta: f64, rng: &mut R) -> u64 {
    if n == 0 || eta <= 0.0 {
        return 0;
    }
    if eta >= 1.0 {
        return n;
    }
    Binomial::new(n, eta).expect("eta in (0, 1)").sample(rng)
}

/// `gamma * m` plus zero-mean Gaussian noise of width `noise_sigma`.
pub fn amplify<R: Rng + ?Sized>(m: u64, gamma: f64, noise_sigma: f64, rng: &mut R) -> f64 {
    let v = gamma * m as f64;
    if noise_sigma > 0.0 {
        v + noise_sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)
    } else {
        v
    }
}

/// Mixes a master seed with an index (SplitMix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotMeta {
    pub state: SignalState,
    pub probe: ProbeSetting,
    pub eta: f64,
    /// Gain used to generate the voltages; unknown for measured data.
    pub gamma_true: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub n_shots: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub meta: ShotMeta,
    pub voltages: Vec<f64>,
}

fn shot_chunk(
    state: &SignalState,
    probe: &ProbeSetting,
    det: &DetectorModel,
    seed: u64,
    chunk: usize,
    len: usize,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    let dark =
        (det.dark_counts > 0.0).then(|| Poisson::new(det.dark_counts).expect("positive mean"));
    (0..len)
        .map(|_| {
            let n = sample_mixed_photons(state, probe, &mut rng);
            let mut m = detect(n, det.eta, &mut rng);
            if let Some(d) = &dark {
                m += d.sample(&mut rng) as u64;
            }
            amplify(m, det.gamma, det.noise_sigma, &mut rng)
        })
        .collect()
}

/// Simulates `n_shots` laser pulses through the full measurement chain.
///
/// Shots are generated in fixed-size chunks, each from its own ChaCha stream
/// keyed by `(seed, chunk index)`, so the record is identical for any number
/// of worker threads.
pub fn acquire(
    state: &SignalState,
    probe: &ProbeSetting,
    det: &DetectorModel,
    n_shots: usize,
    seed: u64,
) -> Result<ShotRecord> {
    if n_shots == 0 {
        return Err(Error::Input("a shot record needs at least one shot".into()));
    }
    let state = state.validated()?;
    let probe = ProbeSetting::new(probe.alpha_mag, probe.phase, probe.overlap_xi)?;
    let det = det.validated()?;
    let chunks = n_shots.div_ceil(CHUNK);
    let voltages: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(n_shots - c * CHUNK);
            shot_chunk(&state, &probe, &det, seed, c, len)
        })
        .collect::<Vec<_>>()
        .concat();
    Ok(ShotRecord {
        meta: ShotMeta {
            state,
            probe,
            eta: det.eta,
            gamma_true: Some(det.gamma),
            noise_sigma: Some(det.noise_sigma),
            n_shots,
            seed: Some(seed),
        },
        voltages,
    })
}

impl ShotRecord {
    /// Wraps externally measured voltages.
    pub fn from_measurement(
        voltages: Vec<f64>,
        state: SignalState,
        probe: ProbeSetting,
        eta: f64,
    ) -> Result<Self> {
        if voltages.is_empty() {
            return Err(Error::Input("a shot record needs at least one shot".into()));
        }
        Ok(Self {
            meta: ShotMeta {
                state,
                probe,
                eta,
                gamma_true: None,
                noise_sigma: None,
                n_shots: voltages.len(),
                seed: None,
            },
            voltages,
        })
    }

    /// Text layout: `# key=value` metadata lines, then one voltage per line.
    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        let _ = writeln!(out, "# state={}", m.state);
        let _ = writeln!(out, "# probe_amplitude={}", m.probe.alpha_mag);
        let _ = writeln!(out, "# probe_phase={}", m.probe.phase);
        let _ = writeln!(out, "# xi={}", m.probe.overlap_xi);
        let _ = writeln!(out, "# eta={}", m.eta);
        if let Some(g) = m.gamma_true {
            let _ = writeln!(out, "# gamma_true={g}");
        }
        if let Some(s) = m.noise_sigma {
            let _ = writeln!(out, "# noise_sigma={s}");
        }
        let _ = writeln!(out, "# N={}", m.n_shots);
        if let Some(s) = m.seed {
            let _ = writeln!(out, "# seed={s}");
        }
        for v in &self.voltages {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut keys: Vec<(String, String)> = Vec::new();
        let mut voltages = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                if let Some((k, v)) = kv.trim().split_once('=') {
                    keys.push((k.trim().to_string(), v.trim().to_string()));
                }
                continue;
            }
            let v: f64 = line.parse().map_err(|e| {
                Error::Input(format!("line {}: bad voltage `{line}`: {e}", lineno + 1))
            })?;
            voltages.push(v);
        }
        let lookup = |k: &str| {
            keys.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
        };
        let required = |k: &str| {
            lookup(k).ok_or_else(|| Error::Input(format!("shot record lacks `# {k}=` metadata")))
        };
        let num = |k: &str, v: &str| {
            v.parse::<f64>()
                .map_err(|e| Error::Input(format!("metadata `{k}={v}`: {e}")))
        };
        let optional = |k: &str| lookup(k).map(|v| num(k, v)).transpose();

        let state: SignalState = required("state")?.parse()?;
        let probe = ProbeSetting::new(
            num("probe_amplitude", required("probe_amplitude")?)?,
            optional("probe_phase")?.unwrap_or(0.0),
            optional("xi")?.unwrap_or(1.0),
        )?;
        let eta = num("eta", required("eta")?)?;
        let seed = lookup("seed")
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|e| Error::Input(format!("metadata `seed={s}`: {e}")))
            })
            .transpose()?;
        if let Some(n) = lookup("N") {
            let n: usize = n
                .parse()
                .map_err(|e| Error::Input(format!("metadata `N={n}`: {e}")))?;
            if n != voltages.len() {
                return Err(Error::Input(format!(
                    "metadata says N={n} but {} voltages follow",
                    voltages.len()
                )));
            }
        }
        let mut rec = Self::from_measurement(voltages, state, probe, eta)?;
        rec.meta.gamma_true = optional("gamma_true")?;
        rec.meta.noise_sigma = optional("noise_sigma")?;
        rec.meta.seed = seed;
        Ok(rec)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(text)?;
        if rec.voltages.len() != rec.meta.n_shots || rec.voltages.is_empty() {
            return Err(Error::Input(format!(
                "record declares {} shots but holds {} voltages",
                rec.meta.n_shots,
                rec.voltages.len()
            )));
        }
        Ok(rec)
    }

    /// Reads a record, choosing JSON or CSV by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_csv(&text)
        };
        parsed.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Detected-level probe amplitude `sqrt(eta) * alpha`.
    pub fn detected_probe(&self) -> num_complex::Complex64 {
        self.meta.eta.sqrt() * self.meta.probe.amplitude()
    }
}
