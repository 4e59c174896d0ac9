//! Run configuration and the three built-in presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_states::SignalState;
use crate::photon_statistics::FidelityConvention;

pub const PRESETS: [&str; 3] = ["vacuum", "phase-averaged", "thermal"];

/// Shots per record used by the presets.
pub const PRESET_SHOTS: usize = 30_000;
/// Efficiencies of the calibration sweep used by the presets.
pub const PRESET_ETA_MIN: f64 = 0.05;
pub const PRESET_ETA_MAX: f64 = 0.31;
pub const PRESET_ETA_STEPS: usize = 8;
/// Detected-level probe grid `|beta|^2 in [0, 4]`.
pub const PRESET_BETA_SQ_MAX: f64 = 4.0;
pub const PRESET_BETA_POINTS: usize = 15;
/// Photon-level probe intensity of the dedicated calibration series.
pub const PRESET_CALIBRATION_PHOTONS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seed: u64,
    /// Shots per record.
    pub shots: usize,
    #[serde(default)]
    pub fidelity: FidelityConvention,
    #[serde(default)]
    pub record_format: RecordFormat,
    /// Signal state at the photon level, before any loss.
    pub state: SignalState,
    pub probe: ProbeSweep,
    pub detector: DetectorSpec,
    #[serde(default)]
    pub acceptance: Option<AcceptanceThresholds>,
}

fn default_name() -> String {
    "run".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    #[default]
    Csv,
    Json,
}

impl RecordFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSweep {
    /// Photon-level probe amplitudes |alpha|.
    pub amplitudes: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
    /// Fraction of probe intensity mode-matched to the signal.
    #[serde(default = "one")]
    pub xi: f64,
    /// Probe amplitude of a separate calibration series; when absent the
    /// largest sweep amplitude is used for calibration.
    #[serde(default)]
    pub calibration_amplitude: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    /// Efficiencies of the calibration sweep.
    pub etas: Vec<f64>,
    /// True gain, volts per detected photon.
    pub gamma: f64,
    /// Voltage noise; defaults to a tenth of the gain.
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub dark_counts: f64,
    /// Efficiency at which the section is reconstructed; defaults to the largest of `etas`.
    #[serde(default)]
    pub reconstruct_eta: Option<f64>,
}

impl DetectorSpec {
    pub fn noise(&self) -> f64 {
        self.noise_sigma.unwrap_or(0.1 * self.gamma)
    }

    pub fn reconstruction_eta(&self) -> f64 {
        self.reconstruct_eta
            .unwrap_or_else(|| self.etas.iter().copied().fold(f64::MIN, f64::max))
    }
}

/// Optional pass/fail thresholds checked by the pipeline command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceptanceThresholds {
    #[serde(default)]
    pub max_gamma_rel_error: Option<f64>,
    #[serde(default)]
    pub max_abs_mean_error: Option<f64>,
    /// Minimum measured-vs-corrected-theory fidelity at every probe point.
    #[serde(default)]
    pub min_fidelity: Option<f64>,
    /// Require the mean corrected fidelity to be at least the uncorrected one.
    #[serde(default)]
    pub require_correction_gain: bool,
}

impl RunConfig {
    /// Collects every offending key instead of stopping at the first.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.shots < 2 {
            bad.push(format!("shots: need at least 2, got {}", self.shots));
        }
        if let Err(e) = self.state.validated() {
            bad.push(format!("state: {e}"));
        }
        if self.probe.amplitudes.is_empty() {
            bad.push("probe.amplitudes: must not be empty".into());
        }
        for (i, a) in self.probe.amplitudes.iter().enumerate() {
            if !(a.is_finite() && *a >= 0.0) {
                bad.push(format!(
                    "probe.amplitudes[{i}]: {a} must be finite and >= 0"
                ));
            }
        }
        if !self.probe.phase.is_finite() {
            bad.push("probe.phase: must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.probe.xi) {
            bad.push(format!("probe.xi: {} outside [0, 1]", self.probe.xi));
        }
        if let Some(c) = self.probe.calibration_amplitude {
            if !(c.is_finite() && c > 0.0) {
                bad.push(format!("probe.calibration_amplitude: {c} must be positive"));
            }
        }
        if self.detector.etas.is_empty() {
            bad.push("detector.etas: must not be empty".into());
        }
        for (i, e) in self.detector.etas.iter().enumerate() {
            if !(*e > 0.0 && *e <= 1.0) {
                bad.push(format!("detector.etas[{i}]: {e} outside (0, 1]"));
            }
        }
        if !(self.detector.gamma > 0.0 && self.detector.gamma.is_finite()) {
            bad.push(format!(
                "detector.gamma: {} must be positive",
                self.detector.gamma
            ));
        }
        let noise = self.detector.noise();
        if !(noise >= 0.0 && noise.is_finite()) {
            bad.push(format!("detector.noise_sigma: {noise} must be >= 0"));
        }
        if !(self.detector.dark_counts >= 0.0 && self.detector.dark_counts.is_finite()) {
            bad.push(format!(
                "detector.dark_counts: {} must be >= 0",
                self.detector.dark_counts
            ));
        }
        if let Some(r) = self.detector.reconstruct_eta {
            if !self.detector.etas.contains(&r) {
                bad.push(format!(
                    "detector.reconstruct_eta: {r} is not one of detector.etas"
                ));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(bad))
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Input(format!("cannot encode config: {e}")))
    }

    pub fn preset(name: &str) -> Result<Self> {
        let eta_max = PRESET_ETA_MAX;
        let etas: Vec<f64> = (0..PRESET_ETA_STEPS)
            .map(|k| {
                PRESET_ETA_MIN
                    + (PRESET_ETA_MAX - PRESET_ETA_MIN) * k as f64 / (PRESET_ETA_STEPS - 1) as f64
            })
            .collect();
        let amplitudes: Vec<f64> = (0..PRESET_BETA_POINTS)
            .map(|k| {
                let beta_sq = PRESET_BETA_SQ_MAX * k as f64 / (PRESET_BETA_POINTS - 1) as f64;
                (beta_sq / eta_max).sqrt()
            })
            .collect();
        // detected-level signal parameters, referred back to the photon level
        let (state, xi, seed) = match name {
            "vacuum" => (SignalState::Vacuum, 1.0, 0x5EED_0001),
            "phase-averaged" => (
                SignalState::phase_averaged((1.41 / eta_max).sqrt())?,
                0.91,
                0x5EED_0002,
            ),
            "thermal" => (SignalState::thermal(1.96 / eta_max)?, 0.65, 0x5EED_0003),
            other => {
                return Err(Error::Config(vec![format!(
                    "preset: unknown `{other}` (expected one of {})",
                    PRESETS.join(", ")
                )]))
            }
        };
        let acceptance = AcceptanceThresholds {
            max_gamma_rel_error: Some(0.02),
            max_abs_mean_error: Some(5e-3),
            min_fidelity: (name == "vacuum").then_some(0.999),
            require_correction_gain: name != "vacuum",
        };
        Ok(Self {
            name: name.into(),
            seed,
            shots: PRESET_SHOTS,
            fidelity: FidelityConvention::Bhattacharyya,
            record_format: RecordFormat::Csv,
            state,
            probe: ProbeSweep {
                amplitudes,
                phase: 0.0,
                xi,
                calibration_amplitude: Some(PRESET_CALIBRATION_PHOTONS.sqrt()),
            },
            detector: DetectorSpec {
                etas,
                gamma: 1.0,
                noise_sigma: Some(0.1),
                dark_counts: 0.0,
                reconstruct_eta: Some(eta_max),
            },
            acceptance: Some(acceptance),
        })
    }
}
