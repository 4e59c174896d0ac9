//! CSV (`m,prob`) and JSON (`{"probs": [...], "truncation": M}`) encodings.

use serde::{Deserialize, Serialize};

use super::ProbDist;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
pub(crate) struct ProbDistRepr {
    probs: Vec<f64>,
    truncation: usize,
}

impl From<ProbDist> for ProbDistRepr {
    fn from(p: ProbDist) -> Self {
        let truncation = p.cutoff();
        Self {
            probs: p.into_probs(),
            truncation,
        }
    }
}

impl TryFrom<ProbDistRepr> for ProbDist {
    type Error = Error;

    fn try_from(r: ProbDistRepr) -> Result<Self> {
        if r.probs.len() != r.truncation + 1 {
            return Err(Error::InvalidDistribution(format!(
                "truncation {} does not match {} probabilities",
                r.truncation,
                r.probs.len()
            )));
        }
        ProbDist::new(r.probs)
    }
}

/// Formats a float with 17 significant digits, enough to round-trip exactly.
pub fn fmt_exact(x: f64) -> String {
    format!("{x:.16e}")
}

impl ProbDist {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,prob\n");
        for (m, p) in self.probs().iter().enumerate() {
            out.push_str(&format!("{m},{}\n", fmt_exact(*p)));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("m,prob") => {}
            other => {
                return Err(Error::Input(format!(
                    "expected header `m,prob`, found {other:?}"
                )))
            }
        }
        let mut probs = Vec::new();
        for (row, line) in lines.enumerate() {
            let (m, p) = line
                .split_once(',')
                .ok_or_else(|| Error::Input(format!("row {row}: expected two columns")))?;
            let m: usize = m
                .trim()
                .parse()
                .map_err(|e| Error::Input(format!("row {row}: bad count `{m}`: {e}")))?;
            if m != row {
                return Err(Error::Input(format!(
                    "row {row}: counts must be consecutive from 0, found {m}"
                )));
            }
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|e| Error::Input(format!("row {row}: bad probability `{p}`: {e}")))?;
            probs.push(p);
        }
        ProbDist::new(probs)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
