//! JSON density documents.
//!
//! ```json
//! {
//!   "state_dim": 1,
//!   "labels": ["1", "2"],
//!   "hypotheses": [
//!     { "labels": [], "weight": 0.2 },
//!     { "labels": ["1"], "weight": 0.8, "mean": [0.0], "cov": [1.0] }
//!   ],
//!   "options": { "renormalize": false, "fix_pd": true, "pd_floor_ratio": 0.001 }
//! }
//! ```
//!
//! Covariances are row-major over the hypothesis' own label order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lmo_core::gaussian::DEFAULT_PD_FLOOR_RATIO;
use lmo_core::lmo::{PdRepair, ValidationReport};
use lmo_core::{DensityDraft, Hypothesis, LabelSpace, LmoDensity};

use crate::error::{io, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub state_dim: usize,
    pub labels: Vec<String>,
    pub hypotheses: Vec<HypothesisSpec>,
    #[serde(default)]
    pub options: SpecOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSpec {
    pub labels: Vec<String>,
    pub weight: f64,
    #[serde(default)]
    pub mean: Vec<f64>,
    #[serde(default)]
    pub cov: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecOptions {
    #[serde(default)]
    pub renormalize: bool,
    #[serde(default = "default_fix_pd")]
    pub fix_pd: bool,
    #[serde(default = "default_floor_ratio")]
    pub pd_floor_ratio: f64,
}

fn default_fix_pd() -> bool {
    true
}

fn default_floor_ratio() -> f64 {
    DEFAULT_PD_FLOOR_RATIO
}

impl Default for SpecOptions {
    fn default() -> Self {
        SpecOptions {
            renormalize: false,
            fix_pd: default_fix_pd(),
            pd_floor_ratio: default_floor_ratio(),
        }
    }
}

/// A draft after the document options were applied, with its validation
/// report.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub draft: DensityDraft,
    pub repairs: Vec<PdRepair>,
    /// Weight total before renormalization, when it was applied.
    pub renormalized_from: Option<f64>,
    pub report: ValidationReport,
}

impl Prepared {
    pub fn build(&self) -> Result<LmoDensity, CliError> {
        if !self.report.is_clean() {
            return Err(CliError::Invalid(self.report.to_string()));
        }
        Ok(self.draft.build()?)
    }
}

impl DensitySpec {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io(path))?;
        Self::from_json(&text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.to_json_pretty()).map_err(io(path))
    }

    /// SHA-256 of the compact serialization, in hex.
    pub fn sha256(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// Resolves label names; no numerical checks.
    pub fn draft(&self) -> Result<DensityDraft, CliError> {
        if self.state_dim == 0 {
            return Err(CliError::Spec("state_dim must be at least 1".into()));
        }
        let space = LabelSpace::new(self.labels.iter().cloned())?;
        let hypotheses = self
            .hypotheses
            .iter()
            .map(|h| {
                let labels = h
                    .labels
                    .iter()
                    .map(|name| {
                        space
                            .find(name)
                            .ok_or_else(|| CliError::Spec(format!("unknown label {name:?}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Hypothesis {
                    labels,
                    weight: h.weight,
                    mean: h.mean.clone(),
                    cov: h.cov.clone(),
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(DensityDraft {
            space,
            state_dim: self.state_dim,
            hypotheses,
        })
    }

    /// Applies renormalization and PD repair as the options request, then
    /// validates.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        let mut draft = self.draft()?;
        let mut renormalized_from = None;
        if self.options.renormalize {
            let total: f64 = draft.hypotheses.iter().map(|h| h.weight).sum();
            draft.renormalize()?;
            renormalized_from = Some(total);
        }
        let repairs = if self.options.fix_pd {
            if !(self.options.pd_floor_ratio > 0.0) {
                return Err(CliError::Spec("pd_floor_ratio must be positive".into()));
            }
            draft.repair_pd(self.options.pd_floor_ratio)?
        } else {
            Vec::new()
        };
        let report = draft.validate();
        Ok(Prepared {
            draft,
            repairs,
            renormalized_from,
            report,
        })
    }

    pub fn build(&self) -> Result<LmoDensity, CliError> {
        self.prepare()?.build()
    }
}

impl From<&DensityDraft> for DensitySpec {
    fn from(draft: &DensityDraft) -> Self {
        let name = |l| draft.space.name(l).to_string();
        DensitySpec {
            state_dim: draft.state_dim,
            labels: draft.space.names().to_vec(),
            hypotheses: draft
                .hypotheses
                .iter()
                .map(|h| HypothesisSpec {
                    labels: h.labels.iter().map(|&l| name(l)).collect(),
                    weight: h.weight,
                    mean: h.mean.clone(),
                    cov: h.cov.clone(),
                })
                .collect(),
            options: SpecOptions::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "state_dim": 1,
        "labels": ["a", "b"],
        "hypotheses": [
            { "labels": [], "weight": 0.2 },
            { "labels": ["b", "a"], "weight": 0.8, "mean": [5, -1], "cov": [2, 0.3, 0.3, 1] }
        ]
    }"#;

    #[test]
    fn defaults_apply() {
        let spec = DensitySpec::from_json(SMALL).unwrap();
        assert!(spec.options.fix_pd);
        assert!(!spec.options.renormalize);
        assert_eq!(spec.options.pd_floor_ratio, 1e-3);
        let pi = spec.build().unwrap();
        assert!((pi.mean_cardinality() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = SMALL.replace("\"state_dim\"", "\"dims\": 1, \"state_dim\"");
        assert!(DensitySpec::from_json(&bad).is_err());
    }

    #[test]
    fn unknown_label_is_a_spec_error() {
        let bad = SMALL.replace("[\"b\", \"a\"]", "[\"b\", \"c\"]");
        let err = DensitySpec::from_json(&bad).unwrap().prepare().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn asymmetric_covariance_fails_validation() {
        let bad = SMALL.replace("[2, 0.3, 0.3, 1]", "[2, 0.3, 0.31, 1]");
        let prepared = DensitySpec::from_json(&bad).unwrap().prepare().unwrap();
        assert!(!prepared.report.is_clean());
        assert_eq!(prepared.build().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn renormalize_option() {
        let halved = SMALL.replace("0.2", "0.1").replace("0.8", "0.4");
        let mut spec = DensitySpec::from_json(&halved).unwrap();
        assert!(!spec.prepare().unwrap().report.is_clean());
        spec.options.renormalize = true;
        let prepared = spec.prepare().unwrap();
        assert!(prepared.report.is_clean());
        assert!((prepared.renormalized_from.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hash_is_stable_under_round_trip() {
        let spec = DensitySpec::from_json(SMALL).unwrap();
        let again = DensitySpec::from_json(&spec.to_json_pretty()).unwrap();
        assert_eq!(spec, again);
        assert_eq!(spec.sha256(), again.sha256());
        let mut other = spec.clone();
        other.hypotheses[0].weight = 0.25;
        assert_ne!(spec.sha256(), other.sha256());
    }
}
