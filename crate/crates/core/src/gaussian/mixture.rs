use nalgebra::{DMatrix, DVector};

use super::GaussianJoint;
use crate::error::{domain, Error, Result};

/// Weighted sum of single-label Gaussians on the single-object space.
///
/// Weights are nonnegative but need not sum to one, so the same type holds
/// both PHDs and normalized spatial densities. Component block labels only
/// record provenance; evaluation ignores them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianJoint>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianJoint>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::Dimension {
                expected: components.len(),
                got: weights.len(),
            });
        }
        let mut mix = GaussianMixture::default();
        for (w, c) in weights.into_iter().zip(components) {
            mix.push(w, c)?;
        }
        Ok(mix)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, weight: f64, component: GaussianJoint) -> Result<()> {
        if !weight.is_finite() || weight < 0.0 {
            return Err(domain(format!("mixture weight {weight} must be >= 0")));
        }
        if component.block().len() != 1 {
            return Err(domain("mixture components must cover a single label"));
        }
        if let Some(d) = self.state_dim() {
            if component.state_dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: component.state_dim(),
                });
            }
        }
        self.weights.push(weight);
        self.components.push(component);
        Ok(())
    }

    pub fn extend(&mut self, other: &GaussianMixture) -> Result<()> {
        for (w, c) in other.iter() {
            self.push(w, c.clone())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianJoint] {
        &self.components
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &GaussianJoint)> {
        self.weights.iter().copied().zip(self.components.iter())
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.components.first().map(GaussianJoint::state_dim)
    }

    /// All weights multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor < 0.0 {
            return Err(domain(format!("scale factor {factor} must be >= 0")));
        }
        Ok(GaussianMixture {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            components: self.components.clone(),
        })
    }

    /// `Σ_k w_k`; each component has unit mass.
    pub fn integral(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.state_dim() {
            if x.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        Ok(self
            .iter()
            .map(|(w, c)| w * c.ln_pdf(x).exp())
            .sum())
    }

    /// Log density via log-sum-exp; `-inf` for an empty or zero-weight mixture.
    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        let mut terms: smallvec::SmallVec<[f64; 16]> = smallvec::SmallVec::new();
        let mut top = f64::NEG_INFINITY;
        for (w, c) in self.iter() {
            if w > 0.0 {
                let t = w.ln() + c.ln_pdf(x);
                top = top.max(t);
                terms.push(t);
            }
        }
        if top == f64::NEG_INFINITY {
            return top;
        }
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }

    /// Mean of the normalized mixture.
    pub fn mean(&self) -> Option<DVector<f64>> {
        let total = self.integral();
        let d = self.state_dim()?;
        if total <= 0.0 {
            return None;
        }
        let mut m = DVector::zeros(d);
        for (w, c) in self.iter() {
            m += c.mean() * (w / total);
        }
        Some(m)
    }

    /// Covariance of the normalized mixture.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let total = self.integral();
        let mean = self.mean()?;
        let d = mean.len();
        let mut s = DMatrix::zeros(d, d);
        for (w, c) in self.iter() {
            let dm = c.mean() - &mean;
            s += (c.cov() + &dm * dm.transpose()) * (w / total);
        }
        Some(s)
    }

    /// Per-coordinate union of `mean ± span·σ` over positive-weight components.
    pub fn bounds(&self, span: f64) -> Option<Vec<(f64, f64)>> {
        let mut out: Option<Vec<(f64, f64)>> = None;
        for (w, c) in self.iter() {
            if w <= 0.0 {
                continue;
            }
            let b = c.bounds(span);
            out = Some(match out {
                None => b,
                Some(acc) => acc
                    .iter()
                    .zip(&b)
                    .map(|(a, n)| (a.0.min(n.0), a.1.max(n.1)))
                    .collect(),
            });
        }
        out
    }
}
