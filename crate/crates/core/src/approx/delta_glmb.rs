use std::collections::BTreeMap;

use crate::error::{domain, Result};
use crate::gaussian::{GaussianJoint, GaussianMixture};
use crate::labelspace::{
    cardinality_from_weights, CardinalityDistribution, Label, LabelSet, LabelSpace, WeightTable,
};
use crate::lmo::{Factorized, LabeledDensity, LmoDensity};

/// One hypothesis `(ω̂(I), {p̂^(I)(·, ℓ)}_{ℓ∈I})`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGlmbHypothesis {
    pub weight: f64,
    /// One single-label marginal per member of `I`, in canonical order.
    pub marginals: Vec<GaussianJoint>,
}

/// δ-GLMB density with one hypothesis per positive-weight label set.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaGlmbDensity {
    space: LabelSpace,
    state_dim: usize,
    weights: WeightTable,
    hypotheses: BTreeMap<LabelSet, DeltaGlmbHypothesis>,
}

/// Keeps `ω̂(I) = ω(I)` and replaces each joint conditional by the product
/// of its single-label marginals.
pub fn approx_delta_glmb(pi: &LmoDensity) -> Result<DeltaGlmbDensity> {
    let mut hypotheses = BTreeMap::new();
    for (set, w, _) in pi.support() {
        let marginals = set
            .labels()
            .map(|l| pi.conditional_marginal(set, l))
            .collect::<Result<Vec<_>>>()?;
        hypotheses.insert(set, DeltaGlmbHypothesis { weight: w, marginals });
    }
    Ok(DeltaGlmbDensity {
        space: pi.space().clone(),
        state_dim: pi.state_dim(),
        weights: pi.weights().clone(),
        hypotheses,
    })
}

impl DeltaGlmbDensity {
    pub fn hypotheses(&self) -> &BTreeMap<LabelSet, DeltaGlmbHypothesis> {
        &self.hypotheses
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn cardinality(&self) -> CardinalityDistribution {
        cardinality_from_weights(&self.weights).expect("weights copied from a valid density")
    }

    /// `Σ_I 1_I(ℓ)·ω̂(I)·p̂^(I)(x, ℓ)`.
    pub fn labeled_phd(&self, label: Label) -> Result<GaussianMixture> {
        if !self.space.contains(label) {
            return Err(domain(format!("label {label} outside the label space")));
        }
        let mut mix = GaussianMixture::empty();
        for (set, h) in &self.hypotheses {
            if let Some(rank) = set.rank_of(label) {
                mix.push(h.weight, h.marginals[rank].clone())?;
            }
        }
        Ok(mix)
    }

    /// The same density viewed as an LMO density whose conditionals are
    /// block-diagonal products.
    pub fn to_lmo(&self) -> Result<LmoDensity> {
        let mut conditionals = BTreeMap::new();
        for (set, h) in &self.hypotheses {
            if !set.is_empty() {
                conditionals.insert(*set, GaussianJoint::block_diagonal(&h.marginals)?);
            }
        }
        LmoDensity::new(
            self.space.clone(),
            self.state_dim,
            self.weights.clone(),
            conditionals,
        )
    }
}

impl LabeledDensity for DeltaGlmbDensity {
    fn space(&self) -> &LabelSpace {
        &self.space
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn ln_stratum(&self, set: LabelSet, x: &[f64]) -> f64 {
        let w = self.set_weight(set);
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        w.ln() + self.ln_conditional(set, x)
    }

    fn stratum_bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>> {
        self.hypotheses
            .get(&set)
            .map(|h| h.marginals.iter().flat_map(|m| m.bounds(span)).collect())
    }
}

impl Factorized for DeltaGlmbDensity {
    fn set_weight(&self, set: LabelSet) -> f64 {
        self.weights.get(set)
    }

    fn ln_conditional(&self, set: LabelSet, x: &[f64]) -> f64 {
        let Some(h) = self.hypotheses.get(&set) else {
            return f64::NEG_INFINITY;
        };
        let d = self.state_dim;
        h.marginals
            .iter()
            .enumerate()
            .map(|(i, m)| m.ln_pdf(&x[i * d..(i + 1) * d]))
            .sum()
    }
}
