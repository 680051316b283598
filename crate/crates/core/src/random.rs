//! Seeded random LMO densities for tests and benchmarks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::gaussian::GaussianJoint;
use crate::labelspace::{enumerate_subsets, LabelSpace, WeightTable};
use crate::lmo::LmoDensity;

/// Random density over `n_labels` labels in `state_dim` dimensions.
///
/// Every label set gets a weight; roughly one in five is set to zero,
/// keeping at least one positive. Means are uniform in `[−5, 5]`;
/// covariances are `A Aᵀ + 0.25 I` with standard normal `A`.
pub fn random_density<R: Rng + ?Sized>(
    rng: &mut R,
    n_labels: usize,
    state_dim: usize,
) -> Result<LmoDensity> {
    let space = LabelSpace::with_size(n_labels)?;
    let sets = enumerate_subsets(&space, None)?;
    let mut raw: Vec<f64> = sets
        .iter()
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random_range(0.05..1.0)
            }
        })
        .collect();
    if raw.iter().all(|&w| w == 0.0) {
        let i = rng.random_range(0..raw.len());
        raw[i] = 1.0;
    }
    let total: f64 = raw.iter().sum();
    let weights = WeightTable::new(&space, sets.iter().copied().zip(raw.iter().map(|w| w / total)))?;
    let mut conditionals = BTreeMap::new();
    for (set, w) in sets.iter().zip(&raw) {
        if set.is_empty() || *w == 0.0 {
            continue;
        }
        let n = set.len() * state_dim;
        let mean = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let a = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.25;
        conditionals.insert(*set, GaussianJoint::new(set.labels().collect(), state_dim, mean, cov)?);
    }
    LmoDensity::new(space, state_dim, weights, conditionals)
}
