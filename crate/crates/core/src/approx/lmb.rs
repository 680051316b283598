use std::collections::BTreeMap;

use crate::error::{domain, Result};
use crate::gaussian::{GaussianJoint, GaussianMixture};
use crate::labelspace::{
    enumerate_subsets, CardinalityDistribution, Label, LabelSet, LabelSpace, WeightTable,
    NORMALIZATION_TOL,
};
use crate::lmo::{Factorized, LabeledDensity, LmoDensity};

/// Bernoulli component `(r^(ℓ), p^(ℓ))` of an LMB density.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub label: Label,
    pub existence: f64,
    /// Unit-mass spatial density; empty when `existence` is zero.
    pub spatial: GaussianMixture,
}

/// Labeled multi-Bernoulli density with one track per label.
#[derive(Debug, Clone, PartialEq)]
pub struct LmbDensity {
    space: LabelSpace,
    state_dim: usize,
    tracks: Vec<Track>,
}

impl LmbDensity {
    /// `tracks` must list every label of `space` once, in canonical order.
    pub fn new(space: LabelSpace, state_dim: usize, tracks: Vec<Track>) -> Result<Self> {
        if tracks.len() != space.len() || tracks.iter().zip(space.labels()).any(|(t, l)| t.label != l) {
            return Err(domain("LMB needs exactly one track per label, in canonical order"));
        }
        for t in &tracks {
            if !(0.0..=1.0).contains(&t.existence) {
                return Err(domain(format!(
                    "track {} has existence probability {}",
                    t.label, t.existence
                )));
            }
            if t.existence > 0.0 && (t.spatial.integral() - 1.0).abs() > NORMALIZATION_TOL {
                return Err(domain(format!(
                    "track {} has spatial mass {}, expected 1",
                    t.label,
                    t.spatial.integral()
                )));
            }
            if t.spatial.state_dim().is_some_and(|d| d != state_dim) {
                return Err(domain(format!("track {} has the wrong state dimension", t.label)));
            }
        }
        Ok(LmbDensity {
            space,
            state_dim,
            tracks,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, label: Label) -> Result<&Track> {
        self.tracks
            .get(label.position())
            .filter(|t| t.label == label)
            .ok_or_else(|| domain(format!("no track for label {label}")))
    }

    pub fn existence(&self) -> Vec<f64> {
        self.tracks.iter().map(|t| t.existence).collect()
    }

    /// Cardinality by sequential convolution of the per-track Bernoulli
    /// distributions; valid for `r = 1` as well.
    pub fn cardinality(&self) -> CardinalityDistribution {
        let mut probs = vec![1.0];
        for t in &self.tracks {
            let r = t.existence;
            let mut next = vec![0.0; probs.len() + 1];
            for (n, p) in probs.iter().enumerate() {
                next[n] += p * (1.0 - r);
                next[n + 1] += p * r;
            }
            probs = next;
        }
        CardinalityDistribution::finite(probs).expect("convolution of Bernoulli laws is normalized")
    }

    /// `v(x, ℓ) = r^(ℓ)·p^(ℓ)(x)`.
    pub fn labeled_phd(&self, label: Label) -> Result<GaussianMixture> {
        let t = self.track(label)?;
        t.spatial.scaled(t.existence)
    }

    /// Weight table `ω(I) = ∏_{ℓ∈I} r^(ℓ) ∏_{ℓ∉I} (1 − r^(ℓ))` over all subsets.
    pub fn weight_table(&self) -> WeightTable {
        let sets = enumerate_subsets(&self.space, None).expect("full enumeration");
        WeightTable::new(&self.space, sets.into_iter().map(|s| (s, self.set_weight(s))))
            .expect("product weights are nonnegative")
    }

    /// The same density as an LMO density. Needs single-component spatial
    /// densities so every conditional stays Gaussian.
    pub fn to_lmo(&self) -> Result<LmoDensity> {
        let weights = self.weight_table();
        let mut conditionals = BTreeMap::new();
        for (set, w) in weights.support() {
            if set.is_empty() {
                continue;
            }
            debug_assert!(w > 0.0);
            let parts = set
                .labels()
                .map(|l| match self.tracks[l.position()].spatial.components() {
                    [only] => Ok(only.clone()),
                    _ => Err(domain(format!(
                        "track {l} needs exactly one spatial component to form an LMO density"
                    ))),
                })
                .collect::<Result<Vec<GaussianJoint>>>()?;
            conditionals.insert(set, GaussianJoint::block_diagonal(&parts)?);
        }
        LmoDensity::new(self.space.clone(), self.state_dim, weights, conditionals)
    }
}

/// `r̂^(ℓ) = Σ_{I∋ℓ} ω(I)` and `p̂^(ℓ) = v(·, ℓ)/r̂^(ℓ)`. Tracks with zero
/// existence keep an empty spatial mixture.
pub fn approx_lmb(pi: &LmoDensity) -> Result<LmbDensity> {
    let mut tracks = Vec::with_capacity(pi.space().len());
    for label in pi.space().labels() {
        let existence: f64 = pi
            .support()
            .filter(|(s, _, _)| s.contains(label))
            .map(|(_, w, _)| w)
            .sum();
        let spatial = if existence > 0.0 {
            pi.labeled_phd(label)?.scaled(1.0 / existence)?
        } else {
            GaussianMixture::empty()
        };
        tracks.push(Track {
            label,
            existence,
            spatial,
        });
    }
    LmbDensity::new(pi.space().clone(), pi.state_dim(), tracks)
}

impl LabeledDensity for LmbDensity {
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
        if self.set_weight(set) <= 0.0 {
            return None;
        }
        let mut out = Vec::new();
        for l in set.labels() {
            out.extend(self.tracks[l.position()].spatial.bounds(span)?);
        }
        Some(out)
    }
}

impl Factorized for LmbDensity {
    fn set_weight(&self, set: LabelSet) -> f64 {
        if !self.space.contains_set(set) {
            return 0.0;
        }
        self.tracks
            .iter()
            .map(|t| {
                if set.contains(t.label) {
                    t.existence
                } else {
                    1.0 - t.existence
                }
            })
            .product()
    }

    fn ln_conditional(&self, set: LabelSet, x: &[f64]) -> f64 {
        let d = self.state_dim;
        set.labels()
            .enumerate()
            .map(|(i, l)| self.tracks[l.position()].spatial.ln_pdf(&x[i * d..(i + 1) * d]))
            .sum()
    }
}
