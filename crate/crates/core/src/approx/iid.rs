use crate::error::{domain, Result};
use crate::gaussian::GaussianMixture;
use crate::labelspace::{
    canonical_prefix, CardinalityDistribution, Label, LabelSet, LabelSpace,
};
use crate::lmo::{Factorized, LabeledDensity, LmoDensity};

/// Labeled i.i.d. cluster density: cardinality `ρ`, common spatial density,
/// labels assigned as the canonical prefix `𝕃(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiidDensity {
    space: LabelSpace,
    state_dim: usize,
    rho: CardinalityDistribution,
    spatial: GaussianMixture,
    vbar: f64,
}

/// Labeled Poisson density with rate `⟨v̂,1⟩` and spatial density `v̂/⟨v̂,1⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpDensity {
    space: LabelSpace,
    state_dim: usize,
    rate: f64,
    spatial: GaussianMixture,
}

/// Keeps the cardinality of `π` and its normalized unlabeled PHD. An
/// empty-set point mass yields the degenerate density with `ρ = (1)` and
/// no spatial components.
pub fn approx_liid(pi: &LmoDensity) -> Result<LiidDensity> {
    let v = pi.unlabeled_phd()?;
    let vbar = v.integral();
    let (rho, spatial) = if vbar > 0.0 {
        (pi.cardinality(), v.scaled(1.0 / vbar)?)
    } else {
        (CardinalityDistribution::finite(vec![1.0])?, GaussianMixture::empty())
    };
    Ok(LiidDensity {
        space: pi.space().clone(),
        state_dim: pi.state_dim(),
        rho,
        spatial,
        vbar,
    })
}

/// Poisson rate and spatial density from the unlabeled PHD of `π`.
pub fn approx_lp(pi: &LmoDensity) -> Result<LpDensity> {
    let v = pi.unlabeled_phd()?;
    let rate = v.integral();
    if rate <= 0.0 {
        return Err(domain("labeled Poisson approximation needs a positive PHD mass"));
    }
    Ok(LpDensity {
        space: pi.space().clone(),
        state_dim: pi.state_dim(),
        rate,
        spatial: v.scaled(1.0 / rate)?,
    })
}

/// `e^{−λ} λ^n / n!`.
pub fn poisson_pmf(rate: f64, n: usize) -> f64 {
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * rate.ln() - rate - ln_fact).exp()
}

fn ln_iid_stratum(
    space: &LabelSpace,
    spatial: &GaussianMixture,
    state_dim: usize,
    weight: f64,
    set: LabelSet,
    x: &[f64],
) -> f64 {
    if weight <= 0.0 || canonical_prefix(space, set.len()).ok() != Some(set) {
        return f64::NEG_INFINITY;
    }
    weight.ln() + ln_product(spatial, state_dim, x)
}

fn ln_product(spatial: &GaussianMixture, state_dim: usize, x: &[f64]) -> f64 {
    x.chunks(state_dim).map(|xi| spatial.ln_pdf(xi)).sum()
}

fn iid_bounds(
    space: &LabelSpace,
    spatial: &GaussianMixture,
    weight: f64,
    set: LabelSet,
    span: f64,
) -> Option<Vec<(f64, f64)>> {
    if weight <= 0.0 || canonical_prefix(space, set.len()).ok() != Some(set) {
        return None;
    }
    if set.is_empty() {
        return Some(Vec::new());
    }
    let b = spatial.bounds(span)?;
    Some(b.iter().copied().cycle().take(b.len() * set.len()).collect())
}

fn canonical_index(space: &LabelSpace, label: Label) -> Result<usize> {
    if !space.contains(label) {
        return Err(domain(format!("label {label} outside the label space")));
    }
    Ok(label.index())
}

impl LiidDensity {
    pub fn rho(&self) -> &CardinalityDistribution {
        &self.rho
    }

    pub fn spatial(&self) -> &GaussianMixture {
        &self.spatial
    }

    /// `⟨v,1⟩` of the source PHD.
    pub fn vbar(&self) -> f64 {
        self.vbar
    }

    pub fn is_degenerate(&self) -> bool {
        self.spatial.is_empty()
    }

    pub fn cardinality(&self) -> &CardinalityDistribution {
        &self.rho
    }

    /// `α(ℓ) = Σ_{n ≥ k} ρ(n)` for the label with canonical index `k`.
    pub fn alpha(&self, label: Label) -> Result<f64> {
        let k = canonical_index(&self.space, label)?;
        Ok(self.rho.tail_from(k))
    }

    /// `α(ℓ)·v(x)/⟨v,1⟩`.
    pub fn labeled_phd(&self, label: Label) -> Result<GaussianMixture> {
        self.spatial.scaled(self.alpha(label)?)
    }

    /// `Σ_ℓ α(ℓ)·v(x)/⟨v,1⟩`.
    pub fn unlabeled_phd(&self) -> Result<GaussianMixture> {
        let total: f64 = self
            .space
            .labels()
            .map(|l| self.alpha(l))
            .sum::<Result<f64>>()?;
        self.spatial.scaled(total)
    }
}

impl LpDensity {
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn spatial(&self) -> &GaussianMixture {
        &self.spatial
    }

    /// Poisson cardinality, truncated where the tail drops below `1e-12`.
    pub fn cardinality(&self) -> CardinalityDistribution {
        CardinalityDistribution::poisson(self.rate).expect("rate is positive")
    }

    /// Mass the density assigns to the finite label space,
    /// `Σ_{n ≤ |𝕃|} Pois(n)`.
    pub fn label_space_mass(&self) -> f64 {
        (0..=self.space.len()).map(|n| poisson_pmf(self.rate, n)).sum()
    }

    /// `α(ℓ) = Σ_{n ≥ k} Pois(n)` over the truncated Poisson.
    pub fn alpha(&self, label: Label) -> Result<f64> {
        let k = canonical_index(&self.space, label)?;
        Ok(self.cardinality().tail_from(k))
    }

    pub fn labeled_phd(&self, label: Label) -> Result<GaussianMixture> {
        self.spatial.scaled(self.alpha(label)?)
    }

    /// `v̂(x) = ⟨v̂,1⟩·spatial(x)`.
    pub fn unlabeled_phd(&self) -> Result<GaussianMixture> {
        self.spatial.scaled(self.rate)
    }
}

impl LabeledDensity for LiidDensity {
    fn space(&self) -> &LabelSpace {
        &self.space
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn ln_stratum(&self, set: LabelSet, x: &[f64]) -> f64 {
        let w = self.rho.get(set.len());
        ln_iid_stratum(&self.space, &self.spatial, self.state_dim, w, set, x)
    }

    fn stratum_bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>> {
        iid_bounds(&self.space, &self.spatial, self.rho.get(set.len()), set, span)
    }
}

impl Factorized for LiidDensity {
    fn set_weight(&self, set: LabelSet) -> f64 {
        if canonical_prefix(&self.space, set.len()).ok() == Some(set) {
            self.rho.get(set.len())
        } else {
            0.0
        }
    }

    fn ln_conditional(&self, _set: LabelSet, x: &[f64]) -> f64 {
        ln_product(&self.spatial, self.state_dim, x)
    }
}

impl LabeledDensity for LpDensity {
    fn space(&self) -> &LabelSpace {
        &self.space
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn ln_stratum(&self, set: LabelSet, x: &[f64]) -> f64 {
        let w = poisson_pmf(self.rate, set.len());
        ln_iid_stratum(&self.space, &self.spatial, self.state_dim, w, set, x)
    }

    fn stratum_bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>> {
        let w = poisson_pmf(self.rate, set.len());
        iid_bounds(&self.space, &self.spatial, w, set, span)
    }
}

impl Factorized for LpDensity {
    fn set_weight(&self, set: LabelSet) -> f64 {
        if canonical_prefix(&self.space, set.len()).ok() == Some(set) {
            poisson_pmf(self.rate, set.len())
        } else {
            0.0
        }
    }

    fn ln_conditional(&self, _set: LabelSet, x: &[f64]) -> f64 {
        ln_product(&self.spatial, self.state_dim, x)
    }
}
