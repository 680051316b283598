//! Labeled multi-object densities in factorized form `π(X) = ω(L(X))·P(X)`
//! with Gaussian conditionals, and their exact first-order moments.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::gaussian::{
    check_covariance, nearest_pd, relative_pd_floor, GaussianJoint, GaussianMixture,
};
use crate::labelspace::{
    cardinality_from_weights, mean_cardinality, CardinalityDistribution, Label, LabelSet,
    LabelSpace, WeightTable, NORMALIZATION_TOL,
};

/// A finite set of labeled single-object states with distinct labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledState {
    pairs: Vec<(Label, Vec<f64>)>,
}

impl LabeledState {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Rejects repeated labels: such a set has zero density everywhere and
    /// is treated as a caller bug.
    pub fn new(pairs: impl IntoIterator<Item = (Vec<f64>, Label)>) -> Result<Self> {
        let mut pairs: Vec<(Label, Vec<f64>)> = pairs.into_iter().map(|(x, l)| (l, x)).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(domain("labeled state has duplicate labels"));
        }
        Ok(LabeledState { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn label_set(&self) -> LabelSet {
        LabelSet::from_labels(self.pairs.iter().map(|p| p.0))
    }

    /// Label set and coordinates stacked in canonical label order.
    pub fn canonical(&self, space: &LabelSpace, state_dim: usize) -> Result<(LabelSet, Vec<f64>)> {
        let mut coords = Vec::with_capacity(self.pairs.len() * state_dim);
        for (label, x) in &self.pairs {
            space.check_label(*label)?;
            if x.len() != state_dim {
                return Err(Error::Dimension {
                    expected: state_dim,
                    got: x.len(),
                });
            }
            coords.extend_from_slice(x);
        }
        Ok((self.label_set(), coords))
    }
}

/// A labeled multi-object density that can be evaluated stratum by stratum.
///
/// A stratum is the restriction to states whose label set is exactly `set`;
/// its coordinates are the single-object states stacked in canonical label
/// order.
pub trait LabeledDensity: Sync {
    fn space(&self) -> &LabelSpace;

    fn state_dim(&self) -> usize;

    /// Log density on the stratum `set` at `x`; `-inf` where the density is
    /// structurally zero. `x` must hold `|set|·state_dim` coordinates.
    fn ln_stratum(&self, set: LabelSet, x: &[f64]) -> f64;

    /// Box holding essentially all the stratum's mass (`mean ± span·σ`
    /// per coordinate), or `None` when the stratum carries no mass.
    fn stratum_bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>>;

    fn density_at(&self, state: &LabeledState) -> Result<f64> {
        let (set, x) = state.canonical(self.space(), self.state_dim())?;
        Ok(self.ln_stratum(set, &x).exp())
    }
}

/// A density written as `ω̂(L(X))·P̂(X)`.
pub trait Factorized: LabeledDensity {
    fn set_weight(&self, set: LabelSet) -> f64;

    /// Log of the conditional state density `P̂` on stratum `set`.
    fn ln_conditional(&self, set: LabelSet, x: &[f64]) -> f64;
}

/// One violated invariant found by [`DensityDraft::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Unnormalized { total: f64 },
    NegativeWeight { set: String, weight: f64 },
    DuplicateHypothesis { set: String },
    MissingConditional { set: String },
    DimensionMismatch { set: String, expected: usize, got: usize },
    Asymmetric { set: String, asymmetry: f64 },
    NotPositiveDefinite { set: String, eigenvalues: Vec<f64> },
    NonFinite { set: String },
    LabelOutsideSpace { set: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Unnormalized { total } => write!(
                f,
                "weights sum to {total}, expected 1 within {NORMALIZATION_TOL:e}"
            ),
            Violation::NegativeWeight { set, weight } => {
                write!(f, "hypothesis {set}: negative weight {weight}")
            }
            Violation::DuplicateHypothesis { set } => {
                write!(f, "hypothesis {set}: listed more than once")
            }
            Violation::MissingConditional { set } => {
                write!(f, "hypothesis {set}: positive weight but no conditional density")
            }
            Violation::DimensionMismatch { set, expected, got } => write!(
                f,
                "hypothesis {set}: expected {expected} entries, got {got}"
            ),
            Violation::Asymmetric { set, asymmetry } => write!(
                f,
                "hypothesis {set}: covariance asymmetric by {asymmetry:e}"
            ),
            Violation::NotPositiveDefinite { set, eigenvalues } => {
                let min = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
                write!(
                    f,
                    "hypothesis {set}: covariance not positive definite (min eigenvalue {min:.6}, eigenvalues {eigenvalues:.6?})"
                )
            }
            Violation::NonFinite { set } => write!(f, "hypothesis {set}: non-finite entries"),
            Violation::LabelOutsideSpace { set } => {
                write!(f, "hypothesis {set}: label outside the label space")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Unvalidated hypothesis: a label set (in any order), its weight, and the
/// Gaussian conditional over those labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub labels: Vec<Label>,
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Row-major, `(|labels|·d)²` entries.
    pub cov: Vec<f64>,
}

/// Record of one covariance replaced by its eigenvalue-clamped repair.
#[derive(Debug, Clone, PartialEq)]
pub struct PdRepair {
    pub set: String,
    pub floor: f64,
    pub eigenvalues_before: Vec<f64>,
    pub eigenvalues_after: Vec<f64>,
}

impl fmt::Display for PdRepair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "repaired covariance of {}: eigenvalues {:.6?} -> {:.6?} (floor {:.6e})",
            self.set, self.eigenvalues_before, self.eigenvalues_after, self.floor
        )
    }
}

/// Density parameters as read from a document, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityDraft {
    pub space: LabelSpace,
    pub state_dim: usize,
    pub hypotheses: Vec<Hypothesis>,
}

struct Canonical {
    set: LabelSet,
    weight: f64,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl DensityDraft {
    fn set_name(&self, labels: &[Label]) -> String {
        let set = LabelSet::from_labels(labels.iter().copied());
        if self.space.contains_set(set) {
            self.space.display_set(set)
        } else {
            set.to_string()
        }
    }

    /// Permutes a hypothesis into canonical label order.
    fn canonical(&self, h: &Hypothesis) -> std::result::Result<Canonical, Violation> {
        let name = self.set_name(&h.labels);
        let d = self.state_dim;
        let n = h.labels.len() * d;
        if h.mean.len() != n {
            return Err(Violation::DimensionMismatch {
                set: name,
                expected: n,
                got: h.mean.len(),
            });
        }
        if h.cov.len() != n * n {
            return Err(Violation::DimensionMismatch {
                set: name,
                expected: n * n,
                got: h.cov.len(),
            });
        }
        if !h.weight.is_finite() || h.mean.iter().chain(&h.cov).any(|v| !v.is_finite()) {
            return Err(Violation::NonFinite { set: name });
        }
        let mut order: Vec<usize> = (0..h.labels.len()).collect();
        order.sort_by_key(|&i| h.labels[i]);
        let coords: Vec<usize> = order
            .iter()
            .flat_map(|&i| i * d..(i + 1) * d)
            .collect();
        let mean = DVector::from_iterator(n, coords.iter().map(|&i| h.mean[i]));
        let cov = DMatrix::from_fn(n, n, |r, c| h.cov[coords[r] * n + coords[c]]);
        Ok(Canonical {
            set: LabelSet::from_labels(h.labels.iter().copied()),
            weight: h.weight,
            mean,
            cov,
        })
    }

    /// Lists every violated invariant; an empty report means
    /// [`build`](Self::build) will succeed.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mut seen: Vec<LabelSet> = Vec::new();
        let mut total = 0.0;
        for h in &self.hypotheses {
            let set = LabelSet::from_labels(h.labels.iter().copied());
            let name = self.set_name(&h.labels);
            if !self.space.contains_set(set) {
                violations.push(Violation::LabelOutsideSpace { set: name });
                continue;
            }
            if seen.contains(&set) || set.len() != h.labels.len() {
                violations.push(Violation::DuplicateHypothesis { set: name.clone() });
            }
            seen.push(set);
            if h.weight < 0.0 {
                violations.push(Violation::NegativeWeight {
                    set: name.clone(),
                    weight: h.weight,
                });
            }
            total += h.weight;
            if !set.is_empty() && h.mean.is_empty() && h.cov.is_empty() {
                if h.weight > 0.0 {
                    violations.push(Violation::MissingConditional { set: name });
                }
                continue;
            }
            let c = match self.canonical(h) {
                Ok(c) => c,
                Err(v) => {
                    violations.push(v);
                    continue;
                }
            };
            if c.set.is_empty() || c.weight <= 0.0 {
                continue;
            }
            match check_covariance(&c.cov) {
                Ok(()) => {}
                Err(Error::Asymmetric { asymmetry }) => {
                    violations.push(Violation::Asymmetric { set: name, asymmetry })
                }
                Err(Error::NotPositiveDefinite { eigenvalues }) => {
                    violations.push(Violation::NotPositiveDefinite { set: name, eigenvalues })
                }
                Err(_) => violations.push(Violation::NonFinite { set: name }),
            }
        }
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            violations.insert(0, Violation::Unnormalized { total });
        }
        ValidationReport { violations }
    }

    /// Replaces every non-positive-definite covariance by its nearest
    /// eigenvalue-clamped repair, floor `ratio × λ_max`.
    pub fn repair_pd(&mut self, ratio: f64) -> Result<Vec<PdRepair>> {
        let mut repairs = Vec::new();
        let d = self.state_dim;
        for i in 0..self.hypotheses.len() {
            let h = &self.hypotheses[i];
            let n = h.labels.len() * d;
            if n == 0 || h.cov.len() != n * n {
                continue;
            }
            let cov = DMatrix::from_row_slice(n, n, &h.cov);
            if !matches!(check_covariance(&cov), Err(Error::NotPositiveDefinite { .. })) {
                continue;
            }
            let floor = relative_pd_floor(&cov, ratio);
            let fixed = nearest_pd(&cov, floor)?;
            let eig = |m: &DMatrix<f64>| {
                let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
                e.sort_by(f64::total_cmp);
                e
            };
            repairs.push(PdRepair {
                set: self.set_name(&h.labels),
                floor,
                eigenvalues_before: eig(&cov),
                eigenvalues_after: eig(&fixed),
            });
            // back to row-major
            self.hypotheses[i].cov = fixed.transpose().iter().copied().collect();
        }
        Ok(repairs)
    }

    /// Divides all weights by their total.
    pub fn renormalize(&mut self) -> Result<()> {
        let total: f64 = self.hypotheses.iter().map(|h| h.weight).sum();
        if !(total > 0.0) {
            return Err(domain("cannot renormalize weights with zero total"));
        }
        for h in &mut self.hypotheses {
            h.weight /= total;
        }
        Ok(())
    }

    pub fn build(&self) -> Result<LmoDensity> {
        let report = self.validate();
        if !report.is_clean() {
            return Err(Error::Invalid(report));
        }
        let mut weights = Vec::new();
        let mut conditionals = BTreeMap::new();
        for h in &self.hypotheses {
            let set = LabelSet::from_labels(h.labels.iter().copied());
            if set.is_empty() || h.weight <= 0.0 {
                weights.push((set, h.weight.max(0.0)));
                continue;
            }
            let c = self.canonical(h).map_err(|v| domain(v.to_string()))?;
            weights.push((c.set, c.weight));
            if !c.set.is_empty() && c.weight > 0.0 {
                let g = GaussianJoint::new(c.set.labels().collect(), self.state_dim, c.mean, c.cov)?;
                conditionals.insert(c.set, g);
            }
        }
        let table = WeightTable::new(&self.space, weights)?;
        LmoDensity::new(self.space.clone(), self.state_dim, table, conditionals)
    }
}

/// `π(X) = ω(L(X))·P(X)` with a Gaussian conditional per positive-weight
/// label set. `P(∅) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmoDensity {
    space: LabelSpace,
    state_dim: usize,
    weights: WeightTable,
    conditionals: BTreeMap<LabelSet, GaussianJoint>,
}

impl LmoDensity {
    /// Conditionals for zero-weight sets are dropped.
    pub fn new(
        space: LabelSpace,
        state_dim: usize,
        weights: WeightTable,
        mut conditionals: BTreeMap<LabelSet, GaussianJoint>,
    ) -> Result<Self> {
        if weights.n_labels() != space.len() {
            return Err(domain("weight table and label space disagree in size"));
        }
        weights.check_normalized()?;
        conditionals.retain(|set, _| weights.get(*set) > 0.0);
        for (set, w) in weights.support() {
            if set.is_empty() {
                continue;
            }
            let g = conditionals.get(&set).ok_or_else(|| {
                domain(format!("no conditional density for {}", space.display_set(set)))
            })?;
            if g.label_set() != set || g.state_dim() != state_dim {
                return Err(domain(format!(
                    "conditional for {} has block {} and state dimension {}",
                    space.display_set(set),
                    g.label_set(),
                    g.state_dim()
                )));
            }
            debug_assert!(w > 0.0);
        }
        Ok(LmoDensity {
            space,
            state_dim,
            weights,
            conditionals,
        })
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn weight(&self, set: LabelSet) -> f64 {
        self.weights.get(set)
    }

    pub fn conditional(&self, set: LabelSet) -> Option<&GaussianJoint> {
        self.conditionals.get(&set)
    }

    /// Positive-weight sets with their weight and conditional (`None` for ∅).
    pub fn support(&self) -> impl Iterator<Item = (LabelSet, f64, Option<&GaussianJoint>)> {
        self.weights
            .support()
            .map(move |(s, w)| (s, w, self.conditionals.get(&s)))
    }

    /// Largest stratum dimension `|I|·d` over positive-weight sets.
    pub fn max_stratum_dim(&self) -> usize {
        self.support().map(|(s, _, _)| s.len() * self.state_dim).max().unwrap_or(0)
    }

    pub fn cardinality(&self) -> CardinalityDistribution {
        cardinality_from_weights(&self.weights).expect("weights validated on construction")
    }

    pub fn mean_cardinality(&self) -> f64 {
        mean_cardinality(&self.cardinality())
    }

    /// `p_{I−{ℓ}}(·, ℓ)`: the conditional on `set` marginalized onto `label`.
    pub fn conditional_marginal(&self, set: LabelSet, label: Label) -> Result<GaussianJoint> {
        self.space.check_label(label)?;
        if !set.contains(label) {
            return Err(domain(format!(
                "label {} is not in {}",
                self.space.name(label),
                self.space.display_set(set)
            )));
        }
        let g = self.conditionals.get(&set).ok_or_else(|| {
            domain(format!(
                "{} carries no weight",
                self.space.display_set(set)
            ))
        })?;
        g.marginalize(&[label])
    }

    /// `v(x, ℓ) = Σ_{I∋ℓ} ω(I)·p_{I−ℓ}(x, ℓ)`.
    pub fn labeled_phd(&self, label: Label) -> Result<GaussianMixture> {
        self.space.check_label(label)?;
        let mut mix = GaussianMixture::empty();
        for (set, w, g) in self.support() {
            if let (true, Some(g)) = (set.contains(label), g) {
                mix.push(w, g.marginalize(&[label])?)?;
            }
        }
        Ok(mix)
    }

    /// `v(x) = Σ_ℓ v(x, ℓ)`.
    pub fn unlabeled_phd(&self) -> Result<GaussianMixture> {
        let mut mix = GaussianMixture::empty();
        for label in self.space.labels() {
            mix.extend(&self.labeled_phd(label)?)?;
        }
        Ok(mix)
    }

    /// Re-checks the construction invariants; empty for any built density.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let total = self.weights.total();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            violations.push(Violation::Unnormalized { total });
        }
        for (set, _, g) in self.support() {
            if set.is_empty() {
                continue;
            }
            match g {
                None => violations.push(Violation::MissingConditional {
                    set: self.space.display_set(set),
                }),
                Some(g) => {
                    if let Err(Error::NotPositiveDefinite { eigenvalues }) = check_covariance(g.cov()) {
                        violations.push(Violation::NotPositiveDefinite {
                            set: self.space.display_set(set),
                            eigenvalues,
                        });
                    }
                }
            }
        }
        ValidationReport { violations }
    }
}

impl LabeledDensity for LmoDensity {
    fn space(&self) -> &LabelSpace {
        &self.space
    }

    fn state_dim(&self) -> usize {
        self.state_dim
    }

    fn ln_stratum(&self, set: LabelSet, x: &[f64]) -> f64 {
        let w = self.weights.get(set);
        if w <= 0.0 {
            return f64::NEG_INFINITY;
        }
        w.ln() + self.ln_conditional(set, x)
    }

    fn stratum_bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>> {
        if self.weights.get(set) <= 0.0 {
            return None;
        }
        match self.conditionals.get(&set) {
            Some(g) => Some(g.bounds(span)),
            None => Some(Vec::new()),
        }
    }
}

impl Factorized for LmoDensity {
    fn set_weight(&self, set: LabelSet) -> f64 {
        self.weights.get(set)
    }

    fn ln_conditional(&self, set: LabelSet, x: &[f64]) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        match self.conditionals.get(&set) {
            Some(g) => g.ln_pdf(x),
            None => f64::NEG_INFINITY,
        }
    }
}
