//! Finite label spaces, label subsets, weight tables over subsets, and
//! cardinality distributions.
//!
//! A [`LabelSet`] is a bitmask over canonical label positions, so the whole
//! power set of a space with at most [`MAX_LABELS`] labels can be stored
//! densely and enumerated in a fixed order.

use std::fmt;

use crate::error::{domain, Error, Result};

/// Largest supported label space; dense power-set tables hold `2^n` entries.
pub const MAX_LABELS: usize = 20;

/// Tolerance on the total mass of weight tables and cardinality distributions.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Tail mass at which Poisson cardinalities are truncated.
pub const POISSON_TAIL: f64 = 1e-12;

/// A label identified by its canonical index (`1`-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(u32);

impl Label {
    pub fn new(index: usize) -> Result<Self> {
        if index == 0 || index > MAX_LABELS {
            return Err(domain(format!(
                "label index {index} outside 1..={MAX_LABELS}"
            )));
        }
        Ok(Label(index as u32))
    }

    /// Canonical index, starting at 1.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Zero-based position in the canonical order.
    pub fn position(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordered finite label space `{α_1, …, α_n}` with display names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    names: Vec<String>,
}

impl LabelSpace {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() || names.len() > MAX_LABELS {
            return Err(domain(format!(
                "label space must hold 1..={MAX_LABELS} labels, got {}",
                names.len()
            )));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(domain(format!("duplicate label name {name:?}")));
            }
        }
        Ok(LabelSpace { names })
    }

    /// Space with labels named `"1"`, …, `"n"`.
    pub fn with_size(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        (1..=self.len()).map(|i| Label(i as u32))
    }

    pub fn label(&self, index: usize) -> Result<Label> {
        if index == 0 || index > self.len() {
            return Err(domain(format!(
                "label index {index} outside space of size {}",
                self.len()
            )));
        }
        Ok(Label(index as u32))
    }

    pub fn name(&self, label: Label) -> &str {
        &self.names[label.position()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn find(&self, name: &str) -> Option<Label> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|p| Label(p as u32 + 1))
    }

    pub fn contains(&self, label: Label) -> bool {
        label.index() <= self.len()
    }

    pub fn contains_set(&self, set: LabelSet) -> bool {
        set.bits() >> self.len() == 0
    }

    pub fn full_set(&self) -> LabelSet {
        LabelSet((1u32 << self.len()) - 1)
    }

    /// Number of subsets, `2^|L|`.
    pub fn subset_count(&self) -> usize {
        1usize << self.len()
    }

    /// Formats a set using the label names, e.g. `{1,2}`.
    pub fn display_set(&self, set: LabelSet) -> String {
        let names: Vec<&str> = set.labels().map(|l| self.name(l)).collect();
        format!("{{{}}}", names.join(","))
    }

    pub(crate) fn check_label(&self, label: Label) -> Result<()> {
        if self.contains(label) {
            Ok(())
        } else {
            Err(domain(format!(
                "label {label} outside space of size {}",
                self.len()
            )))
        }
    }

    pub(crate) fn check_set(&self, set: LabelSet) -> Result<()> {
        if self.contains_set(set) {
            Ok(())
        } else {
            Err(domain(format!(
                "label set {set} not contained in space of size {}",
                self.len()
            )))
        }
    }
}

/// Subset of a label space stored as a bitmask over canonical positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct LabelSet(u32);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn from_bits(bits: u32) -> Self {
        LabelSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn from_labels(labels: impl IntoIterator<Item = Label>) -> Self {
        LabelSet(labels.into_iter().fold(0, |acc, l| acc | (1 << l.position())))
    }

    /// Builds a set from `1`-based canonical indices.
    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let labels = indices
            .iter()
            .map(|&i| Label::new(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_labels(labels))
    }

    pub fn singleton(label: Label) -> Self {
        LabelSet(1 << label.position())
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, label: Label) -> bool {
        self.0 & (1 << label.position()) != 0
    }

    pub fn is_subset(self, other: LabelSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn with(self, label: Label) -> Self {
        LabelSet(self.0 | (1 << label.position()))
    }

    pub fn without(self, label: Label) -> Self {
        LabelSet(self.0 & !(1 << label.position()))
    }

    /// Members in canonical order.
    pub fn labels(self) -> impl Iterator<Item = Label> {
        let bits = self.0;
        (0..32u32)
            .filter(move |p| bits & (1 << p) != 0)
            .map(|p| Label(p + 1))
    }

    /// Position of `label` among the members (its coordinate block).
    pub fn rank_of(self, label: Label) -> Option<usize> {
        if !self.contains(label) {
            return None;
        }
        let below = self.0 & ((1u32 << label.position()) - 1);
        Some(below.count_ones() as usize)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.labels().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Cardinality-major, then lexicographic on canonical indices.
impl Ord for LabelSet {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            // Lexicographic on sorted index lists equals comparing reversed
            // bit order: the first differing lowest member wins.
            let diff = self.0 ^ other.0;
            if diff == 0 {
                std::cmp::Ordering::Equal
            } else if self.0 & (diff & diff.wrapping_neg()) != 0 {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        })
    }
}

impl PartialOrd for LabelSet {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// All subsets of `space` (or only those of cardinality `n`), ordered by
/// cardinality and then lexicographically on canonical indices.
pub fn enumerate_subsets(space: &LabelSpace, n: Option<usize>) -> Result<Vec<LabelSet>> {
    let total = space.len();
    let sizes = match n {
        Some(k) if k > total => {
            return Err(domain(format!(
                "cardinality {k} exceeds label space size {total}"
            )))
        }
        Some(k) => k..=k,
        None => 0..=total,
    };
    let mut out = Vec::new();
    for k in sizes {
        push_combinations(total, k, &mut out);
    }
    Ok(out)
}

fn push_combinations(n: usize, k: usize, out: &mut Vec<LabelSet>) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(LabelSet(idx.iter().fold(0, |acc, &p| acc | (1 << p))));
        // rightmost position that can still move right
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// First `n` labels of the space, `𝕃(n) = {α_1, …, α_n}`.
pub fn canonical_prefix(space: &LabelSpace, n: usize) -> Result<LabelSet> {
    if n > space.len() {
        return Err(domain(format!(
            "prefix length {n} exceeds label space size {}",
            space.len()
        )));
    }
    Ok(LabelSet(((1u64 << n) - 1) as u32))
}

/// Dense table of joint existence probabilities `ω(I)` over all subsets.
///
/// Absent entries read as zero. Construction only checks that entries are
/// finite and nonnegative; normalization is checked by the consumers that
/// need it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    n_labels: usize,
    weights: Vec<f64>,
}

impl WeightTable {
    pub fn new(
        space: &LabelSpace,
        entries: impl IntoIterator<Item = (LabelSet, f64)>,
    ) -> Result<Self> {
        let mut weights = vec![0.0; space.subset_count()];
        let mut seen = vec![false; weights.len()];
        for (set, w) in entries {
            space.check_set(set)?;
            if !w.is_finite() || w < 0.0 {
                return Err(domain(format!("weight of {set} is {w}, expected >= 0")));
            }
            let slot = set.bits() as usize;
            if seen[slot] {
                return Err(domain(format!("duplicate weight entry for {set}")));
            }
            seen[slot] = true;
            weights[slot] = w;
        }
        Ok(WeightTable {
            n_labels: space.len(),
            weights,
        })
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn get(&self, set: LabelSet) -> f64 {
        self.weights.get(set.bits() as usize).copied().unwrap_or(0.0)
    }

    /// Total mass, summed in canonical subset order.
    pub fn total(&self) -> f64 {
        self.iter().map(|(_, w)| w).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORMALIZATION_TOL
    }

    pub fn check_normalized(&self) -> Result<()> {
        let total = self.total();
        if (total - 1.0).abs() <= NORMALIZATION_TOL {
            Ok(())
        } else {
            Err(Error::Unnormalized {
                total,
                tolerance: NORMALIZATION_TOL,
            })
        }
    }

    /// Table divided by its total mass.
    pub fn renormalized(&self) -> Result<Self> {
        let total = self.total();
        if total <= 0.0 {
            return Err(domain("cannot renormalize a weight table with zero mass"));
        }
        Ok(WeightTable {
            n_labels: self.n_labels,
            weights: self.weights.iter().map(|w| w / total).collect(),
        })
    }

    /// Every subset with its weight, in canonical order (zeros included).
    pub fn iter(&self) -> impl Iterator<Item = (LabelSet, f64)> + '_ {
        let space_len = self.n_labels;
        (0..=space_len).flat_map(move |k| {
            let mut sets = Vec::new();
            push_combinations(space_len, k, &mut sets);
            sets.into_iter()
                .map(move |s| (s, self.weights[s.bits() as usize]))
        })
    }

    /// Subsets carrying positive weight, in canonical order.
    pub fn support(&self) -> impl Iterator<Item = (LabelSet, f64)> + '_ {
        self.iter().filter(|&(_, w)| w > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CardinalityKind {
    Finite,
    /// Poisson with the given rate, truncated where the tail mass drops below
    /// [`POISSON_TAIL`].
    Poisson { rate: f64 },
}

/// Probability vector over object counts `n = 0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CardinalityDistribution {
    probs: Vec<f64>,
    kind: CardinalityKind,
}

impl CardinalityDistribution {
    pub fn finite(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("cardinality distribution needs at least one entry"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(domain(format!("cardinality probability {p} is invalid")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Unnormalized {
                total,
                tolerance: NORMALIZATION_TOL,
            });
        }
        Ok(CardinalityDistribution {
            probs,
            kind: CardinalityKind::Finite,
        })
    }

    pub fn poisson(rate: f64) -> Result<Self> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(domain(format!("Poisson rate must be positive, got {rate}")));
        }
        let ln_rate = rate.ln();
        let mut probs = Vec::new();
        let mut ln_p = -rate;
        let mut cumulative = 0.0;
        let mut n = 0usize;
        loop {
            let p = ln_p.exp();
            probs.push(p);
            cumulative += p;
            // keep going past the mode even if the running tail estimate
            // has not yet settled
            if (n as f64) > rate && 1.0 - cumulative < POISSON_TAIL {
                break;
            }
            n += 1;
            ln_p += ln_rate - (n as f64).ln();
        }
        Ok(CardinalityDistribution {
            probs,
            kind: CardinalityKind::Poisson { rate },
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn kind(&self) -> CardinalityKind {
        self.kind
    }

    /// `P(N = n)`, zero beyond the stored range.
    pub fn get(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn max_n(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `P(N >= n)` over the stored range.
    pub fn tail_from(&self, n: usize) -> f64 {
        self.probs.iter().skip(n).sum()
    }
}

/// `ρ(n) = Σ_{|I| = n} ω(I)`.
pub fn cardinality_from_weights(w: &WeightTable) -> Result<CardinalityDistribution> {
    w.check_normalized()?;
    let mut probs = vec![0.0; w.n_labels() + 1];
    for (set, weight) in w.iter() {
        probs[set.len()] += weight;
    }
    CardinalityDistribution::finite(probs)
}

/// Expected number of objects; the rate for Poisson distributions.
pub fn mean_cardinality(rho: &CardinalityDistribution) -> f64 {
    match rho.kind() {
        CardinalityKind::Poisson { rate } => rate,
        CardinalityKind::Finite => rho
            .probs()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum(),
    }
}
