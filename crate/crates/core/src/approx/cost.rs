use std::fmt;

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DensityKind {
    Lmo,
    DeltaGlmb,
    Lmb,
    Lp,
    Liid,
}

impl DensityKind {
    pub const ALL: [DensityKind; 5] = [
        DensityKind::Lmo,
        DensityKind::DeltaGlmb,
        DensityKind::Lmb,
        DensityKind::Lp,
        DensityKind::Liid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DensityKind::Lmo => "LMO",
            DensityKind::DeltaGlmb => "delta-GLMB",
            DensityKind::Lmb => "LMB",
            DensityKind::Lp => "LP",
            DensityKind::Liid => "LIID",
        }
    }
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of Euclidean integrals needed for a set integral, indexed by the
/// power of the single-object space: `counts[k - 1]` integrals on `𝕏^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostProfile {
    pub kind: DensityKind,
    pub counts: Vec<u64>,
}

impl CostProfile {
    pub fn on_power(&self, k: usize) -> u64 {
        if k == 0 {
            return 0;
        }
        self.counts.get(k - 1).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Integral counts per density family for `n_labels` labels.
pub fn integral_cost(kind: DensityKind, n_labels: usize) -> Result<CostProfile> {
    if n_labels == 0 {
        return Err(domain("cost model needs at least one label"));
    }
    let n = n_labels as u64;
    let mut counts = vec![0u64; n_labels];
    match kind {
        DensityKind::Lmo => {
            for k in 1..=n {
                counts[k as usize - 1] = binomial(n, k);
            }
        }
        DensityKind::DeltaGlmb => counts[0] = (1..=n).map(|k| k * binomial(n, k)).sum(),
        DensityKind::Lmb => counts[0] = n,
        DensityKind::Lp | DensityKind::Liid => counts[0] = 1,
    }
    Ok(CostProfile { kind, counts })
}
