//! Multivariate Gaussians on labeled coordinate blocks.
//!
//! A [`GaussianJoint`] assigns `d` consecutive coordinates to each label of
//! its block, in canonical label order. Covariances are validated on
//! construction and factorized once, so log-density evaluation in the
//! quadrature loops never allocates for blocks of up to eight coordinates.

mod mixture;
mod quadrature;

pub use mixture::GaussianMixture;
pub use quadrature::{
    integrate_on_grid, CompensatedSum, GridEstimate, NodeWeights, QuadratureGrid, MAX_GRID_DIM,
};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use smallvec::SmallVec;

use crate::error::{domain, Error, Result};
use crate::labelspace::{Label, LabelSet};

/// Maximum tolerated `|C_ij - C_ji|`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Smallest eigenvalue accepted as positive definite.
pub const PD_EIGENVALUE_TOL: f64 = 1e-12;

/// Default repair floor, relative to the largest eigenvalue.
pub const DEFAULT_PD_FLOOR_RATIO: f64 = 1e-3;

pub(crate) type Coords = SmallVec<[f64; 8]>;

#[derive(Debug, Clone)]
pub struct GaussianJoint {
    block: Vec<Label>,
    state_dim: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    ln_norm: f64,
}

impl PartialEq for GaussianJoint {
    fn eq(&self, other: &Self) -> bool {
        self.block == other.block
            && self.state_dim == other.state_dim
            && self.mean == other.mean
            && self.cov == other.cov
    }
}

impl GaussianJoint {
    /// Validates and factorizes `N(mean, cov)` over `block`.
    ///
    /// `block` must list distinct labels in canonical order; `mean` has
    /// `|block|·state_dim` entries. The stored covariance is the exact
    /// symmetrization `(C + Cᵀ)/2`.
    pub fn new(
        block: Vec<Label>,
        state_dim: usize,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
    ) -> Result<Self> {
        if state_dim == 0 {
            return Err(domain("state dimension must be at least 1"));
        }
        if block.is_empty() {
            return Err(domain("a Gaussian block needs at least one label"));
        }
        if block.windows(2).any(|w| w[0] >= w[1]) {
            return Err(domain(
                "block labels must be distinct and in canonical order",
            ));
        }
        let dim = block.len() * state_dim;
        if mean.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: mean.len(),
            });
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim * dim,
                got: cov.nrows() * cov.ncols(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(domain("mean and covariance entries must be finite"));
        }
        check_covariance(&cov)?;
        let cov = symmetrize(&cov);
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite {
                eigenvalues: cov.symmetric_eigenvalues().iter().copied().collect(),
            })?
            .l();
        let ln_det_half: f64 = chol.diagonal().iter().map(|d| d.ln()).sum();
        let ln_norm = -0.5 * dim as f64 * (2.0 * PI).ln() - ln_det_half;
        Ok(GaussianJoint {
            block,
            state_dim,
            mean,
            cov,
            chol,
            ln_norm,
        })
    }

    /// One-label, one-dimensional `N(mean, variance)`.
    pub fn scalar(label: Label, mean: f64, variance: f64) -> Result<Self> {
        Self::new(
            vec![label],
            1,
            DVector::from_element(1, mean),
            DMatrix::from_element(1, 1, variance),
        )
    }

    pub fn block(&self) -> &[Label] {
        &self.block
    }

    pub fn label_set(&self) -> LabelSet {
        LabelSet::from_labels(self.block.iter().copied())
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Number of coordinates, `|block|·d`.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor `L` with `LLᵀ = cov`.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn ln_det(&self) -> f64 {
        2.0 * self.chol.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Same covariance and block, new mean.
    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        if mean.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: mean.len(),
            });
        }
        Ok(GaussianJoint {
            mean,
            ..self.clone()
        })
    }

    /// Same parameters on a different block of the same size.
    pub fn relabeled(&self, block: Vec<Label>) -> Result<Self> {
        if block.len() != self.block.len() {
            return Err(Error::Dimension {
                expected: self.block.len(),
                got: block.len(),
            });
        }
        Self::new(block, self.state_dim, self.mean.clone(), self.cov.clone())
    }

    /// Exact marginal over the labels in `keep`.
    pub fn marginalize(&self, keep: &[Label]) -> Result<Self> {
        if keep.is_empty() {
            return Err(domain("cannot marginalize onto an empty block"));
        }
        let set = self.label_set();
        let mut coords = Vec::with_capacity(keep.len() * self.state_dim);
        let mut sorted = keep.to_vec();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != keep.len() {
            return Err(domain("marginal block has duplicate labels"));
        }
        for &label in &sorted {
            let rank = set.rank_of(label).ok_or_else(|| {
                domain(format!("label {label} is not in the block {set}"))
            })?;
            coords.extend(rank * self.state_dim..(rank + 1) * self.state_dim);
        }
        if sorted.len() == self.block.len() {
            return Ok(self.clone());
        }
        let mean = DVector::from_iterator(coords.len(), coords.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(coords.len(), coords.len(), |r, c| {
            self.cov[(coords[r], coords[c])]
        });
        Self::new(sorted, self.state_dim, mean, cov)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x)?;
        Ok(self.ln_pdf(x).exp())
    }

    /// Log density; `x` must have [`dim`](Self::dim) entries.
    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "coordinate count mismatch");
        let n = x.len();
        let mut y: Coords = SmallVec::with_capacity(n);
        let mut quad = 0.0;
        for i in 0..n {
            let mut v = x[i] - self.mean[i];
            for (j, yj) in y.iter().enumerate() {
                v -= self.chol[(i, j)] * yj;
            }
            v /= self.chol[(i, i)];
            quad += v * v;
            y.push(v);
        }
        self.ln_norm - 0.5 * quad
    }

    /// Writes `mean + L z` into `out`.
    pub fn map_standard(&self, z: &[f64], out: &mut [f64]) {
        let n = self.dim();
        assert!(z.len() == n && out.len() == n, "coordinate count mismatch");
        for i in 0..n {
            let mut v = self.mean[i];
            for j in 0..=i {
                v += self.chol[(i, j)] * z[j];
            }
            out[i] = v;
        }
    }

    /// Log density of the point `mean + L z`, from `z` alone.
    pub fn ln_pdf_standard(&self, z: &[f64]) -> f64 {
        self.ln_norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        let mut out = vec![0.0; self.dim()];
        self.map_standard(&z, &mut out);
        DVector::from_vec(out)
    }

    /// Per-coordinate `mean ± span·σ`.
    pub fn bounds(&self, span: f64) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|i| {
                let s = span * self.cov[(i, i)].sqrt();
                (self.mean[i] - s, self.mean[i] + s)
            })
            .collect()
    }

    /// Product density of single-label Gaussians, as one block-diagonal joint.
    pub fn block_diagonal(parts: &[GaussianJoint]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| domain("block-diagonal product needs at least one factor"))?;
        let d = first.state_dim;
        let mut block = Vec::new();
        let mut means = Vec::new();
        let dim: usize = parts.iter().map(|p| p.dim()).sum();
        let mut cov = DMatrix::zeros(dim, dim);
        let mut offset = 0;
        for p in parts {
            if p.state_dim != d {
                return Err(domain("factors have different state dimensions"));
            }
            block.extend_from_slice(&p.block);
            means.extend(p.mean.iter().copied());
            cov.view_mut((offset, offset), (p.dim(), p.dim()))
                .copy_from(&p.cov);
            offset += p.dim();
        }
        Self::new(block, d, DVector::from_vec(means), cov)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..m.nrows() {
        for c in r + 1..m.ncols() {
            worst = worst.max((m[(r, c)] - m[(c, r)]).abs());
        }
    }
    worst
}

/// Checks symmetry within [`SYMMETRY_TOL`] and eigenvalues above
/// [`PD_EIGENVALUE_TOL`].
pub fn check_covariance(cov: &DMatrix<f64>) -> Result<()> {
    if !cov.is_square() {
        return Err(domain("covariance must be square"));
    }
    let asymmetry = max_asymmetry(cov);
    if asymmetry > SYMMETRY_TOL {
        return Err(Error::Asymmetric { asymmetry });
    }
    let mut eigenvalues: Vec<f64> = symmetrize(cov).symmetric_eigenvalues().iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    if eigenvalues.first().is_none_or(|&e| e <= PD_EIGENVALUE_TOL) {
        return Err(Error::NotPositiveDefinite { eigenvalues });
    }
    Ok(())
}

/// Closed-form `KL(a ‖ b)` between Gaussians on the same block.
pub fn gaussian_kld(a: &GaussianJoint, b: &GaussianJoint) -> Result<f64> {
    if a.block != b.block || a.state_dim != b.state_dim {
        return Err(domain(format!(
            "KL divergence needs matching blocks, got {} and {}",
            a.label_set(),
            b.label_set()
        )));
    }
    let lb = &b.chol;
    let solved = lb
        .solve_lower_triangular(&a.chol)
        .ok_or_else(|| domain("singular factor"))?;
    let trace = solved.norm_squared();
    let diff = &b.mean - &a.mean;
    let w = lb
        .solve_lower_triangular(&diff)
        .ok_or_else(|| domain("singular factor"))?;
    let quad = w.norm_squared();
    let kld = 0.5 * (trace + quad - a.dim() as f64 + b.ln_det() - a.ln_det());
    Ok(kld.max(0.0))
}

/// Symmetrizes `m` and clamps its eigenvalues from below at `floor`.
///
/// Inputs whose eigenvalues already sit at or above `floor` come back as
/// their exact symmetrization.
pub fn nearest_pd(m: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(domain("matrix must be square"));
    }
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(domain(format!("eigenvalue floor must be positive, got {floor}")));
    }
    let sym = symmetrize(m);
    let eig = sym.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&e| e >= floor) {
        return Ok(sym);
    }
    let clamped = eig.eigenvalues.map(|e| e.max(floor));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    Ok(symmetrize(&rebuilt))
}

/// `ratio` times the largest eigenvalue of the symmetrized matrix.
pub fn relative_pd_floor(m: &DMatrix<f64>, ratio: f64) -> f64 {
    let largest = symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    ratio * largest.abs()
}
