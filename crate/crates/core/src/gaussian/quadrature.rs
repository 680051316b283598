//! Tensor-product trapezoidal quadrature on boxes.
//!
//! Every grid with an odd point count also carries the half-resolution grid
//! made of its even-indexed nodes, so one pass yields two estimates whose
//! difference bounds the discretization error. Parallel reductions split on
//! the first axis and merge partial sums in index order, which keeps results
//! bit-identical for a fixed grid regardless of the thread count.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};

/// Largest dimension integrated on a grid in exact mode.
pub const MAX_GRID_DIM: usize = 3;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Trapezoidal weights of one node on the fine and the half-resolution grid.
#[derive(Debug, Clone, Copy)]
pub struct NodeWeights {
    pub fine: f64,
    /// Zero when the node is not on the half-resolution grid.
    pub coarse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    bounds: Vec<(f64, f64)>,
    points: usize,
}

/// Fine and half-resolution estimates from a single pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridEstimate {
    pub fine: f64,
    pub coarse: Option<f64>,
}

impl GridEstimate {
    /// `|fine − coarse|`, or zero without a coarse estimate.
    pub fn refinement_delta(&self) -> f64 {
        self.coarse.map_or(0.0, |c| (self.fine - c).abs())
    }
}

impl QuadratureGrid {
    pub fn new(bounds: Vec<(f64, f64)>, points: usize) -> Result<Self> {
        if bounds.is_empty() {
            return Err(domain("quadrature grid needs at least one dimension"));
        }
        if points < 2 {
            return Err(domain(format!("grid needs at least 2 points per axis, got {points}")));
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(domain(format!("invalid grid bounds [{lo}, {hi}]")));
            }
        }
        Ok(QuadratureGrid { bounds, points })
    }

    /// Same bounds on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(vec![(lo, hi); dim], points)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn step(&self, axis: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        (hi - lo) / (self.points - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim() as u32)
    }

    /// Whether the even-indexed nodes form a half-resolution grid.
    pub fn has_coarse(&self) -> bool {
        self.points % 2 == 1 && self.points >= 3
    }

    fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let (lo, hi) = self.bounds[axis];
        let h = self.step(axis);
        (0..self.points)
            .map(|i| if i + 1 == self.points { hi } else { lo + h * i as f64 })
            .collect()
    }

    fn axis_weights(&self, axis: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.points;
        let h = self.step(axis);
        let fine = (0..m)
            .map(|i| if i == 0 || i + 1 == m { 0.5 * h } else { h })
            .collect();
        let coarse = (0..m)
            .map(|i| {
                if !self.has_coarse() || i % 2 == 1 {
                    0.0
                } else if i == 0 || i + 1 == m {
                    h
                } else {
                    2.0 * h
                }
            })
            .collect();
        (fine, coarse)
    }

    /// Visits every node with its weights and folds the results.
    ///
    /// Work is split over the first axis; partial accumulators are merged
    /// in index order.
    pub fn reduce<A, I, V, M>(&self, init: I, visit: V, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync,
        V: Fn(&mut A, &[f64], NodeWeights) + Sync,
        M: Fn(&mut A, A),
    {
        let dim = self.dim();
        if dim > MAX_GRID_DIM {
            return Err(Error::GridDimension {
                dim,
                max: MAX_GRID_DIM,
            });
        }
        let nodes: Vec<Vec<f64>> = (0..dim).map(|a| self.axis_nodes(a)).collect();
        let weights: Vec<(Vec<f64>, Vec<f64>)> = (0..dim).map(|a| self.axis_weights(a)).collect();
        let m = self.points;
        let partials: Vec<A> = (0..m)
            .into_par_iter()
            .map(|i0| {
                let mut acc = init();
                let mut idx = vec![0usize; dim];
                idx[0] = i0;
                let mut x = vec![0.0; dim];
                loop {
                    let mut wf = 1.0;
                    let mut wc = 1.0;
                    for a in 0..dim {
                        x[a] = nodes[a][idx[a]];
                        wf *= weights[a].0[idx[a]];
                        wc *= weights[a].1[idx[a]];
                    }
                    visit(&mut acc, &x, NodeWeights { fine: wf, coarse: wc });
                    // odometer over axes 1..dim
                    let mut a = dim;
                    loop {
                        a -= 1;
                        if a == 0 {
                            return acc;
                        }
                        idx[a] += 1;
                        if idx[a] < m {
                            break;
                        }
                        idx[a] = 0;
                    }
                }
            })
            .collect();
        let mut it = partials.into_iter();
        let mut out = it.next().expect("grid has at least two points");
        for p in it {
            merge(&mut out, p);
        }
        Ok(out)
    }

    /// Trapezoidal estimate of `∫ f` with its half-resolution companion.
    pub fn integrate_refined<F>(&self, f: F) -> Result<GridEstimate>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let (fine, coarse) = self.reduce(
            || (CompensatedSum::default(), CompensatedSum::default()),
            |acc, x, w| {
                let v = f(x);
                acc.0.add(w.fine * v);
                if w.coarse > 0.0 {
                    acc.1.add(w.coarse * v);
                }
            },
            |acc, other| {
                acc.0.merge(other.0);
                acc.1.merge(other.1);
            },
        )?;
        Ok(GridEstimate {
            fine: fine.value(),
            coarse: self.has_coarse().then(|| coarse.value()),
        })
    }
}

/// Trapezoidal-rule estimate of `∫ f` over `grid`; refuses more than
/// [`MAX_GRID_DIM`] dimensions.
pub fn integrate_on_grid<F>(f: F, grid: &QuadratureGrid) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    Ok(grid.integrate_refined(f)?.fine)
}
