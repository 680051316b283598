//! Set-integral Kullback–Leibler divergence between an LMO density and any
//! labeled density, stratum by stratum.
//!
//! The set integral over a finite label space splits into one ordinary
//! integral per label set `I` on `𝕏^{|I|}`, with coordinates stacked in
//! canonical label order. Each stratum of `f` is Gaussian, so its integral
//! is taken in the whitened coordinates `x = μ + L z` of that Gaussian:
//! a trapezoidal grid over `z ∈ [−span, span]^k` for `k ≤ max_grid_dim`,
//! otherwise plain Monte Carlo with `f`'s own stratum as the sampler.
//! Whitening keeps nearly singular conditionals resolved on a modest grid.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;
use statrs::function::erf::erfc;

use crate::approx::{approx_delta_glmb, approx_lmb};
use crate::error::{domain, Error, Result};
use crate::gaussian::{CompensatedSum, Coords, GaussianJoint, QuadratureGrid, MAX_GRID_DIM};
use crate::labelspace::{enumerate_subsets, LabelSet};
use crate::lmo::{Factorized, LabeledDensity, LmoDensity};

/// Quadrature and sampling settings shared by every estimator here.
#[derive(Debug, Clone, PartialEq)]
pub struct KldConfig {
    /// Points per axis for strata of dimension 1 and 2. Must be odd.
    pub grid_points: usize,
    /// Points per axis for 3-dimensional strata. Must be odd.
    pub grid_points_3d: usize,
    /// Half-width of the integration box in standard deviations.
    pub span: f64,
    pub mc_samples: usize,
    pub seed: u64,
    pub allow_mc: bool,
    /// Largest stratum dimension integrated on a grid.
    pub max_grid_dim: usize,
    /// Use Monte Carlo for every non-empty stratum.
    pub force_mc: bool,
}

impl Default for KldConfig {
    fn default() -> Self {
        KldConfig {
            grid_points: 401,
            grid_points_3d: 121,
            span: 8.0,
            mc_samples: 200_000,
            seed: 0x5eed,
            allow_mc: true,
            max_grid_dim: MAX_GRID_DIM,
            force_mc: false,
        }
    }
}

impl KldConfig {
    fn points_for(&self, dim: usize) -> usize {
        if dim >= 3 {
            self.grid_points_3d
        } else {
            self.grid_points
        }
    }

    fn check(&self) -> Result<()> {
        if self.grid_points.is_multiple_of(2) || self.grid_points_3d.is_multiple_of(2) {
            return Err(domain("grid point counts must be odd"));
        }
        if self.grid_points < 3 || self.grid_points_3d < 3 {
            return Err(domain("grid point counts must be at least 3"));
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(domain(format!("invalid integration span {}", self.span)));
        }
        if self.max_grid_dim > MAX_GRID_DIM {
            return Err(Error::GridDimension {
                dim: self.max_grid_dim,
                max: MAX_GRID_DIM,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KldMethod {
    /// Closed form, for the empty stratum.
    Exact,
    Grid,
    MonteCarlo,
}

impl fmt::Display for KldMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KldMethod::Exact => "exact",
            KldMethod::Grid => "grid",
            KldMethod::MonteCarlo => "montecarlo",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StratumEstimate {
    pub set: LabelSet,
    pub value: f64,
    pub error_bound: f64,
    pub method: KldMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KldEstimate {
    /// `+inf` when `g` vanishes on a stratum where `f` has mass.
    pub value: f64,
    pub error_bound: f64,
    /// `MonteCarlo` if any stratum was sampled, else `Grid`.
    pub method: KldMethod,
    pub per_stratum: Vec<StratumEstimate>,
    /// First stratum found with `g = 0` under positive `f`.
    pub infinite_stratum: Option<LabelSet>,
}

impl KldEstimate {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    fn from_strata(per_stratum: Vec<StratumEstimate>) -> Self {
        let mut value = CompensatedSum::default();
        let mut error = 0.0;
        let mut infinite_stratum = None;
        for s in &per_stratum {
            if s.value == f64::INFINITY {
                infinite_stratum.get_or_insert(s.set);
            } else {
                value.add(s.value);
                error += s.error_bound;
            }
        }
        let method = if per_stratum.iter().any(|s| s.method == KldMethod::MonteCarlo) {
            KldMethod::MonteCarlo
        } else {
            KldMethod::Grid
        };
        KldEstimate {
            value: if infinite_stratum.is_some() {
                f64::INFINITY
            } else {
                value.value()
            },
            error_bound: error,
            method,
            per_stratum,
            infinite_stratum,
        }
    }
}

/// `w·E_P[c + ln P − ln g]` for one Gaussian stratum `P`, where `ln_g` is
/// evaluated at the stacked coordinates.
fn gaussian_expectation<G>(
    set: LabelSet,
    w: f64,
    c: f64,
    p: &GaussianJoint,
    ln_g: G,
    cfg: &KldConfig,
) -> Result<StratumEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let k = p.dim();
    let sample = cfg.force_mc || k > cfg.max_grid_dim;
    if sample && !cfg.allow_mc {
        return Err(Error::Refused {
            stratum: set,
            dim: k,
            max: cfg.max_grid_dim,
        });
    }
    if sample {
        monte_carlo(set, w, c, p, ln_g, cfg)
    } else {
        grid(set, w, c, p, ln_g, cfg)
    }
}

#[derive(Default)]
struct GridAcc {
    fine: CompensatedSum,
    coarse: CompensatedSum,
    magnitude: f64,
    max_abs: f64,
    g_zero: bool,
    nan: bool,
}

fn grid<G>(
    set: LabelSet,
    w: f64,
    c: f64,
    p: &GaussianJoint,
    ln_g: G,
    cfg: &KldConfig,
) -> Result<StratumEstimate>
where
    G: Fn(&[f64]) -> f64 + Sync,
{
    let k = p.dim();
    let grid = QuadratureGrid::cube(k, -cfg.span, cfg.span, cfg.points_for(k))?;
    let ln_phi0 = -0.5 * k as f64 * (2.0 * std::f64::consts::PI).ln();
    let acc = grid.reduce(
        GridAcc::default,
        |acc, z, nw| {
            let mut x: Coords = Coords::from_elem(0.0, k);
            p.map_standard(z, &mut x);
            let ln_f = c + p.ln_pdf_standard(z);
            let lg = ln_g(&x);
            if lg.is_nan() {
                acc.nan = true;
                return;
            }
            let zz: f64 = z.iter().map(|v| v * v).sum();
            let phi = (ln_phi0 - 0.5 * zz).exp();
            if lg == f64::NEG_INFINITY {
                if phi > 0.0 {
                    acc.g_zero = true;
                }
                return;
            }
            let h = ln_f - lg;
            acc.fine.add(nw.fine * phi * h);
            if nw.coarse > 0.0 {
                acc.coarse.add(nw.coarse * phi * h);
            }
            acc.magnitude += nw.fine * phi * (ln_f.abs() + lg.abs() + 1.0);
            acc.max_abs = acc.max_abs.max(h.abs());
        },
        |acc, other| {
            acc.fine.merge(other.fine);
            acc.coarse.merge(other.coarse);
            acc.magnitude += other.magnitude;
            acc.max_abs = acc.max_abs.max(other.max_abs);
            acc.g_zero |= other.g_zero;
            acc.nan |= other.nan;
        },
    )?;
    if acc.nan {
        return Err(domain(format!("density evaluated to NaN on stratum {set}")));
    }
    if acc.g_zero {
        return Ok(StratumEstimate {
            set,
            value: f64::INFINITY,
            error_bound: 0.0,
            method: KldMethod::Grid,
        });
    }
    let fine = acc.fine.value();
    let refinement = (fine - acc.coarse.value()).abs();
    let roundoff = 64.0 * f64::EPSILON * acc.magnitude;
    let tail = outside_mass(k, cfg.span) * (1.0 + acc.max_abs);
    Ok(StratumEstimate {
        set,
        value: w * fine,
        error_bound: w * (refinement + roundoff + tail),
        method: KldMethod::Grid,
    })
}

/// Standard normal mass outside `[−span, span]^k`.
fn outside_mass(k: usize, span: f64) -> f64 {
    let one = erfc(span / std::f64::consts::SQRT_2);
    1.0 - (1.0 - one).powi(k as i32)
}

fn monte_carlo<G>(
    set: LabelSet,
    w: f64,
    c: f64,
    p: &GaussianJoint,
    ln_g: G,
    cfg: &KldConfig,
) -> Result<StratumEstimate>
where
    G: Fn(&[f64]) -> f64,
{
    if cfg.mc_samples < 2 {
        return Err(domain("Monte Carlo needs at least 2 samples"));
    }
    let k = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::from(set.bits()));
    let mut z: Coords = Coords::from_elem(0.0, k);
    let mut x: Coords = Coords::from_elem(0.0, k);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..cfg.mc_samples {
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        p.map_standard(&z, &mut x);
        let lg = ln_g(&x);
        if lg.is_nan() {
            return Err(domain(format!("density evaluated to NaN on stratum {set}")));
        }
        if lg == f64::NEG_INFINITY {
            return Ok(StratumEstimate {
                set,
                value: f64::INFINITY,
                error_bound: 0.0,
                method: KldMethod::MonteCarlo,
            });
        }
        let h = c + p.ln_pdf_standard(&z) - lg;
        // Welford update
        let delta = h - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (h - mean);
    }
    let n = cfg.mc_samples as f64;
    let sd = (m2 / (n - 1.0)).sqrt();
    Ok(StratumEstimate {
        set,
        value: w * mean,
        error_bound: w * 3.0 * sd / n.sqrt(),
        method: KldMethod::MonteCarlo,
    })
}

fn check_spaces(f: &LmoDensity, g: &dyn LabeledDensity) -> Result<()> {
    if f.space() != g.space() || f.state_dim() != g.state_dim() {
        return Err(domain(
            "densities must share the label space and state dimension",
        ));
    }
    Ok(())
}

/// `D_KL(f; g) = ∫ f(X) ln(f(X)/g(X)) δX`, summed over the strata where
/// `f` has mass.
pub fn kld(f: &LmoDensity, g: &dyn LabeledDensity, cfg: &KldConfig) -> Result<KldEstimate> {
    cfg.check()?;
    check_spaces(f, g)?;
    let mut strata = Vec::new();
    for (set, w, cond) in f.support() {
        let est = match cond {
            None => {
                let lg = g.ln_stratum(set, &[]);
                StratumEstimate {
                    set,
                    value: if lg == f64::NEG_INFINITY {
                        f64::INFINITY
                    } else {
                        w * (w.ln() - lg)
                    },
                    error_bound: 0.0,
                    method: KldMethod::Exact,
                }
            }
            Some(p) => gaussian_expectation(set, w, w.ln(), p, |x| g.ln_stratum(set, x), cfg)?,
        };
        strata.push(est);
    }
    Ok(KldEstimate::from_strata(strata))
}

/// `D_KL = C(ω̂) + C(P̂)` with `C(ω̂) = Σ ω ln(ω/ω̂)` and
/// `C(P̂) = Σ_I ω(I) ∫ P_I ln(P_I/P̂_I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KldDecomposition {
    pub c_omega: f64,
    /// First set with `ω̂ = 0` under `ω > 0`.
    pub omega_infinite: Option<LabelSet>,
    pub c_p: KldEstimate,
    pub total: f64,
    pub error_bound: f64,
}

pub fn kld_decompose(f: &LmoDensity, g: &dyn Factorized, cfg: &KldConfig) -> Result<KldDecomposition> {
    cfg.check()?;
    check_spaces(f, g)?;
    let mut c_omega = CompensatedSum::default();
    let mut omega_infinite = None;
    let mut strata = Vec::new();
    for (set, w, cond) in f.support() {
        let w_hat = g.set_weight(set);
        if w_hat <= 0.0 {
            omega_infinite.get_or_insert(set);
        } else {
            c_omega.add(w * (w / w_hat).ln());
        }
        let est = match cond {
            None => StratumEstimate {
                set,
                value: -w * g.ln_conditional(set, &[]),
                error_bound: 0.0,
                method: KldMethod::Exact,
            },
            Some(p) => gaussian_expectation(set, w, 0.0, p, |x| g.ln_conditional(set, x), cfg)?,
        };
        strata.push(est);
    }
    let c_omega = if omega_infinite.is_some() {
        f64::INFINITY
    } else {
        c_omega.value()
    };
    let c_p = KldEstimate::from_strata(strata);
    Ok(KldDecomposition {
        c_omega,
        omega_infinite,
        total: c_omega + c_p.value,
        error_bound: c_p.error_bound,
        c_p,
    })
}

/// The three divergences of the δ-GLMB / LMB projection chain and the
/// residual `D(π;LMB) − D(π;δGLMB) − D(δGLMB;LMB)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PythagoreanCheck {
    pub pi_lmb: KldEstimate,
    pub pi_delta_glmb: KldEstimate,
    pub delta_glmb_lmb: KldEstimate,
    pub residual: f64,
    pub error_bound: f64,
}

impl PythagoreanCheck {
    /// Assembles the check from already computed divergences.
    pub fn new(pi_lmb: KldEstimate, pi_delta_glmb: KldEstimate, delta_glmb_lmb: KldEstimate) -> Self {
        let residual = pi_lmb.value - pi_delta_glmb.value - delta_glmb_lmb.value;
        let error_bound =
            pi_lmb.error_bound + pi_delta_glmb.error_bound + delta_glmb_lmb.error_bound;
        PythagoreanCheck {
            pi_lmb,
            pi_delta_glmb,
            delta_glmb_lmb,
            residual,
            error_bound,
        }
    }

    pub fn holds(&self) -> bool {
        self.residual.abs() <= self.error_bound
    }
}

pub fn pythagorean_residual(pi: &LmoDensity, cfg: &KldConfig) -> Result<PythagoreanCheck> {
    let dglmb = approx_delta_glmb(pi)?;
    let lmb = approx_lmb(pi)?;
    let pi_lmb = kld(pi, &lmb, cfg)?;
    let pi_delta_glmb = kld(pi, &dglmb, cfg)?;
    let delta_glmb_lmb = kld(&dglmb.to_lmo()?, &lmb, cfg)?;
    Ok(PythagoreanCheck::new(pi_lmb, pi_delta_glmb, delta_glmb_lmb))
}

/// Set integral `∫ f(X) δX` with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetIntegral {
    pub value: f64,
    pub error_bound: f64,
}

/// Stratified trapezoidal set integral over the axis-aligned boxes
/// reported by [`LabeledDensity::stratum_bounds`].
pub fn set_integral(density: &dyn LabeledDensity, cfg: &KldConfig) -> Result<SetIntegral> {
    cfg.check()?;
    let d = density.state_dim();
    let mut value = CompensatedSum::default();
    let mut error = 0.0;
    for set in enumerate_subsets(density.space(), None)? {
        let Some(bounds) = density.stratum_bounds(set, cfg.span) else {
            continue;
        };
        if set.is_empty() {
            value.add(density.ln_stratum(set, &[]).exp());
            continue;
        }
        let k = set.len() * d;
        if k > cfg.max_grid_dim {
            return Err(Error::Refused {
                stratum: set,
                dim: k,
                max: cfg.max_grid_dim,
            });
        }
        let grid = QuadratureGrid::new(bounds, cfg.points_for(k))?;
        let est = grid.integrate_refined(|x| density.ln_stratum(set, x).exp())?;
        if est.fine.is_nan() {
            return Err(domain(format!("density evaluated to NaN on stratum {set}")));
        }
        value.add(est.fine);
        error += est.refinement_delta() + outside_mass(k, cfg.span) + 64.0 * f64::EPSILON * est.fine.abs();
    }
    Ok(SetIntegral {
        value: value.value(),
        error_bound: error,
    })
}

/// `p^{1−α} q^α e^{−ψ(α)}`, the normalized exponential segment between
/// two labeled densities.
pub struct ExponentialSegment<'a> {
    p: &'a dyn LabeledDensity,
    q: &'a dyn LabeledDensity,
    alpha: f64,
    psi: f64,
    psi_error: f64,
}

impl fmt::Debug for ExponentialSegment<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExponentialSegment")
            .field("alpha", &self.alpha)
            .field("psi", &self.psi)
            .field("psi_error", &self.psi_error)
            .finish()
    }
}

impl ExponentialSegment<'_> {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `ψ(α) = ln ∫ p^{1−α} q^α δX`.
    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Bound on the error of `ψ`, from the relative error of its integral.
    pub fn psi_error(&self) -> f64 {
        self.psi_error
    }

    fn ln_unnormalized(&self, set: LabelSet, x: &[f64]) -> f64 {
        if self.alpha == 0.0 {
            self.p.ln_stratum(set, x)
        } else if self.alpha == 1.0 {
            self.q.ln_stratum(set, x)
        } else {
            let lp = self.p.ln_stratum(set, x);
            let lq = self.q.ln_stratum(set, x);
            if lp == f64::NEG_INFINITY || lq == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                (1.0 - self.alpha) * lp + self.alpha * lq
            }
        }
    }
}

struct Unnormalized<'s, 'a>(&'s ExponentialSegment<'a>);

impl LabeledDensity for Unnormalized<'_, '_> {
    fn space(&self) -> &crate::labelspace::LabelSpace {
        self.0.p.space()
    }

    fn state_dim(&self) -> usize {
        self.0.p.state_dim()
    }

    fn ln_stratum(&self, set: LabelSet, x: &[f64]) -> f64 {
        self.0.ln_unnormalized(set, x)
    }

    fn stratum_bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>> {
        self.0.bounds(set, span)
    }
}

impl ExponentialSegment<'_> {
    fn bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>> {
        let bp = self.p.stratum_bounds(set, span);
        let bq = self.q.stratum_bounds(set, span);
        if self.alpha == 0.0 {
            return bp;
        }
        if self.alpha == 1.0 {
            return bq;
        }
        let (bp, bq) = (bp?, bq?);
        Some(
            bp.iter()
                .zip(&bq)
                .map(|(a, b)| (a.0.min(b.0), a.1.max(b.1)))
                .collect(),
        )
    }
}

impl LabeledDensity for ExponentialSegment<'_> {
    fn space(&self) -> &crate::labelspace::LabelSpace {
        self.p.space()
    }

    fn state_dim(&self) -> usize {
        self.p.state_dim()
    }

    fn ln_stratum(&self, set: LabelSet, x: &[f64]) -> f64 {
        self.ln_unnormalized(set, x) - self.psi
    }

    fn stratum_bounds(&self, set: LabelSet, span: f64) -> Option<Vec<(f64, f64)>> {
        self.bounds(set, span)
    }
}

/// Builds the segment at `alpha` and computes `ψ(α)` by stratified
/// quadrature. Fails with [`Error::DisjointSupport`] when `p^{1−α} q^α`
/// integrates to zero.
pub fn exponential_segment<'a>(
    p: &'a dyn LabeledDensity,
    q: &'a dyn LabeledDensity,
    alpha: f64,
    cfg: &KldConfig,
) -> Result<ExponentialSegment<'a>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(domain(format!("segment parameter {alpha} outside [0, 1]")));
    }
    if p.space() != q.space() || p.state_dim() != q.state_dim() {
        return Err(domain(
            "densities must share the label space and state dimension",
        ));
    }
    let mut seg = ExponentialSegment {
        p,
        q,
        alpha,
        psi: 0.0,
        psi_error: 0.0,
    };
    let z = set_integral(&Unnormalized(&seg), cfg)?;
    if !(z.value > 0.0) {
        return Err(Error::DisjointSupport);
    }
    seg.psi = z.value.ln();
    seg.psi_error = z.error_bound / z.value;
    Ok(seg)
}
