//! Approximations of an LMO density that keep selected moments: δ-GLMB
//! (cardinality and labeled PHD), LMB (labeled PHD), labeled i.i.d. cluster
//! (cardinality and unlabeled PHD) and labeled Poisson (unlabeled PHD).

mod cost;
mod delta_glmb;
mod iid;
mod lmb;

pub use cost::{integral_cost, CostProfile, DensityKind};
pub use delta_glmb::{approx_delta_glmb, DeltaGlmbDensity, DeltaGlmbHypothesis};
pub use iid::{approx_liid, approx_lp, poisson_pmf, LiidDensity, LpDensity};
pub use lmb::{approx_lmb, LmbDensity, Track};
