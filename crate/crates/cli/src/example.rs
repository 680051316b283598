use lmo_core::examples::three_label_draft;

use crate::spec::DensitySpec;

pub const EXAMPLE_NAMES: &[&str] = &["paper"];

/// Bundled example by name.
pub fn example(name: &str) -> Option<DensitySpec> {
    match name {
        "paper" => Some(paper_spec()),
        _ => None,
    }
}

/// The three-label example with its reference parameters, including the
/// indefinite three-object covariance; `fix_pd` is on.
pub fn paper_spec() -> DensitySpec {
    DensitySpec::from(&three_label_draft())
}
