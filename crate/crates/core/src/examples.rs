//! The bundled three-label example on `𝕏 = ℝ`.
//!
//! Its three-object covariance is indefinite as given (leading 2×2 minor
//! `1.2·2.2 − 2² = −1.36`), so [`three_label_density`] builds from the
//! eigenvalue-clamped repair.

use crate::gaussian::DEFAULT_PD_FLOOR_RATIO;
use crate::labelspace::{Label, LabelSpace};
use crate::lmo::{DensityDraft, Hypothesis, LmoDensity};

fn labels(ix: &[usize]) -> Vec<Label> {
    ix.iter().map(|&i| Label::new(i).expect("valid index")).collect()
}

fn hyp(ix: &[usize], weight: f64, mean: &[f64], cov: &[f64]) -> Hypothesis {
    Hypothesis {
        labels: labels(ix),
        weight,
        mean: mean.to_vec(),
        cov: cov.to_vec(),
    }
}

/// Reference parameters verbatim, including the indefinite `{1,2,3}`
/// covariance.
pub fn three_label_draft() -> DensityDraft {
    DensityDraft {
        space: LabelSpace::with_size(3).expect("three labels"),
        state_dim: 1,
        hypotheses: vec![
            hyp(&[], 0.01, &[], &[]),
            hyp(&[1], 0.01, &[1.0], &[1.0]),
            hyp(&[2], 0.01, &[2.0], &[2.0]),
            hyp(&[3], 0.09, &[8.0], &[3.0]),
            hyp(&[1, 2], 0.07, &[1.1, 2.1], &[1.2, 1.0, 1.0, 2.2]),
            hyp(&[1, 3], 0.09, &[1.1, 8.1], &[1.1, 1.0, 1.0, 1.2]),
            hyp(&[2, 3], 0.09, &[2.2, 8.1], &[2.1, 1.0, 1.0, 1.2]),
            hyp(
                &[1, 2, 3],
                0.63,
                &[1.2, 2.2, 8.2],
                &[1.2, 2.0, 1.0, 2.0, 2.2, 1.0, 1.0, 1.0, 1.2],
            ),
        ],
    }
}

/// The example after the default positive-definite repair.
pub fn three_label_density() -> LmoDensity {
    let mut draft = three_label_draft();
    draft
        .repair_pd(DEFAULT_PD_FLOOR_RATIO)
        .expect("repair succeeds");
    draft.build().expect("repaired example is valid")
}
