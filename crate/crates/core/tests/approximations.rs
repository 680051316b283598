use std::collections::BTreeMap;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lmo_core::approx::{
    approx_delta_glmb, approx_liid, approx_lmb, approx_lp, integral_cost, DensityKind,
    LmbDensity, Track,
};
use lmo_core::divergence::{kld, set_integral, KldConfig};
use lmo_core::examples::three_label_density;
use lmo_core::gaussian::{GaussianJoint, GaussianMixture};
use lmo_core::labelspace::mean_cardinality;
use lmo_core::lmo::{Factorized, LabeledDensity};
use lmo_core::{Label, LabelSet, LabelSpace, LabeledState, LmoDensity, WeightTable};

fn l(i: usize) -> Label {
    Label::new(i).unwrap()
}

fn assert_probs(got: &[f64], want: &[f64], tol: f64) {
    assert!(got.len() >= want.len(), "{got:?}");
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= tol, "{got:?} vs {want:?}");
    }
}

#[test]
fn cardinality_table() {
    let pi = three_label_density();
    let rho = [0.01, 0.11, 0.25, 0.63];
    assert_probs(pi.cardinality().probs(), &rho, 1e-12);
    assert_probs(approx_delta_glmb(&pi).unwrap().cardinality().probs(), &rho, 1e-12);
    assert_probs(approx_liid(&pi).unwrap().cardinality().probs(), &rho, 1e-12);
    let lmb = approx_lmb(&pi).unwrap();
    assert_probs(&lmb.existence(), &[0.8, 0.8, 0.9], 1e-12);
    assert_probs(lmb.cardinality().probs(), &[0.004, 0.068, 0.352, 0.576], 1e-12);
    let lp = approx_lp(&pi).unwrap();
    assert_probs(lp.cardinality().probs(), &[0.0821, 0.2052, 0.2565, 0.2138], 5e-5);
}

#[test]
fn first_moments_match() {
    let pi = three_label_density();
    assert_relative_eq!(pi.mean_cardinality(), 2.5, epsilon = 1e-12);
    let lmb = approx_lmb(&pi).unwrap();
    assert_relative_eq!(lmb.existence().iter().sum::<f64>(), 2.5, epsilon = 1e-12);
    assert_relative_eq!(mean_cardinality(&lmb.cardinality()), 2.5, epsilon = 1e-12);
    assert_relative_eq!(approx_lp(&pi).unwrap().rate(), 2.5, epsilon = 1e-12);
    assert_relative_eq!(approx_liid(&pi).unwrap().vbar(), 2.5, epsilon = 1e-12);
}

#[test]
fn liid_alpha_is_tail_sum() {
    let pi = three_label_density();
    let liid = approx_liid(&pi).unwrap();
    assert_relative_eq!(liid.alpha(l(1)).unwrap(), 0.99, epsilon = 1e-12);
    assert_relative_eq!(liid.alpha(l(2)).unwrap(), 0.88, epsilon = 1e-12);
    assert_relative_eq!(liid.alpha(l(3)).unwrap(), 0.63, epsilon = 1e-12);
    let total: f64 = pi.space().labels().map(|x| liid.alpha(x).unwrap()).sum();
    assert_relative_eq!(total, pi.mean_cardinality(), epsilon = 1e-12);
    assert!(liid.alpha(l(4)).is_err());
}

#[test]
fn lp_alpha_on_finite_space() {
    let pi = three_label_density();
    let lp = approx_lp(&pi).unwrap();
    let rho = lp.cardinality();
    assert_relative_eq!(lp.alpha(l(1)).unwrap(), 1.0 - rho.get(0), epsilon = 1e-12);
    assert_relative_eq!(
        lp.alpha(l(3)).unwrap(),
        1.0 - rho.get(0) - rho.get(1) - rho.get(2),
        epsilon = 1e-12
    );
    // mass of the labeled Poisson density on 𝕃 = {1,2,3}
    let mass: f64 = (0..=3).map(|n| rho.get(n)).sum();
    assert_relative_eq!(lp.label_space_mass(), mass, epsilon = 1e-12);
    assert_relative_eq!(mass, 0.0821 + 0.2052 + 0.2565 + 0.2138, epsilon = 1e-4);
}

#[test]
fn lp_and_liid_share_spatial_density() {
    let pi = three_label_density();
    let lp = approx_lp(&pi).unwrap();
    let liid = approx_liid(&pi).unwrap();
    assert_eq!(lp.spatial(), liid.spatial());
    assert_relative_eq!(lp.spatial().integral(), 1.0, epsilon = 1e-12);
}

#[test]
fn degenerate_liid_for_empty_point_mass() {
    let space = LabelSpace::with_size(3).unwrap();
    let weights = WeightTable::new(&space, [(LabelSet::EMPTY, 1.0)]).unwrap();
    let pi = LmoDensity::new(space, 1, weights, BTreeMap::new()).unwrap();
    let liid = approx_liid(&pi).unwrap();
    assert!(liid.is_degenerate());
    assert_eq!(liid.rho().probs(), &[1.0]);
    assert!(approx_lp(&pi).is_err());
}

#[test]
fn delta_glmb_is_idempotent_on_product_form() {
    let pi = three_label_density();
    let once = approx_delta_glmb(&pi).unwrap().to_lmo().unwrap();
    let twice = approx_delta_glmb(&once).unwrap().to_lmo().unwrap();
    assert_eq!(once, twice);
    let est = kld(&once, &twice, &KldConfig::default()).unwrap();
    for s in &est.per_stratum {
        assert!(s.value.abs() <= 1e-10, "{s:?}");
    }
}

#[test]
fn lmb_round_trip() {
    let space = LabelSpace::with_size(3).unwrap();
    let tracks = vec![
        Track {
            label: l(1),
            existence: 0.3,
            spatial: GaussianMixture::new(
                vec![1.0],
                vec![GaussianJoint::scalar(l(1), -1.0, 0.5).unwrap()],
            )
            .unwrap(),
        },
        Track {
            label: l(2),
            existence: 0.95,
            spatial: GaussianMixture::new(
                vec![1.0],
                vec![GaussianJoint::scalar(l(2), 4.0, 2.0).unwrap()],
            )
            .unwrap(),
        },
        Track {
            label: l(3),
            existence: 0.6,
            spatial: GaussianMixture::new(
                vec![1.0],
                vec![GaussianJoint::scalar(l(3), 0.0, 1.5).unwrap()],
            )
            .unwrap(),
        },
    ];
    let lmb = LmbDensity::new(space, 1, tracks).unwrap();
    let back = approx_lmb(&lmb.to_lmo().unwrap()).unwrap();
    for (a, b) in lmb.tracks().iter().zip(back.tracks()) {
        assert_relative_eq!(a.existence, b.existence, epsilon = 1e-10);
        let (ma, mb) = (a.spatial.mean().unwrap(), b.spatial.mean().unwrap());
        let (ca, cb) = (a.spatial.covariance().unwrap(), b.spatial.covariance().unwrap());
        assert_relative_eq!(ma[0], mb[0], epsilon = 1e-10);
        assert_relative_eq!(ca[(0, 0)], cb[(0, 0)], epsilon = 1e-10);
        for x in [-3.0, 0.0, 2.5, 7.0] {
            assert_relative_eq!(
                a.spatial.evaluate(&[x]).unwrap(),
                b.spatial.evaluate(&[x]).unwrap(),
                epsilon = 1e-10
            );
        }
    }
}

#[test]
fn lmb_extreme_existence() {
    let space = LabelSpace::with_size(1).unwrap();
    let g = GaussianMixture::new(vec![1.0], vec![GaussianJoint::scalar(l(1), 2.0, 1.0).unwrap()])
        .unwrap();
    let sure = LmbDensity::new(
        space.clone(),
        1,
        vec![Track {
            label: l(1),
            existence: 1.0,
            spatial: g.clone(),
        }],
    )
    .unwrap();
    assert_eq!(sure.cardinality().probs(), &[0.0, 1.0]);
    assert_eq!(sure.labeled_phd(l(1)).unwrap(), g);
    let absent = LmbDensity::new(
        space,
        1,
        vec![Track {
            label: l(1),
            existence: 0.0,
            spatial: GaussianMixture::empty(),
        }],
    )
    .unwrap();
    assert_eq!(absent.labeled_phd(l(1)).unwrap().integral(), 0.0);
    assert!(absent.labeled_phd(l(2)).is_err());
}

#[test]
fn lmb_rejects_bad_tracks() {
    let space = LabelSpace::with_size(1).unwrap();
    let half = GaussianMixture::new(vec![0.5], vec![GaussianJoint::scalar(l(1), 0.0, 1.0).unwrap()])
        .unwrap();
    let bad = |existence: f64, spatial: GaussianMixture| {
        LmbDensity::new(space.clone(), 1, vec![Track { label: l(1), existence, spatial }])
    };
    assert!(bad(0.5, half).is_err());
    assert!(bad(1.5, GaussianMixture::empty()).is_err());
    assert!(LmbDensity::new(space.clone(), 1, vec![]).is_err());
}

#[test]
fn lmb_labeled_phd_mass_is_existence() {
    let pi = three_label_density();
    let lmb = approx_lmb(&pi).unwrap();
    assert_relative_eq!(lmb.labeled_phd(l(2)).unwrap().integral(), 0.8, epsilon = 1e-12);
}

#[test]
fn evaluators() {
    let pi = three_label_density();
    let dglmb = approx_delta_glmb(&pi).unwrap();
    assert_relative_eq!(dglmb.density_at(&LabeledState::empty()).unwrap(), 0.01, epsilon = 1e-15);
    let lp = approx_lp(&pi).unwrap();
    let liid = approx_liid(&pi).unwrap();
    let off_prefix = LabeledState::new([(vec![2.0], l(2))]).unwrap();
    assert_eq!(lp.density_at(&off_prefix).unwrap(), 0.0);
    assert_eq!(liid.density_at(&off_prefix).unwrap(), 0.0);
    let on_prefix = LabeledState::new([(vec![2.0], l(1))]).unwrap();
    let v = lp.spatial().evaluate(&[2.0]).unwrap();
    assert_relative_eq!(
        lp.density_at(&on_prefix).unwrap(),
        lp.cardinality().get(1) * v,
        epsilon = 1e-15
    );
    assert_relative_eq!(liid.density_at(&on_prefix).unwrap(), 0.11 * v, epsilon = 1e-15);

    let lmb = approx_lmb(&pi).unwrap();
    let x = LabeledState::new([(vec![1.5], l(1)), (vec![7.0], l(3))]).unwrap();
    let want = 0.8 * 0.2 * 0.9
        * lmb.tracks()[0].spatial.evaluate(&[1.5]).unwrap()
        * lmb.tracks()[2].spatial.evaluate(&[7.0]).unwrap();
    assert_relative_eq!(lmb.density_at(&x).unwrap(), want, max_relative = 1e-12);

    let outside = LabeledState::new([(vec![0.0], l(4))]).unwrap();
    assert!(lmb.density_at(&outside).is_err());
    assert!(lp.density_at(&outside).is_err());
    assert!(dglmb.density_at(&outside).is_err());
}

#[test]
fn lmb_evaluator_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pi = lmo_core::random::random_density(&mut rng, 2, 1).unwrap();
    let lmb = approx_lmb(&pi).unwrap();
    let total = set_integral(&lmb, &KldConfig::default()).unwrap();
    assert!((total.value - 1.0).abs() <= 1e-4, "{total:?}");
}

#[test]
fn factorized_weights() {
    let pi = three_label_density();
    let lmb = approx_lmb(&pi).unwrap();
    let total: f64 = lmo_core::labelspace::enumerate_subsets(pi.space(), None)
        .unwrap()
        .into_iter()
        .map(|s| lmb.set_weight(s))
        .sum();
    assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    let lp = approx_lp(&pi).unwrap();
    assert_eq!(lp.set_weight(LabelSet::singleton(l(3))), 0.0);
    assert!(lp.set_weight(LabelSet::singleton(l(1))) > 0.0);
}

#[test]
fn phd_preservation() {
    let pi = three_label_density();
    let dglmb = approx_delta_glmb(&pi).unwrap();
    let lmb = approx_lmb(&pi).unwrap();
    let lp = approx_lp(&pi).unwrap();
    let liid = approx_liid(&pi).unwrap();
    let v = pi.unlabeled_phd().unwrap();
    let v_lp = lp.unlabeled_phd().unwrap();
    let v_liid = liid.unlabeled_phd().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = [rng.random_range(-10.0..26.0)];
        for label in pi.space().labels() {
            let want = pi.labeled_phd(label).unwrap().evaluate(&x).unwrap();
            let a = dglmb.labeled_phd(label).unwrap().evaluate(&x).unwrap();
            let b = lmb.labeled_phd(label).unwrap().evaluate(&x).unwrap();
            assert!((a - want).abs() <= 1e-10);
            assert!((b - want).abs() <= 1e-10);
        }
        let want = v.evaluate(&x).unwrap();
        assert!((v_lp.evaluate(&x).unwrap() - want).abs() <= 1e-10);
        assert!((v_liid.evaluate(&x).unwrap() - want).abs() <= 1e-10);
    }
}

#[test]
fn cost_profiles() {
    let c = |k| integral_cost(k, 3).unwrap().counts;
    assert_eq!(c(DensityKind::Lmo), vec![3, 3, 1]);
    assert_eq!(c(DensityKind::DeltaGlmb), vec![12, 0, 0]);
    assert_eq!(c(DensityKind::Lmb), vec![3, 0, 0]);
    assert_eq!(c(DensityKind::Lp), vec![1, 0, 0]);
    assert_eq!(c(DensityKind::Liid), vec![1, 0, 0]);
}
