mod common;

use common::*;
use dmfc_core::geometry::{Disp3, RigidTransform};
use dmfc_core::model::{
    permute_poses, read_model, write_model, FeatureClass, PointObservation, Rank, Weighting,
};
use dmfc_core::pose::{edr_exp, edr_log};
use dmfc_core::{Coefficients, DmfcGpm, PoseCoding};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn angles() -> impl Strategy<Value = [f64; 3]> {
    [-3.0..3.0f64, -1.5..1.5f64, -3.0..3.0f64]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn edr_roundtrip(a in angles(), t in [-20.0..20.0f64, -20.0..20.0f64, -20.0..20.0f64]) {
        let reference = toy_reference().points();
        // log takes the alignment h; exp returns the pose h⁻¹
        let h = RigidTransform::from_euler_xyz(a, Disp3::from(t));
        let back = edr_exp(&edr_log(&h, &reference), &reference).unwrap();
        let (dr, dt) = back.distance(&h.inverse());
        prop_assert!(dr <= 1e-9 && dt <= 1e-9, "{dr} {dt}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_equals_sample_covariance(seed in 0u64..1000, n in 2usize..9, coding in prop_oneof![
        Just(PoseCoding::Edr), Just(PoseCoding::Sr), Just(PoseCoding::Pdm)
    ]) {
        let ts = random_set(seed, n, coding);
        let m = DmfcGpm::build(&ts, uneven_weights(), Rank::Full).unwrap();
        let b = m.scaled_basis();
        let err = (&b * b.transpose() - sample_covariance(&ts)).amax();
        prop_assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn projection_roundtrip(seed in 0u64..1000, theta in proptest::collection::vec(-3.0..3.0f64, 5)) {
        let ts = random_set(seed, 6, PoseCoding::Edr);
        let m = DmfcGpm::build(&ts, uneven_weights(), Rank::Full).unwrap();
        let coeffs = Coefficients(theta);
        let back = m.project(&m.field(&coeffs).unwrap()).unwrap();
        for (a, b) in back.0.iter().zip(&coeffs.0) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn posterior_matches_dense_regression(seed in 0u64..1000, s2 in 0.01..2.0f64, pts in proptest::collection::btree_set(0usize..30, 1..5)) {
        let ts = random_set(seed, 8, PoseCoding::Edr);
        let m = DmfcGpm::build(&ts, uneven_weights(), Rank::Full).unwrap();
        let obs: Vec<_> = pts
            .iter()
            .map(|&p| PointObservation {
                point: p,
                shape: Some(Disp3::new(0.1 * p as f64, -0.2, 0.3)),
                pose: None,
                intensity: Some(0.5),
            })
            .collect();
        let post = m.posterior(&obs, s2).unwrap();
        let (rows, y) = m.observation_rows(&obs).unwrap();
        let (mean, cov) = dense_posterior(&m, &rows, &y, s2);
        prop_assert!((&post.mean - mean).amax() <= 1e-8);
        let b = post.scaled_basis();
        prop_assert!((&b * b.transpose() - cov).amax() <= 1e-8);
        let prior = m.entry_variances();
        for (a, p) in post.entry_variances().iter().zip(prior.iter()) {
            prop_assert!(*a <= p + 1e-10);
        }
    }

    #[test]
    fn container_is_bit_exact(seed in 0u64..1000, coding in prop_oneof![
        Just(PoseCoding::Edr), Just(PoseCoding::Sr), Just(PoseCoding::Pdm)
    ]) {
        let ts = random_set(seed, 4, coding);
        let m = DmfcGpm::build(&ts, Weighting::Balanced, Rank::Full).unwrap();
        let bytes = write_model(&m).unwrap();
        let back = read_model(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(write_model(&back).unwrap(), bytes);
    }

    #[test]
    fn permutation_counts(seed in 0u64..1000, n in 1usize..7) {
        let ts = random_set(seed, n, PoseCoding::Edr);
        prop_assert_eq!(permute_poses(&ts, None).len(), n * n);
        let kept = permute_poses(&ts, Some(0.0));
        prop_assert_eq!(&kept.fields, &ts.fields);
    }
}

#[test]
fn marginal_moments_match_full_model_samples() {
    let ts = random_set(5, 10, PoseCoding::Edr);
    let m = DmfcGpm::build(&ts, uneven_weights(), Rank::Full).unwrap();
    let subset: Vec<usize> = (12..30).collect();
    let marg = m.marginalize_domain(&subset).unwrap();
    let rows: Vec<usize> = subset
        .iter()
        .flat_map(|&p| (3 * p..3 * p + 3).chain(90 + 3 * p..90 + 3 * p + 3).chain([180 + p]))
        .collect();
    let mrows: Vec<usize> = (0..subset.len())
        .flat_map(|q| (3 * q..3 * q + 3).chain(54 + 3 * q..54 + 3 * q + 3).chain([108 + q]))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 4000;
    let mut s1 = vec![0.0; rows.len()];
    let mut s2 = vec![0.0; rows.len()];
    for _ in 0..n {
        let v = m.field_vector(&m.random_coefficients(&mut rng)).unwrap();
        for (k, &r) in rows.iter().enumerate() {
            s1[k] += v[r];
            s2[k] += v[r] * v[r];
        }
    }
    let var = marg.entry_variances();
    let mut outside = 0;
    for (k, &q) in mrows.iter().enumerate() {
        let mean = s1[k] / n as f64;
        let se = (var[q] / n as f64).sqrt();
        if (mean - marg.mean[q]).abs() > 3.0 * se {
            outside += 1;
        }
        let emp = s2[k] / n as f64 - mean * mean;
        assert!((emp - var[q]).abs() <= 3.0 * var[q] * (2.0 / n as f64).sqrt() + 1e-12);
    }
    // 3 SE covers 99.7%; allow for a single chance excursion.
    assert!(outside <= 1, "{outside} entries outside 3 SE");
}

#[test]
fn class_marginal_keeps_class_covariance() {
    let ts = random_set(6, 9, PoseCoding::Edr);
    let m = DmfcGpm::build(&ts, uneven_weights(), Rank::Full).unwrap();
    let s = m.marginalize_class(&[FeatureClass::Shape]).unwrap();
    let full = m.scaled_basis();
    let part = s.scaled_basis();
    let k = &full * full.transpose();
    let ks = &part * part.transpose();
    let r = 0..90;
    let err = (k.view((0, 0), (90, 90)) - ks.view((0, 0), (90, 90))).amax();
    assert!(err < 1e-8);
    assert!(ks.view((90, 90), (120, 120)).amax() < 1e-12);
    assert_eq!(s.mean.rows(r.end, 120).amax(), 0.0);
    let g = s.basis_gram();
    assert!((g - DMatrix::identity(s.rank(), s.rank())).amax() < 1e-8);
}
