mod common;

use proptest::prelude::*;
use quantile_energy::gramian::{
    continuous_gramians, discrete_gramians, van_loan_gramian, zoh_discretize,
};
use quantile_energy::linalg::{
    expm, norm_cdf, pinv, rel_frobenius, spectral_norm, thin_svd, Matrix, Vector,
};
use quantile_energy::model::fixtures;
use quantile_energy::translator::{
    achievable_p1, translate, translate_parts, EventSpec, ShiftDirection,
};

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_inverse(seed in any::<u64>(), n in 1usize..7, scale in 0.0f64..5.0) {
        let mut rng = common::rng(seed);
        let g = common::gaussian(&mut rng, n, n);
        let norm = spectral_norm(&g);
        let x = if norm > 0.0 { g * (scale / norm) } else { g };
        let prod = expm(&x).unwrap() * expm(&-&x).unwrap();
        prop_assert!(max_abs(&(prod - Matrix::identity(n, n))) <= 1e-10);
    }

    #[test]
    fn expm_semigroup(seed in any::<u64>(), n in 1usize..7, s in 0.0f64..1.5, t in 0.0f64..1.5) {
        let mut rng = common::rng(seed);
        let a = common::gaussian(&mut rng, n, n);
        let a = &a / spectral_norm(&a).max(1.0);
        let lhs = expm(&(&a * (s + t))).unwrap();
        let rhs = expm(&(&a * s)).unwrap() * expm(&(&a * t)).unwrap();
        prop_assert!(rel_frobenius(&rhs, &lhs) <= 1e-10);
    }

    #[test]
    fn pinv_penrose_conditions(seed in any::<u64>(), n in 2usize..9, c in 1usize..9, rank in 1usize..8) {
        let mut rng = common::rng(seed);
        let rank = rank.min(n.min(c) - 1).max(1);
        let x = common::gaussian(&mut rng, n, rank) * common::gaussian(&mut rng, rank, c);
        let p = pinv(&x, None).unwrap();
        let scale = max_abs(&x).max(1.0) * max_abs(&p).max(1.0);
        prop_assert!(max_abs(&(&x * &p * &x - &x)) <= 1e-9 * scale);
        prop_assert!(max_abs(&(&p * &x * &p - &p)) <= 1e-9 * scale);
        let xp = &x * &p;
        let px = &p * &x;
        prop_assert!(max_abs(&(&xp - xp.transpose())) <= 1e-9 * scale);
        prop_assert!(max_abs(&(&px - px.transpose())) <= 1e-9 * scale);
    }

    #[test]
    fn gramian_additivity(seed in any::<u64>(), n in 1usize..6, s in 0.1f64..1.0, t in 0.1f64..1.0) {
        let mut rng = common::rng(seed);
        let m = common::random_stable_model(&mut rng, n);
        let q = m.sigma().as_matrix();
        let whole = van_loan_gramian(m.a(), q, s + t).unwrap();
        let phi = expm(&(m.a() * t)).unwrap();
        let split = &phi * van_loan_gramian(m.a(), q, s).unwrap() * phi.transpose()
            + van_loan_gramian(m.a(), q, t).unwrap();
        prop_assert!(rel_frobenius(&split, &whole) <= 1e-9);
    }

    #[test]
    fn noise_scaling(seed in any::<u64>(), n in 1usize..6, c in 0.01f64..100.0) {
        let mut rng = common::rng(seed);
        let m = common::random_stable_model(&mut rng, n);
        let scaled = m.with_sigma(m.sigma().as_matrix() * c).unwrap();
        let (g, gs) = (continuous_gramians(&m).unwrap(), continuous_gramians(&scaled).unwrap());
        prop_assert!(rel_frobenius(gs.v.as_matrix(), &(g.v.as_matrix() * c)) <= 1e-10);
        prop_assert!(rel_frobenius(&gs.w, &(&g.w * c)) <= 1e-10);
    }

    #[test]
    fn energy_symmetry_and_monotonicity(p0 in 0.01f64..0.99, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let model = fixtures::drone();
        let g = continuous_gramians(&model).unwrap();
        let ev = EventSpec::halfspace(fixtures::drone_direction(), 0.0).unwrap();
        let fwd = translate(&model, &g, &ev, p0, a).unwrap();
        let back = translate(&model, &g, &ev, a, p0).unwrap();
        prop_assert_eq!(fwd.e_min, back.e_min);
        let other = translate(&model, &g, &ev, p0, b).unwrap();
        if fwd.gap.abs() < other.gap.abs() {
            prop_assert!(fwd.e_min < other.e_min);
        }
    }

    #[test]
    fn achievable_round_trip(seed in any::<u64>(), n in 1usize..5, p0 in 0.05f64..0.95, e in 0.0f64..3.0, raise in any::<bool>()) {
        let mut rng = common::rng(seed);
        let model = common::random_stable_model(&mut rng, n);
        let w = common::unit_vector(&mut rng, n);
        let g = continuous_gramians(&model).unwrap();
        let (v, ww) = (g.noise_variance(&w), g.reach(&w));
        let r2 = ww / v;
        let dir = if raise { ShiftDirection::Raise } else { ShiftDirection::Lower };
        let p1 = achievable_p1(p0, r2, e, dir).unwrap();
        prop_assume!(p1 > 1e-12 && p1 < 1.0 - 1e-12);
        let back = translate_parts(v, ww, 0.0, p0, p1).unwrap();
        prop_assert!((back.e_min - e).abs() <= 1e-9 * e.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn svd_reconstructs_low_rank(seed in any::<u64>(), n in 1usize..9, c in 1usize..9, rank in 1usize..9) {
        let mut rng = common::rng(seed);
        let x = common::gaussian(&mut rng, n, rank) * common::gaussian(&mut rng, rank, c);
        let (u, s, v) = thin_svd(&x).unwrap();
        let rec = &u * Matrix::from_diagonal(&s) * v.transpose();
        prop_assert!(max_abs(&(rec - &x)) <= 1e-12 * max_abs(&x).max(1.0));
    }
}

/// Exactly rank-3 6×7 input on which nalgebra's SVD factors fail to reconstruct.
#[test]
fn pinv_rank_deficient_regression() {
    let mut rng = common::rng(17_663_624_101_707_585_837);
    let x = common::gaussian(&mut rng, 6, 3) * common::gaussian(&mut rng, 3, 7);
    let p = pinv(&x, None).unwrap();
    assert!(max_abs(&(&x * &p * &x - &x)) <= 1e-12);
    assert!(max_abs(&(&p * &x * &p - &p)) <= 1e-12);
}

#[test]
fn unreachable_direction_has_zero_reach() {
    let g = continuous_gramians(&common::unreachable_model()).unwrap();
    let w = Vector::from_vec(vec![0.0, 1.0]);
    assert!(g.reach(&w) <= 1e-14);
}

#[test]
fn extremes_cost_more() {
    let model = fixtures::drone();
    let g = continuous_gramians(&model).unwrap();
    let ev = EventSpec::halfspace(fixtures::drone_direction(), 0.0).unwrap();
    let near = translate(&model, &g, &ev, 0.7, 0.999).unwrap();
    let far = translate(&model, &g, &ev, 0.7, 1.0 - 1e-12).unwrap();
    assert!(far.e_min > near.e_min);
}

#[test]
fn dyadic_refinement_converges_monotonically() {
    let w1 = Vector::from_vec(vec![1.0]);
    for (model, w) in [(fixtures::scalar(), w1), (fixtures::drone(), fixtures::drone_direction())] {
        let g = continuous_gramians(&model).unwrap();
        let target = g.reach(&w) / g.noise_variance(&w);
        let mut prev = f64::INFINITY;
        for k in 1..=14 {
            let dm = zoh_discretize(&model, model.horizon() / (1u64 << k) as f64).unwrap();
            let dg = discrete_gramians(&dm).unwrap();
            let err = (dg.reach(&w) / dg.noise_variance(&w) - target).abs();
            assert!(err <= prev + 1e-12, "k={k}: {err} after {prev}");
            prev = err;
        }
        assert!(prev <= 1e-6, "{prev}");
    }
}

#[test]
fn random_models_cross_check_discrete_limit() {
    let mut rng = common::rng(99);
    for n in 1..=4 {
        let model = common::random_stable_model(&mut rng, n);
        let w = common::unit_vector(&mut rng, n);
        let g = continuous_gramians(&model).unwrap();
        let dm = zoh_discretize(&model, model.horizon() / 4096.0).unwrap();
        let dg = discrete_gramians(&dm).unwrap();
        let (r, rd) = (g.reach(&w) / g.noise_variance(&w), dg.reach(&w) / dg.noise_variance(&w));
        assert!((r - rd).abs() <= 1e-3 * r, "n={n}: {r} vs {rd}");
    }
}

#[test]
fn scalar_probability_after_matched_shift() {
    let model = fixtures::scalar();
    let g = continuous_gramians(&model).unwrap();
    let ev = EventSpec::halfspace(Vector::from_vec(vec![1.0]), 0.0).unwrap();
    let r = translate(&model, &g, &ev, 0.5, norm_cdf(1.0)).unwrap();
    // Shifting the mean by δ from 0 with unit variance gives Φ(δ).
    assert!((norm_cdf(r.mean_shift()) - norm_cdf(1.0)).abs() < 1e-15);
}
