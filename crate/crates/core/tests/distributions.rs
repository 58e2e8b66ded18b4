mod common;

use ambiguity_core::distributions::*;
use ambiguity_core::linalg::dvec;

use common::rng;

#[test]
fn uniform_state_of_charge_mean() {
    let law = CompactDistribution::uniform_box(dvec(&[0.45]), dvec(&[0.65])).unwrap();
    let mut r = rng(1);
    let n = 1_000_000;
    let mean = (0..n).map(|_| law.sample(&mut r)[0]).sum::<f64>() / n as f64;
    assert!((mean - 0.55).abs() < 3e-4, "mean = {mean}");
}

#[test]
fn bimodal_state_of_charge_mode_fraction() {
    let law = CompactDistribution::mixture(vec![
        (0.9, CompactDistribution::uniform_box(dvec(&[0.45]), dvec(&[0.65])).unwrap()),
        (0.1, CompactDistribution::uniform_box(dvec(&[0.84]), dvec(&[0.86])).unwrap()),
    ])
    .unwrap();
    let mut r = rng(2);
    let n = 100_000;
    let low = (0..n).filter(|_| law.sample(&mut r)[0] < 0.7).count() as f64 / n as f64;
    let sigma = (0.9f64 * 0.1 / n as f64).sqrt();
    assert!((low - 0.9).abs() < 5.0 * sigma, "fraction = {low}");
    let (lo, hi) = law.bounding_box();
    assert_eq!((lo[0], hi[0]), (0.45, 0.86));
}

#[test]
fn measurement_mixture_second_moment() {
    let gm = GaussianMixture1D::symmetric_pair(0.01, 0.01).unwrap();
    assert!((gm.lp_norm(2.0).unwrap() - 0.01 * 2f64.sqrt()).abs() < 1e-12);
    let bounds = NoiseNormBounds::from_gaussian_mixture(&gm).unwrap();
    assert_eq!(bounds.m_v, bounds.big_m_v);
    assert!(bounds.c_v >= bounds.big_m_v);
}

#[test]
fn shifted_normal_second_moment() {
    let gm = GaussianMixture1D::normal(0.3, 0.4).unwrap();
    assert!((gm.lp_norm(2.0).unwrap() - 0.5).abs() < 1e-10);
}

/// `E[exp(X²/t²)]` for a standard normal by composite Simpson on `[−40, 40]`.
fn gaussian_orlicz_by_simpson(t: f64) -> f64 {
    let (lo, hi, m) = (-40.0f64, 40.0f64, 200_000);
    let step = (hi - lo) / m as f64;
    let f = |x: f64| (x * x / (t * t) - 0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut total = f(lo) + f(hi);
    for i in 1..m {
        let x = lo + i as f64 * step;
        total += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    total * step / 3.0
}

#[test]
fn standard_normal_psi2_norm_by_root_finding() {
    let (mut lo, mut hi) = (1.5f64, 2.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if gaussian_orlicz_by_simpson(mid) > 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    let target = (8.0f64 / 3.0).sqrt();
    assert!((oracle - target).abs() < 1e-6);
    let gm = GaussianMixture1D::normal(0.0, 1.0).unwrap();
    assert!((gm.psi_norm(2.0).unwrap() - target).abs() < 1e-6);
    assert!(gm.verify_psi_norm_bound(target, 2.0).unwrap());
    assert!(!gm.verify_psi_norm_bound(1.0, 2.0).unwrap());
}

#[test]
fn point_mass_psi_norm() {
    for (mu, p) in [(0.7, 2.0), (-1.5, 1.0), (2.0, 3.0)] {
        let gm = GaussianMixture1D::normal(mu, 0.0).unwrap();
        let expected = f64::abs(mu) / std::f64::consts::LN_2.powf(1.0 / p);
        assert!((gm.psi_norm(p).unwrap() - expected).abs() < 1e-8 * expected);
    }
}

#[test]
fn samples_stay_in_declared_support() {
    let law = CompactDistribution::product(vec![
        CompactDistribution::point_mass(dvec(&[0.1])),
        CompactDistribution::centered_cube(2, 0.3).unwrap(),
    ])
    .unwrap()
    .with_support(dvec(&[0.0, -0.5, -0.5]), dvec(&[0.2, 0.5, 0.5]))
    .unwrap();
    assert_eq!(law.dim(), 3);
    let mut r = rng(3);
    for _ in 0..1000 {
        let x = law.sample(&mut r);
        assert_eq!(x[0], 0.1);
        assert!(x[1].abs() <= 0.3 && x[2].abs() <= 0.3);
    }
    assert!((law.sup_radius() - 0.5).abs() < 1e-12);
}

#[test]
fn mixture_samples_follow_component_weights() {
    let gm = GaussianMixture1D::symmetric_pair(5.0, 0.1).unwrap();
    let mut r = rng(4);
    let n = 20_000;
    let positive = (0..n).filter(|_| gm.sample(&mut r) > 0.0).count() as f64 / n as f64;
    assert!((positive - 0.5).abs() < 5.0 * (0.25 / n as f64).sqrt());
}
