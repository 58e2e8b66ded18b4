mod common;

use ambiguity_core::dispatch::BatteryScenario;
use ambiguity_core::distributions::{CompactDistribution, GaussianMixture1D, NoiseNormBounds};
use ambiguity_core::linalg::spectral_norm;
use ambiguity_core::montecarlo::*;
use ambiguity_core::radius::{concentration_tail_bound, ConfidenceSplit, NominalConstants};
use ambiguity_core::system::TransitionProducts;
use nalgebra::DVector;

use common::toy_spec;

fn noiseless(mut spec: ScenarioSpec) -> ScenarioSpec {
    let silent = GaussianMixture1D::normal(0.0, 0.0).unwrap();
    spec.noise_bounds = NoiseNormBounds::from_gaussian_mixture(&silent).unwrap();
    spec.measurement_noise = vec![silent];
    spec
}

#[test]
fn deterministic_dynamics_bound_the_center_distance() {
    let mut spec = noiseless(toy_spec(15, 8, 3));
    spec.process_noise = None;
    spec.reference_size = 200;
    let prepared = prepare(&spec).unwrap();
    let products = TransitionProducts::new(&spec.sys, &spec.obs, spec.ell()).unwrap();
    let psi_norm = spectral_norm(products.psi(spec.ell(), 0));
    for t in 0..spec.trials {
        let trial = run_trial(&prepared, t).unwrap();
        let max_init = trial
            .empirical
            .atoms()
            .iter()
            .zip(trial.estimator_empirical.atoms())
            .map(|(x, xh)| (x - xh).norm())
            .fold(0.0, f64::max);
        assert!(trial.w_emp_est <= max_init + 1e-12);
        assert!(max_init <= psi_norm * 2f64.sqrt() + 1e-12);
        assert!(trial.w_emp_est <= trial.samplewise_bound + 1e-12);
    }
}

#[test]
fn silent_measurements_leave_the_deterministic_term() {
    let spec = noiseless(toy_spec(10, 10, 4));
    let prepared = prepare(&spec).unwrap();
    let scale = 2f64.sqrt();
    for t in 0..spec.trials {
        let trial = run_trial(&prepared, t).unwrap();
        assert!((trial.samplewise_bound - scale * prepared.breakdown.frak.big_m_w).abs() < 1e-12);
        assert!(trial.w_emp_est <= trial.samplewise_bound);
    }
}

#[test]
fn zero_uncertainty_gives_zero_distances() {
    let mut spec = noiseless(toy_spec(5, 3, 5));
    spec.initial = CompactDistribution::point_mass(DVector::zeros(2));
    spec.process_noise = None;
    spec.reference_size = 50;
    let report = coverage_experiment(&spec).unwrap();
    for t in &report.trials {
        assert_eq!(t.w_emp_est, 0.0);
        assert_eq!(t.w_est_ref, 0.0);
        assert!(t.covered);
    }
}

#[test]
fn single_sample_runs() {
    let mut spec = toy_spec(1, 4, 6);
    spec.reference_size = 500;
    let report = coverage_experiment(&spec).unwrap();
    assert_eq!(report.trials.len(), 4);
    assert!(report.trials.iter().all(|t| t.empirical.len() == 1 && t.w_est_ref.is_finite()));
}

#[test]
fn radius_overrides_move_coverage_to_the_extremes() {
    let mut spec = toy_spec(20, 30, 7);
    spec.reference_size = 2000;
    spec.psi_override = Some(0.0);
    assert_eq!(coverage_experiment(&spec).unwrap().coverage, 0.0);
    spec.psi_override = Some(1e6);
    assert_eq!(coverage_experiment(&spec).unwrap().coverage, 1.0);
}

#[test]
fn toy_coverage_is_high() {
    let mut spec = toy_spec(20, 50, 8);
    spec.reference_size = 2000;
    let report = coverage_experiment(&spec).unwrap();
    assert!(report.coverage >= report.binomial_floor, "coverage {}", report.coverage);
    assert!(report.psi > 0.0 && report.psi.is_finite());
}

#[test]
fn identical_seeds_reproduce_trials() {
    let mut spec = toy_spec(8, 5, 9);
    spec.reference_size = 300;
    let a = coverage_experiment(&spec).unwrap();
    let b = coverage_experiment(&spec).unwrap();
    for (x, y) in a.trials.iter().zip(&b.trials) {
        assert_eq!(x.w_est_ref, y.w_est_ref);
        assert_eq!(x.w_emp_est, y.w_emp_est);
    }
    spec.seed = 10;
    let c = coverage_experiment(&spec).unwrap();
    assert_ne!(a.trials[0].w_est_ref, c.trials[0].w_est_ref);
}

fn battery_spec(n: usize, trials: usize, split: SplitPolicy, reference_size: usize) -> ScenarioSpec {
    let sc = BatteryScenario::reference().unwrap();
    let sys = sc.system().unwrap();
    let obs = sc.observer(&sys).unwrap();
    ScenarioSpec {
        initial: sc.initial_deviation_law().unwrap(),
        process_noise: None,
        measurement_noise: vec![sc.measurement_noise.clone()],
        noise_bounds: sc.noise_bounds().unwrap(),
        sys,
        obs,
        n,
        beta: 0.1,
        split,
        constants: NominalConstants::Explicit,
        trials,
        seed: 11,
        reference_size,
        psi_override: None,
    }
}

#[test]
fn battery_trials_are_finite_and_covered() {
    let report = coverage_experiment(&battery_spec(10, 20, SplitPolicy::Optimal, DEFAULT_REFERENCE_SIZE)).unwrap();
    for t in &report.trials {
        assert!(t.w_emp_est.is_finite() && t.w_est_ref.is_finite() && t.samplewise_bound.is_finite());
    }
    assert!(report.coverage >= 0.9);
}

#[test]
fn battery_center_distance_quantile_below_noise_radius() {
    let split = ConfidenceSplit::new(0.05, 0.05).unwrap();
    let stats = paired_center_distance_stats(&battery_spec(10, 100, SplitPolicy::Fixed(split), 500)).unwrap();
    assert_eq!(stats.beta_ns, 0.05);
    assert!(stats.quantile(0.95) <= stats.eps_noise);
    assert!(stats.distances.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn folded_gaussian_exceedance_respects_tail_bound() {
    let r = 1.0 / std::f64::consts::LN_2;
    for (n, t) in [(10, 0.5), (50, 0.2), (50, 1.5)] {
        let freq = folded_gaussian_exceedance(n, t, 2.0, 2000, 1).unwrap();
        assert!(freq <= concentration_tail_bound(n, t, 2.0, r).unwrap());
    }
}
