#![allow(dead_code)]

use ambiguity_core::distributions::{CompactDistribution, GaussianMixture1D, NoiseNormBounds};
use ambiguity_core::linalg::dmat;
use ambiguity_core::montecarlo::{ScenarioSpec, SplitPolicy, DEFAULT_REFERENCE_SIZE};
use ambiguity_core::radius::NominalConstants;
use ambiguity_core::system::{design_gain_time_invariant, FilterDesign, LtvSystem};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOY_MEASUREMENT_STD: f64 = 0.05;

/// Two-state plant observed through its first coordinate, with small uniform
/// process noise and Gaussian measurement noise.
pub fn toy_system(horizon: usize) -> LtvSystem {
    let a = dmat(&[&[0.95, 0.1], &[0.0, 0.8]]);
    let g = DMatrix::identity(2, 2);
    let h = dmat(&[&[1.0, 0.0]]);
    LtvSystem::time_invariant(a, g, h, horizon).unwrap()
}

pub fn toy_spec(n: usize, trials: usize, seed: u64) -> ScenarioSpec {
    let sys = toy_system(10);
    let design = FilterDesign::new(DMatrix::identity(2, 2) * 0.01, DMatrix::identity(1, 1) * 0.0025);
    let obs = design_gain_time_invariant(&sys, &design).unwrap();
    let noise = GaussianMixture1D::normal(0.0, TOY_MEASUREMENT_STD).unwrap();
    ScenarioSpec {
        noise_bounds: NoiseNormBounds::from_gaussian_mixture(&noise).unwrap(),
        sys,
        obs,
        initial: CompactDistribution::centered_cube(2, 1.0).unwrap(),
        process_noise: Some(CompactDistribution::centered_cube(2, 0.05).unwrap()),
        measurement_noise: vec![noise],
        n,
        beta: 0.1,
        split: SplitPolicy::Optimal,
        constants: NominalConstants::Explicit,
        trials,
        seed,
        reference_size: DEFAULT_REFERENCE_SIZE,
        psi_override: None,
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
