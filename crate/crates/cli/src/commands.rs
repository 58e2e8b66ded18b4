use std::path::{Path, PathBuf};

use ambiguity_core::dispatch::{run_case_study, CaseStudyConfig};
use ambiguity_core::montecarlo::{coverage_experiment, SplitPolicy};
use ambiguity_core::radius::{ConfidenceSplit, RadiusModel};
use ambiguity_core::system::TransitionProducts;
use ambiguity_core::wasserstein::{optimal_plan, wasserstein_p, DiscreteMeasure};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::config::Config;
use crate::output::{flag, int, num, Table};
use crate::CliError;

const SELFTEST_TOLERANCE: f64 = 1e-9;

/// `(ℓ, N, β)` grid of nominal, noise and total radii.
pub fn radius_table(config: &Config, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let scenario = config.scenario()?;
    let mut table = Table::new(&[
        "ell", "n", "beta", "beta_nom", "beta_ns", "eps_nominal", "eps_noise", "psi", "rho_xi_ell",
    ]);
    let ell = scenario.sys.horizon();
    let products = TransitionProducts::new(&scenario.sys, &scenario.obs, ell)?;
    let rho_w = scenario.process_noise.as_ref().map_or(0.0, |w| w.sup_radius());
    let model = RadiusModel::new(
        &scenario.sys,
        &scenario.obs,
        &products,
        scenario.noise_bounds,
        scenario.initial.sup_radius(),
        rho_w,
    )
    .with_constants(config.constants());
    for &beta in config.beta_grid()? {
        for &n in config.n_grid()? {
            let b = match config.split_policy(beta)? {
                SplitPolicy::Optimal => model.optimal_total_radius(ell, n, beta)?,
                SplitPolicy::Equal => model.total_radius(ell, n, ConfidenceSplit::equal(beta)?)?,
                SplitPolicy::Fixed(split) => model.total_radius(ell, n, split)?,
            };
            table.push(vec![
                int(ell),
                int(n),
                num(beta),
                num(b.split.beta_nom),
                num(b.split.beta_ns),
                num(b.eps_nominal),
                num(b.eps_noise),
                num(b.psi_total),
                num(b.rho_xi_ell),
            ]);
        }
    }
    Ok(vec![table.write(out, "radius_table.txt")?])
}

pub fn coverage(config: &Config, out: &Path, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    let scenario = config.scenario()?;
    let mut trials = Table::new(&[
        "n", "beta", "trial", "w_emp_est", "w_est_ref", "psi", "covered", "samplewise_bound",
    ]);
    let mut summary = Table::new(&[
        "n", "beta", "trials", "covered", "coverage", "binomial_floor", "eps_nominal", "eps_noise", "psi",
    ]);
    for &beta in config.beta_grid()? {
        for &n in config.n_grid()? {
            let spec = config.scenario_spec(&scenario, n, beta, seed)?;
            let report = coverage_experiment(&spec)?;
            for t in &report.trials {
                trials.push(vec![
                    int(n),
                    num(beta),
                    int(t.trial),
                    num(t.w_emp_est),
                    num(t.w_est_ref),
                    num(t.psi),
                    flag(t.covered),
                    num(t.samplewise_bound),
                ]);
            }
            summary.push(vec![
                int(n),
                num(beta),
                int(report.trials.len()),
                int(report.trials.iter().filter(|t| t.covered).count()),
                num(report.coverage),
                num(report.binomial_floor),
                num(report.breakdown.eps_nominal),
                num(report.breakdown.eps_noise),
                num(report.psi),
            ]);
        }
    }
    Ok(vec![
        trials.write(out, "coverage_trials.txt")?,
        summary.write(out, "coverage_summary.txt")?,
    ])
}

pub fn dispatch(config: &Config, out: &Path, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    let scenario = config.battery_scenario()?;
    let grid = config
        .dispatch
        .as_ref()
        .ok_or_else(|| CliError::Config("the dispatch command needs a [dispatch] section".into()))?;
    if grid.n.is_empty() {
        return Err(CliError::Config("dispatch.n is an empty grid".into()));
    }
    if grid.n.len() != grid.radius.len() {
        return Err(CliError::Config(format!(
            "dispatch.n has {} entries but dispatch.radius has {}",
            grid.n.len(),
            grid.radius.len()
        )));
    }
    let mut rows = Table::new(&[
        "n", "radius", "seed", "realization", "saa_value", "dro_value", "true_saa", "true_saa_se", "true_dro",
        "true_dro_se", "dro_certified", "saa_overpromised",
    ]);
    let mut summary = Table::new(&["n", "radius", "realizations", "dro_certified", "saa_overpromised"]);
    for (&n, &radius) in grid.n.iter().zip(&grid.radius) {
        let study = CaseStudyConfig {
            scenario: scenario.clone(),
            n,
            radius,
            realizations: grid.realizations,
            seed,
            true_samples: grid.true_samples,
        };
        let result = run_case_study(&study)?;
        for r in &result {
            rows.push(vec![
                int(n),
                num(radius),
                int(seed),
                int(r.realization),
                num(r.saa_value),
                num(r.dro_value),
                num(r.true_saa),
                num(r.true_saa_se),
                num(r.true_dro),
                num(r.true_dro_se),
                flag(r.dro_certified()),
                flag(r.saa_overpromised()),
            ]);
        }
        summary.push(vec![
            int(n),
            num(radius),
            int(result.len()),
            int(result.iter().filter(|r| r.dro_certified()).count()),
            int(result.iter().filter(|r| r.saa_overpromised()).count()),
        ]);
    }
    Ok(vec![
        rows.write(out, "dispatch.txt")?,
        summary.write(out, "dispatch_summary.txt")?,
    ])
}

fn brute_force(x: &[DVector<f64>], y: &[DVector<f64>], p: f64) -> f64 {
    fn search(i: usize, used: &mut [bool], acc: f64, best: &mut f64, cost: &dyn Fn(usize, usize) -> f64) {
        let n = used.len();
        if i == n {
            *best = best.min(acc);
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                search(i + 1, used, acc + cost(i, j), best, cost);
                used[j] = false;
            }
        }
    }
    let cost = |i: usize, j: usize| (&x[i] - &y[j]).norm().powf(p);
    let mut best = f64::INFINITY;
    search(0, &mut vec![false; x.len()], 0.0, &mut best, &cost);
    (best / x.len() as f64).powf(1.0 / p)
}

/// Compares both transport solvers with exhaustive search on small instances.
pub fn ot_selftest(out: &Path, seed: u64, instances: usize) -> Result<Vec<PathBuf>, CliError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut table = Table::new(&["instance", "n", "d", "p", "assignment", "simplex", "brute_force", "max_error"]);
    let mut worst: f64 = 0.0;
    for instance in 0..instances {
        let n = rng.random_range(1..=6);
        let d = rng.random_range(1..=4);
        let p = [1.0, 2.0, 3.0][rng.random_range(0..3)];
        let cloud = |rng: &mut ChaCha20Rng| -> Vec<DVector<f64>> {
            (0..n).map(|_| DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0))).collect()
        };
        let x = cloud(&mut rng);
        let y = cloud(&mut rng);
        let brute = brute_force(&x, &y, p);
        let mu = DiscreteMeasure::uniform(x)?;
        let nu = DiscreteMeasure::uniform(y)?;
        let assignment = wasserstein_p(&mu, &nu, p)?;
        let simplex = optimal_plan(&mu, &nu, p)?.cost.max(0.0).powf(1.0 / p);
        let err = (assignment - brute).abs().max((simplex - brute).abs());
        worst = worst.max(err);
        table.push(vec![
            int(instance),
            int(n),
            int(d),
            num(p),
            num(assignment),
            num(simplex),
            num(brute),
            num(err),
        ]);
    }
    let written = table.write(out, "ot_selftest.txt")?;
    if worst > SELFTEST_TOLERANCE {
        return Err(CliError::SelfTest(format!(
            "largest deviation from exhaustive search is {worst:e}, above {SELFTEST_TOLERANCE:e}; see {}",
            written.display()
        )));
    }
    Ok(vec![written])
}
