//! Monte Carlo experiments: simulate `N` independent realizations, estimate
//! their states with the observer, and check the ambiguity guarantee against a
//! large reference sample of the true state law.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::distributions::{CompactDistribution, GaussianMixture1D, NoiseNormBounds};
use crate::linalg::spectral_norm;
use crate::radius::{ConfidenceSplit, NominalConstants, RadiusBreakdown, RadiusModel};
use crate::system::{run_observer, simulate_realization, LtvSystem, ObserverDesign, TransitionProducts};
use crate::wasserstein::{wasserstein_p, DiscreteMeasure};
use crate::{Error, Result};

/// Default number of true-state samples standing in for the true law.
pub const DEFAULT_REFERENCE_SIZE: usize = 10_000;

/// How the confidence `β` is divided between the nominal and noise radii.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitPolicy {
    Optimal,
    Equal,
    Fixed(ConfidenceSplit),
}

/// A complete experiment description.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub sys: LtvSystem,
    pub obs: ObserverDesign,
    pub initial: CompactDistribution,
    /// Law of each `w_k`; `None` means no process noise.
    pub process_noise: Option<CompactDistribution>,
    /// Scalar law of every measurement-noise entry. Realization `i` uses entry
    /// `i mod len`, so sensors of different precision can be mixed.
    pub measurement_noise: Vec<GaussianMixture1D>,
    pub noise_bounds: NoiseNormBounds,
    pub n: usize,
    pub beta: f64,
    pub split: SplitPolicy,
    pub constants: NominalConstants,
    pub trials: usize,
    pub seed: u64,
    pub reference_size: usize,
    /// Replaces the computed `ψ_N`.
    pub psi_override: Option<f64>,
}

impl ScenarioSpec {
    pub fn ell(&self) -> usize {
        self.sys.horizon()
    }

    pub fn p(&self) -> f64 {
        self.noise_bounds.p
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample size N must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trial count must be positive".into()));
        }
        if self.reference_size == 0 {
            return Err(Error::InvalidArgument("reference size must be positive".into()));
        }
        if self.measurement_noise.is_empty() && self.sys.r() > 0 {
            return Err(Error::InvalidArgument("no measurement-noise law given".into()));
        }
        if self.initial.dim() != self.sys.d() {
            return Err(Error::dim("initial law", 0, self.sys.d(), self.initial.dim()));
        }
        if let Some(w) = &self.process_noise {
            if w.dim() != self.sys.q() {
                return Err(Error::dim("process-noise law", 0, self.sys.q(), w.dim()));
            }
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidArgument(format!("β = {} must lie in (0, 1)", self.beta)));
        }
        Ok(())
    }

    fn rho_xi0(&self) -> f64 {
        self.initial.sup_radius()
    }

    fn rho_w(&self) -> f64 {
        self.process_noise.as_ref().map_or(0.0, |w| w.sup_radius())
    }
}

/// Outcome of one trial.
#[derive(Clone, Debug)]
pub struct TrialResult {
    pub trial: usize,
    /// True states `ξ_ℓ^i`.
    pub empirical: DiscreteMeasure,
    /// Estimates `ξ̂_ℓ^i`.
    pub estimator_empirical: DiscreteMeasure,
    pub w_emp_est: f64,
    pub w_est_ref: f64,
    pub psi: f64,
    pub covered: bool,
    /// `2^{(p−1)/p}𝔐_w + 2^{(p−1)/p}((1/N)Σ(𝔈^i)^p)^{1/p}` with `𝔈^i`
    /// evaluated on the drawn measurement noise.
    pub samplewise_bound: f64,
}

/// Quantities shared by all trials of a scenario.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub spec: ScenarioSpec,
    pub products: TransitionProducts,
    pub breakdown: RadiusBreakdown,
    pub psi: f64,
    pub reference: DiscreteMeasure,
    /// `‖Ψ_{ℓ,ℓ−k+1}K_{ℓ−k}‖` for `k = 1..=ℓ`.
    gain_weights: Vec<f64>,
}

/// Computes products, radius and reference sample for `spec`.
pub fn prepare(spec: &ScenarioSpec) -> Result<PreparedScenario> {
    spec.validate()?;
    let ell = spec.ell();
    let products = TransitionProducts::new(&spec.sys, &spec.obs, ell)?;
    let model = RadiusModel::new(&spec.sys, &spec.obs, &products, spec.noise_bounds, spec.rho_xi0(), spec.rho_w())
        .with_constants(spec.constants);
    let breakdown = match spec.split {
        SplitPolicy::Optimal => model.optimal_total_radius(ell, spec.n, spec.beta)?,
        SplitPolicy::Equal => model.total_radius(ell, spec.n, ConfidenceSplit::equal(spec.beta)?)?,
        SplitPolicy::Fixed(s) => model.total_radius(ell, spec.n, s)?,
    };
    let psi = spec.psi_override.unwrap_or(breakdown.psi_total);
    let mut rng = trial_rng(spec.seed, 0);
    let atoms = (0..spec.reference_size)
        .map(|_| true_state(spec, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let reference = DiscreteMeasure::uniform(atoms)?;
    let gain_weights = (1..=ell)
        .map(|k| spectral_norm(&(products.psi(ell, ell - k + 1) * spec.obs.k(ell - k))))
        .collect();
    Ok(PreparedScenario {
        spec: spec.clone(),
        products,
        breakdown,
        psi,
        reference,
        gain_weights,
    })
}

/// Stream 0 is reserved for the reference sample; trial `t` uses stream `t + 1`.
fn trial_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn process_noise<R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Vec<DVector<f64>> {
    let q = spec.sys.q();
    (0..spec.ell())
        .map(|_| match &spec.process_noise {
            Some(w) => w.sample(rng),
            None => DVector::zeros(q),
        })
        .collect()
}

fn true_state<R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Result<DVector<f64>> {
    let xi0 = spec.initial.sample(rng);
    let w = process_noise(spec, rng);
    let v = vec![DVector::zeros(spec.sys.r()); spec.ell()];
    let real = simulate_realization(&spec.sys, &xi0, &w, &v)?;
    Ok(real.states[spec.ell()].clone())
}

/// Simulates one trial of `N` realizations.
pub fn run_trial(prepared: &PreparedScenario, trial: usize) -> Result<TrialResult> {
    let spec = &prepared.spec;
    let ell = spec.ell();
    let r = spec.sys.r();
    let p = spec.p();
    let mut rng = trial_rng(spec.seed, trial as u64 + 1);
    let mut truth = Vec::with_capacity(spec.n);
    let mut estimates = Vec::with_capacity(spec.n);
    let mut noise_terms = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let law = &spec.measurement_noise[i % spec.measurement_noise.len()];
        let xi0 = spec.initial.sample(&mut rng);
        let w = process_noise(spec, &mut rng);
        let v: Vec<DVector<f64>> = (0..ell)
            .map(|_| DVector::from_fn(r, |_, _| law.sample(&mut rng)))
            .collect();
        let real = simulate_realization(&spec.sys, &xi0, &w, &v)?;
        let est = run_observer(&spec.sys, &spec.obs, &real.outputs)?;
        truth.push(real.states[ell].clone());
        estimates.push(est[ell].clone());
        let e: f64 = (1..=ell)
            .map(|k| prepared.gain_weights[k - 1] * v[ell - k].lp_norm(1))
            .sum();
        noise_terms.push(e);
    }
    let empirical = DiscreteMeasure::uniform(truth)?;
    let estimator_empirical = DiscreteMeasure::uniform(estimates)?;
    let w_emp_est = wasserstein_p(&empirical, &estimator_empirical, p)?;
    let w_est_ref = wasserstein_p(&estimator_empirical, &prepared.reference, p)?;
    let scale = 2f64.powf((p - 1.0) / p);
    let mean_e = (noise_terms.iter().map(|e| e.powf(p)).sum::<f64>() / spec.n as f64).powf(1.0 / p);
    Ok(TrialResult {
        trial,
        empirical,
        estimator_empirical,
        w_emp_est,
        w_est_ref,
        psi: prepared.psi,
        covered: w_est_ref <= prepared.psi,
        samplewise_bound: scale * prepared.breakdown.frak.big_m_w + scale * mean_e,
    })
}

/// Coverage over all trials of a scenario.
#[derive(Clone, Debug)]
pub struct CoverageReport {
    pub trials: Vec<TrialResult>,
    pub coverage: f64,
    pub psi: f64,
    pub breakdown: RadiusBreakdown,
    /// `1 − β − 3√(β(1 − β)/T)`.
    pub binomial_floor: f64,
}

/// Runs every trial (in parallel) and reports the covered fraction.
pub fn coverage_experiment(spec: &ScenarioSpec) -> Result<CoverageReport> {
    let prepared = prepare(spec)?;
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(&prepared, t))
        .collect::<Result<Vec<_>>>()?;
    let covered = trials.iter().filter(|t| t.covered).count();
    let t = spec.trials as f64;
    Ok(CoverageReport {
        coverage: covered as f64 / t,
        psi: prepared.psi,
        breakdown: prepared.breakdown,
        binomial_floor: 1.0 - spec.beta - 3.0 * (spec.beta * (1.0 - spec.beta) / t).sqrt(),
        trials,
    })
}

/// Distribution of `W_p(P̂^N, P^N)` across trials, next to `ε̂_N(β_ns)`.
#[derive(Clone, Debug)]
pub struct CenterDistanceStats {
    /// Sorted ascending.
    pub distances: Vec<f64>,
    pub samplewise_bounds: Vec<f64>,
    pub eps_noise: f64,
    pub beta_ns: f64,
}

impl CenterDistanceStats {
    /// Empirical `q`-quantile (nearest rank).
    pub fn quantile(&self, q: f64) -> f64 {
        let n = self.distances.len();
        let idx = ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.distances[idx]
    }
}

pub fn paired_center_distance_stats(spec: &ScenarioSpec) -> Result<CenterDistanceStats> {
    let report = coverage_experiment(spec)?;
    let mut distances: Vec<f64> = report.trials.iter().map(|t| t.w_emp_est).collect();
    distances.sort_by(f64::total_cmp);
    Ok(CenterDistanceStats {
        distances,
        samplewise_bounds: report.trials.iter().map(|t| t.samplewise_bound).collect(),
        eps_noise: report.breakdown.eps_noise,
        beta_ns: report.breakdown.split.beta_ns,
    })
}

/// Fraction of `reps` experiments in which the empirical `p`-th mean of `n`
/// folded standard Gaussians, normalized to unit `p`-th moment, exceeds `1 + t`.
pub fn folded_gaussian_exceedance(n: usize, t: f64, p: f64, reps: usize, seed: u64) -> Result<f64> {
    if n == 0 || reps == 0 {
        return Err(Error::InvalidArgument("n and reps must be positive".into()));
    }
    let norm = GaussianMixture1D::normal(0.0, 1.0)?.lp_norm(p)?;
    let hits: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = trial_rng(seed, rep as u64);
            let mean: f64 = (0..n)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    (z.abs() / norm).powf(p)
                })
                .sum::<f64>()
                / n as f64;
            usize::from(mean.powf(1.0 / p) - 1.0 >= t)
        })
        .sum();
    Ok(hits as f64 / reps as f64)
}
