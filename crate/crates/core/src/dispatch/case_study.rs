use nalgebra::{DMatrix, DVector, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::{BatteryCell, BatteryUnit, DispatchProblem, Generator};
use crate::distributions::{CompactDistribution, GaussianMixture1D, NoiseNormBounds};
use crate::linalg::dvec;
use crate::system::{
    design_gain_time_invariant, run_observer, simulate_realization, FilterDesign, LtvSystem, ObserverDesign,
};
use crate::wasserstein::DiscreteMeasure;
use crate::{Error, Result};

/// Initial-state law of one battery in absolute coordinates `(I², z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatteryInitialLaw {
    /// Mixture of uniform state-of-charge laws `(weight, lower, upper)`.
    pub soc_components: Vec<(f64, f64, f64)>,
    /// Fixed initial current through `R²`.
    pub current2: f64,
    /// Known support of the state of charge.
    pub soc_support: (f64, f64),
    /// Known support of the current through `R²`.
    pub current2_support: (f64, f64),
}

impl BatteryInitialLaw {
    /// Midpoint `χ⋆_0` of the known support.
    pub fn support_center(&self) -> Vector2<f64> {
        Vector2::new(
            0.5 * (self.current2_support.0 + self.current2_support.1),
            0.5 * (self.soc_support.0 + self.soc_support.1),
        )
    }

    /// Law of the deviation `χ_0 − χ⋆_0`, carrying the shifted support.
    pub fn deviation_law(&self) -> Result<CompactDistribution> {
        let c = self.support_center();
        let soc = CompactDistribution::mixture(
            self.soc_components
                .iter()
                .map(|&(w, lo, hi)| Ok((w, CompactDistribution::uniform_box(dvec(&[lo - c[1]]), dvec(&[hi - c[1]]))?)))
                .collect::<Result<Vec<_>>>()?,
        )?;
        let law = CompactDistribution::product(vec![
            CompactDistribution::point_mass(dvec(&[self.current2 - c[0]])),
            soc,
        ])?;
        law.with_support(
            dvec(&[self.current2_support.0 - c[0], self.soc_support.0 - c[1]]),
            dvec(&[self.current2_support.1 - c[0], self.soc_support.1 - c[1]]),
        )
    }
}

/// Generators, batteries and observer of the storage dispatch case study.
#[derive(Clone, Debug)]
pub struct BatteryScenario {
    pub generators: Vec<Generator>,
    pub batteries: Vec<BatteryUnit>,
    pub initial_laws: Vec<BatteryInitialLaw>,
    pub measurement_noise: GaussianMixture1D,
    /// Per-battery surrogate process covariance of the filter, over `(I², z)`.
    pub filter_process_cov: [f64; 2],
    pub filter_measurement_var: f64,
    pub ell: usize,
    pub demand: f64,
    pub penalty: f64,
}

impl BatteryScenario {
    /// Four generators with cost `0.25(P − 0.1)²` on `[0.2, 0.5]` and three
    /// identical cells (`R¹ = 0.34`, `R² = 0.17`, `a = 0.945`, `I = 8`) whose
    /// first unit has a bimodal state of charge.
    pub fn reference() -> Result<Self> {
        let generators = vec![
            Generator { weight: 0.25, target: 0.1, p_min: 0.2, p_max: 0.5 };
            4
        ];
        let law = |bimodal: bool| BatteryInitialLaw {
            soc_components: if bimodal {
                vec![(0.9, 0.45, 0.65), (0.1, 0.84, 0.86)]
            } else {
                vec![(1.0, 0.45, 0.65)]
            },
            current2: 1.6308,
            soc_support: (0.45, 0.9),
            current2_support: (1.5, 1.7),
        };
        let initial_laws = vec![law(true), law(false), law(false)];
        let batteries = initial_laws
            .iter()
            .zip([1.0, 1.3, 1.3])
            .map(|(l, cost_alpha)| {
                let cell = BatteryCell::from_decay(0.945, 0.34, 0.17, 500.0, 5.25, 1.43, 1.0, vec![8.0], l.support_center())?;
                Ok(BatteryUnit { cell, cost_alpha, cost_beta: 0.0 })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BatteryScenario {
            generators,
            batteries,
            initial_laws,
            measurement_noise: GaussianMixture1D::symmetric_pair(0.01, 0.01)?,
            filter_process_cov: [1e-8, 1e-4],
            filter_measurement_var: 1e-4,
            ell: 9,
            demand: 7.0,
            penalty: 0.5,
        })
    }

    pub fn n_batteries(&self) -> usize {
        self.batteries.len()
    }

    fn validate(&self) -> Result<()> {
        if self.batteries.is_empty() || self.initial_laws.len() != self.batteries.len() {
            return Err(Error::InvalidArgument(
                "each battery needs exactly one initial-state law".into(),
            ));
        }
        for (i, (b, l)) in self.batteries.iter().zip(&self.initial_laws).enumerate() {
            if !b.cell.soc_stays_interior(l.soc_support.0, l.soc_support.1, self.ell) {
                return Err(Error::InvalidArgument(format!(
                    "battery {i} leaves the interior of its state-of-charge range within the horizon"
                )));
            }
        }
        Ok(())
    }

    /// Stacked deviation dynamics `ξ_{k+1} = Aξ_k`, `ζ_k = Hξ_k + v_k`
    /// (no process noise; `G` is a zero column).
    pub fn system(&self) -> Result<LtvSystem> {
        self.validate()?;
        let n2 = self.n_batteries();
        let mut a = DMatrix::zeros(2 * n2, 2 * n2);
        let mut h = DMatrix::zeros(n2, 2 * n2);
        for (i, b) in self.batteries.iter().enumerate() {
            a.view_mut((2 * i, 2 * i), (2, 2)).copy_from(&b.cell.state_matrix());
            h.view_mut((i, 2 * i), (1, 2)).copy_from(&b.cell.output_row());
        }
        LtvSystem::time_invariant(a, DMatrix::zeros(2 * n2, 1), h, self.ell)
    }

    pub fn observer(&self, sys: &LtvSystem) -> Result<ObserverDesign> {
        let n2 = self.n_batteries();
        let q = DMatrix::from_diagonal(&DVector::from_fn(2 * n2, |i, _| self.filter_process_cov[i % 2]));
        let r = DMatrix::identity(n2, n2) * self.filter_measurement_var;
        design_gain_time_invariant(sys, &FilterDesign::new(q, r))
    }

    /// Law of the stacked initial deviation.
    pub fn initial_deviation_law(&self) -> Result<CompactDistribution> {
        CompactDistribution::product(
            self.initial_laws
                .iter()
                .map(|l| l.deviation_law())
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// `m_v = M_v = ‖v‖₂` and `C_v` for the measurement noise.
    pub fn noise_bounds(&self) -> Result<NoiseNormBounds> {
        NoiseNormBounds::from_gaussian_mixture(&self.measurement_noise)
    }

    /// Dispatch problem with the given ambiguity ball.
    pub fn problem(&self, center: DiscreteMeasure, radius: f64) -> Result<DispatchProblem> {
        DispatchProblem::new(
            self.generators.clone(),
            self.batteries.clone(),
            self.ell,
            self.demand,
            self.penalty,
            center,
            radius,
        )
    }
}

const TIE_TOLERANCE: f64 = 1e-9;

/// Settings of a repeated SAA-versus-DRO comparison.
#[derive(Clone, Debug)]
pub struct CaseStudyConfig {
    pub scenario: BatteryScenario,
    pub n: usize,
    pub radius: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Size of the true-law sample used for out-of-sample costs.
    pub true_samples: usize,
}

/// Outcome of one realization of the case study.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseStudyRow {
    pub realization: usize,
    pub saa_value: f64,
    pub dro_value: f64,
    pub true_saa: f64,
    pub true_dro: f64,
    pub true_saa_se: f64,
    pub true_dro_se: f64,
    pub eta_saa: Vec<bool>,
    pub eta_dro: Vec<bool>,
}

impl CaseStudyRow {
    /// The DRO value bounds the true cost of its own decision, up to a
    /// relative tolerance of `1e−9` that absorbs rounding in exact ties.
    pub fn dro_certified(&self) -> bool {
        self.dro_value >= self.true_dro - TIE_TOLERANCE * self.true_dro.abs().max(1.0)
    }

    /// The SAA value understates the true cost of its own decision by more
    /// than the tie tolerance.
    pub fn saa_overpromised(&self) -> bool {
        self.saa_value < self.true_saa - TIE_TOLERANCE * self.true_saa.abs().max(1.0)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Observer estimates `ξ̂_ℓ^i` of `n` fresh realizations.
fn simulate_batch<R: Rng>(
    scenario: &BatteryScenario,
    sys: &LtvSystem,
    obs: &ObserverDesign,
    law: &CompactDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    let ell = sys.horizon();
    let r = sys.r();
    let w = vec![DVector::zeros(1); ell];
    let mut estimates = Vec::with_capacity(n);
    for _ in 0..n {
        let xi0 = law.sample(rng);
        let v: Vec<DVector<f64>> = (0..ell)
            .map(|_| DVector::from_fn(r, |_, _| scenario.measurement_noise.sample(rng)))
            .collect();
        let real = simulate_realization(sys, &xi0, &w, &v)?;
        let est = run_observer(sys, obs, &real.outputs)?;
        estimates.push(est[ell].clone());
    }
    Ok(estimates)
}

/// Solves SAA and DRO on independent realizations and evaluates both
/// decisions under a large sample of the true state law.
pub fn run_case_study(config: &CaseStudyConfig) -> Result<Vec<CaseStudyRow>> {
    if config.n == 0 || config.realizations == 0 || config.true_samples == 0 {
        return Err(Error::InvalidArgument(
            "sample size, realization count and true-sample count must be positive".into(),
        ));
    }
    let scenario = &config.scenario;
    let sys = scenario.system()?;
    let obs = scenario.observer(&sys)?;
    let law = scenario.initial_deviation_law()?;
    let phi = sys.a(0).pow(sys.horizon() as u32);
    let mut rng = stream_rng(config.seed, 0);
    let true_states: Vec<DVector<f64>> = (0..config.true_samples).map(|_| &phi * law.sample(&mut rng)).collect();
    (0..config.realizations)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(config.seed, t as u64 + 1);
            let estimates = simulate_batch(scenario, &sys, &obs, &law, config.n, &mut rng)?;
            let center = DiscreteMeasure::uniform(estimates)?;
            let problem = scenario.problem(center, config.radius)?;
            let saa = problem.solve_saa()?;
            let dro = problem.solve_dro()?;
            let true_saa = problem.true_cost(&saa.eta, &saa.p, &true_states)?;
            let true_dro = problem.true_cost(&dro.eta, &dro.p, &true_states)?;
            Ok(CaseStudyRow {
                realization: t,
                saa_value: saa.value,
                dro_value: dro.value,
                true_saa: true_saa.mean,
                true_dro: true_dro.mean,
                true_saa_se: true_saa.std_error,
                true_dro_se: true_dro.std_error,
                eta_saa: saa.eta,
                eta_dro: dro.eta,
            })
        })
        .collect()
}

