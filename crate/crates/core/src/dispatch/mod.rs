//! Economic dispatch with battery storage: the distributionally robust
//! problem over a Wasserstein ball, its sample-average counterpart and
//! out-of-sample cost evaluation.

mod battery;
mod case_study;

use nalgebra::{DMatrix, DVector, Vector2};

use crate::optim::{box_qp, golden_section};
use crate::wasserstein::DiscreteMeasure;
use crate::{Error, Result};

pub use battery::{battery_injected_power, BatteryCell, PowerCoefficients};
pub use case_study::{run_case_study, BatteryInitialLaw, BatteryScenario, CaseStudyConfig, CaseStudyRow};

/// Largest number of batteries for which all connection patterns are enumerated.
pub const MAX_BATTERIES: usize = 15;

const QP_TOLERANCE: f64 = 1e-10;
const QP_MAX_ITER: usize = 100_000;
const LAMBDA_TOLERANCE: f64 = 1e-10;
const LAMBDA_MAX_DOUBLINGS: usize = 200;

/// Generator with cost `weight·(P − target)²` on `[p_min, p_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Generator {
    pub weight: f64,
    pub target: f64,
    pub p_min: f64,
    pub p_max: f64,
}

impl Generator {
    pub fn cost(&self, p: f64) -> f64 {
        self.weight * (p - self.target).powi(2)
    }
}

/// Battery with linear cost `ᾱS + β̄` on its injected power.
#[derive(Clone, Debug, PartialEq)]
pub struct BatteryUnit {
    pub cell: BatteryCell,
    pub cost_alpha: f64,
    pub cost_beta: f64,
}

/// Dispatch instance at time `ell` with its Wasserstein ambiguity ball.
#[derive(Clone, Debug)]
pub struct DispatchProblem {
    pub generators: Vec<Generator>,
    pub batteries: Vec<BatteryUnit>,
    pub ell: usize,
    pub demand: f64,
    pub penalty: f64,
    /// Estimated stacked deviations `ξ̂_ℓ^i ∈ ℝ^{2n₂}`.
    pub center: DiscreteMeasure,
    pub radius: f64,
}

impl DispatchProblem {
    pub fn new(
        generators: Vec<Generator>,
        batteries: Vec<BatteryUnit>,
        ell: usize,
        demand: f64,
        penalty: f64,
        center: DiscreteMeasure,
        radius: f64,
    ) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidArgument("at least one generator is required".into()));
        }
        if let Some(g) = generators.iter().find(|g| !(g.p_min <= g.p_max) || !(g.weight > 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid generator {g:?}")));
        }
        if batteries.len() > MAX_BATTERIES {
            return Err(Error::InvalidArgument(format!(
                "{} batteries exceed the enumeration cap of {MAX_BATTERIES}",
                batteries.len()
            )));
        }
        if !(penalty > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty weight {penalty} must be positive")));
        }
        if !(radius >= 0.0) {
            return Err(Error::InvalidArgument(format!("ambiguity radius {radius} must be nonnegative")));
        }
        if center.dim() != 2 * batteries.len() {
            return Err(Error::dim("ambiguity center", 0, 2 * batteries.len(), center.dim()));
        }
        Ok(DispatchProblem {
            generators,
            batteries,
            ell,
            demand,
            penalty,
            center,
            radius,
        })
    }

    pub fn with_center(&self, center: DiscreteMeasure, radius: f64) -> Result<Self> {
        Self::new(
            self.generators.clone(),
            self.batteries.clone(),
            self.ell,
            self.demand,
            self.penalty,
            center,
            radius,
        )
    }

    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    pub fn n_batteries(&self) -> usize {
        self.batteries.len()
    }

    pub fn generator_cost(&self, p: &DVector<f64>) -> f64 {
        self.generators.iter().zip(p.iter()).map(|(g, &x)| g.cost(x)).sum()
    }

    /// Overall cost `Σg^j(P^j) + Ση^ιh^ι(S^ι) + c(ΣP^j + Ση^ιS^ι − D)²` at the
    /// stacked deviation `xi`, with each `S^ι` evaluated from the cell model.
    pub fn cost(&self, eta: &[bool], p: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        let mut battery_cost = 0.0;
        let mut injected = p.sum();
        for (i, b) in self.batteries.iter().enumerate() {
            if eta[i] {
                let (_, s) = battery_injected_power(&b.cell, &Vector2::new(xi[2 * i], xi[2 * i + 1]), self.ell);
                battery_cost += b.cost_alpha * s + b.cost_beta;
                injected += s;
            }
        }
        self.generator_cost(p) + battery_cost + self.penalty * (injected - self.demand).powi(2)
    }

    /// Coefficients of the reformulation for connection pattern `eta`.
    pub fn reformulation(&self, eta: &[bool]) -> Result<ReformulationData> {
        if eta.len() != self.n_batteries() {
            return Err(Error::dim("connection pattern", 0, self.n_batteries(), eta.len()));
        }
        let n2 = self.n_batteries();
        let mut a = DVector::zeros(2 * n2);
        let mut alpha_tilde = DVector::zeros(2 * n2);
        let mut beta_hat = Vec::with_capacity(n2);
        let mut beta_tilde = Vec::with_capacity(n2);
        for (i, b) in self.batteries.iter().enumerate() {
            let coef = b.cell.power_coefficients(self.ell);
            beta_hat.push(coef.beta_hat);
            beta_tilde.push(b.cost_alpha * coef.beta_hat + b.cost_beta);
            if eta[i] {
                for j in 0..2 {
                    a[2 * i + j] = coef.alpha_hat[j];
                    alpha_tilde[2 * i + j] = b.cost_alpha * coef.alpha_hat[j];
                }
            }
        }
        let eta_beta_hat: f64 = eta.iter().zip(&beta_hat).filter(|(e, _)| **e).map(|(_, b)| b).sum();
        let eta_beta_tilde: f64 = eta.iter().zip(&beta_tilde).filter(|(e, _)| **e).map(|(_, b)| b).sum();
        Ok(ReformulationData {
            eta: eta.to_vec(),
            lambda_max: self.penalty * a.norm_squared(),
            a,
            alpha_tilde,
            beta_hat,
            beta_tilde,
            offset: eta_beta_hat - self.demand,
            eta_beta_tilde,
            penalty: self.penalty,
        })
    }

    /// `f_η(P) = g(P) + c s² + 2c(ηᵀβ̂ − D)s + c(ηᵀβ̂ − D)² + ηᵀβ̃` with `s = 1ᵀP`.
    pub fn f_eta(&self, data: &ReformulationData, p: &DVector<f64>) -> f64 {
        let s = p.sum();
        let c = self.penalty;
        self.generator_cost(p) + c * s * s + 2.0 * c * data.offset * s + c * data.offset.powi(2) + data.eta_beta_tilde
    }

    /// `h_η(P, ξ) = c(aᵀξ)² + (2c(s + ηᵀβ̂ − D)a + η∗α̃)ᵀξ` with `a = η∗α̂`.
    pub fn h_eta(&self, data: &ReformulationData, p: &DVector<f64>, xi: &DVector<f64>) -> f64 {
        let s = p.sum();
        let c = self.penalty;
        let ax = data.a.dot(xi);
        c * ax * ax + 2.0 * c * (s + data.offset) * ax + data.alpha_tilde.dot(xi)
    }

    /// `f_η(P) + (1/N)Σ h_η(P, ξ̂^i)`.
    pub fn saa_objective(&self, data: &ReformulationData, p: &DVector<f64>) -> f64 {
        let atoms = self.center.atoms();
        let w = self.center.weights();
        self.f_eta(data, p) + atoms.iter().zip(w).map(|(x, wi)| wi * self.h_eta(data, p, x)).sum::<f64>()
    }

    /// The dual objective `f_η(P) + λ(ψ² − (1/N)Σ‖ξ̂^i‖²) + (1/4N)Σ r̂^iᵀ(λI − 𝔇)⁻¹r̂^i`.
    ///
    /// `𝔄 = c aaᵀ` has rank at most one, so the quadratic form is evaluated in
    /// its eigenbasis as `‖r‖²/λ + (uᵀr)²(1/(λ − λ_max) − 1/λ)` with `u = a/‖a‖`.
    pub fn dro_inner_value(&self, data: &ReformulationData, p: &DVector<f64>, lambda: f64) -> Result<f64> {
        let gap = lambda - data.lambda_max;
        if !(gap > data.lambda_max.max(1.0) * 1e-14) {
            return Err(Error::DualInfeasible { lambda, lambda_max: data.lambda_max });
        }
        let s = p.sum();
        let c = self.penalty;
        let base = 2.0 * c * (s + data.offset) * &data.a + &data.alpha_tilde;
        let a_norm = data.a.norm();
        let mut quad = 0.0;
        let mut sq = 0.0;
        for (x, w) in self.center.atoms().iter().zip(self.center.weights()) {
            let r = &base + 2.0 * lambda * x;
            let r2 = r.norm_squared();
            let along = if a_norm > 0.0 { data.a.dot(&r) / a_norm } else { 0.0 };
            quad += w * (r2 / lambda + along * along * (1.0 / gap - 1.0 / lambda));
            sq += w * x.norm_squared();
        }
        Ok(self.f_eta(data, p) + lambda * (self.radius * self.radius - sq) + 0.25 * quad)
    }

    fn lower_bounds(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_generators(), self.generators.iter().map(|g| g.p_min))
    }

    fn upper_bounds(&self) -> DVector<f64> {
        DVector::from_iterator(self.n_generators(), self.generators.iter().map(|g| g.p_max))
    }

    /// Minimizes `g(P) + κs² + μs` over the generator box, `s = 1ᵀP`.
    fn generator_qp(&self, kappa: f64, mu: f64) -> DVector<f64> {
        let n = self.n_generators();
        let mut q = DMatrix::from_element(n, n, 2.0 * kappa);
        let mut lin = DVector::from_element(n, mu);
        for (j, g) in self.generators.iter().enumerate() {
            q[(j, j)] += 2.0 * g.weight;
            lin[j] -= 2.0 * g.weight * g.target;
        }
        let lo = self.lower_bounds();
        let hi = self.upper_bounds();
        let x0 = (&lo + &hi) * 0.5;
        box_qp(&q, &lin, &lo, &hi, &x0, QP_TOLERANCE, QP_MAX_ITER).x
    }

    /// SAA minimizer over `P` for a fixed pattern.
    fn saa_for_eta(&self, data: &ReformulationData) -> (DVector<f64>, f64) {
        let c = self.penalty;
        let mean_ax: f64 = self
            .center
            .atoms()
            .iter()
            .zip(self.center.weights())
            .map(|(x, w)| w * data.a.dot(x))
            .sum();
        let p = self.generator_qp(c, 2.0 * c * (data.offset + mean_ax));
        let v = self.saa_objective(data, &p);
        (p, v)
    }

    /// DRO minimizer over `P` for fixed pattern and multiplier.
    fn dro_p_for_lambda(&self, data: &ReformulationData, lambda: f64) -> DVector<f64> {
        let c = self.penalty;
        let gap = lambda - data.lambda_max;
        let a2 = data.a.norm_squared();
        let mean_x = self
            .center
            .atoms()
            .iter()
            .zip(self.center.weights())
            .fold(DVector::zeros(data.a.len()), |acc, (x, w)| acc + x * *w);
        let b_bar = 2.0 * c * data.offset * &data.a + &data.alpha_tilde + 2.0 * lambda * &mean_x;
        let kappa = c + c * c * a2 / gap;
        let mu = 2.0 * c * data.offset + c * data.a.dot(&b_bar) / gap;
        self.generator_qp(kappa, mu)
    }

    fn dro_for_eta(&self, data: &ReformulationData) -> Result<(DVector<f64>, f64, f64)> {
        if self.radius == 0.0 {
            let (p, v) = self.saa_for_eta(data);
            return Ok((p, f64::INFINITY, v));
        }
        let value_at = |tau: f64| -> f64 {
            let lambda = data.lambda_max + tau;
            let p = self.dro_p_for_lambda(data, lambda);
            self.dro_inner_value(data, &p, lambda).unwrap_or(f64::INFINITY)
        };
        let scale = data.lambda_max.max(1.0);
        let r_scale = data.alpha_tilde.norm() + 2.0 * self.penalty * data.a.norm() + 1.0;
        let lo = (scale * 1e-12).ln();
        let mut hi_tau = data.lambda_max + 10.0 * r_scale;
        for _ in 0..=LAMBDA_MAX_DOUBLINGS {
            let (t, v) = golden_section(|t| value_at(t.exp()), lo, hi_tau.ln(), LAMBDA_TOLERANCE, 400);
            if t < hi_tau.ln() - 1e-3 {
                let lambda = data.lambda_max + t.exp();
                return Ok((self.dro_p_for_lambda(data, lambda), lambda, v));
            }
            hi_tau *= 2.0;
        }
        Err(Error::LambdaBracket { cap: data.lambda_max + hi_tau })
    }

    /// All patterns `η ∈ {0,1}^{n₂}` in lexicographic order.
    fn patterns(&self) -> Vec<Vec<bool>> {
        let n2 = self.n_batteries();
        (0..1usize << n2)
            .map(|m| (0..n2).map(|i| m >> (n2 - 1 - i) & 1 == 1).collect())
            .collect()
    }

    pub fn solve_saa(&self) -> Result<Solution> {
        let mut best: Option<Solution> = None;
        for eta in self.patterns() {
            let data = self.reformulation(&eta)?;
            let (p, value) = self.saa_for_eta(&data);
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Solution { eta, p, lambda: f64::INFINITY, value });
            }
        }
        Ok(best.expect("at least one pattern"))
    }

    pub fn solve_dro(&self) -> Result<Solution> {
        let mut best: Option<Solution> = None;
        for eta in self.patterns() {
            let data = self.reformulation(&eta)?;
            let (p, lambda, value) = self.dro_for_eta(&data)?;
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(Solution { eta, p, lambda, value });
            }
        }
        Ok(best.expect("at least one pattern"))
    }

    /// DRO value for one fixed pattern.
    pub fn solve_dro_for(&self, eta: &[bool]) -> Result<Solution> {
        let data = self.reformulation(eta)?;
        let (p, lambda, value) = self.dro_for_eta(&data)?;
        Ok(Solution { eta: eta.to_vec(), p, lambda, value })
    }

    /// SAA value for one fixed pattern.
    pub fn solve_saa_for(&self, eta: &[bool]) -> Result<Solution> {
        let data = self.reformulation(eta)?;
        let (p, value) = self.saa_for_eta(&data);
        Ok(Solution { eta: eta.to_vec(), p, lambda: f64::INFINITY, value })
    }

    /// Monte Carlo estimate of `E[f_η(P) + h_η(P, ξ)]` over `samples`.
    pub fn true_cost(&self, eta: &[bool], p: &DVector<f64>, samples: &[DVector<f64>]) -> Result<CostEstimate> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("true cost needs at least one sample".into()));
        }
        let data = self.reformulation(eta)?;
        let f = self.f_eta(&data, p);
        let values: Vec<f64> = samples.iter().map(|x| f + self.h_eta(&data, p, x)).collect();
        let m = values.len() as f64;
        let mean = values.iter().sum::<f64>() / m;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Ok(CostEstimate { mean, std_error: (var / m).sqrt(), samples: values.len() })
    }
}

/// Per-pattern data of the reformulated problem.
#[derive(Clone, Debug)]
pub struct ReformulationData {
    pub eta: Vec<bool>,
    /// `η∗α̂`.
    pub a: DVector<f64>,
    /// `η∗α̃`.
    pub alpha_tilde: DVector<f64>,
    /// `β̂^ι` for every battery.
    pub beta_hat: Vec<f64>,
    /// `β̃^ι = ᾱ^ιβ̂^ι + β̄^ι` for every battery.
    pub beta_tilde: Vec<f64>,
    /// `ηᵀβ̂ − D`.
    pub offset: f64,
    /// `ηᵀβ̃`.
    pub eta_beta_tilde: f64,
    /// `λ_max(𝔄) = c‖η∗α̂‖²`.
    pub lambda_max: f64,
    penalty: f64,
}

impl ReformulationData {
    /// `𝔄 = c(η∗α̂)(η∗α̂)ᵀ`.
    pub fn frak_a(&self) -> DMatrix<f64> {
        self.penalty * &self.a * self.a.transpose()
    }

    /// `r^i = 2c(s + ηᵀβ̂ − D)(η∗α̂) + η∗α̃ + 2λξ̂^i`.
    pub fn r_vector(&self, s: f64, lambda: f64, xi: &DVector<f64>) -> DVector<f64> {
        2.0 * self.penalty * (s + self.offset) * &self.a + &self.alpha_tilde + 2.0 * lambda * xi
    }
}

/// Optimal pattern, generator powers, multiplier and value.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub eta: Vec<bool>,
    pub p: DVector<f64>,
    /// Dual multiplier; infinite for the sample-average problem.
    pub lambda: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}
