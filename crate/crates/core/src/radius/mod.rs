//! Ambiguity radii: nominal sampling error, observer-noise error, their
//! combination into `ψ_N`, and the horizon and pointwise variants.

mod nominal;
mod propagation;
mod uniform;

use crate::distributions::NoiseNormBounds;
use crate::linalg::{inf_norm, spectral_norm};
use crate::optim::golden_section;
use crate::system::{LtvSystem, ObserverDesign, TransitionProducts};
use crate::{Error, Result};

pub use nominal::{
    embedding_dimension, explicit_coefficients, explicit_constant, h, h_inverse, nominal_radius,
    nominal_radius_explicit, nominal_radius_generic, nominal_radius_single_exponential,
    single_exponential_constants, ExplicitCoefficients, NominalConstants, NominalProvenance,
};
pub use propagation::{pointwise_propagation, PropagationMode, PropagationStep};
pub use uniform::{concentration_tail_bound, uniform_noise_bounds, UniformNoiseBounds};

/// Constant of the Bernstein-type inequality behind the noise radius.
pub const C_PRIME: f64 = 0.1;

/// `α_p(s) = s²` on `[0, 1]` and `s^p` beyond.
pub fn alpha_p(s: f64, p: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("α_p argument {s} must be nonnegative")));
    }
    Ok(if s <= 1.0 { s * s } else { s.powf(p) })
}

pub fn alpha_p_inverse(u: f64, p: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::InvalidArgument(format!("α_p⁻¹ argument {u} must be nonnegative")));
    }
    Ok(if u <= 1.0 { u.sqrt() } else { u.powf(1.0 / p) })
}

/// Confidence budget `1 − β = (1 − β_nom)(1 − β_ns)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConfidenceSplit {
    pub beta: f64,
    pub beta_nom: f64,
    pub beta_ns: f64,
}

impl ConfidenceSplit {
    pub fn new(beta_nom: f64, beta_ns: f64) -> Result<Self> {
        for (name, b) in [("β_nom", beta_nom), ("β_ns", beta_ns)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} = {b} must lie in (0, 1)")));
            }
        }
        let beta = 1.0 - (1.0 - beta_nom) * (1.0 - beta_ns);
        Ok(ConfidenceSplit { beta, beta_nom, beta_ns })
    }

    /// Split of `beta` that assigns `beta_nom` to the nominal part.
    pub fn from_nominal(beta: f64, beta_nom: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!("β = {beta} must lie in (0, 1)")));
        }
        if !(beta_nom > 0.0 && beta_nom < beta) {
            return Err(Error::InvalidArgument(format!(
                "β_nom = {beta_nom} must lie in (0, β = {beta})"
            )));
        }
        let beta_ns = (beta - beta_nom) / (1.0 - beta_nom);
        if !(beta_ns > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "β_nom = {beta_nom} leaves no confidence for the noise term"
            )));
        }
        Ok(ConfidenceSplit { beta, beta_nom, beta_ns })
    }

    /// `1 − β_nom = 1 − β_ns = √(1 − β)`.
    pub fn equal(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!("β = {beta} must lie in (0, 1)")));
        }
        let each = 1.0 - (1.0 - beta).sqrt();
        Ok(ConfidenceSplit { beta, beta_nom: each, beta_ns: each })
    }
}

/// The constants `𝔐_w`, `𝔐_v`, `𝔠_v`, `𝔪_v` and `𝔯` entering the noise radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrakConstants {
    pub big_m_w: f64,
    pub big_m_v: f64,
    pub c_v: f64,
    pub m_v: f64,
    pub frak_r: f64,
    pub p: f64,
    /// Time index, or the last index of a horizon.
    pub ell: usize,
}

impl FrakConstants {
    /// Assembles the constants and sets `𝔯 = 𝔠_v/𝔪_v + 1/ln 2`, taking
    /// `𝔠_v/𝔪_v = 0` when `𝔠_v = 0`.
    pub fn from_parts(big_m_w: f64, big_m_v: f64, c_v: f64, m_v: f64, p: f64, ell: usize) -> Result<Self> {
        if [big_m_w, big_m_v, c_v, m_v].iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::InvalidArgument("frak constants must be nonnegative".into()));
        }
        if m_v > big_m_v * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "lower constant 𝔪_v = {m_v} exceeds 𝔐_v = {big_m_v}"
            )));
        }
        let ratio = if c_v == 0.0 {
            0.0
        } else if m_v > 0.0 {
            c_v / m_v
        } else {
            return Err(Error::InvalidArgument("𝔪_v must be positive when 𝔠_v is".into()));
        };
        Ok(FrakConstants {
            big_m_w,
            big_m_v,
            c_v,
            m_v,
            frak_r: ratio + 1.0 / std::f64::consts::LN_2,
            p,
            ell,
        })
    }
}

/// `𝔐_w`, `𝔐_v`, `𝔠_v`, `𝔪_v` and `𝔯` at time `ell`.
pub fn frak_constants(
    sys: &LtvSystem,
    obs: &ObserverDesign,
    products: &TransitionProducts,
    bounds: &NoiseNormBounds,
    rho_xi0: f64,
    rho_w: f64,
    ell: usize,
) -> Result<FrakConstants> {
    check_products(products, ell)?;
    let p = bounds.p;
    let d = sys.d() as f64;
    let q = sys.q() as f64;
    let r = sys.r() as f64;
    let mut process = 0.0;
    let mut gain_sum = 0.0;
    let mut gain_pow_sum = 0.0;
    for k in 1..=ell {
        let psi = products.psi(ell, ell - k + 1);
        process += spectral_norm(&(psi * sys.g(ell - k)));
        let kn = spectral_norm(&(psi * obs.k(ell - k)));
        gain_sum += kn;
        gain_pow_sum += kn.powf(p);
    }
    let big_m_w = d.sqrt() * spectral_norm(products.psi(ell, 0)) * rho_xi0 + q.sqrt() * process * rho_w;
    FrakConstants::from_parts(
        big_m_w,
        bounds.big_m_v * r * gain_sum,
        bounds.c_v * r * gain_sum,
        bounds.m_v * r.powf(1.0 / p) * gain_pow_sum.powf(1.0 / p),
        p,
        ell,
    )
}

fn check_products(products: &TransitionProducts, ell: usize) -> Result<()> {
    if ell > products.extent() {
        return Err(Error::dim("transition products", products.extent(), ell, products.extent()));
    }
    Ok(())
}

/// `ε̂_N(β_ns) = 2^{(p−1)/p}(𝔐_w + 𝔐_v + 𝔐_v α_p⁻¹(𝔯² ln(2/β_ns)/(c′N)))`.
pub fn noise_radius(fc: &FrakConstants, n: usize, beta_ns: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    if !(beta_ns > 0.0 && beta_ns < 1.0) {
        return Err(Error::InvalidArgument(format!("β_ns = {beta_ns} must lie in (0, 1)")));
    }
    let arg = fc.frak_r * fc.frak_r / (C_PRIME * n as f64) * (2.0 / beta_ns).ln();
    let scale = 2f64.powf((fc.p - 1.0) / fc.p);
    Ok(scale * (fc.big_m_w + fc.big_m_v + fc.big_m_v * alpha_p_inverse(arg, fc.p)?))
}

/// Support radius `√d‖Φ_ℓ‖ρ_{ξ₀} + √q Σ_k ‖Φ_{ℓ,ℓ−k+1}G_{ℓ−k}‖ρ_w` of the state at time `ell`.
pub fn rho_xi_ell(sys: &LtvSystem, products: &TransitionProducts, rho_xi0: f64, rho_w: f64, ell: usize) -> Result<f64> {
    check_products(products, ell)?;
    let d = sys.d() as f64;
    let q = sys.q() as f64;
    let sum: f64 = (1..=ell)
        .map(|k| spectral_norm(&(products.phi(ell, ell - k + 1) * sys.g(ell - k))))
        .sum();
    Ok(d.sqrt() * spectral_norm(products.phi(ell, 0)) * rho_xi0 + q.sqrt() * sum * rho_w)
}

/// Sup-norm support radius `‖Φ_ℓ‖_∞ρ_{ξ₀} + Σ_k ‖Φ_{ℓ,ℓ−k+1}G_{ℓ−k}‖_∞ρ_w`.
pub fn rho_xi_ell_box(products: &TransitionProducts, sys: &LtvSystem, rho_xi0: f64, rho_w: f64, ell: usize) -> Result<f64> {
    check_products(products, ell)?;
    let sum: f64 = (1..=ell)
        .map(|k| inf_norm(&(products.phi(ell, ell - k + 1) * sys.g(ell - k))))
        .sum();
    Ok(inf_norm(products.phi(ell, 0)) * rho_xi0 + sum * rho_w)
}

/// Components of an assembled radius `ψ_N = ε_N(β_nom) + ε̂_N(β_ns)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusBreakdown {
    pub split: ConfidenceSplit,
    pub eps_nominal: f64,
    pub eps_noise: f64,
    pub psi_total: f64,
    pub rho_xi_ell: f64,
    pub frak: FrakConstants,
    pub nominal: NominalProvenance,
}

/// Everything needed to evaluate radii for one system, observer and noise model.
#[derive(Clone, Copy, Debug)]
pub struct RadiusModel<'a> {
    pub sys: &'a LtvSystem,
    pub obs: &'a ObserverDesign,
    pub products: &'a TransitionProducts,
    pub bounds: NoiseNormBounds,
    pub rho_xi0: f64,
    pub rho_w: f64,
    pub constants: NominalConstants,
}

impl<'a> RadiusModel<'a> {
    pub fn new(
        sys: &'a LtvSystem,
        obs: &'a ObserverDesign,
        products: &'a TransitionProducts,
        bounds: NoiseNormBounds,
        rho_xi0: f64,
        rho_w: f64,
    ) -> Self {
        RadiusModel {
            sys,
            obs,
            products,
            bounds,
            rho_xi0,
            rho_w,
            constants: NominalConstants::Explicit,
        }
    }

    pub fn with_constants(mut self, constants: NominalConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn p(&self) -> f64 {
        self.bounds.p
    }

    pub fn frak(&self, ell: usize) -> Result<FrakConstants> {
        frak_constants(self.sys, self.obs, self.products, &self.bounds, self.rho_xi0, self.rho_w, ell)
    }

    /// The smaller of the Euclidean and sup-norm support radii at `ell`.
    pub fn support_radius(&self, ell: usize) -> Result<f64> {
        let euclid = rho_xi_ell(self.sys, self.products, self.rho_xi0, self.rho_w, ell)?;
        let boxed = rho_xi_ell_box(self.products, self.sys, self.rho_xi0, self.rho_w, ell)?;
        Ok(euclid.min(boxed))
    }

    /// `ψ_N` at time `ell` for a fixed confidence split.
    pub fn total_radius(&self, ell: usize, n: usize, split: ConfidenceSplit) -> Result<RadiusBreakdown> {
        let fc = self.frak(ell)?;
        let rho = self.support_radius(ell)?;
        self.assemble(fc, rho, self.sys.d(), n, split)
    }

    /// Radius for the stacked states over `[ell1:ell2]`.
    pub fn horizon_radius(&self, ell1: usize, ell2: usize, n: usize, split: ConfidenceSplit) -> Result<RadiusBreakdown> {
        if ell1 > ell2 {
            return Err(Error::InvalidArgument(format!("horizon [{ell1}:{ell2}] is empty")));
        }
        let mut sums = [0.0; 4];
        let mut rho: f64 = 0.0;
        for ell in ell1..=ell2 {
            let fc = self.frak(ell)?;
            sums[0] += fc.big_m_w;
            sums[1] += fc.big_m_v;
            sums[2] += fc.c_v;
            sums[3] += fc.m_v;
            rho = rho.max(self.support_radius(ell)?);
        }
        let fc = FrakConstants::from_parts(sums[0], sums[1], sums[2], sums[3], self.p(), ell2)?;
        let dim = (ell2 - ell1 + 1) * self.sys.d();
        self.assemble(fc, rho, dim, n, split)
    }

    /// `ψ_N` at `ell` with the confidence split chosen by [`optimal_split`].
    pub fn optimal_total_radius(&self, ell: usize, n: usize, beta: f64) -> Result<RadiusBreakdown> {
        let fc = self.frak(ell)?;
        let rho = self.support_radius(ell)?;
        let d = self.sys.d();
        let split = optimal_split(beta, |s| {
            self.assemble(fc, rho, d, n, *s)
                .map(|b| b.psi_total)
                .unwrap_or(f64::INFINITY)
        })?;
        self.assemble(fc, rho, d, n, split)
    }

    fn assemble(&self, fc: FrakConstants, rho: f64, dim: usize, n: usize, split: ConfidenceSplit) -> Result<RadiusBreakdown> {
        let (eps_nominal, nominal) = nominal_radius(n, split.beta_nom, rho, dim, self.p(), self.constants)?;
        let eps_noise = noise_radius(&fc, n, split.beta_ns)?;
        Ok(RadiusBreakdown {
            split,
            eps_nominal,
            eps_noise,
            psi_total: eps_nominal + eps_noise,
            rho_xi_ell: rho,
            frak: fc,
            nominal,
        })
    }
}

const SPLIT_GRID: usize = 64;
const SPLIT_LOGIT_SPAN: f64 = 14.0;

/// Minimizes `radius(split)` over `β_nom ∈ (0, β)`.
///
/// `β_nom = β·σ(t)` with `σ` the logistic function; the best of 64 grid
/// points in `t` seeds a golden-section search on the neighbouring cells.
pub fn optimal_split<F>(beta: f64, radius: F) -> Result<ConfidenceSplit>
where
    F: Fn(&ConfidenceSplit) -> f64,
{
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("β = {beta} must lie in (0, 1)")));
    }
    let split_at = |t: f64| ConfidenceSplit::from_nominal(beta, beta / (1.0 + (-t).exp()));
    let eval = |t: f64| split_at(t).map(|s| radius(&s)).unwrap_or(f64::INFINITY);
    let step = 2.0 * SPLIT_LOGIT_SPAN / (SPLIT_GRID - 1) as f64;
    let grid: Vec<f64> = (0..SPLIT_GRID).map(|i| -SPLIT_LOGIT_SPAN + step * i as f64).collect();
    let (best_i, best_val) = grid
        .iter()
        .map(|&t| eval(t))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let lo = grid[best_i.saturating_sub(1)];
    let hi = grid[(best_i + 1).min(SPLIT_GRID - 1)];
    let (t, val) = golden_section(eval, lo, hi, 1e-9, 200);
    let t = if val <= best_val { t } else { grid[best_i] };
    split_at(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_breakpoint_and_examples() {
        assert_eq!(alpha_p(1.0, 3.0).unwrap(), 1.0);
        assert_eq!(alpha_p(0.5, 2.0).unwrap(), 0.25);
        assert_eq!(alpha_p_inverse(0.25, 2.0).unwrap(), 0.5);
        assert_eq!(alpha_p(2.0, 3.0).unwrap(), 8.0);
        assert!(alpha_p(-1.0, 2.0).is_err());
        assert!(alpha_p_inverse(-1.0, 2.0).is_err());
    }

    #[test]
    fn split_identity() {
        let s = ConfidenceSplit::from_nominal(0.1, 0.03).unwrap();
        assert!(((1.0 - s.beta) - (1.0 - s.beta_nom) * (1.0 - s.beta_ns)).abs() < 1e-15);
        let e = ConfidenceSplit::equal(0.1).unwrap();
        assert!((e.beta_nom - e.beta_ns).abs() < 1e-15);
        assert!(((1.0 - e.beta_nom).powi(2) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn frak_r_convention() {
        let fc = FrakConstants::from_parts(1.0, 0.0, 0.0, 0.0, 2.0, 3).unwrap();
        assert!((fc.frak_r - 1.0 / std::f64::consts::LN_2).abs() < 1e-15);
        assert!(FrakConstants::from_parts(1.0, 1.0, 1.0, 0.0, 2.0, 3).is_err());
        assert!(FrakConstants::from_parts(1.0, 1.0, 1.0, 2.0, 2.0, 3).is_err());
    }
}
