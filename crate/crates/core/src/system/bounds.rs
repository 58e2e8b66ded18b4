use std::ops::Range;

use super::{LtvSystem, ObserverDesign, TransitionProducts};
use crate::linalg::{spectral_norm, spectral_radius};
use crate::{Error, Result};

const CONTRACTION_LEVEL: f64 = 0.5;
const MAX_DEFAULT_CAP: usize = 10_000;

/// Default search cap for [`contraction_horizon`]: `10·d·s̄`, where `s̄` is the
/// number of steps after which `ρ^s ≤ ½` for the spectral radius `ρ` of the
/// one-period error transition (or 10 if that radius is not below one).
pub fn default_contraction_cap(sys: &LtvSystem, obs: &ObserverDesign) -> usize {
    let period = match obs.f_schedule() {
        super::Schedule::Periodic(ms) => ms.len(),
        _ => 1,
    };
    let mut m = nalgebra::DMatrix::<f64>::identity(sys.d(), sys.d());
    for k in 0..period {
        m = obs.f(k) * m;
    }
    let rho = spectral_radius(&m).powf(1.0 / period as f64);
    let steps = if rho > 0.0 && rho < 1.0 {
        ((0.5f64).ln() / rho.ln()).ceil().max(1.0) as usize
    } else if rho == 0.0 {
        1
    } else {
        10
    };
    (10 * sys.d() * steps).min(MAX_DEFAULT_CAP)
}

/// Smallest `s₀ ≥ 1` such that `‖Ψ_{k+s,k}‖ ≤ ½` for every `k` in `k_range`
/// and every `s ∈ [s₀:cap]`.
pub fn contraction_horizon(
    products: &TransitionProducts,
    k_range: Range<usize>,
    cap: usize,
) -> Result<usize> {
    if k_range.is_empty() || cap == 0 {
        return Err(Error::InvalidArgument("empty contraction search range".into()));
    }
    let k_last = k_range.end - 1;
    if k_last + cap > products.extent() {
        return Err(Error::dim(
            "transition products",
            products.extent(),
            k_last + cap,
            products.extent(),
        ));
    }
    let contracts = |s: usize| {
        k_range
            .clone()
            .all(|k| spectral_norm(products.psi(k + s, k)) <= CONTRACTION_LEVEL)
    };
    let mut s0 = None;
    for s in (1..=cap).rev() {
        if contracts(s) {
            s0 = Some(s);
        } else {
            break;
        }
    }
    s0.ok_or(Error::NoContraction { cap })
}

/// Uniform matrix bounds verified on a finite range of start indices.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixBoundCertificate {
    pub g_star: f64,
    pub k_star_lower: f64,
    pub k_star_upper: f64,
    /// `psi_star[s] = max_k ‖Ψ_{k+s,k}‖`.
    pub psi_star: Vec<f64>,
    pub s0: usize,
}

/// Tight suprema and infima of `‖G_k‖`, `‖K_k‖` and `‖Ψ_{k+s,k}‖` over
/// `k ∈ k_range`. Shifts `s` run as far as the products allow. The contraction
/// horizon is taken from the observer, or computed over the available shifts.
pub fn matrix_bound_certificate(
    sys: &LtvSystem,
    obs: &ObserverDesign,
    products: &TransitionProducts,
    k_range: Range<usize>,
) -> Result<MatrixBoundCertificate> {
    if k_range.is_empty() {
        return Err(Error::InvalidArgument("empty certificate range".into()));
    }
    let k_last = k_range.end - 1;
    if k_last > products.extent() {
        return Err(Error::dim("transition products", products.extent(), k_last, products.extent()));
    }
    let g_star = k_range
        .clone()
        .map(|k| spectral_norm(sys.g(k)))
        .fold(0.0, f64::max);
    let gain_norms: Vec<f64> = k_range.clone().map(|k| spectral_norm(obs.k(k))).collect();
    let k_star_lower = gain_norms.iter().copied().fold(f64::INFINITY, f64::min);
    let k_star_upper = gain_norms.iter().copied().fold(0.0, f64::max);
    let max_shift = products.extent() - k_last;
    let psi_star: Vec<f64> = (0..=max_shift)
        .map(|s| {
            k_range
                .clone()
                .map(|k| spectral_norm(products.psi(k + s, k)))
                .fold(0.0, f64::max)
        })
        .collect();
    let s0 = match obs.contraction_horizon() {
        Some(s0) => s0,
        None => contraction_horizon(products, k_range, max_shift.max(1))?,
    };
    Ok(MatrixBoundCertificate {
        g_star,
        k_star_lower,
        k_star_upper,
        psi_star,
        s0,
    })
}
