use crate::distributions::NoiseNormBounds;
use crate::linalg::spectral_norm;
use crate::system::{LtvSystem, MatrixBoundCertificate, ObserverDesign};
use crate::{Error, Result};

use super::{alpha_p, C_PRIME};

/// Bounds on `𝔐_w`, `𝔐_v` and `𝔯` valid for every time index past the
/// contraction horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformNoiseBounds {
    pub big_m_w: f64,
    pub big_m_v: f64,
    pub frak_r: f64,
    pub s0: usize,
}

/// Uniform bounds from a matrix-bound certificate.
///
/// For time-invariant systems the sharper sums `Σ_{k<s₀}‖F^kG‖` and
/// `Σ_{k<s₀}‖F^kK‖` with factor 2 are used instead of the certificate.
#[allow(clippy::too_many_arguments)]
pub fn uniform_noise_bounds(
    sys: &LtvSystem,
    obs: &ObserverDesign,
    cert: &MatrixBoundCertificate,
    bounds: &NoiseNormBounds,
    rho_xi0: f64,
    rho_w: f64,
    time_invariant: bool,
) -> Result<UniformNoiseBounds> {
    let s0 = cert.s0;
    if s0 == 0 {
        return Err(Error::InvalidArgument("certificate has no contraction horizon".into()));
    }
    let d = sys.d() as f64;
    let q = sys.q() as f64;
    let r = sys.r() as f64;
    let p = bounds.p;
    let base = 0.5 * d.sqrt() * rho_xi0;
    let tail = |x: f64| if bounds.ratio() == 0.0 { 0.0 } else { x };
    if time_invariant {
        if !(sys.is_time_invariant() && obs.gain_schedule().is_constant()) {
            return Err(Error::InvalidArgument(
                "time-invariant bounds need constant system and gain matrices".into(),
            ));
        }
        let f = obs.f(0);
        let mut power = nalgebra::DMatrix::<f64>::identity(sys.d(), sys.d());
        let (mut sum_g, mut sum_k, mut sum_kp) = (0.0, 0.0, 0.0);
        for _ in 0..s0 {
            sum_g += spectral_norm(&(&power * sys.g(0)));
            let kn = spectral_norm(&(&power * obs.k(0)));
            sum_k += kn;
            sum_kp += kn.powf(p);
            power = f * power;
        }
        Ok(UniformNoiseBounds {
            big_m_w: base + 2.0 * q.sqrt() * sum_g * rho_w,
            big_m_v: 2.0 * bounds.big_m_v * r * sum_k,
            frak_r: tail(2.0 * bounds.ratio() * r.powf((p - 1.0) / p) * sum_k / sum_kp.powf(1.0 / p))
                + 1.0 / std::f64::consts::LN_2,
            s0,
        })
    } else {
        if cert.psi_star.len() < s0 {
            return Err(Error::dim("certificate shifts", 0, s0.to_string(), cert.psi_star.len().to_string()));
        }
        let psi_sum: f64 = cert.psi_star[..s0].iter().sum();
        if !(cert.k_star_lower > 0.0) {
            return Err(Error::InvalidArgument("certificate gain lower bound must be positive".into()));
        }
        Ok(UniformNoiseBounds {
            big_m_w: base + 3.0 * q.sqrt() * psi_sum * cert.g_star * rho_w,
            big_m_v: 3.0 * bounds.big_m_v * r * psi_sum * cert.k_star_upper,
            frak_r: tail(
                3.0 * bounds.ratio() * r.powf((p - 1.0) / p) * psi_sum * cert.k_star_upper / cert.k_star_lower,
            ) + 1.0 / std::f64::consts::LN_2,
            s0,
        })
    }
}

/// `2 exp(−c′Nα_p(t)/R²)`, the tail bound for the deviation of the empirical
/// `p`-th mean of i.i.d. variables with unit `p`-th moment.
pub fn concentration_tail_bound(n: usize, t: f64, p: f64, frak_r: f64) -> Result<f64> {
    if !(frak_r > 0.0) {
        return Err(Error::InvalidArgument(format!("R = {frak_r} must be positive")));
    }
    Ok(2.0 * (-C_PRIME * n as f64 * alpha_p(t, p)? / (frak_r * frak_r)).exp())
}
