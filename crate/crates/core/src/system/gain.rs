use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{LtvSystem, ObserverDesign, Schedule};
use crate::linalg::{
    eigenvalues, min_symmetric_eigenvalue, rank_complex, spectral_radius, to_complex,
};
use crate::{Error, Result};

/// Default lower bound on the smallest eigenvalue of the observability Gramian.
pub const GRAMIAN_TOLERANCE: f64 = 1e-6;

const PBH_RANK_TOLERANCE: f64 = 1e-8;
const SDA_MAX_ITER: usize = 200;
const SDA_TOLERANCE: f64 = 1e-14;

/// Surrogate covariances for the steady-state filter gain.
#[derive(Clone, Debug)]
pub struct FilterDesign {
    /// State-space process covariance (`d × d`, positive semidefinite).
    pub process_cov: DMatrix<f64>,
    /// Measurement covariance (`r × r`, positive definite).
    pub measurement_cov: DMatrix<f64>,
}

impl FilterDesign {
    pub fn new(process_cov: DMatrix<f64>, measurement_cov: DMatrix<f64>) -> Self {
        FilterDesign {
            process_cov,
            measurement_cov,
        }
    }

    /// Identity covariances of the right sizes.
    pub fn identity(d: usize, r: usize) -> Self {
        Self::new(DMatrix::identity(d, d), DMatrix::identity(r, r))
    }
}

/// PBH test: every eigenvalue of `A` with modulus ≥ 1 must be observable through `H`.
pub fn check_detectable(a: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<()> {
    let d = a.nrows();
    for lambda in eigenvalues(a) {
        if lambda.norm() < 1.0 {
            continue;
        }
        let mut pbh = DMatrix::<Complex64>::zeros(d + h.nrows(), d);
        let shifted = DMatrix::<Complex64>::identity(d, d) * lambda - to_complex(a);
        pbh.view_mut((0, 0), (d, d)).copy_from(&shifted);
        pbh.view_mut((d, 0), (h.nrows(), d)).copy_from(&to_complex(h));
        if rank_complex(&pbh, PBH_RANK_TOLERANCE) < d {
            return Err(Error::NotDetectable {
                re: lambda.re,
                im: lambda.im,
                modulus: lambda.norm(),
            });
        }
    }
    Ok(())
}

/// Stabilizing solution of `P = APAᵀ − APHᵀ(HPHᵀ+R)⁻¹HPAᵀ + Q` by the
/// structure-preserving doubling iteration.
fn filter_riccati(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let r_inv = r
        .clone()
        .cholesky()
        .ok_or_else(|| Error::GainDesign("measurement covariance is not positive definite".into()))?
        .inverse();
    let mut ak = a.transpose();
    let mut gk = h.transpose() * r_inv * h;
    let mut hk = q.clone();
    let eye = DMatrix::<f64>::identity(d, d);
    for _ in 0..SDA_MAX_ITER {
        let w = &eye + &gk * &hk;
        let lu = w.lu();
        let w_inv_a = lu
            .solve(&ak)
            .ok_or_else(|| Error::GainDesign("singular doubling step".into()))?;
        let w_inv_g = lu
            .solve(&gk)
            .ok_or_else(|| Error::GainDesign("singular doubling step".into()))?;
        let a_next = &ak * &w_inv_a;
        let g_next = &gk + &ak * &w_inv_g * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &w_inv_a;
        let change = (&h_next - &hk).norm();
        let scale = h_next.norm().max(1e-300);
        ak = a_next;
        gk = (&g_next + g_next.transpose()) * 0.5;
        hk = (&h_next + h_next.transpose()) * 0.5;
        if change <= SDA_TOLERANCE * scale {
            return Ok(hk);
        }
    }
    Err(Error::GainDesign("Riccati doubling iteration did not converge".into()))
}

/// Constant steady-state filter gain for a time-invariant detectable pair.
///
/// The gain is `K = −APHᵀ(HPHᵀ+R)⁻¹` with `P` the stabilizing Riccati
/// solution, so that `F = A + KH` is Schur stable.
pub fn design_gain_time_invariant(sys: &LtvSystem, spec: &FilterDesign) -> Result<ObserverDesign> {
    if !sys.is_time_invariant() {
        return Err(Error::InvalidArgument(
            "time-invariant gain design requires constant system matrices".into(),
        ));
    }
    let (a, h) = (sys.a(0), sys.h(0));
    let (d, r) = (sys.d(), sys.r());
    if spec.process_cov.shape() != (d, d) {
        return Err(Error::dim("process covariance", 0, format!("{d}x{d}"), format!("{:?}", spec.process_cov.shape())));
    }
    if spec.measurement_cov.shape() != (r, r) {
        return Err(Error::dim("measurement covariance", 0, format!("{r}x{r}"), format!("{:?}", spec.measurement_cov.shape())));
    }
    check_detectable(a, h)?;
    let p = filter_riccati(a, h, &spec.process_cov, &spec.measurement_cov)?;
    let s = h * &p * h.transpose() + &spec.measurement_cov;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::GainDesign("innovation covariance is singular".into()))?;
    let gain = -(a * &p * h.transpose() * s_inv);
    let f = a + &gain * h;
    let rho = spectral_radius(&f);
    if rho >= 1.0 {
        return Err(Error::GainDesign(format!(
            "filter gain leaves spectral radius {rho} ≥ 1; increase the process covariance"
        )));
    }
    ObserverDesign::new(sys, Schedule::Constant(gain))
}

/// Gramian-based gain `K_k = −A_k Φ_{k,k−t−1} O_{k,k−t−1}⁻¹ Φ_{k,k−t−1}ᵀ H_kᵀ`
/// over `[0:ℓ]`, using the default Gramian tolerance.
pub fn design_gain_uniformly_observable(sys: &LtvSystem, t: usize) -> Result<ObserverDesign> {
    design_gain_uniformly_observable_with(sys, t, sys.horizon() + 1, GRAMIAN_TOLERANCE)
}

/// Gramian-based gain on `[0, extent)`.
///
/// The formula is defined for `k > t + 1`; earlier indices reuse the gain
/// at `k = t + 2`.
pub fn design_gain_uniformly_observable_with(
    sys: &LtvSystem,
    t: usize,
    extent: usize,
    tolerance: f64,
) -> Result<ObserverDesign> {
    let first = t + 2;
    if extent <= first {
        return Err(Error::InvalidArgument(format!(
            "extent {extent} leaves no index above t + 1 = {}",
            t + 1
        )));
    }
    if extent < sys.horizon() + 1 {
        return Err(Error::InvalidArgument(format!(
            "extent {extent} does not cover the horizon {}",
            sys.horizon()
        )));
    }
    if let Some(avail) = sys.extent() {
        if extent > avail {
            return Err(Error::dim("system schedule", avail, extent, avail));
        }
    }
    let d = sys.d();
    let mut gains = Vec::with_capacity(extent);
    for k in first..extent {
        let start = k - t - 1;
        let mut phi = DMatrix::<f64>::identity(d, d);
        let mut gram = DMatrix::<f64>::zeros(d, d);
        for i in start..=k {
            let hp = sys.h(i) * &phi;
            gram += hp.transpose() * &hp;
            if i < k {
                phi = sys.a(i) * phi;
            }
        }
        let lam = min_symmetric_eigenvalue(&gram);
        if lam < tolerance {
            return Err(Error::GramianDegenerate {
                k,
                eigenvalue: lam,
                tolerance,
            });
        }
        let gram_inv = gram
            .cholesky()
            .ok_or(Error::GramianDegenerate {
                k,
                eigenvalue: lam,
                tolerance,
            })?
            .inverse();
        let gain = -(sys.a(k) * &phi * gram_inv * phi.transpose() * sys.h(k).transpose());
        gains.push(gain);
    }
    let held = gains[0].clone();
    let mut schedule = vec![held; first];
    schedule.extend(gains);
    ObserverDesign::new(sys, Schedule::Finite(schedule))
}
