//! Nominal ambiguity radius: the sampling error between a compactly
//! supported law and its empirical measure.

use crate::{Error, Result};

/// `C⋆ = √d·2^{(d−2)/(2p)}·(1/(1−2^{p−d/2}) + 1/(1−2^{−p}))^{1/p}` for `p < d/2`.
pub fn explicit_constant(d: usize, p: f64) -> Result<f64> {
    check_regime(d, p)?;
    let df = d as f64;
    let bracket = 1.0 / (1.0 - 2f64.powf(p - df / 2.0)) + 1.0 / (1.0 - 2f64.powf(-p));
    Ok(df.sqrt() * 2f64.powf((df - 2.0) / (2.0 * p)) * bracket.powf(1.0 / p))
}

fn check_regime(d: usize, p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must be at least 1")));
    }
    if !(p < d as f64 / 2.0) {
        return Err(Error::InvalidArgument(format!(
            "explicit constants need p < d/2 (p = {p}, d = {d}); use the generic radius with user constants"
        )));
    }
    Ok(())
}

fn check_sample(n: usize, beta: f64, rho: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be positive".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("confidence parameter {beta} must lie in (0, 1)")));
    }
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!("half-diameter {rho} must be nonnegative")));
    }
    Ok(())
}

/// Coefficients of `ε_N = a·N^{−1/d} + b·(ln β⁻¹)^{1/(2p)}·N^{−1/(2p)}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplicitCoefficients {
    /// `2ρC⋆`.
    pub a: f64,
    /// `2ρ√d·2^{1/(2p)}`.
    pub b: f64,
}

pub fn explicit_coefficients(rho: f64, d: usize, p: f64) -> Result<ExplicitCoefficients> {
    let c = explicit_constant(d, p)?;
    let df = d as f64;
    Ok(ExplicitCoefficients {
        a: 2.0 * rho * c,
        b: 2.0 * rho * df.sqrt() * 2f64.powf(1.0 / (2.0 * p)),
    })
}

/// `ε_N(β, ρ) = 2ρ(C⋆N^{−1/d} + √d(2 ln β⁻¹)^{1/(2p)}N^{−1/(2p)})`, valid for `p < d/2`.
pub fn nominal_radius_explicit(n: usize, beta: f64, rho: f64, d: usize, p: f64) -> Result<f64> {
    check_sample(n, beta, rho)?;
    let coef = explicit_coefficients(rho, d, p)?;
    let nf = n as f64;
    Ok(coef.a * nf.powf(-1.0 / d as f64)
        + coef.b * (1.0 / beta).ln().powf(1.0 / (2.0 * p)) * nf.powf(-1.0 / (2.0 * p)))
}

/// Constants of the single-exponential form, returned as `(ln C^⋆, c^⋆)` with
/// `ln C^⋆ = C⋆^d/(2√d^d)` and `c^⋆ = 1/(2^d√d^d)`.
///
/// The logarithm is returned because `C^⋆` itself overflows for moderate `d`.
pub fn single_exponential_constants(d: usize, p: f64) -> Result<(f64, f64)> {
    let c = explicit_constant(d, p)?;
    let df = d as f64;
    let sqrt_d_pow = df.sqrt().powf(df);
    Ok((c.powf(df) / (2.0 * sqrt_d_pow), 1.0 / (2f64.powf(df) * sqrt_d_pow)))
}

/// `ε_N(β, ρ) = 2ρ(ln(C^⋆β⁻¹)/c^⋆)^{1/d}N^{−1/d}`, valid for `p < d/2`.
pub fn nominal_radius_single_exponential(n: usize, beta: f64, rho: f64, d: usize, p: f64) -> Result<f64> {
    check_sample(n, beta, rho)?;
    let (log_c, c_small) = single_exponential_constants(d, p)?;
    let df = d as f64;
    Ok(2.0 * rho * ((log_c + (1.0 / beta).ln()) / c_small).powf(1.0 / df) * (n as f64).powf(-1.0 / df))
}

/// `h(x) = x²/(ln(2 + 1/x))²`.
pub fn h(x: f64) -> f64 {
    let l = (2.0 + 1.0 / x).ln();
    x * x / (l * l)
}

/// Inverse of the strictly increasing `h` by bisection on `[1e−12, 1e12]`,
/// stopping at relative bracket width `1e−10`.
pub fn h_inverse(u: f64) -> Result<f64> {
    let (mut lo, mut hi) = (1e-12_f64, 1e12_f64);
    if !(u >= h(lo) && u <= h(hi)) {
        return Err(Error::RootFinding(format!("h⁻¹({u}) lies outside [1e-12, 1e12]")));
    }
    for _ in 0..1000 {
        let mid = if hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if h(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::RootFinding(format!("h⁻¹({u}) bisection stalled")))
}

/// Three-branch radius with caller-supplied constants `C`, `c`.
pub fn nominal_radius_generic(
    n: usize,
    beta: f64,
    rho: f64,
    d: usize,
    p: f64,
    big_c: f64,
    small_c: f64,
) -> Result<f64> {
    check_sample(n, beta, rho)?;
    if !(big_c > 0.0 && small_c > 0.0) {
        return Err(Error::InvalidArgument("constants C and c must be positive".into()));
    }
    let log_term = (big_c / beta).ln();
    if !(log_term > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "ln(C/β) = {log_term} must be positive"
        )));
    }
    let nf = n as f64;
    let half_d = d as f64 / 2.0;
    if p > half_d {
        Ok((log_term / small_c).powf(1.0 / (2.0 * p)) * rho * nf.powf(-1.0 / (2.0 * p)))
    } else if p == half_d {
        Ok(h_inverse(log_term / (small_c * nf))?.powf(1.0 / p) * rho)
    } else {
        let df = d as f64;
        Ok((log_term / small_c).powf(1.0 / df) * rho * nf.powf(-1.0 / df))
    }
}

/// Smallest integer dimension strictly above `2p`, used to embed a law on
/// `ℝᵈ` with `p ≥ d/2` into a space where the explicit constants apply.
pub fn embedding_dimension(d: usize, p: f64) -> usize {
    let needed = (2.0 * p).floor() as usize + 1;
    needed.max(d)
}

/// How the nominal radius is computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NominalConstants {
    /// Two-term explicit constants; for `p ≥ d/2` the law is first embedded
    /// (zero-padded) into dimension [`embedding_dimension`].
    Explicit,
    SingleExponential,
    Generic { big_c: f64, small_c: f64 },
}

/// Record of which constants produced a nominal radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NominalProvenance {
    pub constants: NominalConstants,
    /// Dimension actually used in the formula.
    pub dimension: usize,
}

/// Nominal radius with the chosen constants.
pub fn nominal_radius(
    n: usize,
    beta: f64,
    rho: f64,
    d: usize,
    p: f64,
    constants: NominalConstants,
) -> Result<(f64, NominalProvenance)> {
    match constants {
        NominalConstants::Explicit => {
            let dim = if p < d as f64 / 2.0 { d } else { embedding_dimension(d, p) };
            let eps = nominal_radius_explicit(n, beta, rho, dim, p)?;
            Ok((eps, NominalProvenance { constants, dimension: dim }))
        }
        NominalConstants::SingleExponential => {
            let dim = if p < d as f64 / 2.0 { d } else { embedding_dimension(d, p) };
            let eps = nominal_radius_single_exponential(n, beta, rho, dim, p)?;
            Ok((eps, NominalProvenance { constants, dimension: dim }))
        }
        NominalConstants::Generic { big_c, small_c } => {
            let eps = nominal_radius_generic(n, beta, rho, d, p, big_c, small_c)?;
            Ok((eps, NominalProvenance { constants, dimension: d }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_constant_d6_p2() {
        let c = explicit_constant(6, 2.0).unwrap();
        assert!((c - 2.0 * 6f64.sqrt() * (10.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_p() {
        assert!(nominal_radius_explicit(10, 0.1, 1.0, 4, 2.0).is_err());
    }

    #[test]
    fn h_inverse_small_and_large() {
        for u in [1e-6, 1e-3, 0.5, 10.0, 1e3] {
            let x = h_inverse(u).unwrap();
            assert!((h(x) - u).abs() <= 1e-8 * u, "u = {u}");
        }
    }

    #[test]
    fn embedding_dimension_exceeds_twice_p() {
        assert_eq!(embedding_dimension(2, 1.0), 3);
        assert_eq!(embedding_dimension(2, 2.0), 5);
        assert_eq!(embedding_dimension(6, 2.0), 6);
        assert_eq!(embedding_dimension(1, 1.5), 4);
    }
}
