//! Noise and initial-condition models together with their `L^p` and Orlicz
//! `ψ_p` norms.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erf;

use crate::quadrature::integrate_pieces;
use crate::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-12;
const PSI_QUADRATURE_TOLERANCE: f64 = 1e-9;

/// A compactly supported law on `ℝⁿ`.
#[derive(Clone, Debug, PartialEq)]
pub enum CompactDistribution {
    PointMass(DVector<f64>),
    /// Independent uniform coordinates on `[lower_i, upper_i]`.
    UniformBox {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Independent blocks stacked into one vector.
    Product(Vec<CompactDistribution>),
    /// Finite mixture with nonnegative weights summing to one.
    Mixture(Vec<(f64, CompactDistribution)>),
    /// A law together with a declared support box that contains it.
    WithSupport {
        law: Box<CompactDistribution>,
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
}

impl CompactDistribution {
    pub fn point_mass(x: DVector<f64>) -> Self {
        CompactDistribution::PointMass(x)
    }

    pub fn uniform_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::dim("uniform box", 0, lower.len(), upper.len()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidArgument(format!(
                "uniform box has lower[{i}] = {} above upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(CompactDistribution::UniformBox { lower, upper })
    }

    /// Centered cube `[-half_width, half_width]^dim`.
    pub fn centered_cube(dim: usize, half_width: f64) -> Result<Self> {
        Self::uniform_box(
            DVector::from_element(dim, -half_width),
            DVector::from_element(dim, half_width),
        )
    }

    pub fn product(blocks: Vec<CompactDistribution>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("empty product".into()));
        }
        Ok(CompactDistribution::Product(blocks))
    }

    pub fn mixture(components: Vec<(f64, CompactDistribution)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty mixture".into()))?;
        let dim = first.1.dim();
        for (i, (w, c)) in components.iter().enumerate() {
            if !(*w >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative mixture weight at {i}")));
            }
            if c.dim() != dim {
                return Err(Error::dim("mixture component", i, dim, c.dim()));
            }
        }
        let sum: f64 = components.iter().map(|(w, _)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(CompactDistribution::Mixture(components))
    }

    /// Attaches a declared support box, which must contain the law's own hull.
    pub fn with_support(self, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let (lo, hi) = self.bounding_box();
        if lower.len() != lo.len() || upper.len() != hi.len() {
            return Err(Error::dim("declared support", 0, lo.len(), lower.len()));
        }
        for i in 0..lo.len() {
            if lower[i] > lo[i] || upper[i] < hi[i] {
                return Err(Error::InvalidArgument(format!(
                    "declared support [{}, {}] does not contain [{}, {}] in coordinate {i}",
                    lower[i], upper[i], lo[i], hi[i]
                )));
            }
        }
        Ok(CompactDistribution::WithSupport {
            law: Box::new(self),
            lower,
            upper,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            CompactDistribution::PointMass(x) => x.len(),
            CompactDistribution::UniformBox { lower, .. } => lower.len(),
            CompactDistribution::Product(blocks) => blocks.iter().map(|b| b.dim()).sum(),
            CompactDistribution::Mixture(cs) => cs[0].1.dim(),
            CompactDistribution::WithSupport { lower, .. } => lower.len(),
        }
    }

    /// Coordinatewise bounds of the support (exact for boxes and point
    /// masses, the hull of the components for mixtures).
    pub fn bounding_box(&self) -> (DVector<f64>, DVector<f64>) {
        match self {
            CompactDistribution::PointMass(x) => (x.clone(), x.clone()),
            CompactDistribution::UniformBox { lower, upper } => (lower.clone(), upper.clone()),
            CompactDistribution::Product(blocks) => {
                let (mut lo, mut hi) = (Vec::new(), Vec::new());
                for b in blocks {
                    let (l, h) = b.bounding_box();
                    lo.extend(l.iter());
                    hi.extend(h.iter());
                }
                (DVector::from_vec(lo), DVector::from_vec(hi))
            }
            CompactDistribution::Mixture(cs) => {
                let (mut lo, mut hi) = cs[0].1.bounding_box();
                for (_, c) in &cs[1..] {
                    let (l, h) = c.bounding_box();
                    lo = lo.zip_map(&l, f64::min);
                    hi = hi.zip_map(&h, f64::max);
                }
                (lo, hi)
            }
            CompactDistribution::WithSupport { lower, upper, .. } => (lower.clone(), upper.clone()),
        }
    }

    /// `ρ = ½·diam_∞` of the support.
    pub fn half_diameter(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).iter().fold(0.0, |m, w| m.max(0.5 * w))
    }

    /// Smallest `ρ` with the support inside the origin-centered cube `B_∞(ρ)`.
    pub fn sup_radius(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        lo.iter().chain(hi.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Midpoint of the bounding box.
    pub fn center(&self) -> DVector<f64> {
        let (lo, hi) = self.bounding_box();
        (lo + hi) * 0.5
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            CompactDistribution::PointMass(x) => x.clone(),
            CompactDistribution::UniformBox { lower, upper } => {
                DVector::from_fn(lower.len(), |i, _| {
                    let u: f64 = rng.random();
                    lower[i] + (upper[i] - lower[i]) * u
                })
            }
            CompactDistribution::Product(blocks) => {
                let mut out = Vec::with_capacity(self.dim());
                for b in blocks {
                    out.extend(b.sample(rng).iter());
                }
                DVector::from_vec(out)
            }
            CompactDistribution::Mixture(cs) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, c) in cs {
                    acc += w;
                    if u < acc {
                        return c.sample(rng);
                    }
                }
                cs.last().expect("nonempty mixture").1.sample(rng)
            }
            CompactDistribution::WithSupport { law, .. } => law.sample(rng),
        }
    }

    /// `count` i.i.d. draws from a ChaCha stream seeded with `seed`.
    pub fn sample_n(&self, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }
}

/// One component `(weight, mean, std)` of a scalar Gaussian mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    /// Zero is allowed and denotes a point mass at `mean`.
    pub std: f64,
}

/// Scalar Gaussian mixture `Σ c_i N(μ_i, σ_i²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianMixture1D {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture1D {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("empty Gaussian mixture".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if !(c.weight >= 0.0) || !(c.std >= 0.0) || !c.mean.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "invalid Gaussian component {i}: {c:?}"
                )));
            }
        }
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(GaussianMixture1D { components })
    }

    pub fn normal(mean: f64, std: f64) -> Result<Self> {
        Self::new(vec![GaussianComponent { weight: 1.0, mean, std }])
    }

    /// The symmetric two-component mixture `½N(μ, σ²) + ½N(−μ, σ²)`.
    pub fn symmetric_pair(mean: f64, std: f64) -> Result<Self> {
        Self::new(vec![
            GaussianComponent { weight: 0.5, mean, std },
            GaussianComponent { weight: 0.5, mean: -mean, std },
        ])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().expect("nonempty");
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = rng.sample(StandardNormal);
        chosen.mean + chosen.std * z
    }

    /// `(E|X|^p)^{1/p}`: closed form for `p ∈ {1, 2}`, quadrature otherwise.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} must be at least 1")));
        }
        if p == 2.0 {
            let m2: f64 = self
                .components
                .iter()
                .map(|c| c.weight * (c.mean * c.mean + c.std * c.std))
                .sum();
            return Ok(m2.sqrt());
        }
        if p == 1.0 {
            return Ok(self
                .components
                .iter()
                .map(|c| c.weight * folded_normal_mean(c.mean, c.std))
                .sum());
        }
        let mut moment = 0.0;
        for c in &self.components {
            let m = if c.std == 0.0 {
                c.mean.abs().powf(p)
            } else {
                let pdf = normal_pdf(c.mean, c.std);
                let lo = c.mean - 40.0 * c.std;
                let hi = c.mean + 40.0 * c.std;
                let mut breaks = vec![lo];
                if lo < 0.0 && hi > 0.0 {
                    breaks.push(0.0);
                }
                breaks.push(hi);
                let scale = c.mean.abs().max(c.std).powf(p);
                integrate_pieces(|x| x.abs().powf(p) * pdf(x), &breaks, 1e-13 * scale, 1e-13)?.0
            };
            moment += c.weight * m;
        }
        Ok(moment.powf(1.0 / p))
    }

    /// Upper bound `max_i σ_i√(8/3) + |μ_i|/√(ln 2)` on the `ψ₂` norm.
    pub fn psi2_bound(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.std * (8.0f64 / 3.0).sqrt() + c.mean.abs() / std::f64::consts::LN_2.sqrt())
            .fold(0.0, f64::max)
    }

    /// `E[exp((|X|/t)^p)]`, or `+∞` when the expectation diverges.
    pub fn orlicz_expectation(&self, t: f64, p: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("t = {t} must be positive")));
        }
        let mut total = 0.0;
        for c in &self.components {
            if c.weight == 0.0 {
                continue;
            }
            let e = if c.std == 0.0 {
                (c.mean.abs() / t).powf(p).exp()
            } else if p > 2.0 || (p == 2.0 && 2.0 * c.std * c.std >= t * t) {
                f64::INFINITY
            } else {
                gaussian_orlicz_expectation(c.mean, c.std, t, p)?
            };
            total += c.weight * e;
        }
        Ok(total)
    }

    /// Whether `E[exp((|X|/t)^p)] ≤ 2` up to the quadrature tolerance.
    pub fn verify_psi_norm_bound(&self, t: f64, p: f64) -> Result<bool> {
        Ok(self.orlicz_expectation(t, p)? <= 2.0 + PSI_QUADRATURE_TOLERANCE)
    }

    /// The Orlicz norm `inf{t > 0 : E[exp((|X|/t)^p)] ≤ 2}` by bisection.
    pub fn psi_norm(&self, p: f64) -> Result<f64> {
        let scale = self
            .components
            .iter()
            .map(|c| c.mean.abs() + c.std)
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(0.0);
        }
        let mut hi = scale;
        let mut guard = 0;
        while self.orlicz_expectation(hi, p)? > 2.0 {
            hi *= 2.0;
            guard += 1;
            if guard > 200 {
                return Err(Error::RootFinding("no finite Orlicz norm".into()));
            }
        }
        let mut lo = hi / 2.0;
        while lo > 1e-300 && self.orlicz_expectation(lo, p)? <= 2.0 {
            hi = lo;
            lo /= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.orlicz_expectation(mid, p)? > 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        Ok(hi)
    }
}

fn normal_pdf(mean: f64, std: f64) -> impl Fn(f64) -> f64 {
    let norm = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
    move |x| {
        let z = (x - mean) / std;
        norm * (-0.5 * z * z).exp()
    }
}

fn folded_normal_mean(mean: f64, std: f64) -> f64 {
    if std == 0.0 {
        return mean.abs();
    }
    let z = mean / std;
    std * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * z * z).exp()
        + mean * erf(z / std::f64::consts::SQRT_2)
}

/// `E[exp((|X|/t)^p)]` for `X ~ N(μ, σ²)` with `p ≤ 2` (and `2σ² < t²` if `p = 2`).
///
/// The integrand is integrated in log-space-shifted form over a window that
/// is widened until the log-integrand at both ends lies 60 nats below its peak.
fn gaussian_orlicz_expectation(mean: f64, std: f64, t: f64, p: f64) -> Result<f64> {
    let log_integrand = |x: f64| (x.abs() / t).powf(p) - 0.5 * ((x - mean) / std).powi(2);
    let peak_guess = if p == 2.0 {
        mean / (1.0 - 2.0 * std * std / (t * t))
    } else {
        mean
    };
    let width_scale = if p == 2.0 {
        std / (1.0 - 2.0 * std * std / (t * t)).sqrt()
    } else {
        std
    };
    let mut half = 12.0 * width_scale;
    let mut peak = log_integrand(peak_guess).max(log_integrand(mean));
    loop {
        let lo = peak_guess.min(mean) - half;
        let hi = peak_guess.max(mean) + half;
        for i in 0..=64 {
            let x = lo + (hi - lo) * i as f64 / 64.0;
            peak = peak.max(log_integrand(x));
        }
        if log_integrand(lo) < peak - 60.0 && log_integrand(hi) < peak - 60.0 {
            break;
        }
        half *= 2.0;
        if !half.is_finite() || half > 1e12 * width_scale {
            return Err(Error::Quadrature {
                error: f64::INFINITY,
                intervals: 0,
            });
        }
    }
    let lo = peak_guess.min(mean) - half;
    let hi = peak_guess.max(mean) + half;
    let mut breaks = vec![lo];
    for x in [0.0, mean, peak_guess] {
        if x > lo && x < hi && !breaks.contains(&x) {
            breaks.push(x);
        }
    }
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    let norm = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
    let shifted = |x: f64| (log_integrand(x) - peak).exp();
    let factor = norm * peak.exp();
    let tol = PSI_QUADRATURE_TOLERANCE * 1e-3 / factor;
    let (value, error) = integrate_pieces(shifted, &breaks, tol, 1e-14)?;
    let result = value * factor;
    if error * factor > PSI_QUADRATURE_TOLERANCE {
        return Err(Error::Quadrature {
            error: error * factor,
            intervals: breaks.len(),
        });
    }
    Ok(result)
}

/// Envelope `m_v ≤ ‖v‖_p ≤ M_v`, `‖v‖_{ψ_p} ≤ C_v` on the measurement noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseNormBounds {
    pub m_v: f64,
    pub big_m_v: f64,
    pub c_v: f64,
    pub p: f64,
}

impl NoiseNormBounds {
    pub fn new(m_v: f64, big_m_v: f64, c_v: f64, p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} must be at least 1")));
        }
        if !(c_v >= 0.0) || !(big_m_v >= 0.0) || !(m_v >= 0.0) {
            return Err(Error::InvalidArgument("noise norm bounds must be nonnegative".into()));
        }
        if m_v > big_m_v {
            return Err(Error::InvalidArgument(format!(
                "lower bound m_v = {m_v} exceeds upper bound M_v = {big_m_v}"
            )));
        }
        if m_v == 0.0 && c_v > 0.0 {
            return Err(Error::InvalidArgument(
                "m_v must be positive when C_v is positive".into(),
            ));
        }
        Ok(NoiseNormBounds { m_v, big_m_v, c_v, p })
    }

    /// Noise-free measurements.
    pub fn zero(p: f64) -> Self {
        NoiseNormBounds { m_v: 0.0, big_m_v: 0.0, c_v: 0.0, p }
    }

    /// `m_v = M_v = ‖v‖₂` and `C_v` from the per-component `ψ₂` bound (`p = 2`).
    pub fn from_gaussian_mixture(gm: &GaussianMixture1D) -> Result<Self> {
        let l2 = gm.lp_norm(2.0)?;
        Self::new(l2, l2, gm.psi2_bound(), 2.0)
    }

    /// `C_v/m_v`, with the convention that it vanishes when `C_v = 0`.
    pub fn ratio(&self) -> f64 {
        if self.c_v == 0.0 {
            0.0
        } else {
            self.c_v / self.m_v
        }
    }
}
