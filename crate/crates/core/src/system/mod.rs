//! Linear time-varying plant, Luenberger observer and transition products.
//!
//! The plant is
//!
//! ```text
//! ξ_{k+1} = A_k ξ_k + G_k w_k,    ζ_k = H_k ξ_k + v_k,
//! ```
//!
//! and the observer, started from `ξ̂_0 = 0`, is
//! `ξ̂_{k+1} = A_k ξ̂_k + K_k (H_k ξ̂_k − ζ_k)` with error dynamics driven by
//! `F_k = A_k + K_k H_k`.

mod bounds;
mod gain;

pub use bounds::{
    contraction_horizon, default_contraction_cap, matrix_bound_certificate,
    MatrixBoundCertificate,
};
pub use gain::{
    check_detectable, design_gain_time_invariant, design_gain_uniformly_observable,
    design_gain_uniformly_observable_with, FilterDesign, GRAMIAN_TOLERANCE,
};

use nalgebra::{DMatrix, DVector};

use crate::linalg::spectral_norm;
use crate::{Error, Result};

/// Gains below this norm count as zero.
pub const ZERO_GAIN_TOLERANCE: f64 = 1e-12;

/// A time-indexed matrix sequence.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    Constant(DMatrix<f64>),
    /// Repeats with period equal to the number of entries.
    Periodic(Vec<DMatrix<f64>>),
    /// Defined only for `k < len`.
    Finite(Vec<DMatrix<f64>>),
}

impl Schedule {
    pub fn at(&self, k: usize) -> Option<&DMatrix<f64>> {
        match self {
            Schedule::Constant(m) => Some(m),
            Schedule::Periodic(ms) => ms.get(k % ms.len()),
            Schedule::Finite(ms) => ms.get(k),
        }
    }

    /// Number of indices for which the schedule is defined; `None` means all of ℕ₀.
    pub fn extent(&self) -> Option<usize> {
        match self {
            Schedule::Finite(ms) => Some(ms.len()),
            _ => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Schedule::Constant(_))
    }

    fn period(&self) -> Option<usize> {
        match self {
            Schedule::Constant(_) => Some(1),
            Schedule::Periodic(ms) => Some(ms.len()),
            Schedule::Finite(_) => None,
        }
    }

    fn entries(&self) -> &[DMatrix<f64>] {
        match self {
            Schedule::Constant(m) => std::slice::from_ref(m),
            Schedule::Periodic(ms) | Schedule::Finite(ms) => ms,
        }
    }

    /// Builds a schedule `k ↦ f(k)` whose structure is the coarsest one
    /// compatible with all `parts`: constant, periodic with the lcm period, or
    /// finite with the shortest extent.
    pub fn derived<F>(parts: &[&Schedule], f: F) -> Schedule
    where
        F: Fn(usize) -> DMatrix<f64>,
    {
        if parts.iter().all(|s| s.is_constant()) {
            return Schedule::Constant(f(0));
        }
        let periods: Option<Vec<usize>> = parts.iter().map(|s| s.period()).collect();
        match periods {
            Some(ps) => {
                let period = ps.into_iter().fold(1, lcm);
                Schedule::Periodic((0..period).map(f).collect())
            }
            None => {
                let len = parts.iter().filter_map(|s| s.extent()).min().unwrap_or(0);
                Schedule::Finite((0..len).map(f).collect())
            }
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

fn min_extent(schedules: &[&Schedule]) -> Option<usize> {
    schedules.iter().filter_map(|s| s.extent()).min()
}

fn check_schedule(
    context: &'static str,
    schedule: &Schedule,
    rows: usize,
    cols: usize,
    horizon: usize,
) -> Result<()> {
    if let Schedule::Periodic(ms) = schedule {
        if ms.is_empty() {
            return Err(Error::InvalidArgument(format!("{context}: empty periodic schedule")));
        }
    }
    if let Some(len) = schedule.extent() {
        if len < horizon + 1 {
            return Err(Error::dim(context, len, format!("{} matrices", horizon + 1), len));
        }
    }
    for (k, m) in schedule.entries().iter().enumerate() {
        if m.shape() != (rows, cols) {
            return Err(Error::dim(
                context,
                k,
                format!("{rows}x{cols}"),
                format!("{}x{}", m.nrows(), m.ncols()),
            ));
        }
    }
    Ok(())
}

/// The data-generating system `ξ_{k+1} = A_k ξ_k + G_k w_k`, `ζ_k = H_k ξ_k + v_k`.
#[derive(Clone, Debug)]
pub struct LtvSystem {
    d: usize,
    q: usize,
    r: usize,
    a: Schedule,
    g: Schedule,
    h: Schedule,
    horizon: usize,
}

impl LtvSystem {
    pub fn new(a: Schedule, g: Schedule, h: Schedule, horizon: usize) -> Result<Self> {
        let first = |s: &Schedule| s.entries().first().map(|m| m.shape());
        let (d, _) = first(&a).ok_or_else(|| Error::InvalidArgument("empty A schedule".into()))?;
        let (_, q) = first(&g).ok_or_else(|| Error::InvalidArgument("empty G schedule".into()))?;
        let (r, _) = first(&h).ok_or_else(|| Error::InvalidArgument("empty H schedule".into()))?;
        if d == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        check_schedule("A", &a, d, d, horizon)?;
        check_schedule("G", &g, d, q, horizon)?;
        check_schedule("H", &h, r, d, horizon)?;
        Ok(LtvSystem { d, q, r, a, g, h, horizon })
    }

    pub fn time_invariant(
        a: DMatrix<f64>,
        g: DMatrix<f64>,
        h: DMatrix<f64>,
        horizon: usize,
    ) -> Result<Self> {
        Self::new(
            Schedule::Constant(a),
            Schedule::Constant(g),
            Schedule::Constant(h),
            horizon,
        )
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(self.a.clone(), self.g.clone(), self.h.clone(), horizon)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_time_invariant(&self) -> bool {
        self.a.is_constant() && self.g.is_constant() && self.h.is_constant()
    }

    /// Number of indices on which every system matrix is defined; `None` if unbounded.
    pub fn extent(&self) -> Option<usize> {
        min_extent(&[&self.a, &self.g, &self.h])
    }

    pub fn a_schedule(&self) -> &Schedule {
        &self.a
    }

    pub fn g_schedule(&self) -> &Schedule {
        &self.g
    }

    pub fn h_schedule(&self) -> &Schedule {
        &self.h
    }

    /// # Panics
    /// If `k` lies outside a finite schedule.
    pub fn a(&self, k: usize) -> &DMatrix<f64> {
        self.a.at(k).unwrap_or_else(|| panic!("A_{k} is not defined"))
    }

    pub fn g(&self, k: usize) -> &DMatrix<f64> {
        self.g.at(k).unwrap_or_else(|| panic!("G_{k} is not defined"))
    }

    pub fn h(&self, k: usize) -> &DMatrix<f64> {
        self.h.at(k).unwrap_or_else(|| panic!("H_{k} is not defined"))
    }
}

/// States `ξ_0..=ξ_ℓ` and outputs `ζ_k` for each supplied measurement noise up to `k = ℓ`.
#[derive(Clone, Debug)]
pub struct Realization {
    pub states: Vec<DVector<f64>>,
    pub outputs: Vec<DVector<f64>>,
}

/// Propagates one realization of the plant over `[0:ℓ]`.
///
/// `w` must hold at least `ℓ` process-noise vectors and `v` at least `ℓ`
/// measurement-noise vectors; an output is produced for every `k ≤ ℓ` with a
/// matching `v[k]`.
pub fn simulate_realization(
    sys: &LtvSystem,
    xi0: &DVector<f64>,
    w: &[DVector<f64>],
    v: &[DVector<f64>],
) -> Result<Realization> {
    let ell = sys.horizon;
    if xi0.len() != sys.d {
        return Err(Error::dim("initial state", 0, sys.d, xi0.len()));
    }
    if w.len() < ell {
        return Err(Error::dim("process noise sequence", w.len(), ell, w.len()));
    }
    if v.len() < ell {
        return Err(Error::dim("measurement noise sequence", v.len(), ell, v.len()));
    }
    let mut states = Vec::with_capacity(ell + 1);
    states.push(xi0.clone());
    for k in 0..ell {
        if w[k].len() != sys.q {
            return Err(Error::dim("process noise", k, sys.q, w[k].len()));
        }
        let next = sys.a(k) * &states[k] + sys.g(k) * &w[k];
        states.push(next);
    }
    let n_out = v.len().min(ell + 1);
    let mut outputs = Vec::with_capacity(n_out);
    for (k, vk) in v.iter().take(n_out).enumerate() {
        if vk.len() != sys.r {
            return Err(Error::dim("measurement noise", k, sys.r, vk.len()));
        }
        outputs.push(sys.h(k) * &states[k] + vk);
    }
    Ok(Realization { states, outputs })
}

/// Gain schedule `K_k` with the induced error matrices `F_k = A_k + K_k H_k`.
#[derive(Clone, Debug)]
pub struct ObserverDesign {
    gain: Schedule,
    f: Schedule,
    contraction_horizon: Option<usize>,
}

impl ObserverDesign {
    /// Checks shapes and that every gain on `[0:ℓ]` is nonzero.
    pub fn new(sys: &LtvSystem, gain: Schedule) -> Result<Self> {
        check_schedule("K", &gain, sys.d, sys.r, sys.horizon)?;
        for k in 0..=sys.horizon {
            let kk = gain.at(k).expect("checked extent");
            if spectral_norm(kk) < ZERO_GAIN_TOLERANCE {
                return Err(Error::GainDesign(format!("gain K_{k} is zero")));
            }
        }
        let f = Schedule::derived(&[&sys.a, &sys.h, &gain], |k| {
            let kk = gain.at(k).expect("derived within extent");
            sys.a(k) + kk * sys.h(k)
        });
        Ok(ObserverDesign {
            gain,
            f,
            contraction_horizon: None,
        })
    }

    pub fn with_contraction_horizon(mut self, s0: usize) -> Self {
        self.contraction_horizon = Some(s0);
        self
    }

    pub fn contraction_horizon(&self) -> Option<usize> {
        self.contraction_horizon
    }

    pub fn gain_schedule(&self) -> &Schedule {
        &self.gain
    }

    pub fn f_schedule(&self) -> &Schedule {
        &self.f
    }

    pub fn extent(&self) -> Option<usize> {
        self.f.extent()
    }

    pub fn k(&self, k: usize) -> &DMatrix<f64> {
        self.gain.at(k).unwrap_or_else(|| panic!("K_{k} is not defined"))
    }

    pub fn f(&self, k: usize) -> &DMatrix<f64> {
        self.f.at(k).unwrap_or_else(|| panic!("F_{k} is not defined"))
    }
}

/// Runs the observer from `ξ̂_0 = 0` and returns `ξ̂_0..=ξ̂_ℓ`.
pub fn run_observer(
    sys: &LtvSystem,
    obs: &ObserverDesign,
    outputs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let ell = sys.horizon;
    if outputs.len() < ell {
        return Err(Error::dim("output sequence", outputs.len(), ell, outputs.len()));
    }
    let mut est = Vec::with_capacity(ell + 1);
    est.push(DVector::zeros(sys.d));
    for k in 0..ell {
        let zk = &outputs[k];
        if zk.len() != sys.r {
            return Err(Error::dim("output", k, sys.r, zk.len()));
        }
        let xk = &est[k];
        let innovation = sys.h(k) * xk - zk;
        let next = sys.a(k) * xk + obs.k(k) * innovation;
        est.push(next);
    }
    Ok(est)
}

/// All products `Φ_{j,k} = A_{j−1}⋯A_k` and `Ψ_{j,k} = F_{j−1}⋯F_k` for `0 ≤ k ≤ j ≤ extent`.
#[derive(Clone, Debug)]
pub struct TransitionProducts {
    extent: usize,
    phi: Vec<Vec<DMatrix<f64>>>,
    psi: Vec<Vec<DMatrix<f64>>>,
}

impl TransitionProducts {
    pub fn new(sys: &LtvSystem, obs: &ObserverDesign, extent: usize) -> Result<Self> {
        let available = [sys.extent(), obs.extent()].into_iter().flatten().min();
        if let Some(avail) = available {
            if extent > avail {
                return Err(Error::dim("transition products", avail, extent, avail));
            }
        }
        let phi = product_table(extent, sys.d, |k| sys.a(k));
        let psi = product_table(extent, sys.d, |k| obs.f(k));
        Ok(TransitionProducts { extent, phi, psi })
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    /// `Φ_{j,k}`; panics unless `k ≤ j ≤ extent`.
    pub fn phi(&self, j: usize, k: usize) -> &DMatrix<f64> {
        assert!(k <= j && j <= self.extent, "Φ_({j},{k}) out of range");
        &self.phi[j][k]
    }

    /// `Ψ_{j,k}`; panics unless `k ≤ j ≤ extent`.
    pub fn psi(&self, j: usize, k: usize) -> &DMatrix<f64> {
        assert!(k <= j && j <= self.extent, "Ψ_({j},{k}) out of range");
        &self.psi[j][k]
    }
}

fn product_table<'a, F>(extent: usize, d: usize, step: F) -> Vec<Vec<DMatrix<f64>>>
where
    F: Fn(usize) -> &'a DMatrix<f64>,
{
    let mut table: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(extent + 1);
    for j in 0..=extent {
        let mut row = Vec::with_capacity(j + 1);
        if j > 0 {
            let m = step(j - 1);
            for prev in &table[j - 1] {
                row.push(m * prev);
            }
        }
        row.push(DMatrix::identity(d, d));
        table.push(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dmat;

    #[test]
    fn derived_schedule_uses_lcm_period() {
        let a = Schedule::Periodic(vec![DMatrix::identity(1, 1) * 1.0, DMatrix::identity(1, 1) * 2.0]);
        let b = Schedule::Periodic(vec![
            DMatrix::identity(1, 1) * 1.0,
            DMatrix::identity(1, 1) * 3.0,
            DMatrix::identity(1, 1) * 5.0,
        ]);
        let s = Schedule::derived(&[&a, &b], |k| a.at(k).unwrap() * b.at(k).unwrap());
        match &s {
            Schedule::Periodic(ms) => assert_eq!(ms.len(), 6),
            other => panic!("unexpected {other:?}"),
        }
        for k in 0..12 {
            assert_eq!(s.at(k).unwrap(), &(a.at(k).unwrap() * b.at(k).unwrap()));
        }
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let err = LtvSystem::new(
            Schedule::Finite(vec![DMatrix::identity(2, 2), DMatrix::identity(3, 3)]),
            Schedule::Constant(DMatrix::identity(2, 2)),
            Schedule::Constant(dmat(&[&[1.0, 0.0]])),
            1,
        )
        .unwrap_err();
        assert!(err.to_string().contains("index 1"), "{err}");
    }

    #[test]
    fn rejects_short_finite_schedule() {
        let res = LtvSystem::new(
            Schedule::Finite(vec![DMatrix::identity(2, 2)]),
            Schedule::Constant(DMatrix::identity(2, 2)),
            Schedule::Constant(dmat(&[&[1.0, 0.0]])),
            3,
        );
        assert!(res.is_err());
    }

    #[test]
    fn zero_gain_is_rejected() {
        let sys = LtvSystem::time_invariant(
            dmat(&[&[0.5]]),
            dmat(&[&[1.0]]),
            dmat(&[&[1.0]]),
            2,
        )
        .unwrap();
        assert!(ObserverDesign::new(&sys, Schedule::Constant(dmat(&[&[0.0]]))).is_err());
    }
}
