use nalgebra::{DMatrix, Vector2};

use crate::{Error, Result};

/// Equivalent-circuit model of one lithium-ion cell with state
/// `χ = (I², z)`: the current through `R²` and the state of charge.
#[derive(Clone, Debug, PartialEq)]
pub struct BatteryCell {
    pub r1: f64,
    pub r2: f64,
    pub capacitance: f64,
    pub capacity: f64,
    /// Slope of the affine open-circuit-voltage fit.
    pub ocv_alpha: f64,
    /// Intercept of the affine open-circuit-voltage fit.
    pub ocv_beta: f64,
    pub dt: f64,
    /// Discharge current `I_k`; the last entry is held beyond the end.
    pub current: Vec<f64>,
    /// Start `χ⋆_0` of the nominal trajectory.
    pub nominal_start: Vector2<f64>,
}

/// `S = α̂ᵀξ + β̂` for the deviation `ξ = χ − χ⋆` at one time index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerCoefficients {
    pub alpha_hat: Vector2<f64>,
    pub beta_hat: f64,
}

impl PowerCoefficients {
    pub fn power(&self, xi: &Vector2<f64>) -> f64 {
        self.alpha_hat.dot(xi) + self.beta_hat
    }
}

impl BatteryCell {
    /// Builds a cell from the RC decay factor `a = exp(−δt/(R²C))` instead of `C`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_decay(
        decay: f64,
        r1: f64,
        r2: f64,
        capacity: f64,
        ocv_alpha: f64,
        ocv_beta: f64,
        dt: f64,
        current: Vec<f64>,
        nominal_start: Vector2<f64>,
    ) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::InvalidArgument(format!("decay factor {decay} must lie in (0, 1)")));
        }
        let capacitance = -dt / (r2 * decay.ln());
        Self::new(r1, r2, capacitance, capacity, ocv_alpha, ocv_beta, dt, current, nominal_start)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r1: f64,
        r2: f64,
        capacitance: f64,
        capacity: f64,
        ocv_alpha: f64,
        ocv_beta: f64,
        dt: f64,
        current: Vec<f64>,
        nominal_start: Vector2<f64>,
    ) -> Result<Self> {
        for (name, x) in [("R¹", r1), ("R²", r2), ("C", capacitance), ("Q", capacity), ("δt", dt)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {x} must be positive")));
            }
        }
        if current.is_empty() {
            return Err(Error::InvalidArgument("current profile is empty".into()));
        }
        Ok(BatteryCell {
            r1,
            r2,
            capacitance,
            capacity,
            ocv_alpha,
            ocv_beta,
            dt,
            current,
            nominal_start,
        })
    }

    /// `a = exp(−δt/(R²C))`.
    pub fn decay(&self) -> f64 {
        (-self.dt / (self.r2 * self.capacitance)).exp()
    }

    pub fn current_at(&self, k: usize) -> f64 {
        *self.current.get(k).unwrap_or_else(|| self.current.last().expect("nonempty"))
    }

    pub fn state_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![self.decay(), 1.0]))
    }

    /// Output row `(−R², α)` of the deviation dynamics.
    pub fn output_row(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, 2, &[-self.r2, self.ocv_alpha])
    }

    pub fn step(&self, chi: &Vector2<f64>, k: usize) -> Vector2<f64> {
        let a = self.decay();
        let i = self.current_at(k);
        Vector2::new(a * chi[0] + (1.0 - a) * i, chi[1] - self.dt / self.capacity * i)
    }

    /// `χ_0..=χ_ℓ` from `chi0`.
    pub fn trajectory(&self, chi0: &Vector2<f64>, ell: usize) -> Vec<Vector2<f64>> {
        let mut out = Vec::with_capacity(ell + 1);
        out.push(*chi0);
        for k in 0..ell {
            let next = self.step(&out[k], k);
            out.push(next);
        }
        out
    }

    pub fn nominal(&self, ell: usize) -> Vec<Vector2<f64>> {
        self.trajectory(&self.nominal_start, ell)
    }

    /// Terminal voltage `αz + β − I_kR¹ − I²R²`.
    pub fn voltage(&self, chi: &Vector2<f64>, k: usize) -> f64 {
        self.ocv_alpha * chi[1] + self.ocv_beta - self.current_at(k) * self.r1 - chi[0] * self.r2
    }

    /// Injected power `I_kV_k`.
    pub fn power(&self, chi: &Vector2<f64>, k: usize) -> f64 {
        self.current_at(k) * self.voltage(chi, k)
    }

    /// `α̂ = (−I_kR², αI_k)` and `β̂ = ⟨α̂, χ⋆_k⟩ + I_kβ − I_k²R¹`.
    pub fn power_coefficients(&self, k: usize) -> PowerCoefficients {
        let i = self.current_at(k);
        let alpha_hat = Vector2::new(-i * self.r2, self.ocv_alpha * i);
        let chi_star = self.nominal(k)[k];
        PowerCoefficients {
            alpha_hat,
            beta_hat: alpha_hat.dot(&chi_star) + i * self.ocv_beta - i * i * self.r1,
        }
    }

    /// Whether the state of charge stays strictly inside `(0, 1)` over
    /// `[0:ell]` for every initial state of charge in `[z_lo, z_hi]`.
    pub fn soc_stays_interior(&self, z_lo: f64, z_hi: f64, ell: usize) -> bool {
        let mut drop = 0.0;
        for k in 0..=ell {
            if !(z_lo - drop > 0.0 && z_hi - drop < 1.0) {
                return false;
            }
            drop += self.dt / self.capacity * self.current_at(k);
        }
        true
    }
}

/// `(α̂^ι, β̂^ι)` at time `ell` together with `S^ι = ⟨α̂^ι, ξ^ι⟩ + β̂^ι`.
pub fn battery_injected_power(cell: &BatteryCell, xi: &Vector2<f64>, ell: usize) -> (PowerCoefficients, f64) {
    let coef = cell.power_coefficients(ell);
    let s = coef.power(xi);
    (coef, s)
}
