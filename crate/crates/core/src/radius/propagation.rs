use crate::linalg::spectral_norm;
use crate::system::LtvSystem;
use crate::wasserstein::{DiscreteMeasure, DEFAULT_CONVOLUTION_CAP};
use crate::{Error, Result};

/// How the process noise enters the propagated ambiguity sets.
#[derive(Clone, Debug)]
pub enum PropagationMode {
    /// Noise law unknown, with `E[‖w_ℓ‖^p]^{1/p} ≤ q_w`.
    UnknownNoise { q_w: f64 },
    /// Known noise laws on the state space, one per step starting at `ℓ₁`.
    KnownNoise { laws: Vec<DiscreteMeasure> },
}

/// Center and radius of the ambiguity set at one time index.
#[derive(Clone, Debug)]
pub struct PropagationStep {
    pub ell: usize,
    pub center: DiscreteMeasure,
    pub radius: f64,
}

/// Pushes an ambiguity set at `ell1` forward to `ell2` through the open-loop
/// dynamics. The returned sequence starts with the base set.
pub fn pointwise_propagation(
    sys: &LtvSystem,
    base_center: DiscreteMeasure,
    base_radius: f64,
    ell1: usize,
    mode: &PropagationMode,
    ell2: usize,
) -> Result<Vec<PropagationStep>> {
    if ell1 > ell2 {
        return Err(Error::InvalidArgument(format!("horizon [{ell1}:{ell2}] is empty")));
    }
    if base_center.dim() != sys.d() {
        return Err(Error::dim("base center", 0, sys.d().to_string(), base_center.dim().to_string()));
    }
    if !(base_radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("radius {base_radius} must be nonnegative")));
    }
    match mode {
        PropagationMode::UnknownNoise { q_w } if !(*q_w >= 0.0) => {
            return Err(Error::InvalidArgument(format!("q_w = {q_w} must be nonnegative")));
        }
        PropagationMode::KnownNoise { laws } => {
            if laws.len() < ell2 - ell1 {
                return Err(Error::dim("noise laws", 0, (ell2 - ell1).to_string(), laws.len().to_string()));
            }
            if let Some((i, law)) = laws.iter().enumerate().find(|(_, l)| l.dim() != sys.d()) {
                return Err(Error::dim("noise law", i, sys.d().to_string(), law.dim().to_string()));
            }
        }
        _ => {}
    }

    let mut steps = Vec::with_capacity(ell2 - ell1 + 1);
    steps.push(PropagationStep { ell: ell1, center: base_center, radius: base_radius });
    for ell in ell1 + 1..=ell2 {
        let prev = steps.last().expect("nonempty");
        let a = sys.a(ell - 1);
        let pushed = prev.center.pushforward(a)?;
        let gain = spectral_norm(a);
        let (center, radius) = match mode {
            PropagationMode::UnknownNoise { q_w } => (pushed, gain * prev.radius + q_w),
            PropagationMode::KnownNoise { laws } => (
                pushed.convolve_capped(&laws[ell - 1 - ell1], DEFAULT_CONVOLUTION_CAP)?,
                gain * prev.radius,
            ),
        };
        steps.push(PropagationStep { ell, center, radius });
    }
    Ok(steps)
}
