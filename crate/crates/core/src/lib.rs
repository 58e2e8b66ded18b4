//! Wasserstein ambiguity sets for the state distribution of noisy, partially
//! observed linear time-varying systems.
//!
//! The crate is organised bottom-up:
//!
//! * [`system`] holds the plant, the Luenberger observer and the transition
//!   products `Φ` and `Ψ`, together with gain design and matrix certificates.
//! * [`distributions`] provides the compactly supported and Gaussian-mixture
//!   noise models and their `L^p` / Orlicz norms.
//! * [`wasserstein`] computes exact `W_p` distances between discrete measures.
//! * [`radius`] assembles nominal, noise and total ambiguity radii.
//! * [`montecarlo`] runs coverage experiments against a reference law.
//! * [`dispatch`] contains the battery economic-dispatch case study.

pub mod dispatch;
pub mod distributions;
mod error;
pub mod linalg;
pub mod montecarlo;
pub mod optim;
pub mod quadrature;
pub mod radius;
pub mod system;
pub mod wasserstein;

pub use error::{Error, Result};
