//! Exact `p`-Wasserstein distances between discrete measures on `ℝᵈ`, plus
//! pushforwards, convolutions and a plain-text columnar format.

mod hungarian;
mod network_simplex;

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::linalg::compensated_sum;
use crate::{Error, Result};

pub use network_simplex::TransportPlan;

const WEIGHT_TOLERANCE: f64 = 1e-12;

/// Default cap on the number of atoms produced by [`DiscreteMeasure::convolve`].
pub const DEFAULT_CONVOLUTION_CAP: usize = 1 << 20;

/// Weighted atoms in `ℝᵈ`. Atoms are kept as given, duplicates included.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<DVector<f64>>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument("a discrete measure needs at least one atom".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::dim("measure weights", 0, atoms.len(), weights.len()));
        }
        let d = atoms[0].len();
        for (i, a) in atoms.iter().enumerate() {
            if a.len() != d {
                return Err(Error::dim("measure atom", i, d, a.len()));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("atom {i} is not finite")));
            }
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "weight {i} = {} is not positive",
                weights[i]
            )));
        }
        let sum = compensated_sum(weights.iter().copied());
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(DiscreteMeasure { atoms, weights })
    }

    /// Empirical measure `(1/N) Σ δ_{x_i}`.
    pub fn uniform(atoms: Vec<DVector<f64>>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(x: DVector<f64>) -> Self {
        DiscreteMeasure {
            atoms: vec![x],
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].len()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[DVector<f64>] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| w == w0)
    }

    /// `(Σ w_i ‖x_i‖^p)^{1/p}`, the `p`-th moment radius about the origin.
    pub fn moment_radius(&self, p: f64) -> f64 {
        compensated_sum(
            self.atoms
                .iter()
                .zip(&self.weights)
                .map(|(a, w)| w * a.norm().powf(p)),
        )
        .powf(1.0 / p)
    }

    /// Image measure under `x ↦ Mx`.
    pub fn pushforward(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(Error::dim("pushforward matrix", 0, self.dim(), m.ncols()));
        }
        Ok(DiscreteMeasure {
            atoms: self.atoms.iter().map(|a| m * a).collect(),
            weights: self.weights.clone(),
        })
    }

    /// Convolution with the default atom cap.
    pub fn convolve(&self, other: &DiscreteMeasure) -> Result<Self> {
        self.convolve_capped(other, DEFAULT_CONVOLUTION_CAP)
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`, with all
    /// pairwise sums as atoms (row-major in `self`).
    pub fn convolve_capped(&self, other: &DiscreteMeasure, cap: usize) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::dim("convolution operand", 0, self.dim(), other.dim()));
        }
        let atoms = self.len().saturating_mul(other.len());
        if atoms > cap {
            return Err(Error::ConvolutionCap { atoms, cap });
        }
        let mut out_atoms = Vec::with_capacity(atoms);
        let mut out_weights = Vec::with_capacity(atoms);
        for (a, wa) in self.atoms.iter().zip(&self.weights) {
            for (b, wb) in other.atoms.iter().zip(&other.weights) {
                out_atoms.push(a + b);
                out_weights.push(wa * wb);
            }
        }
        Ok(DiscreteMeasure {
            atoms: out_atoms,
            weights: out_weights,
        })
    }

    /// Writes one atom per row with the weight in the last column, after a header row.
    pub fn write_columns<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim())
            .map(|i| format!("x{i}"))
            .chain(std::iter::once("weight".to_string()))
            .collect();
        writeln!(out, "{}", header.join(" "))?;
        for (a, w) in self.atoms.iter().zip(&self.weights) {
            let row: Vec<String> = a
                .iter()
                .chain(std::iter::once(w))
                .map(|x| format!("{x:e}"))
                .collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Inverse of [`DiscreteMeasure::write_columns`].
    pub fn read_columns<R: BufRead>(input: R) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        let mut width = None;
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if idx == 0 {
                let cols = line.split_whitespace().count();
                if cols < 2 || line.split_whitespace().last() != Some("weight") {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "expected a header ending in `weight`".into(),
                    });
                }
                width = Some(cols);
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let values: std::result::Result<Vec<f64>, _> =
                line.split_whitespace().map(str::parse::<f64>).collect();
            let values = values.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            if Some(values.len()) != width {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected {} columns, found {}", width.unwrap_or(0), values.len()),
                });
            }
            let (w, x) = values.split_last().expect("nonempty row");
            atoms.push(DVector::from_column_slice(x));
            weights.push(*w);
        }
        Self::new(atoms, weights)
    }
}

fn check_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::dim("second measure", 0, mu.dim(), nu.dim()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidArgument(format!("order p = {p} must be in [1, ∞)")));
    }
    Ok(())
}

fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Vec<f64> {
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for x in &mu.atoms {
        for y in &nu.atoms {
            let dist = (x - y).norm();
            cost.push(if p == 1.0 { dist } else { dist.powf(p) });
        }
    }
    cost
}

/// Exact `W_p(μ, ν)` with Euclidean ground distance.
///
/// Equal-size uniform measures are solved as an assignment problem; all
/// other cases as a transportation problem by network simplex.
pub fn wasserstein_p(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    let cost = cost_matrix(mu, nu, p);
    let (m, n) = (mu.len(), nu.len());
    let total = if mu.is_uniform() && nu.is_uniform() && m == n {
        let assignment = hungarian::solve(n, &cost);
        compensated_sum(assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j])) / n as f64
    } else {
        optimal_plan_with_cost(mu, nu, &cost)?.cost
    };
    Ok(total.max(0.0).powf(1.0 / p))
}

/// Optimal coupling of `μ` and `ν` for the cost `‖x − y‖^p`.
pub fn optimal_plan(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<TransportPlan> {
    check_pair(mu, nu, p)?;
    let cost = cost_matrix(mu, nu, p);
    optimal_plan_with_cost(mu, nu, &cost)
}

fn optimal_plan_with_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure, cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (mu.len(), nu.len());
    let max_pivots = 1000 * (m + n) * (m + n).max(10);
    if mu.is_uniform() && nu.is_uniform() {
        // Integer marginals n and m keep the pivots free of rounding.
        let supply = vec![n as f64; m];
        let demand = vec![m as f64; n];
        let scale = (m * n) as f64;
        let mut plan = network_simplex::solve(&supply, &demand, cost, max_pivots)
            .ok_or_else(|| Error::Transport("network simplex did not terminate".into()))?;
        plan.flow.iter_mut().for_each(|x| *x /= scale);
        plan.cost /= scale;
        Ok(plan)
    } else {
        network_simplex::solve(&mu.weights, &nu.weights, cost, max_pivots)
            .ok_or_else(|| Error::Transport("network simplex did not terminate".into()))
    }
}

/// The identity-coupling bound `((1/N) Σ ‖x_i − y_i‖^p)^{1/p} ≥ W_p(μ, ν)`
/// for uniform measures of equal size paired by index.
pub fn wasserstein_upper_bound_paired(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    check_pair(mu, nu, p)?;
    if mu.len() != nu.len() {
        return Err(Error::dim("paired measure", 0, mu.len(), nu.len()));
    }
    if !mu.is_uniform() || !nu.is_uniform() {
        return Err(Error::InvalidArgument("paired bound needs uniform weights".into()));
    }
    let n = mu.len() as f64;
    let total = compensated_sum(
        mu.atoms
            .iter()
            .zip(&nu.atoms)
            .map(|(x, y)| (x - y).norm().powf(p)),
    ) / n;
    Ok(total.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dvec;

    #[test]
    fn dirac_distance_is_euclidean() {
        let a = DiscreteMeasure::dirac(dvec(&[0.0, 0.0]));
        let b = DiscreteMeasure::dirac(dvec(&[3.0, 4.0]));
        for p in [1.0, 2.0, 3.5] {
            assert!((wasserstein_p(&a, &b, p).unwrap() - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let res = DiscreteMeasure::new(vec![dvec(&[0.0]), dvec(&[1.0])], vec![0.5, 0.6]);
        assert!(matches!(res, Err(Error::InvalidWeights { .. })));
    }

    #[test]
    fn columnar_roundtrip() {
        let mu = DiscreteMeasure::new(
            vec![dvec(&[0.1, -2.0]), dvec(&[3.25, 1e-7])],
            vec![0.25, 0.75],
        )
        .unwrap();
        let mut buf = Vec::new();
        mu.write_columns(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0 x1 weight\n"));
        let back = DiscreteMeasure::read_columns(&buf[..]).unwrap();
        assert_eq!(back, mu);
    }

    #[test]
    fn convolution_cap_is_enforced() {
        let mu = DiscreteMeasure::uniform(vec![dvec(&[0.0]), dvec(&[1.0])]).unwrap();
        assert!(matches!(
            mu.convolve_capped(&mu, 3),
            Err(Error::ConvolutionCap { atoms: 4, cap: 3 })
        ));
    }
}
