//! One-dimensional search and box-constrained quadratic minimization.

use nalgebra::{DMatrix, DVector};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a minimizer of a unimodal `f` on `[a, b]`.
/// Returns `(x, f(x))` for the best point evaluated.
pub fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol * (1.0 + c.abs().max(d.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Result of [`box_qp`].
#[derive(Clone, Debug)]
pub struct BoxQpSolution {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Norm of the projected gradient at `x`.
    pub residual: f64,
}

/// Minimizes `½xᵀQx + cᵀx` over `lo ≤ x ≤ hi` for positive semidefinite `Q`
/// by projected gradient with exact line search along the projected path.
pub fn box_qp(
    q: &DMatrix<f64>,
    c: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    x0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> BoxQpSolution {
    let n = c.len();
    let project = |x: &DVector<f64>| DVector::from_fn(n, |i, _| x[i].clamp(lo[i], hi[i]));
    let objective = |x: &DVector<f64>| 0.5 * x.dot(&(q * x)) + c.dot(x);
    let projected_gradient = |x: &DVector<f64>, g: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            if (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) {
                0.0
            } else {
                g[i]
            }
        })
    };
    let mut x = project(x0);
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        let g = q * &x + c;
        let pg = projected_gradient(&x, &g);
        residual = pg.norm();
        if residual <= tol {
            break;
        }
        // Exact minimization along the free direction, then a projection step.
        let curvature = pg.dot(&(q * &pg));
        let step = if curvature > 0.0 {
            pg.norm_squared() / curvature
        } else {
            1.0 / (q.norm().max(1e-12))
        };
        let candidate = project(&(&x - &pg * step));
        let dir = &candidate - &x;
        let dq = dir.dot(&(q * &dir));
        let slope = g.dot(&dir);
        let t = if dq > 0.0 { (-slope / dq).clamp(0.0, 1.0) } else { 1.0 };
        let next = &x + dir * t;
        if (&next - &x).norm() <= f64::EPSILON * (1.0 + x.norm()) {
            x = next;
            iterations += 1;
            let g = q * &x + c;
            residual = projected_gradient(&x, &g).norm();
            break;
        }
        x = next;
        iterations += 1;
    }
    let value = objective(&x);
    BoxQpSolution {
        x,
        value,
        iterations,
        residual,
    }
}
