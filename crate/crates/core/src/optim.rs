//! Dense BFGS maximizer with box constraints and barrier-by-rejection.
//!
//! Trial points that the objective reports as invalid (outside the model's
//! admissible set) are treated as -inf and the line search backtracks, which
//! leaves the likelihood surface untouched inside the admissible region.
//!
//! Kinked objectives (Laplace log-densities) maximize at vertices where the
//! gradient never reaches the tolerance; a point where even the steepest
//! ascent direction admits no improving step is certified stationary at
//! line-search resolution and reported as converged.

use nalgebra::{DMatrix, DVector};

/// Why the optimizer stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    /// Projected gradient norm below tolerance.
    GradientTol,
    /// No improving step exists along the steepest ascent direction.
    StationaryAtResolution,
    MaxIter,
    InvalidStart,
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
}

pub struct OptimOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Per-coordinate lower bounds (use -inf where unconstrained).
    pub lower: DVector<f64>,
}

/// Maximizes `f` subject to x >= lower.
///
/// `fg(x, true)` returns the value and gradient, `fg(x, false)` may skip the
/// gradient; both return None at inadmissible points. The start must be
/// admissible.
pub fn maximize<F>(x0: &DVector<f64>, opts: &OptimOptions, mut fg: F) -> OptimResult
where
    F: FnMut(&DVector<f64>, bool) -> Option<(f64, Option<DVector<f64>>)>,
{
    let dim = x0.len();
    let project = |x: &mut DVector<f64>| {
        for i in 0..dim {
            if x[i] < opts.lower[i] {
                x[i] = opts.lower[i];
            }
        }
    };
    let mut x = x0.clone();
    project(&mut x);

    let (mut fval, mut grad) = match fg(&x, true) {
        Some((f, Some(g))) => (f, g),
        _ => {
            return OptimResult {
                x,
                value: f64::NEG_INFINITY,
                grad: DVector::zeros(dim),
                iterations: 0,
                converged: false,
                termination: Termination::InvalidStart,
            }
        }
    };

    // gradient components pushing into an active bound are projected out
    let projected_grad = |x: &DVector<f64>, g: &DVector<f64>| -> DVector<f64> {
        let mut pg = g.clone();
        for i in 0..dim {
            if x[i] <= opts.lower[i] + 1e-12 && g[i] < 0.0 {
                pg[i] = 0.0;
            }
        }
        pg
    };

    let mut hinv = DMatrix::<f64>::identity(dim, dim);
    let mut iterations = 0;
    let mut steepest_retry = false;
    let mut stall_count = 0usize;

    loop {
        let pg = projected_grad(&x, &grad);
        if pg.norm() < opts.grad_tol {
            return OptimResult {
                x,
                value: fval,
                grad,
                iterations,
                converged: true,
                termination: Termination::GradientTol,
            };
        }
        if iterations >= opts.max_iter {
            return OptimResult {
                x,
                value: fval,
                grad,
                iterations,
                converged: false,
                termination: Termination::MaxIter,
            };
        }
        iterations += 1;

        // ascent direction from the inverse-Hessian approximation
        let mut dir = &hinv * &pg;
        if steepest_retry || dir.dot(&pg) <= 0.0 {
            hinv = DMatrix::identity(dim, dim);
            dir = pg.clone();
        }
        // cap the raw step so a bad curvature estimate cannot fling the
        // iterate across the admissible set
        let dmax = dir.amax();
        if dmax > 5.0 {
            dir *= 5.0 / dmax;
        }

        let mut alpha = 1.0f64;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xt = &x + &dir * alpha;
            project(&mut xt);
            let step = &xt - &x;
            if step.norm() == 0.0 {
                break;
            }
            if let Some((ft, _)) = fg(&xt, false) {
                let slope = grad.dot(&step);
                if ft > fval + 1e-4 * slope.max(0.0) {
                    accepted = Some((xt, ft, step));
                    break;
                }
            }
            alpha *= 0.5;
        }

        match accepted {
            Some((xt, ft, step)) => {
                steepest_retry = false;
                // several consecutive negligible improvements certify a stall
                // (vertex of a kinked objective) as firmly as a failed search
                if ft - fval < 1e-12 * (1.0 + fval.abs()) {
                    stall_count += 1;
                    if stall_count >= 4 {
                        let gt = match fg(&xt, true) {
                            Some((_, Some(g))) => g,
                            _ => grad.clone(),
                        };
                        return OptimResult {
                            x: xt,
                            value: ft,
                            grad: gt,
                            iterations,
                            converged: true,
                            termination: Termination::StationaryAtResolution,
                        };
                    }
                } else {
                    stall_count = 0;
                }
                let gt = match fg(&xt, true) {
                    Some((_, Some(g))) => g,
                    _ => grad.clone(),
                };
                let yv = &gt - &grad;
                // curvature condition for the ascent convention: s'y < 0
                let sy = step.dot(&yv);
                if sy < -1e-12 * step.norm() * yv.norm() {
                    let rho = 1.0 / sy;
                    let sy_outer = &step * yv.transpose();
                    let eye = DMatrix::<f64>::identity(dim, dim);
                    let left = &eye - &sy_outer * rho;
                    hinv = &left * &hinv * left.transpose() + (&step * step.transpose()) * -rho;
                }
                x = xt;
                fval = ft;
                grad = gt;
            }
            None => {
                if steepest_retry {
                    // no improvement even along the projected gradient:
                    // stationary at line-search resolution
                    return OptimResult {
                        x,
                        value: fval,
                        grad,
                        iterations,
                        converged: true,
                        termination: Termination::StationaryAtResolution,
                    };
                }
                steepest_retry = true;
            }
        }
    }
}
