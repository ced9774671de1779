//! Quasi-Newton minimization used to fit kernel hyperparameters.

use nalgebra::{DMatrix, DVector};

/// A smooth objective. Returning `None` marks the point as infeasible, which
/// the line search treats like `+∞`.
pub trait Objective {
    fn value(&mut self, x: &[f64]) -> Option<f64>;
    fn value_and_gradient(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Clone, Debug)]
pub struct BfgsOptions {
    pub max_iters: usize,
    /// Stop once the largest gradient component falls below this.
    pub grad_tol: f64,
    /// Longest step (Euclidean) the line search may start from.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iters: 200, grad_tol: 1e-6, max_step: 2.0 }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at every accepted iterate, starting with `x0`.
    pub trace: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 50;

/// BFGS with Armijo backtracking. Accepted iterates never increase the
/// objective. Returns `None` only if the objective is infeasible at `x0`.
pub fn minimize_bfgs<O: Objective>(obj: &mut O, x0: &[f64], opts: &BfgsOptions) -> Option<Minimum> {
    let dim = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let (mut f, g0) = obj.value_and_gradient(x.as_slice())?;
    if !f.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut g = DVector::from_vec(g0);
    let mut h = DMatrix::<f64>::identity(dim, dim);
    let mut scaled = false;
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if g.amax() < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut p = -(&h * &g);
        if g.dot(&p) >= 0.0 {
            h = DMatrix::identity(dim, dim);
            scaled = false;
            p = -g.clone();
        }
        let norm = p.norm();
        if norm > opts.max_step {
            p *= opts.max_step / norm;
        }
        let slope = g.dot(&p);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &p * step;
            if let Some(ft) = obj.value(trial.as_slice()) {
                if ft.is_finite() && ft <= f + ARMIJO_C1 * step * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(x_new) = accepted else {
            // no descent possible along p: numerically stationary
            converged = g.amax() < opts.grad_tol.sqrt();
            break;
        };
        let Some((f_new, g_new)) = obj.value_and_gradient(x_new.as_slice()) else {
            break;
        };
        let g_new = DVector::from_vec(g_new);
        if !f_new.is_finite() || g_new.iter().any(|v| !v.is_finite()) {
            break;
        }

        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                h = DMatrix::identity(dim, dim) * (sy / y.dot(&y));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let ident = DMatrix::<f64>::identity(dim, dim);
            let left = &ident - (&s * y.transpose()) * rho;
            let right = &ident - (&y * s.transpose()) * rho;
            h = &left * &h * &right + (&s * s.transpose()) * rho;
        }

        let decrease = f - f_new;
        x = x_new;
        g = g_new;
        f = f_new;
        trace.push(f);
        if decrease <= 1e-14 * (1.0 + f.abs()) {
            converged = g.amax() < opts.grad_tol.sqrt();
            break;
        }
    }

    Some(Minimum { x: x.as_slice().to_vec(), value: f, gradient: g.as_slice().to_vec(), iterations, converged, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&mut self, x: &[f64]) -> Option<f64> {
            Some((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2))
        }
        fn value_and_gradient(&mut self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
            let v = self.value(x)?;
            let g0 = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]);
            let g1 = 200.0 * (x[1] - x[0] * x[0]);
            Some((v, vec![g0, g1]))
        }
    }

    #[test]
    fn finds_rosenbrock_minimum() {
        let m = minimize_bfgs(&mut Rosenbrock, &[-1.2, 1.0], &BfgsOptions::default()).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    struct Infeasible;

    impl Objective for Infeasible {
        fn value(&mut self, _: &[f64]) -> Option<f64> {
            None
        }
        fn value_and_gradient(&mut self, _: &[f64]) -> Option<(f64, Vec<f64>)> {
            None
        }
    }

    #[test]
    fn infeasible_start_returns_none() {
        assert!(minimize_bfgs(&mut Infeasible, &[0.0], &BfgsOptions::default()).is_none());
    }
}
