//! Quasi-Newton maximization with finite-difference derivatives.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once an accepted step changes the objective by less than this.
    pub ftol: f64,
    /// Stop once the gradient norm falls below this.
    pub gtol: f64,
    /// Relative finite-difference step.
    pub step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        BfgsOptions {
            max_iter: 1000,
            ftol: 1e-8,
            gtol: 1e-6,
            step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn fd_step(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1.0)
}

/// Central-difference gradient with per-coordinate step `h * max(1, |x_i|)`.
pub fn central_gradient<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let hi = fd_step(x[i], h);
            probe[i] = x[i] + hi;
            let up = f(&probe);
            probe[i] = x[i] - hi;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * hi)
        })
        .collect()
}

/// Central-difference Hessian.
pub fn central_hessian<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let steps: Vec<f64> = x.iter().map(|&v| fd_step(v, h)).collect();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(n, n);
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + steps[i];
        let up = f(&p);
        p[i] = x[i] - steps[i];
        let down = f(&p);
        p[i] = x[i];
        hess[(i, i)] = (up - 2.0 * f0 + down) / (steps[i] * steps[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                p[i] = x[i] + si * steps[i];
                p[j] = x[j] + sj * steps[j];
                let v = f(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                / (4.0 * steps[i] * steps[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

/// Maximizes `f` by BFGS on `-f` with a backtracking Armijo line search.
/// Non-finite objective values are treated as infeasible.
pub fn maximize_bfgs<F: Fn(&[f64]) -> f64 + ?Sized>(
    f: &F,
    x0: &[f64],
    opts: &BfgsOptions,
) -> OptimResult {
    let n = x0.len();
    let neg = |x: &[f64]| {
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let grad = |x: &[f64]| DVector::from_vec(central_gradient(&neg, x, opts.step));

    let mut x = DVector::from_column_slice(x0);
    let mut fx = neg(x.as_slice());
    if !fx.is_finite() {
        return OptimResult {
            x: x0.to_vec(),
            value: -fx,
            iterations: 0,
            converged: false,
        };
    }
    let mut g = grad(x.as_slice());
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;

    for iter in 0..opts.max_iter {
        if g.norm() < opts.gtol {
            return done(x, fx, iter, true);
        }
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        // also catches a NaN slope
        if slope.is_nan() || slope >= 0.0 {
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * t;
            let ft = neg(trial.as_slice());
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if !fresh {
                h_inv = DMatrix::identity(n, n);
                fresh = true;
                continue;
            }
            // no descent along the steepest direction: a flat or noisy optimum
            return done(x, fx, iter, g.norm() < 1e-3);
        };
        let g_new = grad(x_new.as_slice());
        let s = &x_new - &x;
        let y = &g_new - &g;
        let change = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if change.abs() < opts.ftol {
            return done(x, fx, iter + 1, true);
        }
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - (&s * y.transpose()) * rho;
            let right = &eye - (&y * s.transpose()) * rho;
            h_inv = &left * &h_inv * &right + (&s * s.transpose()) * rho;
            fresh = false;
        }
    }
    done(x, fx, opts.max_iter, false)
}

fn done(x: DVector<f64>, neg_value: f64, iterations: usize, converged: bool) -> OptimResult {
    OptimResult {
        x: x.as_slice().to_vec(),
        value: -neg_value,
        iterations,
        converged,
    }
}
