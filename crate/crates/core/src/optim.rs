//! Derivative-free-gradient local ascent for hyperparameter fitting.
//!
//! Gradients are central finite differences on the unconstrained scale. Steps
//! follow a BFGS inverse-Hessian direction with Armijo backtracking, falling
//! back to the raw gradient whenever the quasi-Newton direction is not an
//! ascent direction.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AscentConfig {
    pub fd_step: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Stop after this many consecutive iterations whose gain is below `f_tol * (1 + |f|)`.
    pub stall_iters: usize,
    pub f_tol: f64,
    /// Coordinates are kept inside `[-bound, bound]`.
    pub bound: f64,
    /// Cap on the infinity norm of a single step.
    pub max_step: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            fd_step: 1e-5,
            grad_tol: 1e-5,
            max_iters: 200,
            stall_iters: 3,
            f_tol: 1e-10,
            bound: 25.0,
            max_step: 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

struct Counted<'a, F: FnMut(&[f64]) -> f64> {
    f: &'a mut F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<'_, F> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: &mut Counted<F>, x: &[f64], fx: f64, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f.call(&probe);
        probe[i] = x[i] - h;
        let fm = f.call(&probe);
        probe[i] = x[i];
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => 0.0,
        };
    }
    g
}

/// Local ascent from `x0`. Returns `None` when `f(x0)` is not finite.
pub fn ascend<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], cfg: &AscentConfig) -> Option<AscentResult> {
    let n = x0.len();
    let mut f = Counted { f, evals: 0 };
    let mut x: Vec<f64> = x0.iter().map(|v| v.clamp(-cfg.bound, cfg.bound)).collect();
    let mut fx = f.call(&x);
    if !fx.is_finite() {
        return None;
    }
    if n == 0 {
        return Some(AscentResult { x, value: fx, iterations: 0, evaluations: f.evals });
    }
    let mut g = fd_gradient(&mut f, &x, fx, cfg.fd_step);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut stalls = 0;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        if g.amax() < cfg.grad_tol {
            break;
        }
        iterations += 1;
        let mut accepted = None;
        for attempt in 0..2 {
            let mut d = &h_inv * &g;
            let mut slope = g.dot(&d);
            if attempt == 1 || !(slope > 0.0) {
                h_inv.fill_with_identity();
                d = g.clone();
                slope = g.dot(&d);
            }
            let dmax = d.amax();
            let mut t = if dmax > cfg.max_step { cfg.max_step / dmax } else { 1.0 };
            for _ in 0..40 {
                let cand: Vec<f64> =
                    x.iter().zip(d.iter()).map(|(xi, di)| (xi + t * di).clamp(-cfg.bound, cfg.bound)).collect();
                let fc = f.call(&cand);
                if fc.is_finite() && fc >= fx + 1e-4 * t * slope {
                    accepted = Some((cand, fc));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || attempt == 1 {
                break;
            }
        }
        let Some((xn, fn_)) = accepted else { break };
        let gn = fd_gradient(&mut f, &xn, fn_, cfg.fd_step);
        let s = DVector::from_iterator(n, xn.iter().zip(&x).map(|(a, b)| a - b));
        // BFGS on -f: y = ∇(-f)_new - ∇(-f)_old
        let y = &g - &gn;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - rho * &s * y.transpose();
            let right = &i - rho * &y * s.transpose();
            h_inv = &left * &h_inv * &right + rho * &s * s.transpose();
        }
        let gain = fn_ - fx;
        x = xn;
        fx = fn_;
        g = gn;
        if gain < cfg.f_tol * (1.0 + fx.abs()) {
            stalls += 1;
            if stalls >= cfg.stall_iters {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Some(AscentResult { x, value: fx, iterations, evaluations: f.evals })
}

/// Runs [`ascend`] from every start, keeping the first best result.
pub fn ascend_multistart<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    starts: &[Vec<f64>],
    cfg: &AscentConfig,
) -> Option<AscentResult> {
    let mut best: Option<AscentResult> = None;
    for s in starts {
        if let Some(r) = ascend(f, s, cfg) {
            if best.as_ref().is_none_or(|b| r.value > b.value) {
                best = Some(r);
            }
        }
    }
    best
}
