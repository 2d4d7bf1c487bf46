//! Line-search minimization used by the Fréchet estimators.

use crate::error::Result;
use nalgebra::DVector;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop once the gradient norm falls below this fraction of the initial one.
    pub rel_grad_tol: f64,
    pub abs_grad_tol: f64,
    /// Number of stored curvature pairs; 0 gives steepest descent.
    pub memory: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            rel_grad_tol: 1e-6,
            abs_grad_tol: 1e-12,
            memory: 10,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub initial_grad_norm: f64,
    pub grad_norm: f64,
}

/// Backtracking search along `dir` from `x`. Returns the accepted step
/// length, point and value, or `None` if no step satisfies the sufficient
/// decrease condition.
pub fn armijo<F>(
    f: &mut F,
    x: &DVector<f64>,
    fx: f64,
    slope: f64,
    dir: &DVector<f64>,
    t0: f64,
    opt: &MinimizeOptions,
) -> Result<Option<(f64, DVector<f64>, f64)>>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
{
    let mut t = t0;
    for _ in 0..=opt.max_backtracks {
        let trial = x + dir * t;
        let ft = f(&trial)?;
        if ft.is_finite() && ft <= fx + opt.armijo_c * t * slope && ft < fx {
            return Ok(Some((t, trial, ft)));
        }
        t *= opt.backtrack;
    }
    Ok(None)
}

/// Limited-memory BFGS with Armijo backtracking. `f` may return
/// `f64::INFINITY` to reject a trial point.
pub fn minimize<F, G>(mut f: F, mut grad: G, x0: &DVector<f64>, opt: &MinimizeOptions) -> Result<MinimizeResult>
where
    F: FnMut(&DVector<f64>) -> Result<f64>,
    G: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = x0.clone();
    let mut fx = f(&x)?;
    let mut g = grad(&x)?;
    let g0 = g.norm();
    let mut history = vec![fx];
    let mut pairs: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let done = |gn: f64| gn <= opt.abs_grad_tol || gn <= opt.rel_grad_tol * g0;
    let mut converged = done(g0);

    while !converged && iterations < opt.max_iterations {
        iterations += 1;
        let mut dir = two_loop(&g, &pairs);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            pairs.clear();
            dir = -&g;
            slope = -g.norm_squared();
        }
        let t0 = if pairs.is_empty() { (1.0 / g.norm()).min(1.0) } else { 1.0 };
        let step = match armijo(&mut f, &x, fx, slope, &dir, t0, opt)? {
            Some(s) => Some(s),
            None if !pairs.is_empty() => {
                pairs.clear();
                dir = -&g;
                slope = -g.norm_squared();
                armijo(&mut f, &x, fx, slope, &dir, (1.0 / g.norm()).min(1.0), opt)?
            }
            None => None,
        };
        let Some((_, x_new, f_new)) = step else { break };
        let g_new = grad(&x_new)?;
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if opt.memory > 0 && sy > 1e-12 * s.norm() * y.norm() {
            if pairs.len() == opt.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        history.push(fx);
        converged = done(g.norm());
    }
    Ok(MinimizeResult {
        value: fx,
        grad_norm: g.norm(),
        x,
        iterations,
        converged,
        history,
        initial_grad_norm: g0,
    })
}

fn two_loop(g: &DVector<f64>, pairs: &VecDeque<(DVector<f64>, DVector<f64>, f64)>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alpha = vec![0.0; pairs.len()];
    for (i, (s, y, rho)) in pairs.iter().enumerate().rev() {
        alpha[i] = rho * s.dot(&q);
        q.axpy(-alpha[i], y, 1.0);
    }
    if let Some((s, y, _)) = pairs.back() {
        q *= s.dot(y) / y.norm_squared();
    }
    for (i, (s, y, rho)) in pairs.iter().enumerate() {
        let beta = rho * y.dot(&q);
        q.axpy(alpha[i] - beta, s, 1.0);
    }
    -q
}
