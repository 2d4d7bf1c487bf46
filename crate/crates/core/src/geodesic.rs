//! Geodesics as solutions of Hamilton's equations.
//!
//! The phase state is the stacked vector `(q, p)` of length `2d`. The exponential
//! map shoots from `(q, flat(v))` over `[0, T]`; the logarithm map inverts it by
//! a damped Gauss–Newton (Levenberg–Marquardt) search whose Jacobian comes
//! from integrating the variational equation alongside the flow.

use crate::error::{GeoError, Result};
use crate::integrate::{integrate_ode, OdeScheme, SolverConfig, Trajectory};
use crate::kernel::k_all;
use crate::manifold::{coord, landmark, LandmarkManifold, LandmarkPoint};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Splits a phase state into `(q, p)`.
pub fn split_state(x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let d = x.len() / 2;
    (x.rows(0, d).into_owned(), x.rows(d, d).into_owned())
}

pub fn stack_state(q: &[f64], p: &DVector<f64>) -> DVector<f64> {
    let d = q.len();
    DVector::from_fn(2 * d, |i, _| if i < d { q[i] } else { p[i - d] })
}

/// Hamilton's equations `(dH/dp, -dH/dq)` at a phase state.
pub fn hamiltonian_field(m: &LandmarkManifold, x: &DVector<f64>) -> DVector<f64> {
    let d = x.len() / 2;
    let q = &x.as_slice()[..d];
    let p = x.rows(d, d).into_owned();
    let (gq, gp) = m.hamiltonian_grads(q, &p);
    let mut out = DVector::zeros(2 * d);
    out.rows_mut(0, d).copy_from(&gp);
    out.rows_mut(d, d).copy_from(&(-gq));
    out
}

/// Hamiltonian value at every node of a phase trajectory.
pub fn hamiltonian_series(m: &LandmarkManifold, traj: &Trajectory) -> Vec<f64> {
    traj.states
        .iter()
        .map(|x| {
            let (q, p) = split_state(x);
            m.hamiltonian(q.as_slice(), &p)
        })
        .collect()
}

/// Geodesic from `q` with initial momentum `p`; returns the phase trajectory.
pub fn geodesic_from_momentum(
    m: &LandmarkManifold,
    q: &[f64],
    p: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    if p.len() != q.len() {
        return Err(GeoError::DimensionMismatch(format!(
            "momentum has length {}, point has dimension {}",
            p.len(),
            q.len()
        )));
    }
    integrate_ode(|_, x| Ok(hamiltonian_field(m, x)), &stack_state(q, p), cfg)
}

/// Exponential map: the endpoint of the geodesic with initial velocity `v`,
/// together with the full phase trajectory.
pub fn exp(
    m: &LandmarkManifold,
    q: &LandmarkPoint,
    v: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(LandmarkPoint, Trajectory)> {
    if v.len() != q.dim() {
        return Err(GeoError::DimensionMismatch(format!(
            "tangent has length {}, point has dimension {}",
            v.len(),
            q.dim()
        )));
    }
    let p = m.flat(q.coords(), v)?;
    let traj = geodesic_from_momentum(m, q.coords(), &p, cfg)?;
    let end = traj.last().rows(0, q.dim()).into_owned();
    Ok((LandmarkPoint::from_vector(end)?, traj))
}

/// Linearization of Hamilton's equations applied to a bundle of tangent
/// directions. `dq` and `dp` are `r x d`: one row per direction, one column
/// per coordinate.
fn linearized_field(
    m: &LandmarkManifold,
    q: &[f64],
    p: &[f64],
    dq: &DMatrix<f64>,
    dp: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = q.len() / 2;
    let r = dq.nrows();
    let mut out_q = dp.clone(); // diagonal kernel blocks are the identity
    let mut out_p = DMatrix::zeros(r, q.len());
    let mut diff = [vec![0.0; r], vec![0.0; r]];
    let mut qi0 = vec![0.0; r];
    let mut qi1 = vec![0.0; r];
    let mut qj0 = vec![0.0; r];
    let mut qj1 = vec![0.0; r];
    let mut w0 = vec![0.0; r];
    let mut w1 = vec![0.0; r];
    for i in 0..n {
        let xi = landmark(q, i);
        let pi = landmark(p, i);
        for j in 0..i {
            let (k, g, h) = k_all(xi, landmark(q, j), &m.kernel);
            let pj = landmark(p, j);
            let pp = pi[0] * pj[0] + pi[1] * pj[1];
            for c in 0..2 {
                let ai = dq.column(coord(i, c));
                let aj = dq.column(coord(j, c));
                for (dst, (x, y)) in diff[c].iter_mut().zip(ai.iter().zip(aj.iter())) {
                    *dst = x - y;
                }
            }
            let (ax, ay) = (&diff[0], &diff[1]);
            let bi0 = dp.column(coord(i, 0));
            let bi1 = dp.column(coord(i, 1));
            let bj0 = dp.column(coord(j, 0));
            let bj1 = dp.column(coord(j, 1));
            for s in 0..r {
                let dx = ax[s];
                let dy = ay[s];
                let sg = g[0] * dx + g[1] * dy;
                qi0[s] = k * bj0[s] + sg * pj[0];
                qi1[s] = k * bj1[s] + sg * pj[1];
                qj0[s] = k * bi0[s] + sg * pi[0];
                qj1[s] = k * bi1[s] + sg * pi[1];
                let t = bi0[s] * pj[0] + bi1[s] * pj[1] + pi[0] * bj0[s] + pi[1] * bj1[s];
                w0[s] = t * g[0] + pp * (h[0][0] * dx + h[0][1] * dy);
                w1[s] = t * g[1] + pp * (h[1][0] * dx + h[1][1] * dy);
            }
            add_col(&mut out_q, coord(i, 0), &qi0, 1.0);
            add_col(&mut out_q, coord(i, 1), &qi1, 1.0);
            add_col(&mut out_q, coord(j, 0), &qj0, 1.0);
            add_col(&mut out_q, coord(j, 1), &qj1, 1.0);
            add_col(&mut out_p, coord(i, 0), &w0, -1.0);
            add_col(&mut out_p, coord(i, 1), &w1, -1.0);
            add_col(&mut out_p, coord(j, 0), &w0, 1.0);
            add_col(&mut out_p, coord(j, 1), &w1, 1.0);
        }
    }
    (out_q, out_p)
}

#[inline]
fn add_col(m: &mut DMatrix<f64>, col: usize, v: &[f64], scale: f64) {
    for (dst, x) in m.column_mut(col).iter_mut().zip(v) {
        *dst += scale * x;
    }
}

/// Shoots from `(q, p0)` while propagating initial momentum perturbations
/// `dp0` (one column per direction). Returns the phase endpoint and
/// `d q_T / d(direction)` as a `d x r` matrix.
pub fn shoot_with_sensitivity(
    m: &LandmarkManifold,
    q: &[f64],
    p0: &DVector<f64>,
    dp0: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    cfg.validate()?;
    let d = q.len();
    let r = dp0.ncols();
    let dt = cfg.dt();
    let mut x = stack_state(q, p0);
    let mut tq = DMatrix::<f64>::zeros(r, d);
    let mut tp = dp0.transpose();
    let field = |x: &DVector<f64>, tq: &DMatrix<f64>, tp: &DMatrix<f64>| {
        let f = hamiltonian_field(m, x);
        let (lq, lp) = linearized_field(m, &x.as_slice()[..d], &x.as_slice()[d..], tq, tp);
        (f, lq, lp)
    };
    for step in 0..cfg.steps {
        match cfg.scheme {
            OdeScheme::Euler => {
                let (f, lq, lp) = field(&x, &tq, &tp);
                x += f * dt;
                tq += lq * dt;
                tp += lp * dt;
            }
            OdeScheme::Rk4 => {
                let h = 0.5 * dt;
                let (f1, q1, p1) = field(&x, &tq, &tp);
                let (f2, q2, p2) = field(&(&x + &f1 * h), &(&tq + &q1 * h), &(&tp + &p1 * h));
                let (f3, q3, p3) = field(&(&x + &f2 * h), &(&tq + &q2 * h), &(&tp + &p2 * h));
                let (f4, q4, p4) = field(&(&x + &f3 * dt), &(&tq + &q3 * dt), &(&tp + &p3 * dt));
                let c = dt / 6.0;
                x += (f1 + (f2 + f3) * 2.0 + f4) * c;
                tq += (q1 + (q2 + q3) * 2.0 + q4) * c;
                tp += (p1 + (p2 + p3) * 2.0 + p4) * c;
            }
        }
        if x.iter().chain(tq.iter()).any(|v| !v.is_finite()) {
            return Err(GeoError::NonFiniteState { step: step + 1 });
        }
    }
    Ok((x, tq.transpose()))
}

/// `d q_T / d p_0` of the geodesic flow.
pub fn flow_jacobian(
    m: &LandmarkManifold,
    q: &LandmarkPoint,
    p0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<DMatrix<f64>> {
    let d = q.dim();
    let (_, jac) = shoot_with_sensitivity(m, q.coords(), p0, &DMatrix::identity(d, d), cfg)?;
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogOptions {
    pub max_iterations: usize,
    /// Converged once `loss <= rel_tol * |q2 - q1|^2 / d`, i.e. the endpoint
    /// misses by at most `sqrt(rel_tol)` relative to the displacement. A
    /// floor of `1e-28 * (1 + |q2|^2) / d` absorbs rounding.
    pub rel_tol: f64,
}

impl Default for LogOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogResult {
    pub v: DVector<f64>,
    pub final_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Loss after every accepted step, starting with the initial guess.
    pub loss_history: Vec<f64>,
}

fn shooting_loss(m: &LandmarkManifold, q1: &LandmarkPoint, q2: &LandmarkPoint, v: &DVector<f64>, cfg: &SolverConfig) -> Result<f64> {
    let (end, _) = exp(m, q1, v, cfg)?;
    Ok((end.vector() - q2.vector()).norm_squared() / q1.dim() as f64)
}

/// Logarithm map by shooting: minimizes `|exp(q1, v) - q2|^2 / d` over `v`.
///
/// `v0` defaults to `q2 - q1`. A run that exhausts the iteration budget
/// returns its best iterate with `converged == false`.
pub fn log(
    m: &LandmarkManifold,
    q1: &LandmarkPoint,
    q2: &LandmarkPoint,
    v0: Option<&DVector<f64>>,
    cfg: &SolverConfig,
    opt: &LogOptions,
) -> Result<LogResult> {
    let d = q1.dim();
    if q2.dim() != d {
        return Err(GeoError::DimensionMismatch(format!(
            "log between shapes of dimension {d} and {}",
            q2.dim()
        )));
    }
    let mut v = match v0 {
        Some(v0) if v0.len() != d => {
            return Err(GeoError::DimensionMismatch(format!(
                "initial guess has length {}, expected {d}",
                v0.len()
            )))
        }
        Some(v0) => v0.clone(),
        None => q2.vector() - q1.vector(),
    };
    let tol = (opt.rel_tol * (q2.vector() - q1.vector()).norm_squared()).max(1e-28 * (1.0 + q2.vector().norm_squared()))
        / d as f64;
    let factor = m.factor(q1.coords())?;
    let metric = factor.metric();

    let mut loss = shooting_loss(m, q1, q2, &v, cfg)?;
    let mut history = vec![loss];
    let mut iterations = 0;
    let mut mu: Option<f64> = None;
    let mut jac_cache: Option<(DMatrix<f64>, DVector<f64>)> = None;

    while loss > tol && iterations < opt.max_iterations {
        let (jac, resid) = match jac_cache.take() {
            Some(c) => c,
            None => {
                let p = &metric * &v;
                let (end, jac_p) = shoot_with_sensitivity(m, q1.coords(), &p, &metric, cfg)?;
                let resid = end.rows(0, d) - q2.vector();
                (jac_p, resid)
            }
        };
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &resid;
        let damping = *mu.get_or_insert_with(|| 1e-6 * jtj.diagonal().amax().max(f64::MIN_POSITIVE));
        let mut lhs = jtj;
        for i in 0..d {
            lhs[(i, i)] += damping;
        }
        iterations += 1;
        let step = match lhs.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => {
                mu = Some(damping * 10.0);
                jac_cache = Some((jac, resid));
                continue;
            }
        };
        let trial = &v + &step;
        let trial_loss = match shooting_loss(m, q1, q2, &trial, cfg) {
            Ok(l) if l.is_finite() => l,
            Ok(_) | Err(GeoError::NonFiniteState { .. }) | Err(GeoError::SingularMetric { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if trial_loss < loss {
            v = trial;
            loss = trial_loss;
            history.push(loss);
            mu = Some((damping / 3.0).max(1e-300));
        } else {
            let next = damping * 4.0;
            if !next.is_finite() || next > 1e300 || step.norm() <= 1e-15 * (1.0 + v.norm()) {
                break;
            }
            mu = Some(next);
            jac_cache = Some((jac, resid));
        }
    }
    Ok(LogResult {
        converged: loss <= tol,
        v,
        final_loss: loss,
        iterations,
        loss_history: history,
    })
}

/// `|v|_g` for a tangent `v` at `q`.
pub fn tangent_norm(m: &LandmarkManifold, q: &[f64], v: &DVector<f64>) -> Result<f64> {
    let p = m.flat(q, v)?;
    Ok(p.dot(v).max(0.0).sqrt())
}

/// Geodesic distance through the logarithm map.
pub fn distance(
    m: &LandmarkManifold,
    q1: &LandmarkPoint,
    q2: &LandmarkPoint,
    cfg: &SolverConfig,
    opt: &LogOptions,
) -> Result<f64> {
    let res = log(m, q1, q2, None, cfg, opt)?;
    if !res.converged {
        return Err(GeoError::NoConvergence {
            iterations: res.iterations,
            objective: res.final_loss,
        });
    }
    tangent_norm(m, q1.coords(), &res.v)
}
