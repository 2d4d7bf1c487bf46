//! Fréchet means on the landmark manifold and on its frame bundle.

use crate::error::{GeoError, Result};
use crate::framebundle::{fm_exp, fm_hamiltonian, FramePoint};
use crate::geodesic::{exp, log, tangent_norm, LogOptions};
use crate::integrate::SolverConfig;
use crate::manifold::{LandmarkManifold, LandmarkPoint};
use crate::optim::{minimize, MinimizeOptions};
use nalgebra::DVector;

fn check_samples(samples: &[LandmarkPoint], d: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(GeoError::EmptyDataset);
    }
    if let Some(s) = samples.iter().find(|s| s.dim() != d) {
        return Err(GeoError::DimensionMismatch(format!(
            "sample of dimension {} against dimension {d}",
            s.dim()
        )));
    }
    Ok(())
}

/// Coordinate-wise average of the samples.
pub fn euclidean_mean(samples: &[LandmarkPoint]) -> Result<LandmarkPoint> {
    let first = samples.first().ok_or(GeoError::EmptyDataset)?;
    check_samples(samples, first.dim())?;
    let mut acc = DVector::zeros(first.dim());
    for s in samples {
        acc += s.vector();
    }
    LandmarkPoint::from_vector(acc / samples.len() as f64)
}

/// Sample covariance with `1/N` normalization.
pub fn sample_covariance(samples: &[LandmarkPoint]) -> Result<nalgebra::DMatrix<f64>> {
    let mean = euclidean_mean(samples)?;
    let d = mean.dim();
    let mut c = nalgebra::DMatrix::zeros(d, d);
    for s in samples {
        let r = s.vector() - mean.vector();
        c += &r * r.transpose();
    }
    Ok(c / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetOptions {
    pub max_iterations: usize,
    pub rel_grad_tol: f64,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    pub log: LogOptions,
}

impl Default for FrechetOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_grad_tol: 1e-5,
            armijo_c: 1e-4,
            max_backtracks: 20,
            log: LogOptions { rel_tol: 1e-22, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetResult {
    pub mean: LandmarkPoint,
    /// `log(mean, x_i)` for every sample.
    pub tangents: Vec<DVector<f64>>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
    /// Metric norm of the objective gradient after every accepted step.
    pub grad_norm_history: Vec<f64>,
}

struct MeanState {
    y: LandmarkPoint,
    tangents: Vec<DVector<f64>>,
    objective: f64,
    mean_tangent: DVector<f64>,
    grad_norm: f64,
}

fn mean_state(
    m: &LandmarkManifold,
    samples: &[LandmarkPoint],
    y: LandmarkPoint,
    warm: Option<&[DVector<f64>]>,
    cfg: &SolverConfig,
    opt: &FrechetOptions,
) -> Result<Option<MeanState>> {
    let n = samples.len() as f64;
    let mut tangents = Vec::with_capacity(samples.len());
    let mut objective = 0.0;
    let mut mean_tangent = DVector::zeros(y.dim());
    for (i, x) in samples.iter().enumerate() {
        let mut r = log(m, &y, x, warm.map(|w| &w[i]), cfg, &opt.log)?;
        if !r.converged && warm.is_some() {
            r = log(m, &y, x, None, cfg, &opt.log)?;
        }
        if !r.converged {
            return Ok(None);
        }
        let norm = tangent_norm(m, y.coords(), &r.v)?;
        objective += norm * norm / n;
        mean_tangent += &r.v / n;
        tangents.push(r.v);
    }
    let grad_norm = 2.0 * tangent_norm(m, y.coords(), &mean_tangent)?;
    Ok(Some(MeanState { y, tangents, objective, mean_tangent, grad_norm }))
}

/// Empirical Fréchet mean `argmin_y (1/N) sum d(y, x_i)^2` by Riemannian
/// gradient descent. Each step moves along `exp_y(t * mean log_y(x_i))` with
/// Armijo backtracking on `t`, warm-starting every logarithm from the
/// previous iterate's tangent.
pub fn frechet_mean(
    m: &LandmarkManifold,
    samples: &[LandmarkPoint],
    q_init: &LandmarkPoint,
    cfg: &SolverConfig,
    opt: &FrechetOptions,
) -> Result<FrechetResult> {
    check_samples(samples, q_init.dim())?;
    let mut state = mean_state(m, samples, q_init.clone(), None, cfg, opt)?.ok_or(GeoError::NoConvergence {
        iterations: 0,
        objective: f64::NAN,
    })?;
    let g0 = state.grad_norm;
    let mut objective_history = vec![state.objective];
    let mut grad_norm_history = vec![g0];
    let mut iterations = 0;
    let done = |g: f64| g <= opt.rel_grad_tol * g0 || g <= 1e-14;
    let mut converged = done(g0);

    while !converged && iterations < opt.max_iterations {
        iterations += 1;
        let slope = -0.5 * state.grad_norm * state.grad_norm;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opt.max_backtracks {
            let step = &state.mean_tangent * t;
            if let Ok((y, _)) = exp(m, &state.y, &step, cfg) {
                let warm: Vec<DVector<f64>> = state.tangents.iter().map(|v| v - &step).collect();
                if let Some(trial) = mean_state(m, samples, y, Some(&warm), cfg, opt)? {
                    if trial.objective <= state.objective + opt.armijo_c * t * slope
                        && trial.objective < state.objective
                    {
                        accepted = Some(trial);
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else { break };
        state = next;
        objective_history.push(state.objective);
        grad_norm_history.push(state.grad_norm);
        converged = done(state.grad_norm);
    }
    Ok(FrechetResult {
        mean: state.y,
        tangents: state.tangents,
        objective: state.objective,
        iterations,
        converged,
        objective_history,
        grad_norm_history,
    })
}

/// Per-sample loss used by the frame-bundle estimator: mean squared
/// coordinate difference.
pub fn coordinate_loss(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmObjectiveTerms {
    /// `(1/N) sum |p_i|^2`, the squared norm under the frame-bundle cometric.
    pub norm: f64,
    /// `(lambda/N) sum loss(pi(exp_u(p_i)), y_i)`.
    pub data: f64,
    /// `log det(nu^T g(q) nu)`.
    pub log_det: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetFmOptions {
    pub minimize: MinimizeOptions,
    /// Central-difference step for the objective gradient.
    pub fd_step: f64,
}

impl Default for FrechetFmOptions {
    fn default() -> Self {
        Self {
            minimize: MinimizeOptions { max_iterations: 200, rel_grad_tol: 1e-6, ..Default::default() },
            fd_step: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrechetFMResult {
    pub u: FramePoint,
    pub momenta: Vec<DVector<f64>>,
    pub objective: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
    pub initial_grad_norm: f64,
    pub grad_norm: f64,
}

struct FmProblem<'a> {
    m: &'a LandmarkManifold,
    samples: &'a [LandmarkPoint],
    lambda: f64,
    cfg: &'a SolverConfig,
    d: usize,
    n: usize,
}

impl FmProblem<'_> {
    fn frame(&self, xu: &[f64]) -> Result<FramePoint> {
        FramePoint::from_state(xu, self.d)
    }

    fn log_det(&self, xu: &[f64]) -> f64 {
        let Ok(u) = self.frame(xu) else { return f64::INFINITY };
        let Ok(g) = self.m.metric_matrix(u.q.coords()) else { return f64::INFINITY };
        match (u.nu.transpose() * g * &u.nu).cholesky() {
            Some(c) => 2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            None => f64::INFINITY,
        }
    }

    /// `(|p|^2, loss)` for one sample.
    fn sample_parts(&self, xu: &[f64], p: &DVector<f64>, y: &LandmarkPoint) -> Result<(f64, f64)> {
        let u = self.frame(xu)?;
        let norm = 2.0 * fm_hamiltonian(self.m, &u, p)?;
        let (end, _) = fm_exp(self.m, &u, p, self.cfg)?;
        Ok((norm, coordinate_loss(end.q.coords(), y.coords())))
    }

    fn sample_term(&self, xu: &[f64], p: &DVector<f64>, y: &LandmarkPoint) -> f64 {
        match self.sample_parts(xu, p, y) {
            Ok((norm, loss)) if norm.is_finite() && loss.is_finite() => (norm + self.lambda * loss) / self.n as f64,
            _ => f64::INFINITY,
        }
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let len = self.d * (1 + self.n_frame_cols(x));
        let xu = &x.as_slice()[..len];
        let mut total = self.log_det(xu);
        for (i, y) in self.samples.iter().enumerate() {
            if !total.is_finite() {
                break;
            }
            let p = x.rows(len * (i + 1), len).into_owned();
            total += self.sample_term(xu, &p, y);
        }
        total
    }

    fn n_frame_cols(&self, x: &DVector<f64>) -> usize {
        x.len() / ((self.n + 1) * self.d) - 1
    }

    fn gradient(&self, x: &DVector<f64>, h: f64) -> Result<DVector<f64>> {
        let len = self.d * (1 + self.n_frame_cols(x));
        let mut grad = DVector::zeros(x.len());
        let mut xu = x.as_slice()[..len].to_vec();
        let ld = |xu: &[f64]| self.log_det(xu);
        central_diff(&mut xu, h, &ld, |j, g| grad[j] += g)?;
        for (i, y) in self.samples.iter().enumerate() {
            let off = len * (i + 1);
            let mut z = x.as_slice()[..len].to_vec();
            z.extend_from_slice(&x.as_slice()[off..off + len]);
            let term = |z: &[f64]| self.sample_term(&z[..len], &DVector::from_column_slice(&z[len..]), y);
            central_diff(&mut z, h, &term, |j, g| {
                let target = if j < len { j } else { off + j - len };
                grad[target] += g;
            })?;
        }
        Ok(grad)
    }
}

fn central_diff<F, A>(z: &mut [f64], h: f64, f: &F, mut acc: A) -> Result<()>
where
    F: Fn(&[f64]) -> f64,
    A: FnMut(usize, f64),
{
    let mid = f(z);
    for j in 0..z.len() {
        let orig = z[j];
        z[j] = orig + h;
        let fp = f(z);
        z[j] = orig - h;
        let fm = f(z);
        z[j] = orig;
        let g = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) if mid.is_finite() => (fp - mid) / h,
            (false, true) if mid.is_finite() => (mid - fm) / h,
            _ => return Err(GeoError::RankLoss("objective undefined around current iterate".into())),
        };
        acc(j, g);
    }
    Ok(())
}

/// Breakdown of the frame-bundle Fréchet objective at `(u, p_1..p_N)`.
pub fn fm_objective_terms(
    m: &LandmarkManifold,
    samples: &[LandmarkPoint],
    u: &FramePoint,
    momenta: &[DVector<f64>],
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<FmObjectiveTerms> {
    check_samples(samples, u.dim())?;
    if momenta.len() != samples.len() {
        return Err(GeoError::DimensionMismatch(format!(
            "{} momenta for {} samples",
            momenta.len(),
            samples.len()
        )));
    }
    let prob = FmProblem { m, samples, lambda, cfg, d: u.dim(), n: samples.len() };
    let xu = u.to_state();
    let n = samples.len() as f64;
    let (mut norm, mut data) = (0.0, 0.0);
    for (p, y) in momenta.iter().zip(samples) {
        let (a, b) = prob.sample_parts(xu.as_slice(), p, y)?;
        norm += a / n;
        data += lambda * b / n;
    }
    let log_det = prob.log_det(xu.as_slice());
    if !log_det.is_finite() {
        return Err(GeoError::RankLoss("frame is degenerate under the metric".into()));
    }
    Ok(FmObjectiveTerms { norm, data, log_det, total: norm + data + log_det })
}

/// Joint estimate of a mean shape and covariance frame by minimizing
///
/// ```text
/// (1/N) sum |p_i|^2 + (lambda/N) sum loss(pi(exp_u(p_i)), y_i) + log det(nu^T g nu)
/// ```
///
/// over the frame point `u` and one frame-bundle covector per sample. The
/// gradient is taken by central differences, one sample block at a time.
pub fn frechet_mean_fm(
    m: &LandmarkManifold,
    samples: &[LandmarkPoint],
    u_init: &FramePoint,
    lambda: f64,
    cfg: &SolverConfig,
    opt: &FrechetFmOptions,
) -> Result<FrechetFMResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(GeoError::InvalidConfig(format!("lambda must be positive, got {lambda}")));
    }
    check_samples(samples, u_init.dim())?;
    cfg.validate()?;
    let prob = FmProblem { m, samples, lambda, cfg, d: u_init.dim(), n: samples.len() };
    let len = u_init.state_len();
    let mut x0 = DVector::zeros(len * (1 + samples.len()));
    x0.rows_mut(0, len).copy_from(&u_init.to_state());
    if !prob.value(&x0).is_finite() {
        return Err(GeoError::RankLoss("initial frame is degenerate under the metric".into()));
    }
    let res = minimize(|x| Ok(prob.value(x)), |x| prob.gradient(x, opt.fd_step), &x0, &opt.minimize)?;
    let u = FramePoint::from_state(&res.x.as_slice()[..len], u_init.dim())?;
    let momenta = (0..samples.len()).map(|i| res.x.rows(len * (i + 1), len).into_owned()).collect();
    Ok(FrechetFMResult {
        u,
        momenta,
        objective: res.value,
        lambda,
        iterations: res.iterations,
        converged: res.converged,
        objective_history: res.history,
        initial_grad_norm: res.initial_grad_norm,
        grad_norm: res.grad_norm,
    })
}
