//! Fixed-step ODE and SDE integrators.
//!
//! ODE schemes: explicit Euler and classical RK4. SDE schemes: Itô–Euler
//! (Euler–Maruyama) and the Stratonovich–Heun predictor–corrector
//!
//! ```text
//! x^    = x_k + b(x_k) dW_k
//! x_k+1 = x_k + a(x_k) dt + (b(x_k) dW_k + b(x^) dW_k) / 2
//! ```
//!
//! Wiener increments come from ChaCha20 seeded with `seed_from_u64(seed)`,
//! transformed to standard normals with the ziggurat sampler of `rand_distr`
//! and scaled by `sqrt(dt)`, drawn step-major (all `m` components of step 0,
//! then step 1, ...). Monte-Carlo ensembles use seeds `seed, seed + 1, ...`.

use crate::error::{GeoError, Result};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OdeScheme {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeScheme {
    ItoEuler,
    StratonovichHeun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub steps: usize,
    pub horizon: f64,
    pub scheme: OdeScheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps: 100,
            horizon: 1.0,
            scheme: OdeScheme::Rk4,
        }
    }
}

impl SolverConfig {
    pub fn new(steps: usize, horizon: f64, scheme: OdeScheme) -> Result<Self> {
        let cfg = Self {
            steps,
            horizon,
            scheme,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_steps(self, steps: usize) -> Self {
        Self { steps, ..self }
    }

    pub fn with_scheme(self, scheme: OdeScheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        Self { horizon, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(GeoError::InvalidConfig("steps must be at least 1".into()));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(GeoError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Time of grid node `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }
}

/// Time grid with one state per node, `states[0]` being the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    fn start(x0: &DVector<f64>, capacity: usize) -> Self {
        let mut times = Vec::with_capacity(capacity + 1);
        let mut states = Vec::with_capacity(capacity + 1);
        times.push(0.0);
        states.push(x0.clone());
        Self { times, states }
    }

    fn push(&mut self, t: f64, x: DVector<f64>) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::NonFiniteState {
                step: self.states.len(),
            });
        }
        self.times.push(t);
        self.states.push(x);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory holds its initial state")
    }

    /// The same trajectory with each state restricted to `range`.
    pub fn project(&self, range: std::ops::Range<usize>) -> Trajectory {
        Trajectory {
            times: self.times.clone(),
            states: self
                .states
                .iter()
                .map(|s| s.rows(range.start, range.len()).into_owned())
                .collect(),
        }
    }

    /// States as nested rows, for serialization.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.as_slice().to_vec()).collect()
    }
}

/// Integrates `dx/dt = field(t, x)` on the configured grid.
pub fn integrate_ode<F>(mut field: F, x0: &DVector<f64>, cfg: &SolverConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    cfg.validate()?;
    let dt = cfg.dt();
    let mut traj = Trajectory::start(x0, cfg.steps);
    let mut x = x0.clone();
    for k in 0..cfg.steps {
        let t = cfg.time(k);
        x = match cfg.scheme {
            OdeScheme::Euler => {
                let f = field(t, &x)?;
                &x + f * dt
            }
            OdeScheme::Rk4 => {
                let h = 0.5 * dt;
                let k1 = field(t, &x)?;
                let k2 = field(t + h, &(&x + &k1 * h))?;
                let k3 = field(t + h, &(&x + &k2 * h))?;
                let k4 = field(t + dt, &(&x + &k3 * dt))?;
                &x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
            }
        };
        traj.push(cfg.time(k + 1), x.clone())?;
    }
    Ok(traj)
}

/// Integrates `dx/dt = field(t, x, s(t))` where `s` is an auxiliary input
/// sampled on the grid nodes (`samples.len() == steps + 1`). RK4 stages at
/// half steps see the average of the neighbouring samples.
pub fn integrate_ode_driven<F>(
    mut field: F,
    x0: &DVector<f64>,
    samples: &[DVector<f64>],
    cfg: &SolverConfig,
) -> Result<Trajectory>
where
    F: FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
{
    cfg.validate()?;
    if samples.len() != cfg.steps + 1 {
        return Err(GeoError::DimensionMismatch(format!(
            "driving sequence has {} samples, expected {}",
            samples.len(),
            cfg.steps + 1
        )));
    }
    let dt = cfg.dt();
    let mut traj = Trajectory::start(x0, cfg.steps);
    let mut x = x0.clone();
    for k in 0..cfg.steps {
        let t = cfg.time(k);
        let (s0, s1) = (&samples[k], &samples[k + 1]);
        x = match cfg.scheme {
            OdeScheme::Euler => {
                let f = field(t, &x, s0)?;
                &x + f * dt
            }
            OdeScheme::Rk4 => {
                let h = 0.5 * dt;
                let mid = (s0 + s1) * 0.5;
                let k1 = field(t, &x, s0)?;
                let k2 = field(t + h, &(&x + &k1 * h), &mid)?;
                let k3 = field(t + h, &(&x + &k2 * h), &mid)?;
                let k4 = field(t + dt, &(&x + &k3 * dt), s1)?;
                &x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
            }
        };
        traj.push(cfg.time(k + 1), x.clone())?;
    }
    Ok(traj)
}

/// Pre-sampled increments of an `m`-dimensional Wiener process.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    pub seed: u64,
    pub dt: f64,
    pub increments: Vec<DVector<f64>>,
}

impl WienerPath {
    pub fn steps(&self) -> usize {
        self.increments.len()
    }

    pub fn dim(&self) -> usize {
        self.increments.first().map_or(0, |v| v.len())
    }

    /// A path whose increments are all zero.
    pub fn zeros(m: usize, cfg: &SolverConfig) -> Self {
        Self {
            seed: 0,
            dt: cfg.dt(),
            increments: vec![DVector::zeros(m); cfg.steps],
        }
    }

    /// `W` at each grid node, starting from zero.
    pub fn cumulative(&self) -> Vec<DVector<f64>> {
        let mut acc = DVector::zeros(self.dim());
        let mut out = vec![acc.clone()];
        for dw in &self.increments {
            acc += dw;
            out.push(acc.clone());
        }
        out
    }
}

pub fn sample_wiener(m: usize, cfg: &SolverConfig, seed: u64) -> Result<WienerPath> {
    cfg.validate()?;
    if m == 0 {
        return Err(GeoError::InvalidConfig("Wiener dimension must be at least 1".into()));
    }
    let dt = cfg.dt();
    let scale = dt.sqrt();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let increments = (0..cfg.steps)
        .map(|_| {
            DVector::from_fn(m, |_, _| {
                let z: f64 = rng.sample(StandardNormal);
                z * scale
            })
        })
        .collect();
    Ok(WienerPath { seed, dt, increments })
}

/// Integrates `dx = drift(t, x) dt + diffusion(t, x, dW)` along `path`.
///
/// `diffusion` receives the increment and returns the already contracted
/// noise term, so it must be linear in `dW`.
pub fn integrate_sde<A, B>(
    mut drift: A,
    mut diffusion: B,
    x0: &DVector<f64>,
    path: &WienerPath,
    scheme: SdeScheme,
) -> Result<Trajectory>
where
    A: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
    B: FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<DVector<f64>>,
{
    let dt = path.dt;
    let mut traj = Trajectory::start(x0, path.steps());
    let mut x = x0.clone();
    for (k, dw) in path.increments.iter().enumerate() {
        let t = k as f64 * dt;
        let t1 = (k + 1) as f64 * dt;
        let a = drift(t, &x)?;
        let b = diffusion(t, &x, dw)?;
        x = match scheme {
            SdeScheme::ItoEuler => &x + a * dt + b,
            SdeScheme::StratonovichHeun => {
                let pred = &x + &b;
                let b_pred = diffusion(t1, &pred, dw)?;
                &x + a * dt + (b + b_pred) * 0.5
            }
        };
        traj.push(t1, x.clone())?;
    }
    Ok(traj)
}
