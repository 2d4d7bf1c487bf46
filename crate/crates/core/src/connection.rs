//! Levi-Civita connection of the landmark metric and parallel transport.

use crate::error::{GeoError, Result};
use crate::geodesic::{hamiltonian_field, stack_state};
use crate::integrate::{integrate_ode, integrate_ode_driven, SolverConfig, Trajectory};
use crate::manifold::{CometricFactor, LandmarkManifold};
use crate::tensor::Tensor3;
use nalgebra::{DMatrix, DVector};

/// Christoffel symbols, `gamma[k][i][j] = Γ^k_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTensor(pub Tensor3);

impl ChristoffelTensor {
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.0.get(k, i, j)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `Γ(a, b)^k = Γ^k_ij a^i b^j`.
    pub fn contract(&self, a: &[f64], b: &[f64]) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(d, |k, _| {
            let slab = self.0.slab(k);
            (0..d)
                .map(|i| a[i] * (0..d).map(|j| slab[i * d + j] * b[j]).sum::<f64>())
                .sum()
        })
    }
}

/// `Γ^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)`, assembled from the
/// metric derivative tensor and the cometric.
pub fn christoffel(m: &LandmarkManifold, q: &[f64]) -> Result<ChristoffelTensor> {
    let factor = m.factor(q)?;
    Ok(christoffel_with(m, q, &factor))
}

pub fn christoffel_with(m: &LandmarkManifold, q: &[f64], factor: &CometricFactor) -> ChristoffelTensor {
    let d = q.len();
    let dg = m.metric_derivative_with(q, factor);
    // bracket[l][(i, j)] = d_i g_jl + d_j g_il - d_l g_ij
    let mut bracket = DMatrix::zeros(d, d * d);
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                bracket[(l, i * d + j)] = dg.get(i, j, l) + dg.get(j, i, l) - dg.get(l, i, j);
            }
        }
    }
    let gamma = factor.cometric() * bracket * 0.5;
    let mut out = Tensor3::zeros(d);
    for k in 0..d {
        let slab = out.slab_mut(k);
        for (idx, v) in slab.iter_mut().enumerate() {
            *v = gamma[(k, idx)];
        }
    }
    ChristoffelTensor(out)
}

/// `Γ(a, b)` without forming the tensor:
/// `Γ(a, b) = 1/2 (G* z - (∂_a G*) g b - (∂_b G*) g a)` with
/// `z_l = (g a)^T (∂_l G*) (g b)`.
pub fn christoffel_contract(
    m: &LandmarkManifold,
    q: &[f64],
    factor: &CometricFactor,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> DVector<f64> {
    let ga = factor.metric_apply(a);
    let gb = factor.metric_apply(b);
    christoffel_contract_lowered(m, q, factor, a, b, &ga, &gb)
}

/// As [`christoffel_contract`] with `g a` and `g b` supplied.
pub fn christoffel_contract_lowered(
    m: &LandmarkManifold,
    q: &[f64],
    factor: &CometricFactor,
    a: &DVector<f64>,
    b: &DVector<f64>,
    ga: &DVector<f64>,
    gb: &DVector<f64>,
) -> DVector<f64> {
    let z = m.cometric_gradient_form(q, ga.as_slice(), gb.as_slice());
    let mut out = factor.cometric() * z;
    out -= m.cometric_directional_apply(q, a.as_slice(), gb.as_slice());
    out -= m.cometric_directional_apply(q, b.as_slice(), ga.as_slice());
    out * 0.5
}

/// Gradient of `a -> p^T Γ(a, b)`, a covector in `a`.
pub fn christoffel_covector(
    m: &LandmarkManifold,
    q: &[f64],
    factor: &CometricFactor,
    p: &DVector<f64>,
    b: &DVector<f64>,
) -> DVector<f64> {
    let gb = factor.metric_apply(b);
    let w = factor.cometric() * p;
    let mut out = m.cometric_directional_apply(q, w.as_slice(), gb.as_slice());
    out -= m.cometric_directional_apply(q, b.as_slice(), p.as_slice());
    let mut res = factor.metric_apply(&out);
    res -= m.cometric_gradient_form(q, p.as_slice(), gb.as_slice());
    res * 0.5
}

/// Positions and velocities of a curve on the solver grid.
#[derive(Debug, Clone)]
pub struct CurveSamples {
    pub points: Vec<DVector<f64>>,
    pub velocities: Vec<DVector<f64>>,
}

impl CurveSamples {
    /// Velocities from central differences (one-sided at the ends) of points
    /// on a uniform grid of spacing `dt`.
    pub fn from_points(points: Vec<DVector<f64>>, dt: f64) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(GeoError::DimensionMismatch("a curve needs at least two samples".into()));
        }
        let velocities = (0..n)
            .map(|k| {
                if k == 0 {
                    (&points[1] - &points[0]) / dt
                } else if k == n - 1 {
                    (&points[n - 1] - &points[n - 2]) / dt
                } else {
                    (&points[k + 1] - &points[k - 1]) / (2.0 * dt)
                }
            })
            .collect();
        Ok(Self { points, velocities })
    }

    /// Positions and `sharp(p)` velocities of a phase trajectory.
    pub fn from_phase(m: &LandmarkManifold, traj: &Trajectory) -> Self {
        let d = traj.states[0].len() / 2;
        let mut points = Vec::with_capacity(traj.len());
        let mut velocities = Vec::with_capacity(traj.len());
        for x in &traj.states {
            let q = x.rows(0, d).into_owned();
            let p = x.rows(d, d).into_owned();
            velocities.push(m.sharp(q.as_slice(), &p));
            points.push(q);
        }
        Self { points, velocities }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Transports `v0` along sampled curve by `dv/dt = -Γ(γ', v)`, on the grid
/// `cfg` (whose `steps + 1` must equal the number of samples). Returns the
/// trajectory of the transported vector.
pub fn parallel_transport(
    m: &LandmarkManifold,
    v0: &DVector<f64>,
    curve: &CurveSamples,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let d = v0.len();
    if curve.points.iter().any(|p| p.len() != d) {
        return Err(GeoError::DimensionMismatch("curve and vector dimensions differ".into()));
    }
    let samples: Vec<DVector<f64>> = curve
        .points
        .iter()
        .zip(&curve.velocities)
        .map(|(p, v)| {
            let mut s = DVector::zeros(2 * d);
            s.rows_mut(0, d).copy_from(p);
            s.rows_mut(d, d).copy_from(v);
            s
        })
        .collect();
    integrate_ode_driven(
        |_, v, s| {
            let q = &s.as_slice()[..d];
            let vel = s.rows(d, d).into_owned();
            let factor = m.factor(q)?;
            Ok(-christoffel_contract(m, q, &factor, &vel, v))
        },
        v0,
        &samples,
        cfg,
    )
}

/// Geodesic from `(q, v)` integrated jointly with the parallel transport of
/// each vector in `vectors`. Returns the phase trajectory and, per vector,
/// its transported values at each grid node.
pub fn transport_along_geodesic(
    m: &LandmarkManifold,
    q: &[f64],
    v: &DVector<f64>,
    vectors: &[DVector<f64>],
    cfg: &SolverConfig,
) -> Result<(Trajectory, Vec<Vec<DVector<f64>>>)> {
    let d = q.len();
    let r = vectors.len();
    if v.len() != d || vectors.iter().any(|w| w.len() != d) {
        return Err(GeoError::DimensionMismatch("tangent dimensions differ from the base point".into()));
    }
    let p = m.flat(q, v)?;
    let phase = stack_state(q, &p);
    let mut x0 = DVector::zeros(2 * d + r * d);
    x0.rows_mut(0, 2 * d).copy_from(&phase);
    for (i, w) in vectors.iter().enumerate() {
        x0.rows_mut(2 * d + i * d, d).copy_from(w);
    }
    let traj = integrate_ode(
        |_, x| {
            let ph = x.rows(0, 2 * d).into_owned();
            let qq = &x.as_slice()[..d];
            let mut out = DVector::zeros(x.len());
            let f = hamiltonian_field(m, &ph);
            let vel = f.rows(0, d).into_owned();
            out.rows_mut(0, 2 * d).copy_from(&f);
            if r > 0 {
                let factor = m.factor(qq)?;
                let gvel = factor.metric_apply(&vel);
                for i in 0..r {
                    let w = x.rows(2 * d + i * d, d).into_owned();
                    let gw = factor.metric_apply(&w);
                    let dw = christoffel_contract_lowered(m, qq, &factor, &vel, &w, &gvel, &gw);
                    out.rows_mut(2 * d + i * d, d).copy_from(&(-dw));
                }
            }
            Ok(out)
        },
        &x0,
        cfg,
    )?;
    let transported = (0..r)
        .map(|i| traj.states.iter().map(|x| x.rows(2 * d + i * d, d).into_owned()).collect())
        .collect();
    Ok((traj.project(0..2 * d), transported))
}
