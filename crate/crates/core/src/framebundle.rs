//! Frame bundle of the landmark manifold with its horizontal sub-Riemannian
//! structure, stochastic development and coordinate Brownian motion.
//!
//! A frame point `u = (q, nu)` holds a base shape `q` (dimension `d`) and a
//! `d x k` frame `nu`. Flattened states are `(q, vec(nu))` with `nu` stored
//! column-major, i.e. frame column `a` occupies `d + a*d .. d + (a+1)*d`.
//! Every routine here uses that single layout.
//!
//! The cometric on the frame bundle is `H H^T`, where the columns of `H` are
//! the horizontal lifts of the frame vectors. With `W^{-1} = nu nu^T` this is
//! the block matrix
//!
//! ```text
//! [  W^{-1}        -W^{-1} Γ^T   ]
//! [ -Γ W^{-1}       Γ W^{-1} Γ^T ]
//! ```
//!
//! with `Γ_{(h, c), j} = Γ^h_{ji} nu^i_c`.

use crate::connection::{christoffel_contract_lowered, christoffel_covector, christoffel_with};
use crate::error::{GeoError, Result};
use crate::integrate::{integrate_ode, integrate_sde, SdeScheme, SolverConfig, Trajectory, WienerPath};
use crate::manifold::{CometricFactor, LandmarkManifold, LandmarkPoint};
use nalgebra::{DMatrix, DVector};

/// Step of the central differences used for the base-point gradient of the
/// frame-bundle Hamiltonian.
pub const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct FramePoint {
    pub q: LandmarkPoint,
    pub nu: DMatrix<f64>,
}

impl FramePoint {
    pub fn new(q: LandmarkPoint, nu: DMatrix<f64>) -> Result<Self> {
        if nu.nrows() != q.dim() || nu.ncols() == 0 || nu.ncols() > q.dim() {
            return Err(GeoError::DimensionMismatch(format!(
                "frame is {}x{}, base dimension {}",
                nu.nrows(),
                nu.ncols(),
                q.dim()
            )));
        }
        if nu.iter().any(|v| !v.is_finite()) {
            return Err(GeoError::InvalidConfig("non-finite frame entry".into()));
        }
        check_rank(&nu)?;
        Ok(Self { q, nu })
    }

    /// Frame given by the first `k` columns of the Cholesky factor of the
    /// cometric, which is orthonormal for the metric.
    pub fn cholesky_frame(m: &LandmarkManifold, q: LandmarkPoint, k: usize) -> Result<Self> {
        let l = m.factor(q.coords())?.lower();
        if k == 0 || k > q.dim() {
            return Err(GeoError::InvalidConfig(format!("frame rank {k} out of range")));
        }
        let nu = l.columns(0, k).into_owned();
        Self::new(q, nu)
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn rank(&self) -> usize {
        self.nu.ncols()
    }

    pub fn state_len(&self) -> usize {
        self.dim() * (1 + self.rank())
    }

    pub fn to_state(&self) -> DVector<f64> {
        let d = self.dim();
        let mut x = DVector::zeros(self.state_len());
        x.rows_mut(0, d).copy_from(self.q.vector());
        x.rows_mut(d, d * self.rank()).copy_from_slice(self.nu.as_slice());
        x
    }

    pub fn from_state(x: &[f64], d: usize) -> Result<Self> {
        if d == 0 || x.len() % d != 0 || x.len() < 2 * d {
            return Err(GeoError::DimensionMismatch(format!(
                "state of length {} is not a frame state over dimension {d}",
                x.len()
            )));
        }
        let k = x.len() / d - 1;
        let q = LandmarkPoint::new(x[..d].to_vec())?;
        Self::new(q, DMatrix::from_column_slice(d, k, &x[d..]))
    }
}

/// Fails unless `nu` has full column rank.
pub fn check_rank(nu: &DMatrix<f64>) -> Result<()> {
    let sv = nu.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0 && min > 1e-12 * max) {
        return Err(GeoError::RankLoss(format!("singular values span [{min:.3e}, {max:.3e}]")));
    }
    Ok(())
}

fn frame_columns(x: &[f64], d: usize) -> Vec<DVector<f64>> {
    let k = x.len() / d - 1;
    (0..k).map(|a| DVector::from_column_slice(&x[d + a * d..d + (a + 1) * d])).collect()
}

/// Horizontal lifts of the frame columns at a flattened frame state, as a
/// `(d + dk) x k` matrix.
pub fn horizontal_basis_state(m: &LandmarkManifold, x: &[f64], d: usize) -> Result<DMatrix<f64>> {
    let q = &x[..d];
    let factor = m.factor(q)?;
    Ok(horizontal_basis_with(m, x, d, &factor))
}

fn horizontal_basis_with(m: &LandmarkManifold, x: &[f64], d: usize, factor: &CometricFactor) -> DMatrix<f64> {
    let q = &x[..d];
    let cols = frame_columns(x, d);
    let k = cols.len();
    let lowered: Vec<DVector<f64>> = cols.iter().map(|c| factor.metric_apply(c)).collect();
    let mut hb = DMatrix::zeros(d * (1 + k), k);
    for a in 0..k {
        hb.view_mut((0, a), (d, 1)).copy_from(&cols[a]);
        for c in a..k {
            let g = christoffel_contract_lowered(m, q, factor, &cols[a], &cols[c], &lowered[a], &lowered[c]);
            hb.view_mut((d + c * d, a), (d, 1)).copy_from(&(-&g));
            if c != a {
                hb.view_mut((d + a * d, c), (d, 1)).copy_from(&(-&g));
            }
        }
    }
    hb
}

pub fn horizontal_basis(m: &LandmarkManifold, u: &FramePoint) -> Result<DMatrix<f64>> {
    horizontal_basis_state(m, u.to_state().as_slice(), u.dim())
}

/// The degenerate cometric on the frame bundle, assembled block-wise from the
/// full Christoffel tensor.
pub fn fm_cometric(m: &LandmarkManifold, u: &FramePoint) -> Result<DMatrix<f64>> {
    let d = u.dim();
    let k = u.rank();
    let q = u.q.coords();
    let factor = m.factor(q)?;
    let gamma = christoffel_with(m, q, &factor);
    let w_inv = &u.nu * u.nu.transpose();
    // Γ_{(h, c), j} = Γ^h_{ji} nu^i_c
    let mut gm = DMatrix::zeros(d * k, d);
    for c in 0..k {
        let col = u.nu.column(c);
        for h in 0..d {
            let slab = gamma.0.slab(h);
            for j in 0..d {
                let mut s = 0.0;
                for i in 0..d {
                    s += slab[j * d + i] * col[i];
                }
                gm[(c * d + h, j)] = s;
            }
        }
    }
    let top_right = -(&w_inv * gm.transpose());
    let bottom = &gm * &w_inv * gm.transpose();
    let n = d * (1 + k);
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (d, d)).copy_from(&w_inv);
    out.view_mut((0, d), (d, d * k)).copy_from(&top_right);
    out.view_mut((d, 0), (d * k, d)).copy_from(&top_right.transpose());
    out.view_mut((d, d), (d * k, d * k)).copy_from(&bottom);
    Ok(out)
}

fn fm_hamiltonian_state(m: &LandmarkManifold, x: &[f64], p: &DVector<f64>, d: usize) -> Result<f64> {
    let hb = horizontal_basis_state(m, x, d)?;
    Ok(0.5 * (hb.transpose() * p).norm_squared())
}

/// `1/2 p^T g*_FM p`.
pub fn fm_hamiltonian(m: &LandmarkManifold, u: &FramePoint, p: &DVector<f64>) -> Result<f64> {
    if p.len() != u.state_len() {
        return Err(GeoError::DimensionMismatch(format!(
            "frame covector has length {}, expected {}",
            p.len(),
            u.state_len()
        )));
    }
    fm_hamiltonian_state(m, u.to_state().as_slice(), p, u.dim())
}

/// Gradient of the frame-bundle Hamiltonian with respect to the frame
/// entries, in the column-major frame layout.
pub fn fm_hamiltonian_grad_frame(
    m: &LandmarkManifold,
    x: &[f64],
    p: &DVector<f64>,
    d: usize,
    factor: &CometricFactor,
    hb: &DMatrix<f64>,
) -> DVector<f64> {
    let q = &x[..d];
    let cols = frame_columns(x, d);
    let k = cols.len();
    let s = hb.transpose() * p;
    let pq = p.rows(0, d).into_owned();
    let pc: Vec<DVector<f64>> = (0..k).map(|c| p.rows(d + c * d, d).into_owned()).collect();
    let mut shared = pq;
    for c in 0..k {
        shared -= christoffel_covector(m, q, factor, &pc[c], &cols[c]);
    }
    let mut nu_s = DVector::zeros(d);
    for c in 0..k {
        nu_s.axpy(s[c], &cols[c], 1.0);
    }
    let mut out = DVector::zeros(d * k);
    for b in 0..k {
        let g = &shared * s[b] - christoffel_covector(m, q, factor, &pc[b], &nu_s);
        out.rows_mut(b * d, d).copy_from(&g);
    }
    out
}

/// Hamilton's equations on the frame bundle for the stacked state `(x, p)`.
/// The base-point part of the momentum derivative uses central differences
/// of the Hamiltonian, the frame part is exact.
pub fn fm_hamiltonian_field(m: &LandmarkManifold, z: &DVector<f64>, d: usize) -> Result<DVector<f64>> {
    let n = z.len() / 2;
    let x = &z.as_slice()[..n];
    let p = z.rows(n, n).into_owned();
    let factor = m.factor(&x[..d])?;
    let hb = horizontal_basis_with(m, x, d, &factor);
    let s = hb.transpose() * &p;
    let dx = &hb * s;
    let mut out = DVector::zeros(2 * n);
    out.rows_mut(0, n).copy_from(&dx);
    let mut xp = x.to_vec();
    for i in 0..d {
        let orig = xp[i];
        xp[i] = orig + FD_STEP;
        let hp = fm_hamiltonian_state(m, &xp, &p, d)?;
        xp[i] = orig - FD_STEP;
        let hm = fm_hamiltonian_state(m, &xp, &p, d)?;
        xp[i] = orig;
        out[n + i] = -(hp - hm) / (2.0 * FD_STEP);
    }
    let gf = fm_hamiltonian_grad_frame(m, x, &p, d, &factor, &hb);
    out.rows_mut(n + d, n - d).copy_from(&(-gf));
    Ok(out)
}

/// Normal sub-Riemannian geodesic from `u` with covector `p`. Returns the end
/// frame and the stacked `(x, p)` trajectory.
pub fn fm_exp(
    m: &LandmarkManifold,
    u: &FramePoint,
    p: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(FramePoint, Trajectory)> {
    let n = u.state_len();
    if p.len() != n {
        return Err(GeoError::DimensionMismatch(format!(
            "frame covector has length {}, expected {n}",
            p.len()
        )));
    }
    let d = u.dim();
    let mut z0 = DVector::zeros(2 * n);
    z0.rows_mut(0, n).copy_from(&u.to_state());
    z0.rows_mut(n, n).copy_from(p);
    let traj = integrate_ode(|_, z| fm_hamiltonian_field(m, z, d), &z0, cfg)?;
    let end = FramePoint::from_state(&traj.last().as_slice()[..n], d)?;
    Ok((end, traj))
}

/// Stratonovich development of the driving path `path` (dimension `m <= k`)
/// through the first `m` horizontal fields. Returns the frame-bundle path
/// and its projection to the base manifold.
pub fn stochastic_development(
    m: &LandmarkManifold,
    u0: &FramePoint,
    path: &WienerPath,
) -> Result<(Trajectory, Trajectory)> {
    let d = u0.dim();
    let md = path.dim();
    if md == 0 || md > u0.rank() {
        return Err(GeoError::DimensionMismatch(format!(
            "driving dimension {md} exceeds frame rank {}",
            u0.rank()
        )));
    }
    let fm = integrate_sde(
        |_, x| Ok(DVector::zeros(x.len())),
        |_, x, dw| {
            let hb = horizontal_basis_state(m, x.as_slice(), d)?;
            Ok(hb.columns(0, md) * dw)
        },
        &u0.to_state(),
        path,
        SdeScheme::StratonovichHeun,
    )?;
    let base = fm.project(0..d);
    Ok((fm, base))
}

/// Itô drift of Brownian motion in coordinates, `-1/2 g^kl Γ^i_kl`.
pub fn brownian_drift(m: &LandmarkManifold, q: &[f64], factor: &CometricFactor) -> DVector<f64> {
    let l = factor.lower();
    let gl = factor.metric_apply_matrix(&l);
    let mut acc = DVector::zeros(q.len());
    for c in 0..l.ncols() {
        let col = l.column(c).into_owned();
        let low = gl.column(c).into_owned();
        acc += christoffel_contract_lowered(m, q, factor, &col, &col, &low, &low);
    }
    acc * -0.5
}

/// Brownian motion in coordinates by Itô–Euler, diffusion through the
/// lower Cholesky factor of the cometric. `path` must be `d`-dimensional.
pub fn brownian_coords(m: &LandmarkManifold, q0: &LandmarkPoint, path: &WienerPath) -> Result<Trajectory> {
    if path.dim() != q0.dim() {
        return Err(GeoError::DimensionMismatch(format!(
            "driving dimension {} differs from manifold dimension {}",
            path.dim(),
            q0.dim()
        )));
    }
    integrate_sde(
        |_, x| {
            let f = m.factor(x.as_slice())?;
            Ok(brownian_drift(m, x.as_slice(), &f))
        },
        |_, x, dw| {
            let f = m.factor(x.as_slice())?;
            Ok(f.lower() * dw)
        },
        q0.vector(),
        path,
        SdeScheme::ItoEuler,
    )
}
