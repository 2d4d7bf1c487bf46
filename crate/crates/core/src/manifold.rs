//! The landmark manifold with the kernel-induced cometric.
//!
//! A shape of `n` planar landmarks is a point `q` in `R^d`, `d = 2n`, stored
//! interleaved as `(x1, y1, x2, y2, ..., xn, yn)`. Landmark `i` occupies
//! coordinates `2i` and `2i + 1`; every block index in this crate derives from
//! that convention through [`coord`] and [`landmark`].
//!
//! The cometric is the block matrix with `2 x 2` blocks `K(x_i, x_j) I_2`.
//! The metric is its inverse and is only ever applied through a Cholesky
//! factorization of the cometric.

use crate::error::{GeoError, Result};
use crate::kernel::{k_eval, k_grad, KernelConfig, Point2};
use crate::tensor::Tensor3;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

/// Cometric factorizations with a condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Flat index of coordinate `c` (0 = x, 1 = y) of landmark `i`.
#[inline]
pub const fn coord(i: usize, c: usize) -> usize {
    2 * i + c
}

/// Landmark `i` of a coordinate vector.
#[inline]
pub fn landmark(q: &[f64], i: usize) -> Point2 {
    [q[2 * i], q[2 * i + 1]]
}

/// A configuration of `n >= 1` planar landmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LandmarkPoint(DVector<f64>);

impl LandmarkPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(GeoError::DimensionMismatch(format!(
                "landmark coordinates must have positive even length, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeoError::InvalidConfig("non-finite landmark coordinate".into()));
        }
        Ok(Self(DVector::from_vec(coords)))
    }

    pub fn from_landmarks(points: &[Point2]) -> Result<Self> {
        Self::new(points.iter().flat_map(|p| p.iter().copied()).collect())
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        Self::new(v.data.into())
    }

    pub fn n_landmarks(&self) -> usize {
        self.0.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn landmark(&self, i: usize) -> Point2 {
        landmark(self.coords(), i)
    }

    pub fn landmarks(&self) -> Vec<Point2> {
        (0..self.n_landmarks()).map(|i| self.landmark(i)).collect()
    }

    /// Mean distance between consecutive landmarks, `None` for a single landmark.
    pub fn mean_consecutive_distance(&self) -> Option<f64> {
        let n = self.n_landmarks();
        if n < 2 {
            return None;
        }
        let total: f64 = (0..n - 1)
            .map(|i| {
                let a = self.landmark(i);
                let b = self.landmark(i + 1);
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            })
            .sum();
        Some(total / (n - 1) as f64)
    }
}

impl TryFrom<Vec<f64>> for LandmarkPoint {
    type Error = GeoError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<LandmarkPoint> for Vec<f64> {
    fn from(p: LandmarkPoint) -> Self {
        p.0.data.into()
    }
}

/// Cholesky factorization of the cometric at a point.
#[derive(Clone)]
pub struct CometricFactor {
    cometric: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    condition: f64,
}

impl CometricFactor {
    pub fn cometric(&self) -> &DMatrix<f64> {
        &self.cometric
    }

    /// Cheap condition estimate `||G*||_inf / min_i L_ii^2`.
    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    /// Lower-triangular factor `L` with `L L^T = G*`.
    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Applies the metric: `g v = G*^{-1} v`.
    pub fn metric_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    pub fn metric_apply_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(m)
    }

    pub fn metric(&self) -> DMatrix<f64> {
        let mut g = self.chol.inverse();
        g.fill_upper_triangle_with_lower_triangle();
        g
    }

    /// `log det G*`.
    pub fn ln_det_cometric(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..l.nrows()).map(|i| 2.0 * l[(i, i)].ln()).sum()
    }
}

/// The LDDMM landmark manifold for a given Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkManifold {
    pub kernel: KernelConfig,
}

impl LandmarkManifold {
    pub fn new(kernel: KernelConfig) -> Self {
        Self { kernel }
    }

    pub fn cometric_matrix(&self, q: &[f64]) -> DMatrix<f64> {
        let n = q.len() / 2;
        let d = q.len();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..n {
            m[(coord(i, 0), coord(i, 0))] = 1.0;
            m[(coord(i, 1), coord(i, 1))] = 1.0;
            let xi = landmark(q, i);
            for j in 0..i {
                let k = k_eval(xi, landmark(q, j), &self.kernel);
                for c in 0..2 {
                    m[(coord(i, c), coord(j, c))] = k;
                    m[(coord(j, c), coord(i, c))] = k;
                }
            }
        }
        m
    }

    pub fn factor(&self, q: &[f64]) -> Result<CometricFactor> {
        let cometric = self.cometric_matrix(q);
        let norm_inf = cometric
            .row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let chol = Cholesky::new(cometric.clone()).ok_or(GeoError::SingularMetric {
            condition: f64::INFINITY,
        })?;
        let l = chol.l_dirty();
        let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        let condition = norm_inf / min_pivot;
        if !(condition.is_finite() && condition <= MAX_CONDITION) {
            return Err(GeoError::SingularMetric { condition });
        }
        Ok(CometricFactor {
            cometric,
            chol,
            condition,
        })
    }

    pub fn metric_matrix(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.factor(q)?.metric())
    }

    /// Tangent vector to covector.
    pub fn flat(&self, q: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.factor(q)?.metric_apply(v))
    }

    /// Covector to tangent vector, `G*(q) p`, assembled landmark-wise.
    pub fn sharp(&self, q: &[f64], p: &DVector<f64>) -> DVector<f64> {
        let n = q.len() / 2;
        let mut out = DVector::zeros(q.len());
        for i in 0..n {
            let xi = landmark(q, i);
            out[coord(i, 0)] += p[coord(i, 0)];
            out[coord(i, 1)] += p[coord(i, 1)];
            for j in 0..i {
                let k = k_eval(xi, landmark(q, j), &self.kernel);
                for c in 0..2 {
                    out[coord(i, c)] += k * p[coord(j, c)];
                    out[coord(j, c)] += k * p[coord(i, c)];
                }
            }
        }
        out
    }

    pub fn hamiltonian(&self, q: &[f64], p: &DVector<f64>) -> f64 {
        0.5 * p.dot(&self.sharp(q, p))
    }

    /// `(dH/dq, dH/dp)`.
    pub fn hamiltonian_grads(&self, q: &[f64], p: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = q.len() / 2;
        let mut grad_q = DVector::zeros(q.len());
        let mut grad_p = DVector::zeros(q.len());
        for i in 0..n {
            let xi = landmark(q, i);
            let pi = landmark(p.as_slice(), i);
            grad_p[coord(i, 0)] += pi[0];
            grad_p[coord(i, 1)] += pi[1];
            for j in 0..i {
                let xj = landmark(q, j);
                let pj = landmark(p.as_slice(), j);
                let k = k_eval(xi, xj, &self.kernel);
                let g = k_grad(xi, xj, &self.kernel);
                let pp = pi[0] * pj[0] + pi[1] * pj[1];
                for c in 0..2 {
                    grad_p[coord(i, c)] += k * pj[c];
                    grad_p[coord(j, c)] += k * pi[c];
                    grad_q[coord(i, c)] += pp * g[c];
                    grad_q[coord(j, c)] -= pp * g[c];
                }
            }
        }
        (grad_q, grad_p)
    }

    /// Partial derivative of the cometric matrix along coordinate `k`.
    pub fn cometric_partial(&self, q: &[f64], k: usize) -> DMatrix<f64> {
        let d = q.len();
        let n = d / 2;
        let (l, c) = (k / 2, k % 2);
        let xl = landmark(q, l);
        let mut m = DMatrix::zeros(d, d);
        for j in (0..n).filter(|&j| j != l) {
            let g = k_grad(xl, landmark(q, j), &self.kernel)[c];
            for e in 0..2 {
                m[(coord(l, e), coord(j, e))] = g;
                m[(coord(j, e), coord(l, e))] = g;
            }
        }
        m
    }

    /// `(dG*/dq . a) w`: the directional derivative of the cometric along
    /// `a`, applied to `w`.
    pub fn cometric_directional_apply(&self, q: &[f64], a: &[f64], w: &[f64]) -> DVector<f64> {
        let n = q.len() / 2;
        let mut out = DVector::zeros(q.len());
        for i in 0..n {
            let xi = landmark(q, i);
            for j in 0..i {
                let g = k_grad(xi, landmark(q, j), &self.kernel);
                let dk = g[0] * (a[coord(i, 0)] - a[coord(j, 0)]) + g[1] * (a[coord(i, 1)] - a[coord(j, 1)]);
                for c in 0..2 {
                    out[coord(i, c)] += dk * w[coord(j, c)];
                    out[coord(j, c)] += dk * w[coord(i, c)];
                }
            }
        }
        out
    }

    /// `z_k = a^T (dG*/dq_k) b` for every coordinate `k`.
    pub fn cometric_gradient_form(&self, q: &[f64], a: &[f64], b: &[f64]) -> DVector<f64> {
        let n = q.len() / 2;
        let mut z = DVector::zeros(q.len());
        for i in 0..n {
            let xi = landmark(q, i);
            let (ai, bi) = (landmark(a, i), landmark(b, i));
            for j in 0..i {
                let g = k_grad(xi, landmark(q, j), &self.kernel);
                let (aj, bj) = (landmark(a, j), landmark(b, j));
                let s = ai[0] * bj[0] + ai[1] * bj[1] + aj[0] * bi[0] + aj[1] * bi[1];
                for c in 0..2 {
                    z[coord(i, c)] += s * g[c];
                    z[coord(j, c)] -= s * g[c];
                }
            }
        }
        z
    }

    /// Derivative of the metric, `D[k][i][j] = d g_ij / d q_k`, from the
    /// identity `d g = -g (d G*) g`.
    pub fn metric_derivative(&self, q: &[f64]) -> Result<Tensor3> {
        let factor = self.factor(q)?;
        Ok(self.metric_derivative_with(q, &factor))
    }

    pub fn metric_derivative_with(&self, q: &[f64], factor: &CometricFactor) -> Tensor3 {
        let d = q.len();
        let n = d / 2;
        let g = factor.metric();
        let mut out = Tensor3::zeros(d);
        let mut eg = DMatrix::zeros(2, d);
        for k in 0..d {
            let (l, c) = (k / 2, k % 2);
            let xl = landmark(q, l);
            // Rows of landmark l of E_k g, where dG*/dq_k = E_k + E_k^T.
            eg.fill(0.0);
            for j in (0..n).filter(|&j| j != l) {
                let w = k_grad(xl, landmark(q, j), &self.kernel)[c];
                for e in 0..2 {
                    let row = g.row(coord(j, e));
                    for col in 0..d {
                        eg[(e, col)] += w * row[col];
                    }
                }
            }
            let cols = g.columns(coord(l, 0), 2);
            let m = cols * &eg;
            let slab = out.slab_mut(k);
            for i in 0..d {
                for j in 0..d {
                    slab[i * d + j] = -(m[(i, j)] + m[(j, i)]);
                }
            }
        }
        out
    }
}
