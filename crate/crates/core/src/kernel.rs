//! Isotropic Gaussian reproducing kernel on the plane.
//!
//! All metric data of the landmark manifold is derived from the scalar kernel
//! `K(x, y) = exp(-|x - y|^2 / (2 sigma^2))` and its closed-form spatial
//! derivatives with respect to the first argument.

use crate::error::{GeoError, Result};
use serde::{Deserialize, Serialize};

/// A planar point.
pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub sigma: f64,
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(GeoError::InvalidConfig(format!(
                "kernel sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    #[inline]
    fn inv_sigma2(&self) -> f64 {
        1.0 / (self.sigma * self.sigma)
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { sigma: 1.0 }
    }
}

#[inline]
fn sq_dist(xi: Point2, xj: Point2) -> f64 {
    let dx = xi[0] - xj[0];
    let dy = xi[1] - xj[1];
    dx * dx + dy * dy
}

/// `K(xi, xj)`.
#[inline]
pub fn k_eval(xi: Point2, xj: Point2, cfg: &KernelConfig) -> f64 {
    (-0.5 * sq_dist(xi, xj) * cfg.inv_sigma2()).exp()
}

/// Gradient of `K(xi, xj)` with respect to `xi`.
#[inline]
pub fn k_grad(xi: Point2, xj: Point2, cfg: &KernelConfig) -> Point2 {
    let s2 = cfg.inv_sigma2();
    let k = k_eval(xi, xj, cfg);
    let c = -s2 * k;
    [c * (xi[0] - xj[0]), c * (xi[1] - xj[1])]
}

/// Hessian of `K(xi, xj)` with respect to `xi`, row-major `[[xx, xy], [yx, yy]]`.
#[inline]
pub fn k_hess(xi: Point2, xj: Point2, cfg: &KernelConfig) -> [[f64; 2]; 2] {
    let s2 = cfg.inv_sigma2();
    let k = k_eval(xi, xj, cfg);
    let dx = xi[0] - xj[0];
    let dy = xi[1] - xj[1];
    let s4 = s2 * s2;
    let off = dx * dy * s4 * k;
    [
        [(-s2 + dx * dx * s4) * k, off],
        [off, (-s2 + dy * dy * s4) * k],
    ]
}

/// Value, gradient and Hessian in one pass (shares the exponential).
#[inline]
pub fn k_all(xi: Point2, xj: Point2, cfg: &KernelConfig) -> (f64, Point2, [[f64; 2]; 2]) {
    let s2 = cfg.inv_sigma2();
    let dx = xi[0] - xj[0];
    let dy = xi[1] - xj[1];
    let k = (-0.5 * (dx * dx + dy * dy) * s2).exp();
    let c = -s2 * k;
    let s4k = s2 * s2 * k;
    let off = dx * dy * s4k;
    (
        k,
        [c * dx, c * dy],
        [[c + dx * dx * s4k, off], [off, c + dy * dy * s4k]],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut ChaCha8Rng, spread: f64) -> (Point2, Point2) {
        let mut p = || [rng.random_range(-spread..spread), rng.random_range(-spread..spread)];
        (p(), p())
    }

    #[test]
    fn coincident_points() {
        let cfg = KernelConfig::new(0.7).unwrap();
        let x = [3.2, -1.0];
        assert_eq!(k_eval(x, x, &cfg), 1.0);
        assert_eq!(k_grad(x, x, &cfg), [0.0, 0.0]);
        let one = KernelConfig::new(1.0).unwrap();
        let h = k_hess(x, x, &one);
        assert_eq!(h, [[-1.0, 0.0], [0.0, -1.0]]);
    }

    #[test]
    fn closed_forms() {
        let cfg = KernelConfig::new(1.0).unwrap();
        let v = k_eval([0.0, 0.0], [2f64.sqrt(), 0.0], &cfg);
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        let g = k_grad([1.0, 0.0], [0.0, 0.0], &cfg);
        assert!((g[0] + (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn symmetry_and_antisymmetry() {
        let cfg = KernelConfig::new(0.9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (a, b) = random_pair(&mut rng, 3.0);
            assert_eq!(k_eval(a, b, &cfg), k_eval(b, a, &cfg));
            let gab = k_grad(a, b, &cfg);
            let gba = k_grad(b, a, &cfg);
            assert_eq!(gab[0], -gba[0]);
            assert_eq!(gab[1], -gba[1]);
            let h = k_hess(a, b, &cfg);
            assert_eq!(h[0][1], h[1][0]);
            let v = k_eval(a, b, &cfg);
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let cfg = KernelConfig::new(1.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-5;
        for _ in 0..50 {
            let (a, b) = random_pair(&mut rng, 2.0);
            let g = k_grad(a, b, &cfg);
            for c in 0..2 {
                let mut ap = a;
                let mut am = a;
                ap[c] += h;
                am[c] -= h;
                let fd = (k_eval(ap, b, &cfg) - k_eval(am, b, &cfg)) / (2.0 * h);
                assert!((fd - g[c]).abs() < 1e-8, "{fd} vs {}", g[c]);
            }
        }
    }

    #[test]
    fn hessian_matches_central_differences() {
        let cfg = KernelConfig::new(0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-5;
        for _ in 0..50 {
            let (a, b) = random_pair(&mut rng, 1.5);
            let hs = k_hess(a, b, &cfg);
            for c in 0..2 {
                let mut ap = a;
                let mut am = a;
                ap[c] += h;
                am[c] -= h;
                let gp = k_grad(ap, b, &cfg);
                let gm = k_grad(am, b, &cfg);
                for r in 0..2 {
                    let fd = (gp[r] - gm[r]) / (2.0 * h);
                    assert!((fd - hs[r][c]).abs() < 1e-6);
                }
            }
            let (k, g, hh) = k_all(a, b, &cfg);
            assert_eq!(k, k_eval(a, b, &cfg));
            assert!((g[0] - k_grad(a, b, &cfg)[0]).abs() < 1e-15);
            assert!((hh[1][1] - hs[1][1]).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(KernelConfig::new(0.0).is_err());
        assert!(KernelConfig::new(-1.0).is_err());
        assert!(KernelConfig::new(f64::NAN).is_err());
    }
}
