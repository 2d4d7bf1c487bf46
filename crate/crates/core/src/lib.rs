//! Riemannian and sub-Riemannian geometry on the LDDMM landmark manifold.
//!
//! Shapes are configurations of planar landmarks with the metric induced by a
//! Gaussian reproducing kernel. The crate provides geodesic shooting (exponential
//! and logarithm maps), Christoffel symbols and parallel transport, Fréchet means,
//! the frame bundle with its horizontal sub-Riemannian structure, stochastic
//! development and Brownian motion in coordinates.

pub mod cli;
pub mod connection;
pub mod error;
pub mod framebundle;
pub mod geodesic;
pub mod integrate;
pub mod kernel;
pub mod manifold;
pub mod optim;
pub mod stats;
pub mod tensor;

pub use error::{GeoError, Result};
pub use integrate::{OdeScheme, SdeScheme, SolverConfig, Trajectory, WienerPath};
pub use kernel::KernelConfig;
pub use manifold::{LandmarkManifold, LandmarkPoint};
