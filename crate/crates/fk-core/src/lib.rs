//! Numerical minimization of the first Dirichlet eigenvalue among sets of
//! prescribed volume on 2-D Riemannian manifolds given by metric charts.
//!
//! The stack, bottom up:
//!
//! - [`manifold`]: metric charts (flat torus, sphere, catenoid-type surfaces,
//!   per-node samples), geodesic distance fields and geodesic balls.
//! - [`discretize`]: finite-difference Laplace-Beltrami stiffness and lumped
//!   mass matrices on tensor grids, restriction to node supports.
//! - [`eigensolve`]: smallest Dirichlet eigenpair by shifted inverse power
//!   iteration with conjugate-gradient inner solves.
//! - [`shapeopt`]: eigenvalue descent over node supports at fixed volume, the
//!   profile over a volume sweep, and the penalization certificate.
//! - [`diagnostics`]: free-boundary diagnostics of a computed minimizer
//!   (boundary gradient statistics, monotonicity and density profiles,
//!   perimeter).
//!
//! Everything is generic over the floating-point scalar through [`Scalar`];
//! the type aliases at the crate root pin f64 for the common case.

pub mod diagnostics;
pub mod discretize;
pub mod eigensolve;
pub mod error;
pub mod grid;
pub mod manifold;
pub mod shapeopt;
pub mod sparse;

mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// f64 chart.
pub type Chart = manifold::MetricChart<f64>;
/// f64 grid.
pub type GridF = grid::Grid<f64>;
/// f64 geodesic distance field.
pub type Distances = manifold::DistanceField<f64>;
/// f64 discretization.
pub type Operators = discretize::DiscreteOperators<f64>;
/// f64 eigenpair.
pub type Eigenpair = eigensolve::Eigenpair<f64>;
/// f64 shape minimizer.
pub type Minimizer = shapeopt::ShapeResult<f64>;
/// f64 ball energy profile.
pub type Weiss = diagnostics::WeissProfile<f64>;
/// f64 volume density profile.
pub type Density = diagnostics::DensityReport<f64>;
/// f64 boundary gradient statistics.
pub type Multiplier = diagnostics::MultiplierEstimate<f64>;
