//! Free-support Wasserstein barycenters of discrete measures.
//!
//! Barycenter atoms move as particles along averaged optimal-transport
//! displacements. Transport plans are exact (network simplex, no entropic
//! smoothing), and where a plan splits an atom's mass the atom follows the
//! barycentric projection of the plan.
//!
//! Around the solver the crate carries what is needed to evaluate it:
//! Gaussian oracles, conjugate Bayesian regression for posterior
//! aggregation, Otsu-thresholded images as point clouds, k-means, and
//! clustering and classification metrics.

pub mod barycenter;
pub mod bayes;
pub mod error;
pub mod gaussian;
pub mod imaging;
pub mod io;
pub mod kmeans;
pub mod measures;
pub mod metrics;
pub mod ot;
pub mod pipelines;
pub mod projection;
pub mod rng;
pub mod synthetic;

pub use barycenter::{objective, solve, step, BarycenterState, InitMode, SolverOptions};
pub use error::{Error, Result};
pub use measures::{make_measure, pool_supports, DiscreteMeasure, WeightedFamily};
pub use ot::{solve_ot, w2_distance, TransportPlan};
pub use projection::{approx_gradient, approx_log, barycentric_projection, DisplacementField};
