//! Adapted Bures-Wasserstein geometry of Gaussian processes.
//!
//! A centered Gaussian process in discrete time is parametrized by a
//! block-lower-triangular factor `L`: the process is `X = L G` for
//! independent standard Gaussians `G_1, ..., G_T`. Two factors carry the
//! same adapted law exactly when they differ by a block-diagonal
//! orthogonal matrix acting on the right, and the adapted Wasserstein
//! distance between the laws collapses to a block Procrustes problem with
//! a closed-form solution:
//!
//! ```text
//! d_ABW(L, M)^2 = min over O in O of |L - M O|_F^2
//!              = |L|_F^2 + |M|_F^2 - 2 sum_t tr(S_t),
//! ```
//!
//! `S_t` being the singular values of `(M'L)_{t,t}`. The quotient space is
//! an Alexandrov space of non-negative curvature; this crate computes its
//! metric, geodesics, optimizer and stabilizer sets, exponential and
//! logarithmic maps, tangent-cone distances and angles, together with
//! brute-force and Monte-Carlo oracles that validate every closed form
//! independently.
//!
//! Entry points:
//!
//! * [`abw_distance`], [`aw_gaussian_distance`] -- distances between
//!   factors and between Gaussian processes with means;
//! * [`optimizer_set`], [`stabilizer`] -- the sets `O*(L, M)` and
//!   `O*(L, L)` in frame form;
//! * [`geodesic`], [`log_map`], [`exp_map`] -- curves and the maps between
//!   the space and its tangent cones;
//! * [`tangent_cone_distance`], [`cos_angle`] -- the cone metric;
//! * [`block_cholesky`] -- canonical factor of a covariance matrix;
//! * [`oracle`] -- exhaustive, randomized, Monte-Carlo and
//!   finite-difference verification engines.

mod block;
mod cholesky;
mod error;
mod geometry;
mod metric;
pub mod oracle;
pub mod sample;
mod svd;

pub use block::{
    diag_block_product, frobenius_inner, frobenius_norm, BlockDiagOrthogonal,
    BlockLowerTriangular, BlockMatrix, BlockShape,
};
pub use cholesky::block_cholesky;
pub use error::{AbwError, Result};
pub use geometry::{
    cos_angle, exp_map, geodesic, geodesic_with, is_regular, is_tangent, log_map, safe_radius,
    semiconcavity_check, tangent_cone_distance, unique_geodesic_sufficient, ExpResult,
    GeodesicSegment, LogResult, Semiconcavity, TangentVector,
};
pub use metric::{
    abw_distance, abw_distance_squared, aw_gaussian_distance, is_optimizer, optimizer_set,
    quotient_equal, stabilizer, GaussianProcess, OptimizerSet, StabilizerSet,
};
pub use oracle::OracleReport;
pub use svd::{column_block_svd, numerical_rank, svd_small, SmallSvd};

/// Default relative tolerance for rank decisions and structural checks,
/// overridable per call.
pub const DEFAULT_TOL: f64 = 1e-9;
