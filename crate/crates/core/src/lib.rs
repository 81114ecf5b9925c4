//! Regularized canonical correlation analysis with structured l2 penalties.
//!
//! The crate covers four penalty families on top of a single whitening +
//! SVD solver:
//!
//! * ridge (`lambda I`),
//! * partial ridge, leaving a small block of coefficients unpenalized,
//! * group penalties `lambda (I - C) + mu C` that shrink coefficients
//!   towards their group means and the group means towards zero,
//! * any positive semi-definite penalty matrix.
//!
//! High-dimensional problems (`p >> n`) are solved through linear
//! reductions in [`reduce`] that never form a `p x p` matrix. Hyperparameters
//! are chosen by (nested) cross-validation in [`cv`], and [`sim`] generates
//! group-structured synthetic data for method comparisons.
//!
//! Sample covariances use the `1/n` convention throughout.

pub mod cli;
pub mod cv;
pub mod data;
pub mod error;
mod linalg;
pub mod penalty;
pub mod reduce;
pub mod sim;
pub mod solver;

pub use data::{
    center_columns, cohens_d, load_csv, load_group_map, regress_out, sample_covariance,
    CovarianceBlock, CovariateAdjustment, DataMatrix,
};
pub use error::{CcaError, Result, Side};
pub use penalty::{
    build_penalty_matrix, extend_features, factor_general_penalty, factor_group_penalty,
    helmert_complement, GroupStructure, PenaltyFactorization, PenaltyFamily, PenaltySpec,
};
pub use reduce::{
    coefficient_path, fit_cca, fit_direct, general_fit, general_reduce, grcca_fit,
    prcca_kernel_fit, rcca_kernel_fit, FitOptions, GrccaPath, PathAxis,
};
pub use solver::{modified_correlation, plain_correlation, solve_direct, FittedCCA, ReductionKind};
