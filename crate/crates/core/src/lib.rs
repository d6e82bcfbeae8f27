//! Estimating the optimal linear discriminant direction of a two-component
//! Gaussian location mixture from unlabeled data, using third-moment
//! (skewness) based estimators, together with their limiting covariances
//! and a Monte Carlo harness that checks them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod model;
pub mod moments;
pub mod montecarlo;

pub use error::{Error, Result};
pub use estimators::{estimate, DirectionEstimate, IterOptions, Method};
pub use linalg::{Matrix, SpdMatrix, Vector};
pub use model::{sample, DataSet, MixtureParams};
