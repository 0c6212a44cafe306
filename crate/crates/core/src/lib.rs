//! Numerical checks of stochastic equicontinuity for empirical processes of
//! nonlinear time series.

pub mod error;
pub mod empproc;
pub mod estimators;
pub mod families;
pub mod gmc;
pub mod innovations;
pub mod models;
pub mod numerics;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
