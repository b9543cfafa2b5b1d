//! Information-theoretic width/depth planning for spectral graph networks.
//!
//! The crate models a spectral GNN `H_l = S_l H_{l-1} W_l` as a communication
//! channel and exposes:
//!
//! - [`graph`]: graph loading, basic statistics and generalized graph entropy;
//! - [`propagation`]: sparse propagation operators and their entry population variance;
//! - [`capacity`]: channel capacity, compression ratio, width threshold and
//!   effective capacity;
//! - [`planner`]: the constrained nonlinear program choosing widths and depth;
//! - [`entropy`]: matrix entropy estimators and layer-wise entropy transitions;
//! - [`mc`]: Monte-Carlo validation of the variance recursion;
//! - [`cli`]: the command-line front end.

pub mod capacity;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod graph;
pub mod json;
pub mod matrix_io;
pub mod mc;
pub mod planner;
pub mod propagation;
pub mod qp;
pub mod sparse;
pub mod sqp;

pub use error::{Error, Result};

/// `ln(2πe)`, the additive constant of the Gaussian entropy.
pub const LN_2PI_E: f64 = 2.837_877_066_409_345_3;

/// Variances at or below this value count as exact zeros.
pub const VARIANCE_FLOOR: f64 = 1e-300;
