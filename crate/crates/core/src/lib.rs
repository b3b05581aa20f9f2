//! Space-division physical-layer network coding for MIMO two-way relay channels:
//! channel decomposition, achievable rates, optimizers, large-system analysis
//! and Monte Carlo evaluation.

pub mod asym;
pub mod decomp;
pub mod error;
pub mod io;
pub mod linalg;
pub mod optim;
pub mod quad;
pub mod rates;
pub mod region;
pub mod sim;
pub mod validate;

pub use error::{Result, TwrcError};
