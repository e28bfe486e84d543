pub mod coefficients;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod kicked_top;
pub mod linalg;
pub mod measurement;
pub mod observables;
pub mod parallel;
pub mod quadrature;
pub mod state;

pub use error::{Error, Result};
