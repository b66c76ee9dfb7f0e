pub mod error;
pub mod estimates;
pub mod hermite;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod report;
pub mod sampling;
pub mod sde;

pub use error::{Error, Result};
