pub mod bundle;
pub mod connections;
pub mod descriptor;
pub mod error;
pub mod exp_family;
pub mod fd;
pub mod formal_series;
pub mod hessian_qft;
pub mod legendre;
pub mod linalg;
pub mod potential;
pub mod report;
pub mod suite;

pub use error::{Error, Result};
