pub mod error;
pub mod geometry;
pub mod electrostatics;
pub mod linalg;
pub mod grid;
pub mod serde_util;
pub mod ensemble;
pub mod green;
pub mod convolution;
pub(crate) mod volume;
pub mod acoustic;
pub mod em;
pub mod homogenization;
pub mod io;

pub use error::{Error, Result};
