pub mod error;
pub mod geometry;
pub mod spherical;
pub mod energy;
pub mod synthetic;
pub mod solver;
pub mod epiperimetric;
pub mod blowup;
pub mod decay;

pub use error::{Error, Result};
