pub mod canonical;
pub mod cli;
pub mod dissipators;
pub mod error;
pub mod linalg;
pub mod propagate;
pub mod sampling;
pub mod stationary;
pub mod systems;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, C64};
