pub mod base;
pub mod cocycle;
pub mod error;
pub mod experiments;
pub mod holonomy;
pub mod invariance;
pub mod linalg;
pub mod lyapunov;
pub mod rng;
pub mod symplectic;
pub mod trig;

pub use error::{Error, Result};
