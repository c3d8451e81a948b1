//! Magnetic relaxation on the periodic torus.

pub mod born_infeld;
pub mod certify;
pub mod error;
pub mod fields;
pub mod functionals;
pub mod gradient_flow;
pub mod mhd;
pub mod numerics;
pub mod runner;

pub use error::{RelaxError, Result};
