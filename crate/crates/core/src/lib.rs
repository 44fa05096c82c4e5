//! Random walks on hyperbolic groups: Green metric, hyperbolicity
//! diagnostics, asymptotic invariants and harmonic-measure geometry.

pub mod asymptotics;
pub mod boundary;
pub mod error;
pub mod experiment;
pub mod green;
pub mod groups;
pub mod hypcheck;
pub mod rng;
pub mod stats;
pub mod walks;

pub use error::{Error, Result};
pub use groups::{Element, Gen, GroupModel};
