//! Configuration-space Faddeev solver for three spinless particles with
//! pairwise interactions: dimer levels, trimer bound states, atom–dimer
//! scattering below breakup and resonance fits.

pub mod angular;
pub mod basis;
pub mod bound;
pub mod dimer;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod pairpot;
pub mod resonance;
pub mod scatter;
pub mod sparse;
pub mod units;
pub mod wavefield;

pub use error::{Error, Result};
