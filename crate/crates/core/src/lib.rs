//! Macroscopic phase-space tomography for ensembles of `N` prime-dimensional
//! qudits.
//!
//! Collective measurements are organized by weight vectors over `Z_d` strings.
//! The library builds the rescaled Husimi function on that measurement space,
//! reconstructs permutation-symmetric states from it, and estimates the
//! statistical cost of doing so.

pub mod collective;
pub mod error;
pub mod estimation;
pub mod fiducial;
pub mod linalg;
pub mod macro_space;
pub mod ops;
pub mod phase_space;
pub mod symmetric;
pub mod tomography;
pub mod zd;

pub use error::{Error, Result};
