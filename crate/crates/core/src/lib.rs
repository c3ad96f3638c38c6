//! Detection of small ischemic inclusions in a 2D cardiac section from partial
//! boundary voltage data.
//!
//! The forward model is the anisotropic monodomain equation with Aliev–Panfilov
//! kinetics, discretised with P1 finite elements and implicit Euler. Inclusions
//! are located by minimising the topological gradient of a boundary mismatch
//! functional, assembled from one forward and one adjoint solve.

pub mod adjoint;
pub mod error;
pub mod fem;
pub mod fiber;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod monodomain;
pub mod polarization;
pub mod tensor;
pub mod topo;
pub mod trace;

pub use error::{Error, Result};
