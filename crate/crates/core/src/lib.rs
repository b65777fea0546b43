//! Unit-cell Stokes solvers and effective Darcy laws for non-Newtonian flow
//! through thin porous layers made of periodic arrays of vertical cylinders.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod homogenize;
pub mod mesh;
pub mod rheology;

pub use error::{Error, FemError, LawError, MeshError, Result};
