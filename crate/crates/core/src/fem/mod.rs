//! Taylor–Hood discretization of the cell Stokes problems.

mod assemble;
mod export;
mod picard;
mod post;
pub mod quadrature;
mod solve;
mod space;

pub use assemble::{assemble, assemble_matrix, assemble_rhs, GradientForm, SaddleSystem};
pub use export::{write_matrix_market, write_vector_market, write_vtk};
pub use picard::{energy_mismatch, picard_solve, PicardOptions};
pub use post::{deformation_norm_field, dissipation, sym_norm, velocity_at_quadrature, velocity_integral};
pub use solve::{solve_saddle, solve_saddle_with, Diagnostics, KktBackend, KktSolver, StokesSolution};
pub use space::{build_space, wall_tags, DofCounts, TaylorHoodSpace, TetGeometry, PINNED};
