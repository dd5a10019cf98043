//! Periodic grids, fields, finite differences and the interaction potential.

mod field;
mod grid;
pub mod io;
mod ops;
mod path;
mod potential;

pub use field::{DensityField, ScalarField, VectorField, MASS_TOLERANCE};
pub use grid::{circle_distance, torus_distance, TorusGrid};
pub use ops::{
    apply_operator, backward_divergence, c3_norm, centered_difference, divergence,
    forward_gradient, gradient, laplacian, second_difference, FieldRef, FieldValue, OperatorKind,
};
pub use path::{DensityPath, DriftPath, InitialTag, ScalarPath, TimeGrid};
pub use potential::{
    compose_pressure, compose_pressure_weighted, Interaction, InteractionTerm, Potential,
    PotentialSpec, PotentialTerm,
};

pub fn make_grid(dim: usize, n: usize) -> crate::Result<TorusGrid> {
    TorusGrid::new(dim, n)
}
