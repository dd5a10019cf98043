//! Numerical solvers for viscous Aubry–Mather problems and mean-field games
//! on the flat torus `T^p`, `p ∈ {1, 2}`.
//!
//! The building blocks are a periodic grid with density and drift fields
//! ([`torus`]), the twisted heat transfer operator for the Hamilton–Jacobi side
//! ([`transfer`]), a conservative Fokker–Planck solver ([`fokker_planck`]),
//! the Picard fixed point for periodic and finite-horizon equilibria ([`mfg`]),
//! a finite-player Nash iteration ([`particles`]) and the long-time value
//! diagnostics ([`ergodic`]).

mod error;
pub mod fokker_planck;
pub mod linalg;
pub mod ergodic;
pub mod mfg;
pub mod particles;
pub mod torus;
pub mod transfer;
pub mod wasserstein;

pub use error::{Error, Result};

/// Library version.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
