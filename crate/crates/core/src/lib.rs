//! Delta interactions at integer sites on the line: Jost solutions, scattering
//! data, bound states, resolvent kernels and the dispersive propagator, with a
//! finite-difference oracle for cross-checks.

mod ddouble;
pub mod error;
pub mod jost;
pub mod lattice;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod resolvent;
pub mod scattering;
pub mod spectrum;
pub mod transfer;

pub use error::{Error, Result};
pub use lattice::{Coupling, CouplingSequence};
