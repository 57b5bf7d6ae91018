//! Realizability-preserving continuous Galerkin solver for the M1 moment model
//! of radiative transfer.
//!
//! The spatial discretization is a P1/Q1 finite element scheme on uniform
//! meshes. A low-order graph-viscosity scheme keeps every nodal state in the
//! realizable set; monolithic convex limiting adds high-order antidiffusive
//! corrections without leaving it. Time integration uses Heun's SSP-RK2 method
//! with implicit treatment of the lumped reactive terms.

pub mod config;
pub mod error;
pub mod fem;
pub mod limiter;
pub mod low_order;
pub mod m1;
pub mod mesh;
pub mod output;
pub mod scenarios;
pub mod time_loop;

pub use error::{M1Error, Result};
pub use fem::{assemble_coefficients, FemCoefficients, MaterialFields, UniformMaterials};
pub use m1::{MomentState, NodalField};
pub use mesh::Mesh;
pub use time_loop::Scheme;
