//! Finite-element simulator for nematic electrolytes.
//!
//! The crate couples an incompressible velocity field, a unit-length
//! director, two ionic charge densities and the electric potential on
//! simplicial meshes of boxes in two or three dimensions. Each time step is
//! solved by a fixed-point loop over four decoupled linear or nodal
//! sub-problems. Every step is certified against the discrete energy law,
//! the nodal unit-sphere constraint, the charge maximum principle and mass
//! conservation.
//!
//! Modules, bottom-up:
//!
//! - [`quadrature`]: simplex quadrature rules.
//! - [`mesh`]: structured simplicial meshes and admissibility checks.
//! - [`linalg`]: CSR matrices, Krylov solvers, saddle-point solver, M-matrix audit.
//! - [`fem`]: assembly of all scalar, director and MINI velocity operators.
//! - [`state`]: discrete state, physical parameters, initialization, invariants.
//! - [`scheme`]: one time step and trajectory driver.
//! - [`certificates`]: energy law, relative energy, regularity weights, Gronwall.
//! - [`io`]: VTK and CSV writers and the key=value configuration format.
//! - [`experiments`]: the experiment catalogue.

pub mod certificates;
pub mod experiments;
pub mod fem;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod scheme;
pub mod state;

/// Three-component real vector used for directors and padded coordinates.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Dense 3x3 matrix used for gradients and permittivity tensors.
pub type Mat3 = nalgebra::Matrix3<f64>;
