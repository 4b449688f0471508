//! Boundary integrated neural networks (BINNs) for 2D linear elastostatics.
//!
//! Only the boundary is discretized. The boundary integral equation is
//! collocated on discontinuous quadratic elements, the influence matrices
//! `Hhat` and `G` are assembled once, and then either
//!
//! - solved directly as a classical BEM system ([`solver::bem_solve`]), or
//! - used as a fixed linear residual that a small fully-connected network is
//!   trained to annihilate ([`solver::train`]).
//!
//! Interior displacements and stresses follow from the representation
//! formula ([`postprocess`]).
//!
//! ```no_run
//! use binn::problem::ProblemSpec;
//!
//! let spec = ProblemSpec::from_path("crates/core/specs/beam.spec").unwrap();
//! let setup = spec.build().unwrap();
//! let matrices = binn::influence::assemble(&setup.mesh, &setup.material, &setup.quadrature).unwrap();
//! let state = binn::solver::bem_solve(&matrices, &setup.bcs).unwrap();
//! println!("{} nodes solved", state.u.len() / 2);
//! ```

pub mod error;
pub mod influence;
pub mod io;
pub mod kernels;
pub mod mesh;
pub mod network;
pub mod pipeline;
pub mod postprocess;
pub mod problem;
pub mod quadrature;
pub mod solver;

pub use error::{BinnError, Result};

/// 2D point / vector in model units.
pub type Vec2 = nalgebra::Vector2<f64>;
