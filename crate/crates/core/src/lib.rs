//! Heat-flow transport maps on one-dimensional model spaces.
//!
//! The crate evaluates diffusion semigroups for the Ornstein–Uhlenbeck and
//! Laguerre generators, computes iterated carré du champ operators on jets,
//! integrates the heat-flow transport map and checks it against the monotone
//! quantile coupling and the functional inequalities it implies.

pub mod cli;
pub mod error;
pub mod gamma;
pub mod model;
pub mod quadrature;
pub mod semigroup;
pub mod transport;
pub mod verify;

pub use error::{Error, Result};
pub use gamma::jet::Jet;
pub use model::{Generator1D, Potential, SpaceKind};
pub use semigroup::{Backend, SemigroupEvaluator, SmoothFn};
pub use transport::{HeatFlowProblem, TransportMapGrid};
pub use verify::{MeasureCdf, Status, VerificationReport};
