//! Stochastic gradient descent for linear inverse problems in `ℓ^r` spaces.
//!
//! The solver runs mini-batch Kaczmarz iterations in the dual space, so that
//! `X = ℓ^{r}` with `r` close to 1 promotes sparse reconstructions. The crate
//! also ships the two model problems (a Green's-function integral equation and
//! parallel-beam tomography), three noise models, and diagnostics for
//! convergence traces and seed ensembles.

pub mod diagnostics;
mod error;
pub mod noise;
pub mod operators;
pub mod solver;
pub mod spaces;

pub use diagnostics::{ConvergenceRecord, EpochRow};
pub use error::{Error, Result};
pub use noise::{NoiseModel, NoiseSpec};
pub use operators::{BlockOperator, Matrix, ObservationSet, RadonGeometry};
pub use solver::{Method, Problem, Reference, SolverConfig, StepSchedule, StoppingRule};
pub use spaces::SpaceDescriptor;
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
