//! Constrained sampling with landing dynamics.
//!
//! The crate provides the projection-free OLLA / OLLA-H samplers, which drive
//! equality constraints `h(x) = 0` and inequality constraints `g(x) ≤ 0` to
//! feasibility by an exponential landing drift while diffusing along the
//! tangent space, together with three projection-based baselines
//! (constrained Langevin, constrained HMC and constrained generalized HMC),
//! a suite of benchmark problems and sample-quality metrics.
//!
//! Modules, bottom-up:
//!
//! * [`linalg`]: dense kernels, Gram matrices, pseudo-inverse and projectors
//! * [`rng`]: reproducible per-chain random streams
//! * [`field`], [`constraints`]: scalar-field oracles, constraint sets and
//!   the per-point active frame
//! * [`olla`]: the landing samplers
//! * [`baselines`]: CLangevin, CHMC and CGHMC
//! * [`problems`]: benchmark problem constructors
//! * [`sampler`]: a uniform chain driver over all samplers
//! * [`metrics`]: W2, energy distance, ESS

pub mod baselines;
pub mod constraints;
mod dual;
pub mod field;
pub mod linalg;
pub mod metrics;
pub mod olla;
pub mod problems;
pub mod rng;
pub mod sampler;

pub use constraints::{ActiveFrame, ConstraintSet, Violation};
pub use field::{Field, ScalarField};
pub use linalg::Matrix;
pub use olla::{ChainState, CurvatureMode, OllaConfig};
pub use problems::Problem;
pub use rng::RngStream;
pub use sampler::{ChainRun, SamplerConfig};

/// Errors raised by oracles, solvers and samplers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("oracle evaluated outside its domain: {0}")]
    Domain(String),
    #[error("eigendecomposition did not converge within {sweeps} Jacobi sweeps")]
    SolverFailure { sweeps: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("could not construct a feasible point: {0}")]
    Infeasible(String),
    #[error("chain has diverged and can no longer be stepped")]
    Diverged,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
