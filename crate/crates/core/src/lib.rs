//! Nonlinear density-matrix dynamics built on the factorization `ρ = γγ†`.
//!
//! The state operator `γ` obeys `iγ̇ = G(γγ†)γ` with a generator
//! `G = T + iΓ` that may depend nonlinearly on `ρ`. Integrating `γ` instead of
//! `ρ` keeps every state positive by construction; a zero-mean `Γ` keeps the
//! trace fixed.
//!
//! Modules:
//! - [`linalg`], [`state`]: dense matrix primitives, validated states, diagnostics.
//! - [`generators`]: the `T`/`Γ` families and their executable criteria.
//! - [`propagation`]: RK4 trajectories, propagators, convex mixtures of processes.
//! - [`entanglement`]: product-propagator extensions to `H ⊗ K`.
//! - [`measurement`]: projective measurements and two-measurement correlations.
//! - [`parallel`]: batch execution over independent trajectories.

pub mod entanglement;
pub mod error;
pub mod export;
pub mod generators;
pub mod integrator;
pub mod linalg;
pub mod measurement;
pub mod parallel;
pub mod propagation;
pub mod sampling;
pub mod serial;
pub mod state;

pub use error::{Error, ErrorClass, Result};
pub use generators::{GammaFamily, GeneratorSpec, TFamily};
pub use linalg::{ComplexMatrix, Subsystem, C64};
pub use parallel::Execution;
pub use propagation::{IntegratorConfig, MixtureSpec, Trajectory};
pub use state::{DensityMatrix, StateOperator};
