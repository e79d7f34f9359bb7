//! Kernel sum-of-squares shape constraints for vector-valued kernel regression.
//!
//! - [`kernels`]: Gaussian kernels, their derivatives and Gram factorization.
//! - [`sos`]: PSD models `x -> <phi(x), A phi(x)>` and nonnegative interpolation.
//! - [`solver`]: unconstrained, sampled-constraint and kSoS-constrained regression.
//! - [`bounds`]: quantities entering the sampled-to-global constraint guarantees.
//! - [`experiments`]: the Lotka-Volterra invariance benchmark and two small demos.

pub mod bounds;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod solver;
pub mod sos;

pub use error::{KsosError, Result};
pub use kernels::KernelSpec;
pub use solver::{ConstraintBlock, ConstraintSpec, Dataset, EqualityPair, FitResult, RepresenterModel, SolveReport};
pub use sos::{SosBasis, SosModel};
