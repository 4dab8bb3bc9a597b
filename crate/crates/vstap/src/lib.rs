//! Generation of multivariate time series with prescribed marginal
//! distributions and lagged auto/cross-correlation structure.
//!
//! The generator works in four steps:
//!
//! 1. For every channel pair and lag, invert the correlation transform:
//!    find the Gaussian correlation whose image under the fitted marginal
//!    transforms equals the target correlation ([`solver`]).
//! 2. Fit a Gaussian VAR to the solved correlations via the multivariate
//!    Yule-Walker equations, after repairing the assembled block-Toeplitz
//!    correlation matrix to positive definiteness if needed ([`lagcorr`],
//!    [`var`]).
//! 3. Simulate the VAR with seeded, reproducible innovations ([`var`]).
//! 4. Push each Gaussian channel through a static marginal map: either the
//!    empirical quantile function (exact marginals) or the fitted piecewise
//!    linear transform (better correlation fidelity) ([`pipeline`]).
//!
//! The correlation transform itself is evaluated in closed form from the
//! moments of the doubly truncated bivariate Gaussian distribution ([`bvn`]),
//! so no numerical integration is needed at solve time. A Monte-Carlo
//! [`oracle`] provides independent brute-force checks of those closed forms.

pub mod bvn;
pub mod error;
pub mod gauss;
pub mod lagcorr;
pub mod marginal;
pub mod model_io;
pub mod oracle;
pub mod pipeline;
pub mod solver;
pub mod var;

pub use error::{Error, Result};
pub use lagcorr::LaggedCorrelationSet;
pub use marginal::{EmpiricalMarginal, PiecewiseTransform};
pub use pipeline::{TransformMode, VstapModel};
pub use solver::{SolveReport, SolveStatus};
pub use var::VarModel;
