//! Maximum-entropy reconstruction of a probability density on [0, infinity)
//! from a few real-axis Laplace transform values.
//!
//! The change of variables y = e^{-s} turns the transform values
//! E[e^{-alpha_i S}] into fractional moments E[Y^alpha_i] of a density on
//! [0,1]. The density maximizing Shannon entropy under those K constraints
//! has the exponential-family form e^{-<lambda, y^alpha>} / Z(lambda), and
//! the multipliers are found by minimizing the strictly convex dual
//! ln Z(lambda) + <lambda, mu>. Entropy gaps between nested reconstructions
//! bound their L1 distance, which is what makes a handful of transform
//! values enough for accurate recovery; the diagnostics here measure that
//! directly.
//!
//! The crate is `no_std` (with `alloc`); all float math goes through
//! `libm`, so results are identical across platforms. IO, file formats,
//! and the command-line front end live in the companion `lapmax-cli` crate.
//!
//! ```
//! use lapmax_core::{
//!     diagnostics::entropy,
//!     problem::{MomentProblem, QuadratureSpec},
//!     solver::{solve, SolverConfig},
//! };
//!
//! // moments of the uniform density: mu = 1/(1+alpha)
//! let p = MomentProblem::new(vec![1.0, 0.5], vec![0.5, 2.0 / 3.0]).unwrap();
//! let (density, _trace) = solve(&p, &SolverConfig::default(), &QuadratureSpec::default()).unwrap();
//! assert!(density.entropy().abs() < 1e-8);
//! let direct = entropy(&density, &QuadratureSpec::default()).unwrap();
//! assert!((direct - density.entropy()).abs() < 1e-8);
//! ```

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod math;

pub mod diagnostics;
pub mod linalg;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod source;

pub use diagnostics::{
    entropy, kullback, l1_distance, sweep, Density, DensityTable, Space, SweepInput, SweepReport,
    SweepRow,
};
pub use problem::{
    validate_problem, MaxEntDensity, MomentProblem, QuadratureSpec, ValidationReport, Violation,
};
pub use quadrature::{hessian, integrate, partition_function, Integrand, PartitionEval};
pub use solver::{dual_value, solve, SolveError, SolveTrace, SolverConfig};
pub use source::{empirical_problem, make_problem, AlphaScheme, AlphaSchemeKind, SourceLaw};
