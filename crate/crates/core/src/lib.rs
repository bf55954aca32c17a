//! Exact construction and certification of norm-one projections onto
//! isometric copies of `l1^n` inside transportation cost spaces of finite
//! metric spaces.
//!
//! The pipeline runs from a finite metric space and an ordered list of
//! point pairs, through the minimum-weight perfect matching linear program
//! and its odd-cut dual, to a laminar dual family, the 1-Lipschitz
//! biorthogonal functionals built from it, and finally a certificate that
//! the resulting projection has norm exactly one.
//!
//! Every module is generic over an exact [`Scalar`]; the aliases below fix
//! it to arbitrary-precision rationals, which is what the file formats and
//! the command-line tool use.

pub mod fixtures;
pub mod harness;
pub mod io;
pub mod lp;
pub mod matching;
pub mod metric;
pub mod projection;
pub mod scalar;
pub mod transport;

pub use scalar::{parse_scalar, Scalar};

/// Arbitrary-precision rational, the default scalar.
pub type Rational = num_rational::BigRational;

pub type MetricSpace = metric::FiniteMetricSpace<Rational>;
pub type Problem = transport::TransportationProblem<Rational>;
pub type Plan = transport::TransportationPlan<Rational>;
pub type Instance = matching::MatchingInstance<Rational>;
pub type Laminar = matching::LaminarDual<Rational>;
pub type Lipschitz = projection::LipschitzFunction<Rational>;
pub type Projection = projection::ProjectionOperator<Rational>;
