//! Multivariate-normal machinery: covariance assembly, jittered Cholesky,
//! conditioning on one coordinate, tail-robust truncated sampling and
//! standard normal tail functions.

mod cholesky;
mod conditional;
mod tail;
mod truncated;

pub use cholesky::{assemble_cov, cholesky, sample_mvn, CholeskyFactor, CovMatrix, JitterPolicy};
pub(crate) use cholesky::cholesky_matrix;
pub use conditional::{condition_on_coordinate, ConditionalLaw, CoordinateConditioner};
pub use tail::{log_normal_tail, log_sum_exp, normal_cdf, normal_pdf, normal_tail};
pub use truncated::{sample_truncated_normal, standard_truncated_normal};
