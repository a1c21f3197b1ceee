//! Numeric kernel: exact polynomials and the Routh array, small dense linear
//! algebra, and the RK4 stepper.

mod dense;
mod oracle;
mod polynomial;
mod rk4;
mod routh;

pub use dense::{lyapunov_residual, solve_lyapunov, spectral_norm, symmetric_eigenvalues, DenseMatrix};
pub use oracle::{companion_matrix, hurwitz_eig_oracle, OracleVerdict, ORACLE_MARGIN};
pub use polynomial::{parse_rational, rational_from_f64, rational_from_i64, rational_to_f64, Polynomial, Rational};
pub use rk4::{rk4_step, Rk4};
pub use routh::{routh_first_column, routh_hurwitz, HurwitzFailure, HurwitzVerdict};
