//! Arbitrary-precision numerics: reals, complexes, and the gamma family.
//!
//! Provides:
//! - [`Real`]: big-float reals with digit-based precision control
//! - [`Complex`]: rectangular complex arithmetic over [`Real`]
//! - exact Bernoulli numbers and polynomials
//! - `gamma`, `log_gamma`, `digamma`, `trigamma`, `sin_pi`, `cos_pi`,
//!   `pochhammer` for real arguments, plus complex-argument variants
//! - a Hurwitz zeta helper used as the series tail regulator

pub mod bernoulli;
pub mod complex;
pub mod gamma;
pub mod real;
pub mod zeta;

pub use complex::{digamma_complex, gamma_complex, log_gamma_complex, Complex};
pub use gamma::{cos_pi, digamma, gamma, log_gamma, pochhammer, pochhammer_exact, sin_pi, trigamma};
pub use real::{close_enough, digits_to_bits, is_nonpositive_integer, rel_err, Real};
pub use zeta::hurwitz_zeta;
