//! Symbolic-numeric engine for closed forms of the generalized
//! hypergeometric series 3F2 at unit argument.
//!
//! The crate evaluates, transforms, and verifies closed-form identities for
//! 3F2(a, b, c; e, f | 1):
//!
//! - `numerics`: arbitrary-precision reals/complexes and the gamma family
//! - `expr`: exact rationals, multivariate rational forms, and a symbolic
//!   expression tree with an s-expression reader/writer
//! - `series`: a direct-summation oracle with certified tails and analytic
//!   continuation for small or negative parametric excess
//! - `thomae`: the two-term transformations at unit argument, the induced
//!   120-element group, orbit expansion, and catalog culling
//! - `contiguity`: three-term recursions walking Watson-, Dixon-, and
//!   Whipple-like families, plus the cubic-family ladders
//! - `catalog`: the closed-form table, its file format, verification,
//!   template matching, and derivation replay
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --example evaluate_3f2
//! cargo run --example thomae_orbit
//! cargo run --example contiguous_watson
//! cargo run --example maier_recursions
//! cargo run --example verify_catalog
//! cargo run --example cull_catalog
//! cargo run --example match_series
//! ```

pub mod catalog;
pub mod contiguity;
pub mod error;
pub mod expr;
pub mod numerics;
pub mod series;
pub mod thomae;

pub use error::{Error, Result};
