//! Random admissible parameter points for catalog entries.
//!
//! Verification samples each entry at random symbol assignments. A draw is
//! admissible when:
//! - every symbol respects its declared kind (continuous values are kept
//!   non-integer so no accidental termination or pole appears)
//! - the entry constraints hold
//! - the instantiated series has no bottom pole before it terminates, or,
//!   when it does not terminate, every transformation-orbit excess is
//!   non-integer and the best of them exceeds one quarter, so the series
//!   oracle converges comfortably
//!
//! Draws are made with rejection sampling under a fixed attempt budget;
//! exhausting the budget reports which entry could not be sampled.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use rand::Rng;

use super::{Entry, SymbolKind};
use crate::error::{Error, Result};
use crate::series::{orbit_excesses, terminating_index};

/// One admissible sample: the assignment and the instantiated parameters.
#[derive(Clone, Debug)]
pub struct Draw {
    pub env: BTreeMap<String, BigRational>,
    pub tops: Vec<BigRational>,
    pub bots: Vec<BigRational>,
}

/// Attempts made before giving up on an entry.
pub const ATTEMPT_BUDGET: usize = 300;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Random value for one symbol kind.
///
/// Continuous symbols draw proper fractions with small denominators in
/// roughly (-3, 4); integer symbols stay small so factorial growth in
/// terminating sums remains cheap.
fn random_symbol<R: Rng>(rng: &mut R, kind: SymbolKind) -> BigRational {
    match kind {
        SymbolKind::Continuous => {
            let dens = [2i64, 3, 4, 5, 7];
            loop {
                let d = dens[rng.gen_range(0..dens.len())];
                let n = rng.gen_range(-3 * d..=4 * d);
                if n % d != 0 {
                    return q(n, d);
                }
            }
        }
        SymbolKind::PositiveInteger => q(rng.gen_range(1..=4), 1),
        SymbolKind::NonnegativeInteger => q(rng.gen_range(0..=4), 1),
    }
}

fn is_nonpositive_integer(v: &BigRational) -> bool {
    v.is_integer() && !v.is_positive()
}

/// Series-level admissibility of instantiated parameters.
fn series_admissible(tops: &[BigRational], bots: &[BigRational]) -> bool {
    match terminating_index(tops) {
        Some(_) => {
            // A nonpositive-integer bottom is rejected outright: before the
            // truncation index it divides by zero, and at or beyond it the
            // truncated sum is a canceled-pole limit that no longer matches
            // the generic closed form.
            !bots.iter().any(is_nonpositive_integer)
        }
        None => {
            if bots.iter().any(is_nonpositive_integer) {
                return false;
            }
            let orbit = orbit_excesses(tops, bots);
            if orbit.iter().any(|x| x.is_integer()) {
                return false;
            }
            match orbit.iter().max() {
                Some(best) => *best > q(1, 4),
                None => false,
            }
        }
    }
}

/// One sampling attempt. `None` means the draw was inadmissible.
pub fn try_draw<R: Rng>(entry: &Entry, rng: &mut R) -> Option<Draw> {
    let mut env = BTreeMap::new();
    for (name, kind) in &entry.symbols {
        env.insert(name.clone(), random_symbol(rng, *kind));
    }
    if !entry.admissible(&env) {
        return None;
    }
    let (tops, bots) = entry.instantiate(&env).ok()?;
    if entry.is_standard() && !series_admissible(&tops, &bots) {
        return None;
    }
    if !entry.is_standard() {
        // fixture series are compared exactly, which needs termination
        if terminating_index(&tops).is_none() {
            return None;
        }
        if !series_admissible(&tops, &bots) {
            return None;
        }
    }
    Some(Draw { env, tops, bots })
}

/// Draw an admissible point or report exhaustion.
pub fn draw_admissible<R: Rng>(entry: &Entry, rng: &mut R) -> Result<Draw> {
    for _ in 0..ATTEMPT_BUDGET {
        if let Some(draw) = try_draw(entry, rng) {
            return Ok(draw);
        }
    }
    Err(Error::SamplingExhausted(format!(
        "no admissible point for {} in {ATTEMPT_BUDGET} attempts",
        entry.id
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_entry;
    use crate::expr::sexp;
    use num_traits::Zero;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn entry(src: &str) -> Entry {
        parse_entry(&sexp::read_one(src).unwrap(), "test.cat").unwrap()
    }

    // ------------------------------------------------------------------
    // admissibility filters
    // ------------------------------------------------------------------

    #[test]
    fn draws_respect_kinds_and_constraints() {
        let e = entry(
            r#"(entry "T.1"
  (status paper)
  (symbols (a cont) (n posint))
  (top a (+ a 1) (- n))
  (bottom (+ a n) (* 2 a))
  (rhs 1)
  (source "test")
  (constraints (positive a)))"#,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let d = draw_admissible(&e, &mut rng).unwrap();
            let a = &d.env["a"];
            let n = &d.env["n"];
            assert!(*a > BigRational::zero() && !a.is_integer());
            assert!(n.is_integer() && *n >= BigRational::from_integer(1.into()));
            assert_eq!(d.tops.len(), 3);
            assert_eq!(d.bots.len(), 2);
        }
    }

    #[test]
    fn nonterminating_draws_avoid_integer_orbit_excesses() {
        let e = entry(
            r#"(entry "T.2"
  (status paper)
  (symbols (a cont) (b cont) (c cont))
  (top a b (- c a))
  (bottom c (+ a b))
  (rhs 1)
  (source "test"))"#,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..25 {
            let d = draw_admissible(&e, &mut rng).unwrap();
            // a slot difference can land on a negative integer and
            // terminate the series; the orbit filter applies beyond that
            if terminating_index(&d.tops).is_some() {
                continue;
            }
            let orbit = orbit_excesses(&d.tops, &d.bots);
            assert!(orbit.iter().all(|x| !x.is_integer()));
            assert!(orbit.iter().max().unwrap() > &q(1, 4));
        }
    }

    #[test]
    fn impossible_constraints_exhaust_the_budget() {
        let e = entry(
            r#"(entry "T.3"
  (status paper)
  (symbols (a cont))
  (top a a a)
  (bottom a a)
  (rhs 1)
  (source "test")
  (constraints (positive (- a a 1))))"#,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        match draw_admissible(&e, &mut rng) {
            Err(Error::SamplingExhausted(msg)) => assert!(msg.contains("T.3")),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_for_a_fixed_seed() {
        let e = entry(
            r#"(entry "T.4"
  (status paper)
  (symbols (a cont) (b cont))
  (top a b (- b a))
  (bottom (+ a b) (+ b 1))
  (rhs 1)
  (source "test"))"#,
        );
        let d1 = draw_admissible(&e, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let d2 = draw_admissible(&e, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(d1.env, d2.env);
    }
}
