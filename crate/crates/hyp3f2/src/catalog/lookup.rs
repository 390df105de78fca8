//! The evaluation pipeline: closed forms first, series summation last.
//!
//! [`Catalog::evaluate`] resolves concrete parameters through a fixed
//! cascade and reports which stage produced the value:
//! - a vanishing top parameter makes every term after the first zero, so
//!   the sum is exactly one
//! - a direct template match evaluates the matched closed form; the
//!   provenance lists every match, best first
//! - otherwise the 120 transformation images of the parameters are
//!   matched, and a hit is pulled back through the gamma prefactor
//! - otherwise the parameters are scanned for membership in the three
//!   contiguous families, which the recursion engine can reach from
//!   closed-form seeds
//! - a terminating series is summed exactly; anything else is summed
//!   numerically to the digit target
//!
//! Every stage is exact-rational in its decision making: only values
//! (gamma prefactors, recursion seeds, numeric sums) leave the rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{Catalog, MatchResult};
use crate::contiguity::{Session, SessionSpecials};
use crate::error::Result;
use crate::expr::{eval, EvalCtx, NumValue};
use crate::numerics::real::{digits_to_bits, rational_to_i64};
use crate::series::{pfq_exact, pfq_value, terminating_index};
use crate::thomae::group;

/// Stage of the pipeline that produced a value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutcomeKind {
    /// A catalog template matched the parameters directly.
    Matched,
    /// A transformation image of the parameters matched.
    Transformed,
    /// A contiguous-family recursion reached the parameters.
    Contiguous,
    /// The series terminates and was summed exactly.
    Terminating,
    /// Numeric summation; no closed form was found.
    Numeric,
}

/// Value plus provenance from [`Catalog::evaluate`].
#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub value: NumValue,
    /// True when the value is an exact rational.
    pub exact: bool,
    /// Human-readable origin: matched entries, the transformation used,
    /// the contiguous family, or the summation strategy.
    pub provenance: String,
    pub kind: OutcomeKind,
}

fn ri(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Integer within the contiguity window, if any.
fn window(q: &BigRational, mmax: i64) -> Option<i64> {
    let v = rational_to_i64(q)?;
    (v.abs() <= mmax).then_some(v)
}

const TOP_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Scan for membership in the Watson, Dixon, or Whipple family with
/// offsets inside the window, and evaluate by recursion on a hit.
fn contiguous_value(
    tops: &[BigRational],
    bots: &[BigRational],
    digits: usize,
    mmax: i64,
) -> Option<(NumValue, String)> {
    let one = BigRational::one();
    let two = ri(2);
    let mut session = Session::new(digits);
    for tp in TOP_PERMS {
        let (a, b, c) = (&tops[tp[0]], &tops[tp[1]], &tops[tp[2]]);
        for bp in [[0usize, 1], [1, 0]] {
            let (u, v) = (&bots[bp[0]], &bots[bp[1]]);
            // Watson: bottoms ((a+b+1+m)/2, 2c+n)
            let m_w = window(&(&two * u - a - b - &one), mmax);
            let n_w = window(&(v - &two * c), mmax);
            if let (Some(m), Some(n)) = (m_w, n_w) {
                if let Ok(val) = session.watson(a, b, c, m, n) {
                    return Some((
                        val,
                        format!("watson a={a} b={b} c={c} m={m} n={n}"),
                    ));
                }
            }
            // Dixon: bottoms (1+m+a-b, 1+m+n+a-c)
            if let Some(m) = window(&(u - &one - a + b), mmax) {
                let n_d = window(&(v - &one - ri(m) - a + c), mmax);
                if let Some(n) = n_d {
                    if let Ok(val) = session.dixon(a, b, c, m, n) {
                        return Some((
                            val,
                            format!("dixon a={a} b={b} c={c} m={m} n={n}"),
                        ));
                    }
                }
            }
            // Whipple: tops (a, b, 1-b+m+n), bottoms (c, 1+2a+m-c)
            let (wa, wb, wt) = (a, b, c);
            let wc = u;
            if let Some(m) = window(&(v - &one - &two * wa + wc), mmax) {
                let n_p = window(&(wt - &one + wb - ri(m)), mmax);
                if let Some(n) = n_p {
                    if let Ok(val) = session.whipple(wa, wb, wc, m, n) {
                        return Some((
                            val,
                            format!("whipple a={wa} b={wb} c={wc} m={m} n={n}"),
                        ));
                    }
                }
            }
        }
    }
    None
}

impl Catalog {
    /// Evaluate a matched entry's right-hand side at a match assignment.
    fn rhs_value(&self, m: &MatchResult, digits: usize) -> Result<NumValue> {
        let entry = self.get(&m.id).expect("match came from this catalog");
        let rhs = entry.rhs().expect("matches are standard entries");
        let specials = SessionSpecials::new(digits);
        let ctx = EvalCtx { digits, env: &m.assignment, specials: &specials };
        eval(rhs, &ctx)
    }

    /// Describe every match, best first, separated by semicolons.
    fn describe_matches(&self, matches: &[MatchResult]) -> String {
        matches
            .iter()
            .map(|m| m.describe(self.get(&m.id).expect("matched entry")))
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Resolve concrete parameters through the evaluation cascade.
    ///
    /// `nmax` bounds integer-symbol enumeration during matching, `mmax`
    /// bounds the contiguous-family offset window.
    pub fn evaluate(
        &self,
        tops: &[BigRational],
        bots: &[BigRational],
        digits: usize,
        nmax: i64,
        mmax: i64,
    ) -> Result<EvalOutcome> {
        assert_eq!(tops.len(), 3, "a 3F2 has three tops");
        assert_eq!(bots.len(), 2, "a 3F2 has two bottoms");

        // a zero top ends the series after its first term
        if tops.iter().any(|t| t.is_zero()) {
            return Ok(EvalOutcome {
                value: NumValue::Exact(BigRational::one()),
                exact: true,
                provenance: "terminating".into(),
                kind: OutcomeKind::Terminating,
            });
        }

        // stage 1: direct template match
        let matches = self.match_concrete(tops, bots, nmax);
        for m in &matches {
            if let Ok(value) = self.rhs_value(m, digits) {
                let exact = matches!(value, NumValue::Exact(_));
                return Ok(EvalOutcome {
                    value,
                    exact,
                    provenance: self.describe_matches(&matches),
                    kind: OutcomeKind::Matched,
                });
            }
        }

        // stage 2: transformation images of the parameters
        let mut seen: Vec<(Vec<BigRational>, Vec<BigRational>)> = Vec::new();
        for g in group() {
            if g.is_identity() {
                continue;
            }
            let Ok((ti, bi)) = g.apply_concrete(tops, bots) else { continue };
            let mut key_t = ti.clone();
            let mut key_b = bi.clone();
            key_t.sort();
            key_b.sort();
            if seen.iter().any(|(t, b)| *t == key_t && *b == key_b) {
                continue;
            }
            seen.push((key_t, key_b));
            let image_matches = self.match_concrete(&ti, &bi, nmax);
            if image_matches.is_empty() {
                continue;
            }
            if !g.prefactor_finite(tops, bots) {
                continue;
            }
            let Ok(pre) = g.prefactor_concrete(tops, bots, digits) else { continue };
            for m in &image_matches {
                if let Ok(value) = self.rhs_value(m, digits) {
                    let bits = digits_to_bits(digits + 5);
                    let product = pre.mul(&value.to_real(digits), bits);
                    return Ok(EvalOutcome {
                        value: NumValue::Approx(product),
                        exact: false,
                        provenance: format!(
                            "{} -> {}",
                            g.name(),
                            self.describe_matches(&image_matches)
                        ),
                        kind: OutcomeKind::Transformed,
                    });
                }
            }
        }

        // stage 3: contiguous families around the recursion seeds
        if let Some((value, provenance)) = contiguous_value(tops, bots, digits, mmax) {
            let exact = matches!(value, NumValue::Exact(_));
            return Ok(EvalOutcome {
                value,
                exact,
                provenance,
                kind: OutcomeKind::Contiguous,
            });
        }

        // stage 4: exact terminating sum
        if terminating_index(tops).is_some() {
            let value = pfq_exact(tops, bots)?;
            return Ok(EvalOutcome {
                value: NumValue::Exact(value),
                exact: true,
                provenance: "terminating".into(),
                kind: OutcomeKind::Terminating,
            });
        }

        // stage 5: numeric summation
        let value = pfq_value(tops, bots, digits)?;
        Ok(EvalOutcome {
            value: NumValue::Approx(value),
            exact: false,
            provenance: "numeric".into(),
            kind: OutcomeKind::Numeric,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    // ------------------------------------------------------------------
    // cascade ordering
    // ------------------------------------------------------------------

    #[test]
    fn zero_top_short_circuits_to_one() {
        let cat = Catalog::builtin();
        let out = cat
            .evaluate(
                &[q(0, 1), q(1, 1), q(1, 1)],
                &[q(2, 1), q(2, 1)],
                50,
                8,
                6,
            )
            .unwrap();
        assert_eq!(out.kind, OutcomeKind::Terminating);
        assert_eq!(out.provenance, "terminating");
        assert_eq!(out.value.as_exact(), Some(&BigRational::one()));
    }

    #[test]
    fn unknown_parameters_fall_through_to_numeric() {
        let cat = Catalog::builtin();
        let out = cat
            .evaluate(
                &[q(1, 3), q(1, 5), q(1, 7)],
                &[q(20, 1), q(30, 1)],
                40,
                8,
                6,
            )
            .unwrap();
        assert_eq!(out.kind, OutcomeKind::Numeric);
        assert_eq!(out.provenance, "numeric");
        assert!(!out.exact);
    }
}
