//! Hurwitz zeta via the Euler-Maclaurin asymptotic expansion.
//!
//! Used internally as the tail regulator for slowly-converging series: the
//! callers need zeta(s, a) for rational s (any sign, s != 1) and integer
//! offsets a large enough that the expansion converges fast. Not part of the
//! public evaluation surface.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::numerics::bernoulli::bernoulli;
use crate::numerics::real::{digits_to_bits, Real};

/// Hurwitz zeta(s, a) = sum_{k>=0} (a+k)^(-s), analytically continued in s.
///
/// `s` is an exact rational != 1, `a` a positive integer offset. Accuracy
/// target is `digits` decimal digits. Returns an error when the expansion
/// cannot reach the target (caller should raise `a`).
pub fn hurwitz_zeta(s: &BigRational, a: u64, digits: usize) -> Result<Real> {
    if s.is_one() {
        return Err(Error::DivergentSeries("zeta pole at s = 1".into()));
    }
    if a == 0 {
        return Err(Error::Internal("hurwitz_zeta needs a >= 1".into()));
    }
    let bits = digits_to_bits(digits + 15);

    // Optimal truncation error of the expansion is about exp(-2 pi A), so the
    // summation point A = a + N must scale with the digit target (and with
    // |s|, which delays the turnover of the terms).
    let s_abs = s.abs().to_f64().unwrap_or(0.0);
    let min_a = ((digits + 12) as f64 * 0.37 + s_abs / 4.0).ceil() as u64 + 8;
    let big_a = a.max(min_a);
    let n_extra = big_a - a;

    let sr = Real::from_rational(s, bits);
    let one = Real::one(bits);

    // explicit terms sum_{k=0}^{n_extra-1} (a+k)^(-s)
    let mut acc = Real::zero(bits);
    for k in 0..n_extra {
        let base = Real::from_i64((a + k) as i64, bits);
        let t = base.ln(bits).mul(&sr, bits).neg().exp(bits);
        acc = acc.add(&t, bits);
    }

    let ar = Real::from_i64(big_a as i64, bits);
    let ln_a = ar.ln(bits);
    // A^(1-s)/(s-1)
    let a_pow_1ms = one.sub(&sr, bits).mul(&ln_a, bits).exp(bits);
    let s_minus_1 = Real::from_rational(&(s - BigRational::one()), bits);
    acc = acc.add(&a_pow_1ms.div(&s_minus_1, bits), bits);
    // A^(-s)/2
    let a_pow_ms = sr.mul(&ln_a, bits).neg().exp(bits);
    acc = acc.add(&a_pow_ms.div(&Real::from_i64(2, bits), bits), bits);

    // correction sum: B_2j/(2j)! (s)_{2j-1} A^(-s-2j+1)
    let a_inv = ar.recip(bits);
    let a_inv2 = a_inv.mul(&a_inv, bits);
    // (s)_{2j-1} tracked in Real; A^(-s-2j+1) tracked by repeated A^(-2)
    let mut poch = sr.clone(); // (s)_1 = s
    let mut pw = a_pow_ms.mul(&a_inv, bits); // A^(-s-1)
    let mut fact = BigInt::from(2); // (2j)! at j = 1
    let eps = Real::parse(&format!("1e-{}", digits + 8), bits);
    let mut prev_mag: Option<Real> = None;
    let mut converged = false;
    for j in 1..600usize {
        let coeff = bernoulli(2 * j) / BigRational::from(fact.clone());
        // term = B_2j/(2j)! * (s)_{2j-1} * A^{1-s-2j}; pw currently A^{-s-(2j-1)}
        let term = Real::from_rational(&coeff, bits).mul(&poch, bits).mul(&pw, bits);
        let mag = term.abs();
        if let Some(p) = &prev_mag {
            if mag >= *p {
                if mag > eps {
                    return Err(Error::Internal(format!(
                        "hurwitz_zeta expansion stalled at s = {s}, a = {a}"
                    )));
                }
                converged = true;
                break;
            }
        }
        acc = acc.add(&term, bits);
        if mag < eps {
            converged = true;
            break;
        }
        prev_mag = Some(mag);
        // advance: (s)_{2j+1} = (s)_{2j-1} (s+2j-1)(s+2j)
        let sj1 = sr.add(&Real::from_i64((2 * j - 1) as i64, bits), bits);
        let sj2 = sr.add(&Real::from_i64((2 * j) as i64, bits), bits);
        poch = poch.mul(&sj1, bits).mul(&sj2, bits);
        pw = pw.mul(&a_inv2, bits);
        fact *= BigInt::from((2 * j + 1) * (2 * j + 2));
    }
    if !converged {
        return Err(Error::Internal(format!(
            "hurwitz_zeta did not converge at s = {s}, a = {a}"
        )));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real::close_enough;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    const D: usize = 60;

    fn tol() -> Real {
        Real::parse("1e-55", digits_to_bits(D))
    }

    // Reference values generated with mpmath zeta(s, a) at 80 digits.

    #[test]
    fn zeta_2_matches_pi_squared_over_6_tail() {
        // zeta(2, 1) = pi^2/6
        let bits = digits_to_bits(D + 15);
        let got = hurwitz_zeta(&q(2, 1), 1, D).unwrap();
        let want = Real::pi(bits).powi(2, bits).div(&Real::from_i64(6, bits), bits);
        assert!(close_enough(&got, &want, &tol(), bits), "{got:?}");
    }

    #[test]
    fn zeta_fractional_s_large_a() {
        // zeta(3/2, 40)
        let got = hurwitz_zeta(&q(3, 2), 40, D).unwrap();
        let want = Real::parse(
            "0.31821654107607524299793465060375788943313223952774004918613102863549409112092136",
            digits_to_bits(D),
        );
        assert!(close_enough(&got, &want, &tol(), got.bits()), "{got:?}");
    }

    #[test]
    fn zeta_negative_s_continuation() {
        // zeta(-1/2, 25): analytic continuation, value from mpmath
        let got = hurwitz_zeta(&q(-1, 2), 25, D).unwrap();
        let want = Real::parse(
            "-80.841666500055500663536335971065329632743149143387578782821906949788280192481443",
            digits_to_bits(D),
        );
        assert!(close_enough(&got, &want, &tol(), got.bits()), "{got:?}");
    }

    #[test]
    fn zeta_pole_rejected() {
        assert!(hurwitz_zeta(&q(1, 1), 10, D).is_err());
    }
}
