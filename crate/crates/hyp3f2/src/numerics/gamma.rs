//! Gamma-family special functions for real arguments at arbitrary precision.
//!
//! Strategy: shift the argument up until Stirling's asymptotic series with
//! exact Bernoulli coefficients reaches the target accuracy, then undo the
//! shift with exact-product corrections. Negative arguments go through the
//! reflection formulas, keeping everything in real arithmetic. Poles are
//! reported as errors, never as NaN.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::numerics::bernoulli::bernoulli;
use crate::numerics::real::{digits_to_bits, Real};

/// Smallest argument at which Stirling's series is summed directly.
/// About 0.4 decimal digits of target accuracy per unit of argument.
fn stirling_threshold(digits: usize) -> i64 {
    ((digits as f64) * 0.4).ceil() as i64 + 8
}

fn work_bits(digits: usize) -> usize {
    digits_to_bits(digits + 15)
}

/// Stirling series for ln Gamma(z), valid for z >= threshold.
/// ln Gamma(z) = (z - 1/2) ln z - z + ln(2 pi)/2 + sum B_2n / (2n(2n-1) z^(2n-1))
fn stirling_log_gamma(z: &Real, digits: usize) -> Result<Real> {
    let bits = work_bits(digits);
    let half = Real::parse("0.5", bits);
    let lnz = z.ln(bits);
    let mut acc = z.sub(&half, bits).mul(&lnz, bits).sub(z, bits);
    acc = acc.add(&Real::ln_2pi(bits).mul(&half, bits), bits);

    let z2inv = z.mul(z, bits).recip(bits);
    let mut pw = z.recip(bits); // z^{-(2n-1)} for n = 1
    let eps = Real::parse(&format!("1e-{}", digits + 8), bits);
    let mut prev_mag: Option<Real> = None;
    for n in 1..2000usize {
        let b = bernoulli(2 * n);
        let denom = BigInt::from(2 * n) * BigInt::from(2 * n - 1);
        let coeff = b / BigRational::from(denom);
        let term = Real::from_rational(&coeff, bits).mul(&pw, bits);
        let mag = term.abs();
        if let Some(p) = &prev_mag {
            if mag >= *p {
                // asymptotic series turned; remaining error ~ last added term
                if mag > eps {
                    return Err(Error::Internal(format!(
                        "stirling series stalled at term {n} for z = {z:?}"
                    )));
                }
                break;
            }
        }
        acc = acc.add(&term, bits);
        if mag < eps {
            break;
        }
        prev_mag = Some(mag);
        pw = pw.mul(&z2inv, bits);
    }
    Ok(acc)
}

/// ln Gamma(x) for real x > 0.
pub fn log_gamma(x: &Real, digits: usize) -> Result<Real> {
    if x.is_nan() {
        return Err(Error::Internal("log_gamma of NaN".into()));
    }
    if !x.is_positive() {
        return Err(Error::GammaPole(format!("log_gamma needs x > 0, got {x:?}")));
    }
    let bits = work_bits(digits);
    let thr = Real::from_i64(stirling_threshold(digits), bits);
    if x >= &thr {
        return stirling_log_gamma(x, digits);
    }
    // shift: Gamma(x) = Gamma(x+m) / prod_{j=0..m-1} (x+j)
    let m = thr.sub(x, bits).to_bigint().to_i64().unwrap_or(0) + 1;
    let mut prod = Real::one(bits);
    for j in 0..m {
        prod = prod.mul(&x.add(&Real::from_i64(j, bits), bits), bits);
    }
    let z = x.add(&Real::from_i64(m, bits), bits);
    Ok(stirling_log_gamma(&z, digits)?.sub(&prod.ln(bits), bits))
}

/// sin(pi x) with exact integer-part reduction.
pub fn sin_pi(x: &Real, digits: usize) -> Real {
    let bits = work_bits(digits);
    let n = x.round_to_int();
    let r = x.sub(&Real::from_bigint(&n, bits), bits);
    if r.is_zero() {
        return Real::zero(bits);
    }
    let s = Real::pi(bits).mul(&r, bits).sin(bits);
    if (&n % BigInt::from(2)).abs() == BigInt::one() {
        s.neg()
    } else {
        s
    }
}

/// cos(pi x) with exact integer-part reduction.
pub fn cos_pi(x: &Real, digits: usize) -> Real {
    let bits = work_bits(digits);
    let n = x.round_to_int();
    let r = x.sub(&Real::from_bigint(&n, bits), bits);
    let c = Real::pi(bits).mul(&r, bits).cos(bits);
    if (&n % BigInt::from(2)).abs() == BigInt::one() {
        c.neg()
    } else {
        c
    }
}

/// Gamma(x) for real x away from the poles 0, -1, -2, ...
pub fn gamma(x: &Real, digits: usize) -> Result<Real> {
    let bits = work_bits(digits);
    if x.is_integer() && !x.is_positive() {
        return Err(Error::GammaPole(format!("{x:?}")));
    }
    if x.is_positive() {
        return Ok(log_gamma(x, digits)?.exp(bits));
    }
    // reflection: Gamma(x) = pi / (sin(pi x) Gamma(1 - x))
    let one = Real::one(bits);
    let g = gamma(&one.sub(x, bits), digits)?;
    let s = sin_pi(x, digits);
    if s.is_zero() {
        return Err(Error::GammaPole(format!("{x:?}")));
    }
    Ok(Real::pi(bits).div(&s.mul(&g, bits), bits))
}

/// Digamma asymptotic: psi(z) = ln z - 1/(2z) - sum B_2n / (2n z^(2n))
fn digamma_asymptotic(z: &Real, digits: usize) -> Result<Real> {
    let bits = work_bits(digits);
    let mut acc = z.ln(bits);
    let half = Real::parse("0.5", bits);
    acc = acc.sub(&half.div(z, bits), bits);
    let z2inv = z.mul(z, bits).recip(bits);
    let mut pw = z2inv.clone();
    let eps = Real::parse(&format!("1e-{}", digits + 8), bits);
    let mut prev_mag: Option<Real> = None;
    for n in 1..2000usize {
        let coeff = bernoulli(2 * n) / BigRational::from(BigInt::from(2 * n));
        let term = Real::from_rational(&coeff, bits).mul(&pw, bits);
        let mag = term.abs();
        if let Some(p) = &prev_mag {
            if mag >= *p {
                if mag > eps {
                    return Err(Error::Internal(format!(
                        "digamma series stalled for z = {z:?}"
                    )));
                }
                break;
            }
        }
        acc = acc.sub(&term, bits);
        if mag < eps {
            break;
        }
        prev_mag = Some(mag);
        pw = pw.mul(&z2inv, bits);
    }
    Ok(acc)
}

/// psi(x) = d/dx ln Gamma(x) for real x away from the poles.
pub fn digamma(x: &Real, digits: usize) -> Result<Real> {
    let bits = work_bits(digits);
    if x.is_integer() && !x.is_positive() {
        return Err(Error::GammaPole(format!("{x:?}")));
    }
    if x.is_negative() {
        // psi(x) = psi(1-x) - pi cot(pi x)
        let one = Real::one(bits);
        let p = digamma(&one.sub(x, bits), digits)?;
        let cot = cos_pi(x, digits).div(&sin_pi(x, digits), bits);
        return Ok(p.sub(&Real::pi(bits).mul(&cot, bits), bits));
    }
    let thr = Real::from_i64(stirling_threshold(digits), bits);
    if x >= &thr {
        return digamma_asymptotic(x, digits);
    }
    // psi(x) = psi(x+m) - sum_{j<m} 1/(x+j)
    let m = thr.sub(x, bits).to_bigint().to_i64().unwrap_or(0) + 1;
    let mut corr = Real::zero(bits);
    for j in 0..m {
        corr = corr.add(&x.add(&Real::from_i64(j, bits), bits).recip(bits), bits);
    }
    let z = x.add(&Real::from_i64(m, bits), bits);
    Ok(digamma_asymptotic(&z, digits)?.sub(&corr, bits))
}

/// Trigamma asymptotic: psi'(z) = 1/z + 1/(2z^2) + sum B_2n / z^(2n+1)
fn trigamma_asymptotic(z: &Real, digits: usize) -> Result<Real> {
    let bits = work_bits(digits);
    let zinv = z.recip(bits);
    let z2inv = zinv.mul(&zinv, bits);
    let half = Real::parse("0.5", bits);
    let mut acc = zinv.add(&half.mul(&z2inv, bits), bits);
    let mut pw = z2inv.mul(&zinv, bits); // z^{-(2n+1)} for n = 1
    let eps = Real::parse(&format!("1e-{}", digits + 8), bits);
    let mut prev_mag: Option<Real> = None;
    for n in 1..2000usize {
        let term = Real::from_rational(&bernoulli(2 * n), work_bits(digits)).mul(&pw, bits);
        let mag = term.abs();
        if let Some(p) = &prev_mag {
            if mag >= *p {
                if mag > eps {
                    return Err(Error::Internal(format!(
                        "trigamma series stalled for z = {z:?}"
                    )));
                }
                break;
            }
        }
        acc = acc.add(&term, bits);
        if mag < eps {
            break;
        }
        prev_mag = Some(mag);
        pw = pw.mul(&z2inv, bits);
    }
    Ok(acc)
}

/// psi'(x), the trigamma function, for real x away from the poles.
pub fn trigamma(x: &Real, digits: usize) -> Result<Real> {
    let bits = work_bits(digits);
    if x.is_integer() && !x.is_positive() {
        return Err(Error::GammaPole(format!("{x:?}")));
    }
    if x.is_negative() {
        // psi'(x) = -psi'(1-x) + pi^2 / sin^2(pi x)
        let one = Real::one(bits);
        let p = trigamma(&one.sub(x, bits), digits)?;
        let s = sin_pi(x, digits);
        let pi2 = Real::pi(bits).powi(2, bits);
        return Ok(pi2.div(&s.mul(&s, bits), bits).sub(&p, bits));
    }
    let thr = Real::from_i64(stirling_threshold(digits), bits);
    if x >= &thr {
        return trigamma_asymptotic(x, digits);
    }
    // psi'(x) = psi'(x+m) + sum_{j<m} 1/(x+j)^2
    let m = thr.sub(x, bits).to_bigint().to_i64().unwrap_or(0) + 1;
    let mut corr = Real::zero(bits);
    for j in 0..m {
        let t = x.add(&Real::from_i64(j, bits), bits);
        corr = corr.add(&t.mul(&t, bits).recip(bits), bits);
    }
    let z = x.add(&Real::from_i64(m, bits), bits);
    Ok(trigamma_asymptotic(&z, digits)?.add(&corr, bits))
}

/// Pochhammer symbol (x)_n for integer n (negative n handled by
/// (x)_(-n) = 1 / (x-n)_n).
pub fn pochhammer(x: &Real, n: i64, digits: usize) -> Result<Real> {
    let bits = work_bits(digits);
    if n >= 0 {
        let mut prod = Real::one(bits);
        for j in 0..n {
            prod = prod.mul(&x.add(&Real::from_i64(j, bits), bits), bits);
        }
        Ok(prod)
    } else {
        let m = -n;
        let mut prod = Real::one(bits);
        for j in 1..=m {
            prod = prod.mul(&x.sub(&Real::from_i64(j, bits), bits), bits);
        }
        if prod.is_zero() {
            return Err(Error::DivisionByZero(format!("({x:?})_{n}")));
        }
        Ok(prod.recip(bits))
    }
}

/// Exact Pochhammer over rationals, integer n >= 0.
pub fn pochhammer_exact(x: &BigRational, n: u64) -> BigRational {
    let mut prod = BigRational::one();
    let mut t = x.clone();
    let one = BigRational::one();
    for _ in 0..n {
        prod *= &t;
        t += &one;
    }
    prod
}
