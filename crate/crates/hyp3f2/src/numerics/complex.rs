//! Arbitrary-precision complex arithmetic and complex-argument gamma family.
//!
//! Rectangular representation over [`Real`]. The gamma functions use the same
//! Stirling-plus-shift scheme as the real versions, with the shift applied to
//! the real part; arguments on the nonpositive real axis at integers are pole
//! errors.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::numerics::bernoulli::bernoulli;
use crate::numerics::real::{digits_to_bits, Real};

/// Complex number with arbitrary-precision parts.
#[derive(Clone, Debug)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Self {
        Complex { re, im }
    }

    pub fn from_real(re: Real, bits: usize) -> Self {
        Complex { re, im: Real::zero(bits) }
    }

    pub fn zero(bits: usize) -> Self {
        Complex { re: Real::zero(bits), im: Real::zero(bits) }
    }

    pub fn one(bits: usize) -> Self {
        Complex { re: Real::one(bits), im: Real::zero(bits) }
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn add(&self, rhs: &Self, bits: usize) -> Self {
        Complex::new(self.re.add(&rhs.re, bits), self.im.add(&rhs.im, bits))
    }

    pub fn sub(&self, rhs: &Self, bits: usize) -> Self {
        Complex::new(self.re.sub(&rhs.re, bits), self.im.sub(&rhs.im, bits))
    }

    pub fn mul(&self, rhs: &Self, bits: usize) -> Self {
        let re = self.re.mul(&rhs.re, bits).sub(&self.im.mul(&rhs.im, bits), bits);
        let im = self.re.mul(&rhs.im, bits).add(&self.im.mul(&rhs.re, bits), bits);
        Complex::new(re, im)
    }

    pub fn div(&self, rhs: &Self, bits: usize) -> Self {
        let d = rhs.re.mul(&rhs.re, bits).add(&rhs.im.mul(&rhs.im, bits), bits);
        let re = self.re.mul(&rhs.re, bits).add(&self.im.mul(&rhs.im, bits), bits);
        let im = self.im.mul(&rhs.re, bits).sub(&self.re.mul(&rhs.im, bits), bits);
        Complex::new(re.div(&d, bits), im.div(&d, bits))
    }

    pub fn neg(&self) -> Self {
        Complex::new(self.re.neg(), self.im.neg())
    }

    pub fn abs(&self, bits: usize) -> Real {
        self.re
            .mul(&self.re, bits)
            .add(&self.im.mul(&self.im, bits), bits)
            .sqrt(bits)
    }

    /// Principal argument in (-pi, pi].
    pub fn arg(&self, bits: usize) -> Real {
        let pi = Real::pi(bits);
        if self.re.is_zero() && self.im.is_zero() {
            return Real::zero(bits);
        }
        if self.re.is_positive() {
            return atan(&self.im.div(&self.re, bits), bits);
        }
        if self.re.is_zero() {
            let half_pi = pi.div(&Real::from_i64(2, bits), bits);
            return if self.im.is_positive() { half_pi } else { half_pi.neg() };
        }
        // re < 0
        let base = atan(&self.im.div(&self.re, bits), bits);
        if self.im.is_negative() {
            base.sub(&pi, bits)
        } else {
            base.add(&pi, bits)
        }
    }

    /// Principal natural logarithm.
    pub fn ln(&self, bits: usize) -> Self {
        Complex::new(self.abs(bits).ln(bits), self.arg(bits))
    }

    pub fn exp(&self, bits: usize) -> Self {
        let m = self.re.exp(bits);
        Complex::new(m.mul(&self.im.cos(bits), bits), m.mul(&self.im.sin(bits), bits))
    }

    /// Principal square root.
    pub fn sqrt(&self, bits: usize) -> Self {
        if self.im.is_zero() {
            if self.re.is_negative() {
                return Complex::new(Real::zero(bits), self.re.neg().sqrt(bits));
            }
            return Complex::from_real(self.re.sqrt(bits), bits);
        }
        let half = Real::parse("0.5", bits);
        let half_ln = self.ln(bits);
        Complex::new(half_ln.re.mul(&half, bits), half_ln.im.mul(&half, bits)).exp(bits)
    }

    /// sin(pi z) via sin/cos with hyperbolic parts.
    pub fn sin_pi(&self, bits: usize) -> Self {
        let pi = Real::pi(bits);
        // exact reduction of the real part keeps accuracy for large re
        let n = self.re.round_to_int();
        let r = self.re.sub(&Real::from_bigint(&n, bits), bits);
        let x = pi.mul(&r, bits);
        let y = pi.mul(&self.im, bits);
        let (ch, sh) = cosh_sinh(&y, bits);
        let mut v = Complex::new(x.sin(bits).mul(&ch, bits), x.cos(bits).mul(&sh, bits));
        if (&n % BigInt::from(2)).abs() == BigInt::from(1) {
            v = v.neg();
        }
        v
    }
}

fn atan(x: &Real, bits: usize) -> Real {
    // atan via asin-style identity using available primitives:
    // atan(x) = sgn(x) * acos-free formulation: use series through sin/cos is
    // overkill; use atan(x) = arg on astro directly is unavailable here, so
    // reuse: atan(x) = asin(x / sqrt(1+x^2)); asin(t) computed by Newton on
    // sin at this precision would be slow, so use the identity
    // atan(x) = sgn * (pi/2 - atan(1/|x|)) for |x| > 1 and the Taylor-friendly
    // double-argument reduction otherwise.
    atan_impl(x, bits, 0)
}

fn atan_impl(x: &Real, bits: usize, depth: usize) -> Real {
    let one = Real::one(bits);
    let ax = x.abs();
    if ax.is_zero() {
        return Real::zero(bits);
    }
    if ax > one {
        let pi2 = Real::pi(bits).div(&Real::from_i64(2, bits), bits);
        let inner = atan_impl(&x.recip(bits).abs(), bits, depth);
        let v = pi2.sub(&inner, bits);
        return if x.is_negative() { v.neg() } else { v };
    }
    // reduce until small: atan(x) = 2 atan(x / (1 + sqrt(1+x^2)))
    let thr = Real::parse("0.05", bits);
    if ax > thr && depth < 64 {
        let t = x.div(&one.add(&one.add(&x.mul(x, bits), bits).sqrt(bits), bits), bits);
        return Real::from_i64(2, bits).mul(&atan_impl(&t, bits, depth + 1), bits);
    }
    // Taylor: atan(x) = sum (-1)^k x^(2k+1) / (2k+1)
    let x2 = x.mul(x, bits);
    let mut term = x.clone();
    let mut acc = x.clone();
    let eps_exp = (bits as f64 * 0.30103) as usize + 4;
    let eps = Real::parse(&format!("1e-{eps_exp}"), bits);
    let mut k = 1i64;
    loop {
        term = term.mul(&x2, bits).neg();
        let add = term.div(&Real::from_i64(2 * k + 1, bits), bits);
        acc = acc.add(&add, bits);
        if add.abs() < eps {
            break;
        }
        k += 1;
        if k > 1_000_000 {
            break;
        }
    }
    acc
}

fn cosh_sinh(y: &Real, bits: usize) -> (Real, Real) {
    let e = y.exp(bits);
    let ei = e.recip(bits);
    let half = Real::parse("0.5", bits);
    (
        e.add(&ei, bits).mul(&half, bits),
        e.sub(&ei, bits).mul(&half, bits),
    )
}

fn work_bits(digits: usize) -> usize {
    digits_to_bits(digits + 15)
}

fn stirling_threshold(digits: usize) -> i64 {
    ((digits as f64) * 0.4).ceil() as i64 + 8
}

/// Principal branch of ln Gamma(z) for complex z with Re(z) > 0 after shift;
/// arguments at nonpositive real integers are pole errors.
pub fn log_gamma_complex(z: &Complex, digits: usize) -> Result<Complex> {
    let bits = work_bits(digits);
    if z.im.is_zero() && z.re.is_integer() && !z.re.is_positive() {
        return Err(Error::GammaPole(format!("{:?}", z.re)));
    }
    let thr = Real::from_i64(stirling_threshold(digits), bits);
    if z.re >= thr {
        return stirling_log_gamma_complex(z, digits);
    }
    let m = thr
        .sub(&z.re, bits)
        .to_bigint()
        .to_i64()
        .unwrap_or(0)
        + 1;
    let mut prod = Complex::one(bits);
    for j in 0..m {
        prod = prod.mul(
            &z.add(&Complex::from_real(Real::from_i64(j, bits), bits), bits),
            bits,
        );
    }
    let zm = z.add(&Complex::from_real(Real::from_i64(m, bits), bits), bits);
    let lg = stirling_log_gamma_complex(&zm, digits)?;
    Ok(lg.sub(&prod.ln(bits), bits))
}

fn stirling_log_gamma_complex(z: &Complex, digits: usize) -> Result<Complex> {
    let bits = work_bits(digits);
    let half = Complex::from_real(Real::parse("0.5", bits), bits);
    let lnz = z.ln(bits);
    let mut acc = z.sub(&half, bits).mul(&lnz, bits).sub(z, bits);
    acc = acc.add(
        &Complex::from_real(Real::ln_2pi(bits).mul(&Real::parse("0.5", bits), bits), bits),
        bits,
    );
    let z2inv = Complex::one(bits).div(&z.mul(z, bits), bits);
    let mut pw = Complex::one(bits).div(z, bits);
    let eps = Real::parse(&format!("1e-{}", digits + 8), bits);
    let mut prev_mag: Option<Real> = None;
    for n in 1..2000usize {
        let coeff =
            bernoulli(2 * n) / BigRational::from(BigInt::from(2 * n) * BigInt::from(2 * n - 1));
        let term = pw.mul(
            &Complex::from_real(Real::from_rational(&coeff, bits), bits),
            bits,
        );
        let mag = term.abs(bits);
        if let Some(p) = &prev_mag {
            if mag >= *p {
                if mag > eps {
                    return Err(Error::Internal(
                        "complex stirling series stalled".into(),
                    ));
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

/// Gamma(z) for complex z (reflection for Re(z) <= 0).
pub fn gamma_complex(z: &Complex, digits: usize) -> Result<Complex> {
    let bits = work_bits(digits);
    if z.im.is_zero() && z.re.is_integer() && !z.re.is_positive() {
        return Err(Error::GammaPole(format!("{:?}", z.re)));
    }
    if z.re.is_positive() {
        return Ok(log_gamma_complex(z, digits)?.exp(bits));
    }
    // Gamma(z) = pi / (sin(pi z) Gamma(1-z))
    let one = Complex::one(bits);
    let g = gamma_complex(&one.sub(z, bits), digits)?;
    let s = z.sin_pi(bits);
    let pi = Complex::from_real(Real::pi(bits), bits);
    Ok(pi.div(&s.mul(&g, bits), bits))
}

/// psi(z) for complex z.
pub fn digamma_complex(z: &Complex, digits: usize) -> Result<Complex> {
    let bits = work_bits(digits);
    if z.im.is_zero() && z.re.is_integer() && !z.re.is_positive() {
        return Err(Error::GammaPole(format!("{:?}", z.re)));
    }
    let thr = Real::from_i64(stirling_threshold(digits), bits);
    if z.re >= thr {
        // psi(z) = ln z - 1/(2z) - sum B_2n/(2n z^(2n))
        let lnz = z.ln(bits);
        let mut acc = lnz.sub(
            &Complex::from_real(Real::parse("0.5", bits), bits).div(z, bits),
            bits,
        );
        let z2inv = Complex::one(bits).div(&z.mul(z, bits), bits);
        let mut pw = z2inv.clone();
        let eps = Real::parse(&format!("1e-{}", digits + 8), bits);
        let mut prev_mag: Option<Real> = None;
        for n in 1..2000usize {
            let coeff = bernoulli(2 * n) / BigRational::from(BigInt::from(2 * n));
            let term = pw.mul(
                &Complex::from_real(Real::from_rational(&coeff, bits), bits),
                bits,
            );
            let mag = term.abs(bits);
            if let Some(p) = &prev_mag {
                if mag >= *p {
                    if mag > eps {
                        return Err(Error::Internal("complex digamma stalled".into()));
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
        return Ok(acc);
    }
    let m = thr.sub(&z.re, bits).to_bigint().to_i64().unwrap_or(0) + 1;
    let mut corr = Complex::zero(bits);
    for j in 0..m {
        let t = z.add(&Complex::from_real(Real::from_i64(j, bits), bits), bits);
        corr = corr.add(&Complex::one(bits).div(&t, bits), bits);
    }
    let zm = z.add(&Complex::from_real(Real::from_i64(m, bits), bits), bits);
    Ok(digamma_complex(&zm, digits)?.sub(&corr, bits))
}
