//! Arbitrary-precision real numbers.
//!
//! Thin wrapper around a binary big-float with explicit precision control.
//! Every value carries its own mantissa length; binary operators work at the
//! larger of the two operand precisions with round-to-even. Precision is
//! specified in decimal digits at the public API and converted to bits
//! internally with guard room.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::fmt;

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

/// Convert a decimal-digit count to a bit count with guard bits.
pub fn digits_to_bits(digits: usize) -> usize {
    // log2(10) = 3.3219...; 64 guard bits absorb rounding in long chains.
    digits * 3322 / 1000 + 64
}

/// Arbitrary-precision real number.
#[derive(Clone)]
pub struct Real(BigFloat);

impl Real {
    /// Zero at the given bit precision.
    pub fn zero(bits: usize) -> Self {
        Real(BigFloat::from_i64(0, bits))
    }

    /// One at the given bit precision.
    pub fn one(bits: usize) -> Self {
        Real(BigFloat::from_i64(1, bits))
    }

    pub fn from_i64(v: i64, bits: usize) -> Self {
        Real(BigFloat::from_i64(v, bits))
    }

    pub fn from_f64(v: f64, bits: usize) -> Self {
        Real(BigFloat::from_f64(v, bits))
    }

    /// Exact conversion from a big integer (precision grows to fit).
    pub fn from_bigint(v: &BigInt, bits: usize) -> Self {
        let need = v.bits() as usize + 32;
        let p = bits.max(need);
        let s = v.to_string();
        Real(CONSTS.with(|cc| BigFloat::parse(&s, Radix::Dec, p, RM, &mut cc.borrow_mut())))
    }

    /// Rounded conversion from an exact rational.
    pub fn from_rational(v: &BigRational, bits: usize) -> Self {
        let n = Self::from_bigint(v.numer(), bits);
        let d = Self::from_bigint(v.denom(), bits);
        n.div(&d, bits)
    }

    /// Parse a decimal string at the given bit precision.
    pub fn parse(s: &str, bits: usize) -> Self {
        Real(CONSTS.with(|cc| BigFloat::parse(s, Radix::Dec, bits, RM, &mut cc.borrow_mut())))
    }

    /// pi at the given bit precision.
    pub fn pi(bits: usize) -> Self {
        Real(CONSTS.with(|cc| cc.borrow_mut().pi(bits, RM)))
    }

    /// ln(2*pi) at the given bit precision.
    pub fn ln_2pi(bits: usize) -> Self {
        let two_pi = Self::pi(bits).mul(&Self::from_i64(2, bits), bits);
        two_pi.ln(bits)
    }

    pub fn bits(&self) -> usize {
        self.0.mantissa_max_bit_len().unwrap_or(64)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive() && !self.0.is_zero()
    }

    pub fn is_nan(&self) -> bool {
        self.0.is_nan()
    }

    /// True when the value is an exact integer.
    pub fn is_integer(&self) -> bool {
        self.0.is_int()
    }

    pub fn add(&self, rhs: &Self, bits: usize) -> Self {
        Real(self.0.add(&rhs.0, bits, RM))
    }

    pub fn sub(&self, rhs: &Self, bits: usize) -> Self {
        Real(self.0.sub(&rhs.0, bits, RM))
    }

    pub fn mul(&self, rhs: &Self, bits: usize) -> Self {
        Real(self.0.mul(&rhs.0, bits, RM))
    }

    pub fn div(&self, rhs: &Self, bits: usize) -> Self {
        Real(self.0.div(&rhs.0, bits, RM))
    }

    pub fn neg(&self) -> Self {
        Real(self.0.neg())
    }

    pub fn abs(&self) -> Self {
        let mut v = self.0.clone();
        v.set_sign(Sign::Pos);
        Real(v)
    }

    pub fn recip(&self, bits: usize) -> Self {
        Real(self.0.reciprocal(bits, RM))
    }

    pub fn sqrt(&self, bits: usize) -> Self {
        Real(self.0.sqrt(bits, RM))
    }

    pub fn exp(&self, bits: usize) -> Self {
        Real(CONSTS.with(|cc| self.0.exp(bits, RM, &mut cc.borrow_mut())))
    }

    pub fn ln(&self, bits: usize) -> Self {
        Real(CONSTS.with(|cc| self.0.ln(bits, RM, &mut cc.borrow_mut())))
    }

    pub fn sin(&self, bits: usize) -> Self {
        Real(CONSTS.with(|cc| self.0.sin(bits, RM, &mut cc.borrow_mut())))
    }

    pub fn cos(&self, bits: usize) -> Self {
        Real(CONSTS.with(|cc| self.0.cos(bits, RM, &mut cc.borrow_mut())))
    }

    /// self^n for signed integer n.
    pub fn powi(&self, n: i64, bits: usize) -> Self {
        if n >= 0 {
            Real(self.0.powi(n as usize, bits, RM))
        } else {
            Real(self.0.powi((-n) as usize, bits, RM).reciprocal(bits, RM))
        }
    }

    /// self^y for real y (self must be positive).
    pub fn pow(&self, y: &Self, bits: usize) -> Self {
        Real(CONSTS.with(|cc| self.0.pow(&y.0, bits, RM, &mut cc.borrow_mut())))
    }

    /// Nearest integer, ties away from zero.
    pub fn round_to_int(&self) -> BigInt {
        let bits = self.bits().max(96);
        let half = Real::from_rational(&BigRational::new(BigInt::from(1), BigInt::from(2)), 96);
        let rounded = if self.is_negative() {
            Real(self.sub(&half, bits).0.ceil())
        } else {
            Real(self.add(&half, bits).0.floor())
        };
        rounded.to_bigint()
    }

    /// Truncate toward zero to a big integer. Value must be finite.
    pub fn to_bigint(&self) -> BigInt {
        let i = Real(self.0.int());
        if i.is_zero() {
            return BigInt::zero();
        }
        // Format as decimal and strip the mantissa/exponent notation.
        let s = i.to_decimal(i.bits() * 301 / 1000 + 4);
        parse_decimal_to_bigint(&s)
    }

    pub fn to_f64(&self) -> f64 {
        let s = self.to_decimal(19);
        s.parse::<f64>().unwrap_or(f64::NAN)
    }

    /// Compare, returning None when either side is NaN.
    pub fn partial_cmp_val(&self, rhs: &Self) -> Option<Ordering> {
        self.0.cmp(&rhs.0).map(|v| v.cmp(&0))
    }

    /// Decimal string with the requested number of significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        if self.0.is_nan() {
            return "NaN".into();
        }
        if self.0.is_zero() {
            return "0".into();
        }
        let mut v = self.0.clone();
        let want = digits_to_bits(digits).min(self.bits());
        let _ = v.set_precision(want, RM);
        let s = CONSTS.with(|cc| {
            v.format(Radix::Dec, RM, &mut cc.borrow_mut())
                .unwrap_or_else(|_| "NaN".into())
        });
        trim_decimal(&s, digits)
    }

    /// Magnitude order: floor(log10(|self|)), or None for zero/NaN.
    pub fn log10_magnitude(&self) -> Option<i64> {
        if self.0.is_zero() || self.0.is_nan() {
            return None;
        }
        // binary exponent e means |x| in [2^(e-1), 2^e)
        let e = self.0.exponent()? as i64;
        Some(((e - 1) as f64 * 0.30102999566398114).floor() as i64)
    }
}

/// `s` is astro-float scientific notation like `-1.2345e+10`; cut mantissa to
/// `digits` significant digits without rounding drama (display only).
fn trim_decimal(s: &str, digits: usize) -> String {
    if let Some(epos) = s.find(['e', 'E']) {
        let (mant, exp) = s.split_at(epos);
        let mut count = 0usize;
        let mut out = String::new();
        for ch in mant.chars() {
            if ch.is_ascii_digit() {
                if count >= digits {
                    continue;
                }
                count += 1;
            }
            out.push(ch);
        }
        // strip trailing zeros of the mantissa fraction
        if out.contains('.') {
            while out.ends_with('0') {
                out.pop();
            }
            if out.ends_with('.') {
                out.pop();
            }
        }
        format!("{}{}", out, exp)
    } else {
        s.to_string()
    }
}

/// Parse scientific-notation decimal (integer-valued) into a BigInt.
fn parse_decimal_to_bigint(s: &str) -> BigInt {
    let s = s.trim();
    let (mant, exp10) = match s.find(['e', 'E']) {
        Some(p) => {
            let (m, e) = s.split_at(p);
            (m, e[1..].parse::<i64>().unwrap_or(0))
        }
        None => (s, 0),
    };
    let neg = mant.starts_with('-');
    let mant = mant.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = match mant.find('.') {
        Some(p) => (&mant[..p], &mant[p + 1..]),
        None => (mant, ""),
    };
    let mut digits: String = String::from(int_part);
    digits.push_str(frac_part);
    let point_shift = exp10 - frac_part.len() as i64;
    let mut v: BigInt = digits.parse().unwrap_or_else(|_| BigInt::zero());
    if point_shift >= 0 {
        v *= BigInt::from(10u32).pow(point_shift as u32);
    } else {
        let d = BigInt::from(10u32).pow((-point_shift) as u32);
        v /= d;
    }
    if neg {
        -v
    } else {
        v
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(24))
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_decimal(32))
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp_val(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.partial_cmp_val(other)
    }
}

/// Relative error |a-b| / max(|b|, 1), as a Real at working precision.
pub fn rel_err(a: &Real, b: &Real, bits: usize) -> Real {
    let diff = a.sub(b, bits).abs();
    let scale = b.abs();
    let one = Real::one(bits);
    let denom = if scale.partial_cmp_val(&one) == Some(Ordering::Greater) {
        scale
    } else {
        one
    };
    diff.div(&denom, bits)
}

/// True when |a-b| <= tol * max(|b|, 1).
pub fn close_enough(a: &Real, b: &Real, tol: &Real, bits: usize) -> bool {
    let e = rel_err(a, b, bits);
    matches!(
        e.partial_cmp_val(tol),
        Some(Ordering::Less) | Some(Ordering::Equal)
    )
}

/// Convenience: is the rational an integer <= 0 (a gamma pole)?
pub fn is_nonpositive_integer(q: &BigRational) -> bool {
    q.is_integer() && !q.numer().is_positive()
}

/// Convenience: rational to i64 when it is a small integer.
pub fn rational_to_i64(q: &BigRational) -> Option<i64> {
    if q.is_integer() {
        q.numer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn pi_digits_match_reference() {
        let bits = digits_to_bits(60);
        let pi = Real::pi(bits);
        let s = pi.to_decimal(50);
        assert!(
            s.starts_with("3.141592653589793238462643383279502884197169399375"),
            "pi = {s}"
        );
    }

    #[test]
    fn rational_round_trip() {
        let bits = digits_to_bits(40);
        let q = BigRational::new(BigInt::from(-355), BigInt::from(113));
        let r = Real::from_rational(&q, bits);
        assert!(r.to_f64() + 3.1415929203539825 < 1e-12);
        assert!(r.is_negative());
    }

    #[test]
    fn bigint_round_trip() {
        let v: BigInt = "123456789012345678901234567890".parse().unwrap();
        let r = Real::from_bigint(&v, 64);
        assert_eq!(r.to_bigint(), v);
        let n = Real::from_i64(-42, 64);
        assert_eq!(n.round_to_int(), BigInt::from(-42));
    }

    #[test]
    fn arithmetic_and_comparison() {
        let bits = digits_to_bits(50);
        let a = Real::from_i64(2, bits).sqrt(bits);
        let b = a.mul(&a, bits);
        let two = Real::from_i64(2, bits);
        let tol = Real::parse("1e-45", bits);
        assert!(close_enough(&b, &two, &tol, bits));
        assert!(a < two);
        assert!(two > a);
    }

    #[test]
    fn round_to_int_ties() {
        let bits = 128;
        assert_eq!(
            Real::from_f64(2.5, bits).round_to_int(),
            BigInt::from(3)
        );
        assert_eq!(
            Real::from_f64(-2.5, bits).round_to_int(),
            BigInt::from(-3)
        );
        assert_eq!(Real::from_f64(2.49, bits).round_to_int(), BigInt::from(2));
    }

    #[test]
    fn nonpositive_integer_detection() {
        assert!(is_nonpositive_integer(&BigRational::from(BigInt::from(0))));
        assert!(is_nonpositive_integer(&BigRational::from(BigInt::from(-7))));
        assert!(!is_nonpositive_integer(&BigRational::from(BigInt::one())));
        assert!(!is_nonpositive_integer(&BigRational::new(
            BigInt::from(-1),
            BigInt::from(2)
        )));
    }
}
