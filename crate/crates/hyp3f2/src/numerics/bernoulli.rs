//! Exact Bernoulli numbers and Bernoulli polynomials.
//!
//! Uses the binomial recurrence B_m = -1/(m+1) * sum_{k<m} C(m+1,k) B_k
//! over exact rationals, with a process-wide cache. Convention: B_1 = -1/2.

use std::sync::Mutex;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

static CACHE: OnceLock<Mutex<Vec<BigRational>>> = OnceLock::new();

fn cache() -> &'static Mutex<Vec<BigRational>> {
    CACHE.get_or_init(|| {
        Mutex::new(vec![
            BigRational::one(),
            BigRational::new(BigInt::from(-1), BigInt::from(2)),
        ])
    })
}

/// Bernoulli number B_n as an exact rational.
pub fn bernoulli(n: usize) -> BigRational {
    let mut tab = cache().lock().unwrap();
    while tab.len() <= n {
        let m = tab.len();
        if m % 2 == 1 {
            tab.push(BigRational::zero());
            continue;
        }
        // C(m+1, k) built incrementally.
        let mut binom = BigInt::one();
        let mut acc = BigRational::zero();
        for (k, b) in tab.iter().enumerate() {
            if !b.is_zero() {
                acc += BigRational::from(binom.clone()) * b;
            }
            // C(m+1, k+1) = C(m+1, k) * (m+1-k) / (k+1)
            binom = binom * BigInt::from(m + 1 - k) / BigInt::from(k + 1);
        }
        let coeff = BigRational::new(BigInt::from(-1), BigInt::from(m + 1));
        tab.push(coeff * acc);
    }
    tab[n].clone()
}

/// Bernoulli polynomial B_n(x) at an exact rational point.
pub fn bernoulli_poly(n: usize, x: &BigRational) -> BigRational {
    // B_n(x) = sum_k C(n,k) B_k x^(n-k)
    let mut binom = BigInt::one();
    let mut xpow = vec![BigRational::one(); n + 1];
    for i in 1..=n {
        xpow[i] = &xpow[i - 1] * x;
    }
    let mut acc = BigRational::zero();
    for k in 0..=n {
        let b = bernoulli(k);
        if !b.is_zero() {
            acc += BigRational::from(binom.clone()) * b * &xpow[n - k];
        }
        if k < n {
            binom = binom * BigInt::from(n - k) / BigInt::from(k + 1);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn known_bernoulli_numbers() {
        assert_eq!(bernoulli(0), q(1, 1));
        assert_eq!(bernoulli(1), q(-1, 2));
        assert_eq!(bernoulli(2), q(1, 6));
        assert_eq!(bernoulli(3), q(0, 1));
        assert_eq!(bernoulli(4), q(-1, 30));
        assert_eq!(bernoulli(6), q(1, 42));
        assert_eq!(bernoulli(8), q(-1, 30));
        assert_eq!(bernoulli(10), q(5, 66));
        assert_eq!(bernoulli(12), q(-691, 2730));
        assert_eq!(bernoulli(20), q(-174611, 330));
    }

    #[test]
    fn bernoulli_poly_values() {
        // B_2(x) = x^2 - x + 1/6
        assert_eq!(bernoulli_poly(2, &q(1, 2)), q(-1, 12));
        // B_3(x) = x^3 - 3/2 x^2 + 1/2 x
        assert_eq!(bernoulli_poly(3, &q(1, 3)), q(1, 27) - q(1, 6) + q(1, 6));
        // B_n(0) = B_n
        assert_eq!(bernoulli_poly(12, &q(0, 1)), bernoulli(12));
        // B_n(1) = B_n for n != 1
        assert_eq!(bernoulli_poly(8, &q(1, 1)), bernoulli(8));
        // B_n(1/2) = (2^(1-n) - 1) B_n
        let n = 6;
        let expect = (q(1, 32) - q(1, 1)) * bernoulli(n);
        assert_eq!(bernoulli_poly(n, &q(1, 2)), expect);
    }
}
