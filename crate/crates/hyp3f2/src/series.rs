//! Numeric evaluation of pFq at unit argument.
//!
//! Provides:
//! - exact rational summation for terminating series
//! - direct summation with a Hurwitz-zeta regulated tail for the
//!   nonterminating case, which doubles as the analytic continuation in
//!   the parameters when the excess is negative but not an integer
//! - a concrete boost step for 3F2 that first moves to the orbit image
//!   with the largest excess, trading slow convergence for a gamma
//!   prefactor
//! - an admissible-parameter sampler for randomized checks
//!
//! The tail machinery writes the term ratio asymptotically as
//! `t(k) = A k^(-1-x) exp(sum_r g_r k^(-r))` with `x` the excess and the
//! `g_r` exact rationals built from Bernoulli polynomials of the
//! parameters; composing the exponential gives tail coefficients `c_m`,
//! and the tail becomes `A sum_m c_m zeta(1+x+m, K)` after `K` directly
//! summed terms.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::bernoulli::bernoulli_poly;
use crate::numerics::real::{digits_to_bits, Real};
use crate::numerics::{gamma, hurwitz_zeta, is_nonpositive_integer};

/// How a value was obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    /// Finite sum, exact over the rationals.
    Terminating,
    /// Head summation plus zeta-regulated tail.
    Direct { head_len: u64, tail_terms: usize },
    /// A Thomae image with larger excess was evaluated instead.
    Boosted { via: &'static str },
}

/// Evaluation result with diagnostics.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: Real,
    /// Present when the value is exact over the rationals.
    pub exact: Option<BigRational>,
    pub strategy: Strategy,
    /// Magnitude of the last tail term, a conservative truncation bound.
    pub tail_bound: Option<Real>,
}

fn q_int(v: i64) -> BigRational {
    BigRational::from(BigInt::from(v))
}

fn rat_f64(q: &BigRational) -> f64 {
    let n = q.numer().to_f64().unwrap_or(if q.numer().is_negative() {
        f64::MIN
    } else {
        f64::MAX
    });
    let d = q.denom().to_f64().unwrap_or(f64::MAX);
    n / d
}

/// Parametric excess: bottom sum minus top sum.
pub fn excess(tops: &[BigRational], bots: &[BigRational]) -> BigRational {
    let t: BigRational = tops.iter().cloned().sum();
    let b: BigRational = bots.iter().cloned().sum();
    b - t
}

/// Index of the last nonzero term when a top parameter is a nonpositive
/// integer; `None` for nonterminating series.
pub fn terminating_index(tops: &[BigRational]) -> Option<u64> {
    tops.iter()
        .filter(|t| is_nonpositive_integer(t))
        .map(|t| (-t.numer().clone()).to_u64().unwrap_or(u64::MAX))
        .min()
}

/// The ten excesses across the Thomae orbit classes of a 3F2: for
/// parameters (a, b, c; f, e) these are s, a, b, c, and the six
/// bottom-minus-top differences.
pub fn orbit_excesses(tops: &[BigRational], bots: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![excess(tops, bots)];
    out.extend(tops.iter().cloned());
    for b in bots {
        for t in tops {
            out.push(b - t);
        }
    }
    out
}

/// Cancel identical top/bottom parameter pairs (lowering the order).
fn reduce_params(tops: &[BigRational], bots: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    let mut bots_left: Vec<Option<BigRational>> = bots.iter().cloned().map(Some).collect();
    let mut tops_out = Vec::new();
    'top: for t in tops {
        for slot in bots_left.iter_mut() {
            if slot.as_ref() == Some(t) {
                *slot = None;
                continue 'top;
            }
        }
        tops_out.push(t.clone());
    }
    (tops_out, bots_left.into_iter().flatten().collect())
}

/// Reject series whose bottom parameters hit a pole before termination.
fn bottom_pole_check(tops: &[BigRational], bots: &[BigRational]) -> Result<()> {
    let n = terminating_index(tops);
    for b in bots {
        if is_nonpositive_integer(b) {
            let m = (-b.numer().clone()).to_u64().unwrap_or(u64::MAX);
            let ok = matches!(n, Some(n) if n <= m);
            if !ok {
                return Err(Error::BottomPole(m as usize));
            }
        }
    }
    Ok(())
}

/// Exact sum of a terminating series.
pub fn pfq_exact(tops: &[BigRational], bots: &[BigRational]) -> Result<BigRational> {
    let (tops, bots) = reduce_params(tops, bots);
    bottom_pole_check(&tops, &bots)?;
    let n = terminating_index(&tops).ok_or_else(|| {
        Error::Internal("exact summation needs a terminating series".into())
    })?;
    if n > 3000 {
        return Err(Error::Internal(format!(
            "terminating index {n} too large for exact summation"
        )));
    }
    let mut term = BigRational::one();
    let mut acc = BigRational::one();
    for k in 0..n {
        let kq = q_int(k as i64);
        let mut factor = BigRational::one();
        for t in &tops {
            factor *= t + &kq;
        }
        for b in &bots {
            factor /= b + &kq;
        }
        factor /= &kq + BigRational::one();
        term *= factor;
        acc += &term;
    }
    Ok(acc)
}

/// Evaluate pFq(1) to roughly `digits` significant digits.
pub fn pfq(tops: &[BigRational], bots: &[BigRational], digits: usize) -> Result<Evaluation> {
    pfq_opts(tops, bots, digits, true)
}

/// Convenience wrapper returning only the value.
pub fn pfq_value(tops: &[BigRational], bots: &[BigRational], digits: usize) -> Result<Real> {
    Ok(pfq(tops, bots, digits)?.value)
}

/// Evaluate with the boost step optionally disabled (used for
/// cross-checking the two strategies against each other).
pub fn pfq_opts(
    tops: &[BigRational],
    bots: &[BigRational],
    digits: usize,
    allow_boost: bool,
) -> Result<Evaluation> {
    let (tops, bots) = reduce_params(tops, bots);
    bottom_pole_check(&tops, &bots)?;

    if terminating_index(&tops).is_some() {
        let exact = pfq_exact(&tops, &bots)?;
        let bits = digits_to_bits(digits + 10);
        return Ok(Evaluation {
            value: Real::from_rational(&exact, bits),
            exact: Some(exact),
            strategy: Strategy::Terminating,
            tail_bound: None,
        });
    }

    if tops.len() != bots.len() + 1 {
        return Err(Error::Internal(format!(
            "nonterminating {}F{} at unit argument is unsupported",
            tops.len(),
            bots.len()
        )));
    }

    let x = excess(&tops, &bots);
    if is_nonpositive_integer(&x) {
        return Err(Error::DivergentSeries(format!(
            "excess {x} is a nonpositive integer"
        )));
    }

    let theta = BigRational::new(BigInt::from(1), BigInt::from(2));
    if allow_boost && tops.len() == 3 && x < theta {
        if let Some(tr) = best_boost(&tops, &bots) {
            let pre = tr.prefactor(digits)?;
            let inner = pfq_opts(&tr.tops, &tr.bots, digits, false)?;
            let bits = digits_to_bits(digits + 10);
            return Ok(Evaluation {
                value: pre.mul(&inner.value, bits),
                exact: None,
                strategy: Strategy::Boosted { via: tr.name },
                tail_bound: inner.tail_bound,
            });
        }
    }

    direct_sum(&tops, &bots, digits)
}

// ----------------------------------------------------------------------
// direct summation with zeta tail
// ----------------------------------------------------------------------

fn direct_sum(tops: &[BigRational], bots: &[BigRational], digits: usize) -> Result<Evaluation> {
    let x = excess(tops, bots);
    let xf = rat_f64(&x);
    let max_abs = tops
        .iter()
        .chain(bots.iter())
        .map(|p| rat_f64(p).abs())
        .fold(0.0f64, f64::max);

    let k0 = (2048u64).max(16 * (max_abs.ceil() as u64 + 1));
    let mut last_err: Option<Error> = None;
    for shift in 0..3 {
        let k = k0 << shift;
        // guard digits: cancellation between the head and the continued
        // tail scales like K^(-x) when the excess is negative
        let cancel = (-xf).max(0.0) * (k as f64).log10();
        let guard = 30 + cancel.ceil() as usize + (max_abs.ceil() as usize) / 2;
        match direct_sum_at(tops, bots, digits, digits + guard, k, &x) {
            Ok(ev) => return Ok(ev),
            Err(e @ Error::Internal(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Internal("direct summation failed".into())))
}

fn direct_sum_at(
    tops: &[BigRational],
    bots: &[BigRational],
    digits: usize,
    wdigits: usize,
    k_head: u64,
    x: &BigRational,
) -> Result<Evaluation> {
    let wbits = digits_to_bits(wdigits);
    let one = BigRational::one();

    // head: k = 0 .. K-1, keeping t_(K-1) and t_K for calibration
    let mut term = Real::one(wbits);
    let mut head = Real::zero(wbits);
    let mut t_prev = Real::one(wbits);
    for k in 0..k_head {
        head = head.add(&term, wbits);
        let kq = q_int(k as i64);
        let mut factor = BigRational::one();
        for t in tops {
            factor *= t + &kq;
        }
        for b in bots {
            factor /= b + &kq;
        }
        factor /= &kq + &one;
        t_prev = term.clone();
        term = term.mul(&Real::from_rational(&factor, wbits), wbits);
    }
    let t_k = term;

    // exact tail-series coefficients: each extra order gains roughly
    // log10(K / rho) digits, rho tracking the parameter magnitudes
    let rho = tops
        .iter()
        .chain(bots.iter())
        .map(|p| rat_f64(p).abs())
        .fold(2.0f64, f64::max)
        + 1.0;
    let gain = (k_head as f64).ln() - rho.ln();
    if gain < 1.0 {
        return Err(Error::Internal(format!(
            "head length {k_head} too short for parameter magnitude {rho}"
        )));
    }
    let m_count = ((wdigits as f64) * std::f64::consts::LN_10 / gain).ceil() as usize + 8;
    let m_count = m_count.min(200);
    let g = tail_log_coeffs(tops, bots, m_count);
    let c = exp_compose(&g, m_count);

    // calibration: A = t_K K^(1+x) / exp(g(1/K))
    let kq = q_int(k_head as i64);
    let g_at_k = eval_series_at_inverse(&g, &kq);
    let ln_k = Real::from_i64(k_head as i64, wbits).ln(wbits);
    let one_plus_x = Real::from_rational(&(&one + x), wbits);
    let a_cal = t_k.mul(
        &one_plus_x
            .mul(&ln_k, wbits)
            .sub(&Real::from_rational(&g_at_k, wbits), wbits)
            .exp(wbits),
        wbits,
    );

    // model honesty: the calibrated form must reproduce t_(K-1)
    {
        let km1 = q_int(k_head as i64 - 1);
        let g_at_km1 = eval_series_at_inverse(&g, &km1);
        let ln_km1 = Real::from_i64(k_head as i64 - 1, wbits).ln(wbits);
        let model = a_cal.mul(
            &Real::from_rational(&g_at_km1, wbits)
                .sub(&one_plus_x.mul(&ln_km1, wbits), wbits)
                .exp(wbits),
            wbits,
        );
        let err = crate::numerics::rel_err(&model, &t_prev, wbits);
        let tol = Real::from_f64(10.0, wbits).powi(-((digits + 3) as i64), wbits);
        if err.partial_cmp_val(&tol) == Some(std::cmp::Ordering::Greater) {
            return Err(Error::Internal(format!(
                "tail model check failed at K = {k_head}"
            )));
        }
    }

    // tail = A sum_m c_m zeta(1+x+m, K)
    let mut tail = Real::zero(wbits);
    let mut last_mag = Real::zero(wbits);
    let mut used = 0usize;
    let thr = head
        .abs()
        .add(&a_cal.abs(), wbits)
        .add(&Real::one(wbits), wbits)
        .mul(
            &Real::from_f64(10.0, wbits).powi(-((digits + 12) as i64), wbits),
            wbits,
        );
    let mut prev_mag: Option<Real> = None;
    let mut converged = false;
    for m in 0..c.len() {
        let s = &one + x + q_int(m as i64);
        let z = hurwitz_zeta(&s, k_head, wdigits)?;
        let t = Real::from_rational(&c[m], wbits).mul(&z, wbits).mul(&a_cal, wbits);
        tail = tail.add(&t, wbits);
        last_mag = t.abs();
        used = m + 1;
        if last_mag.partial_cmp_val(&thr) == Some(std::cmp::Ordering::Less) {
            converged = true;
            break;
        }
        if let Some(p) = &prev_mag {
            if m > 4 && last_mag.partial_cmp_val(p) == Some(std::cmp::Ordering::Greater) {
                // asymptotic series turned around before reaching the
                // target: retry with a longer head
                return Err(Error::Internal(format!(
                    "tail series diverged at order {m} for K = {k_head}"
                )));
            }
        }
        prev_mag = Some(last_mag.clone());
    }
    if !converged {
        return Err(Error::Internal(format!(
            "tail series did not reach tolerance within {} orders",
            c.len()
        )));
    }

    Ok(Evaluation {
        value: head.add(&tail, wbits),
        exact: None,
        strategy: Strategy::Direct { head_len: k_head, tail_terms: used },
        tail_bound: Some(last_mag),
    })
}

/// Coefficients g_r of log(t(k) k^(1+x) / A) = sum_r g_r k^(-r), exact:
/// g_r = (-1)^(r+1) G_r / (r (r+1)) with
/// G_r = sum_tops B_(r+1)(a) - sum_bots B_(r+1)(b) - B_(r+1)(1).
fn tail_log_coeffs(tops: &[BigRational], bots: &[BigRational], count: usize) -> Vec<BigRational> {
    let one = BigRational::one();
    let mut out = Vec::with_capacity(count);
    for r in 1..=count {
        let mut g = BigRational::zero();
        for t in tops {
            g += bernoulli_poly(r + 1, t);
        }
        for b in bots {
            g -= bernoulli_poly(r + 1, b);
        }
        g -= bernoulli_poly(r + 1, &one);
        let sign = if r % 2 == 1 { 1 } else { -1 };
        let denom = q_int((r * (r + 1)) as i64);
        out.push(q_int(sign) * g / denom);
    }
    out
}

/// c with c_0 = 1 and exp(sum_r g_r u^r) = sum_m c_m u^m.
fn exp_compose(g: &[BigRational], count: usize) -> Vec<BigRational> {
    let mut c = vec![BigRational::one()];
    for m in 1..=count {
        let mut acc = BigRational::zero();
        for r in 1..=m.min(g.len()) {
            acc += q_int(r as i64) * &g[r - 1] * &c[m - r];
        }
        c.push(acc / q_int(m as i64));
    }
    c
}

/// sum_r g_r k^(-r), exactly.
fn eval_series_at_inverse(g: &[BigRational], k: &BigRational) -> BigRational {
    let inv = BigRational::one() / k.clone();
    let mut acc = BigRational::zero();
    let mut p = BigRational::one();
    for gr in g {
        p *= &inv;
        acc += gr * &p;
    }
    acc
}

// ----------------------------------------------------------------------
// concrete boost transforms
// ----------------------------------------------------------------------

/// One Thomae image of a concrete 3F2 parameter tuple, with the gamma
/// prefactor carried as numerator/denominator argument lists.
#[derive(Clone, Debug)]
pub struct ConcreteTransform {
    pub name: &'static str,
    pub tops: Vec<BigRational>,
    pub bots: Vec<BigRational>,
    pub gamma_num: Vec<BigRational>,
    pub gamma_den: Vec<BigRational>,
}

impl ConcreteTransform {
    pub fn excess(&self) -> BigRational {
        excess(&self.tops, &self.bots)
    }

    /// Numeric prefactor; errors when a gamma argument is at a pole.
    pub fn prefactor(&self, digits: usize) -> Result<Real> {
        let bits = digits_to_bits(digits + 10);
        let mut acc = Real::one(bits);
        for gq in &self.gamma_num {
            acc = acc.mul(&gamma(&Real::from_rational(gq, bits), digits)?, bits);
        }
        for gq in &self.gamma_den {
            acc = acc.div(&gamma(&Real::from_rational(gq, bits), digits)?, bits);
        }
        Ok(acc)
    }

    fn usable(&self) -> bool {
        let args = self.gamma_num.iter().chain(self.gamma_den.iter());
        for a in args {
            if is_nonpositive_integer(a) {
                return false;
            }
        }
        if terminating_index(&self.tops).is_some() {
            return bottom_pole_check(&self.tops, &self.bots).is_ok();
        }
        !is_nonpositive_integer(&self.excess())
    }
}

/// The ten Thomae orbit-class images of concrete parameters
/// (tops = [a, b, c], bots = [f, e]), each as `F(orig) = pre * F(image)`.
pub fn thomae_images_concrete(
    tops: &[BigRational],
    bots: &[BigRational],
) -> Vec<ConcreteTransform> {
    assert_eq!(tops.len(), 3, "boost table is specific to 3F2");
    assert_eq!(bots.len(), 2, "boost table is specific to 3F2");
    let (a, b, c) = (&tops[0], &tops[1], &tops[2]);
    let (f, e) = (&bots[0], &bots[1]);
    let s = e + f - a - b - c;
    // recurring gamma arguments
    let u = e - b + (f - c); // e+f-b-c
    let v = e + f - a - c;
    let w = e - b + (f - a); // e+f-a-b
    let mk = |name: &'static str,
              tops: Vec<BigRational>,
              bots: Vec<BigRational>,
              num: Vec<BigRational>,
              den: Vec<BigRational>| ConcreteTransform {
        name,
        tops,
        bots,
        gamma_num: num,
        gamma_den: den,
    };
    vec![
        mk(
            "T1",
            vec![s.clone(), f - c, e - c],
            vec![u.clone(), v.clone()],
            vec![s.clone(), f.clone(), e.clone()],
            vec![c.clone(), u.clone(), v.clone()],
        ),
        mk(
            "T2",
            vec![s.clone(), f - b, e - b],
            vec![u.clone(), w.clone()],
            vec![s.clone(), f.clone(), e.clone()],
            vec![b.clone(), u.clone(), w.clone()],
        ),
        mk(
            "T3",
            vec![f - c, f - b, a.clone()],
            vec![u.clone(), f.clone()],
            vec![s.clone(), e.clone()],
            vec![e - a, u.clone()],
        ),
        mk(
            "T4",
            vec![e - c, e - b, a.clone()],
            vec![u.clone(), e.clone()],
            vec![s.clone(), f.clone()],
            vec![f - a, u.clone()],
        ),
        mk(
            "T5",
            vec![s.clone(), f - a, e - a],
            vec![v.clone(), w.clone()],
            vec![s.clone(), f.clone(), e.clone()],
            vec![a.clone(), v.clone(), w.clone()],
        ),
        mk(
            "T6",
            vec![f - c, f - a, b.clone()],
            vec![v.clone(), f.clone()],
            vec![s.clone(), e.clone()],
            vec![e - b, v.clone()],
        ),
        mk(
            "T7",
            vec![e - c, e - a, b.clone()],
            vec![v.clone(), e.clone()],
            vec![s.clone(), f.clone()],
            vec![f - b, v.clone()],
        ),
        mk(
            "T8",
            vec![f - b, f - a, c.clone()],
            vec![w.clone(), f.clone()],
            vec![s.clone(), e.clone()],
            vec![e - c, w.clone()],
        ),
        mk(
            "T9",
            vec![e - b, e - a, c.clone()],
            vec![w.clone(), e.clone()],
            vec![s.clone(), f.clone()],
            vec![f - c, w.clone()],
        ),
        mk(
            "T10",
            tops.to_vec(),
            bots.to_vec(),
            Vec::new(),
            Vec::new(),
        ),
    ]
}

/// The usable image with the largest excess, when it beats the original.
fn best_boost(tops: &[BigRational], bots: &[BigRational]) -> Option<ConcreteTransform> {
    let here = excess(tops, bots);
    thomae_images_concrete(tops, bots)
        .into_iter()
        .filter(|t| t.name != "T10" && t.usable() && t.excess() > here)
        .max_by(|p, q| p.excess().cmp(&q.excess()))
}

// ----------------------------------------------------------------------
// admissible sampling
// ----------------------------------------------------------------------

/// Draw random 3F2 parameters that every engine path can digest: all five
/// entries noninteger, every orbit excess noninteger, and the orbit-maximal
/// excess above one quarter.
pub fn sample_3f2<R: Rng>(rng: &mut R) -> (Vec<BigRational>, Vec<BigRational>) {
    let dens = [2i64, 3, 4, 5, 7, 9, 11];
    loop {
        let mut pick = |lo: f64, hi: f64| -> BigRational {
            let d = dens[rng.gen_range(0..dens.len())];
            let n_lo = (lo * d as f64).ceil() as i64;
            let n_hi = (hi * d as f64).floor() as i64;
            BigRational::new(BigInt::from(rng.gen_range(n_lo..=n_hi)), BigInt::from(d))
        };
        let tops = vec![pick(-2.0, 3.0), pick(-2.0, 3.0), pick(-2.0, 3.0)];
        let bots = vec![pick(0.25, 5.0), pick(0.25, 5.0)];
        if tops.iter().chain(bots.iter()).any(|p| p.is_integer()) {
            continue;
        }
        let orbit = orbit_excesses(&tops, &bots);
        if orbit.iter().any(|x| x.is_integer()) {
            continue;
        }
        let quarter = BigRational::new(BigInt::from(1), BigInt::from(4));
        if orbit.iter().max().expect("nonempty") <= &quarter {
            continue;
        }
        return (tops, bots);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const D: usize = 50;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn assert_close(a: &Real, b: &Real, digits: usize) {
        let bits = digits_to_bits(digits + 10);
        let err = crate::numerics::rel_err(a, b, bits);
        let tol = Real::from_f64(10.0, bits).powi(-(digits as i64), bits);
        assert!(
            err.partial_cmp_val(&tol) != Some(std::cmp::Ordering::Greater),
            "rel err {} exceeds 1e-{digits}",
            err.to_f64()
        );
    }

    /// Gauss value Gamma(c)Gamma(c-a-b)/(Gamma(c-a)Gamma(c-b)).
    fn gauss_value(a: &BigRational, b: &BigRational, c: &BigRational, digits: usize) -> Real {
        let bits = digits_to_bits(digits + 10);
        let g = |x: &BigRational| gamma(&Real::from_rational(x, bits), digits).unwrap();
        g(c).mul(&g(&(c - a - b)), bits)
            .div(&g(&(c - a)), bits)
            .div(&g(&(c - b)), bits)
    }

    // ------------------------------------------------------------------
    // exact terminating sums
    // ------------------------------------------------------------------

    #[test]
    fn terminating_exact_small_4f3() {
        // hand sum: 1 - 1/4 + 1/27 = 85/108
        let v = pfq_exact(
            &[q(-2, 1), q(1, 1), q(1, 1), q(1, 1)],
            &[q(2, 1), q(2, 1), q(2, 1)],
        )
        .unwrap();
        assert_eq!(v, q(85, 108));
    }

    #[test]
    fn terminating_via_pfq_reports_exact() {
        let ev = pfq(&[q(-3, 1), q(1, 2), q(2, 1)], &[q(1, 3), q(5, 1)], D).unwrap();
        assert_eq!(ev.strategy, Strategy::Terminating);
        let exact = ev.exact.expect("terminating sums are exact");
        // independent brute-force sum from the definition
        let mut acc = BigRational::zero();
        for k in 0..=3i64 {
            let t = crate::numerics::pochhammer_exact(&q(-3, 1), k as u64)
                * crate::numerics::pochhammer_exact(&q(1, 2), k as u64)
                * crate::numerics::pochhammer_exact(&q(2, 1), k as u64)
                / crate::numerics::pochhammer_exact(&q(1, 3), k as u64)
                / crate::numerics::pochhammer_exact(&q(5, 1), k as u64)
                / crate::numerics::pochhammer_exact(&BigRational::one(), k as u64);
            acc += t;
        }
        assert_eq!(exact, acc);
    }

    #[test]
    fn top_zero_terminates_immediately() {
        let ev = pfq(&[q(0, 1), q(9, 7), q(3, 2)], &[q(5, 3), q(4, 1)], D).unwrap();
        assert_eq!(ev.exact, Some(BigRational::one()));
    }

    // ------------------------------------------------------------------
    // bottom poles and divergence
    // ------------------------------------------------------------------

    #[test]
    fn bottom_pole_before_termination_rejected() {
        let r = pfq(&[q(-5, 1), q(1, 2), q(1, 1)], &[q(-2, 1), q(3, 1)], D);
        assert!(matches!(r, Err(Error::BottomPole(2))));
    }

    #[test]
    fn bottom_pole_after_termination_allowed() {
        let ev = pfq(&[q(-5, 1), q(1, 2), q(1, 1)], &[q(-7, 1), q(3, 1)], D).unwrap();
        assert!(ev.exact.is_some());
    }

    #[test]
    fn divergent_excess_rejected() {
        // excess 0
        let r = pfq(&[q(1, 2), q(1, 2), q(1, 1)], &[q(1, 1), q(1, 1)], D);
        assert!(matches!(r, Err(Error::DivergentSeries(_))));
        // excess -2
        let r2 = pfq(&[q(3, 2), q(5, 2), q(2, 1)], &[q(3, 2), q(5, 2)], D);
        assert!(matches!(r2, Err(Error::DivergentSeries(_))));
    }

    // ------------------------------------------------------------------
    // direct summation against the Gauss formula
    // ------------------------------------------------------------------

    #[test]
    fn gauss_positive_excess() {
        let (a, b, c) = (q(1, 3), q(1, 4), q(3, 1));
        let ev = pfq(&[a.clone(), b.clone()], &[c.clone()], D).unwrap();
        assert!(matches!(ev.strategy, Strategy::Direct { .. }));
        assert_close(&ev.value, &gauss_value(&a, &b, &c, D), D - 3);
        let tb = ev.tail_bound.expect("direct strategy reports a bound");
        assert!(tb.to_f64() < 1e-50);
    }

    #[test]
    fn gauss_negative_excess_continuation() {
        // excess = c - a - b = -4/5, not an integer: the zeta tail is the
        // analytic continuation and must match the Gauss formula
        let (a, b, c) = (q(7, 5), q(6, 5), q(9, 5));
        let ev = pfq(&[a.clone(), b.clone()], &[c.clone()], D).unwrap();
        assert_close(&ev.value, &gauss_value(&a, &b, &c, D), D - 4);
    }

    #[test]
    fn dilogarithm_value() {
        // 3F2(1,1,1; 2,2 | 1) = zeta(2) = pi^2/6
        let ev = pfq(&[q(1, 1), q(1, 1), q(1, 1)], &[q(2, 1), q(2, 1)], D).unwrap();
        let bits = digits_to_bits(D + 10);
        let pi2_6 = Real::pi(bits).powi(2, bits).div(&Real::from_i64(6, bits), bits);
        assert_close(&ev.value, &pi2_6, D - 3);
    }

    // ------------------------------------------------------------------
    // boost path
    // ------------------------------------------------------------------

    #[test]
    fn boost_agrees_with_direct_small_excess() {
        // s = 1/20, orbit max = a = 3/2 via T5
        let tops = [q(3, 2), q(5, 4), q(7, 6)];
        let bots = [q(9, 5), q(13, 6)];
        let boosted = pfq(&tops, &bots, D).unwrap();
        assert!(matches!(boosted.strategy, Strategy::Boosted { .. }));
        let direct = pfq_opts(&tops, &bots, D, false).unwrap();
        assert_close(&boosted.value, &direct.value, D - 5);
    }

    #[test]
    fn boost_agrees_with_direct_negative_excess() {
        // s = -7/10: direct goes through the continuation, boost through
        // a positive-excess image; they must agree
        let tops = [q(3, 2), q(5, 4), q(31, 20)];
        let bots = [q(9, 5), q(9, 5)];
        assert_eq!(excess(&tops, &bots), q(-7, 10));
        let boosted = pfq(&tops, &bots, D).unwrap();
        assert!(matches!(boosted.strategy, Strategy::Boosted { .. }));
        let direct = pfq_opts(&tops, &bots, D, false).unwrap();
        assert_close(&boosted.value, &direct.value, D - 5);
    }

    #[test]
    fn thomae_images_all_share_the_value() {
        // F(orig) = pre * F(image) for every image, checked numerically
        let tops = [q(5, 7), q(4, 9), q(3, 11)];
        let bots = [q(13, 5), q(16, 7)];
        let base = pfq(&tops, &bots, D).unwrap().value;
        let bits = digits_to_bits(D + 10);
        for tr in thomae_images_concrete(&tops, &bots) {
            assert!(tr.usable(), "{} unusable for a generic sample", tr.name);
            let pre = tr.prefactor(D).unwrap();
            let img = pfq(&tr.tops, &tr.bots, D).unwrap().value;
            let lhs = pre.mul(&img, bits);
            assert_close(&lhs, &base, D - 6);
        }
    }

    // ------------------------------------------------------------------
    // parameter reduction
    // ------------------------------------------------------------------

    #[test]
    fn equal_top_and_bottom_cancel() {
        // 3F2 with a shared parameter reduces to the Gauss case
        let (a, b, c) = (q(1, 2), q(5, 2), q(7, 2));
        let shared = q(3, 1);
        let ev = pfq(
            &[a.clone(), shared.clone(), b.clone()],
            &[shared.clone(), c.clone()],
            D,
        )
        .unwrap();
        assert_close(&ev.value, &gauss_value(&a, &b, &c, D), D - 3);
    }

    // ------------------------------------------------------------------
    // sampler
    // ------------------------------------------------------------------

    #[test]
    fn sampler_is_deterministic_and_admissible() {
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(sample_3f2(&mut r1), sample_3f2(&mut r2));
        let quarter = q(1, 4);
        for _ in 0..100 {
            let (tops, bots) = sample_3f2(&mut r1);
            assert!(tops.iter().chain(bots.iter()).all(|p| !p.is_integer()));
            let orbit = orbit_excesses(&tops, &bots);
            assert!(orbit.iter().all(|x| !x.is_integer()));
            assert!(orbit.iter().max().unwrap() > &quarter);
        }
    }

    #[test]
    fn sampled_parameters_evaluate() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let (tops, bots) = sample_3f2(&mut rng);
            let ev = pfq(&tops, &bots, 30).unwrap();
            assert!(!ev.value.is_nan());
        }
    }
}
