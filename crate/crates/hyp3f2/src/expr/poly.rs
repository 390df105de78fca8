//! Multivariate polynomials over the rationals.
//!
//! Provides:
//! - [`Mono`]/[`Poly`]: sparse polynomials with graded-lex monomial order
//! - ring arithmetic, exact division, and substitution
//! - greatest common divisors via the primitive polynomial remainder
//!   sequence, recursing on one variable at a time
//!
//! These are the workhorses behind canonical rational forms, which in turn
//! represent transformed parameters and matcher equations.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Monomial: variable name to positive exponent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mono(pub BTreeMap<String, u32>);

impl Mono {
    pub fn unit() -> Self {
        Mono(BTreeMap::new())
    }

    pub fn var(name: &str) -> Self {
        let mut m = BTreeMap::new();
        m.insert(name.to_string(), 1);
        Mono(m)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn mul(&self, rhs: &Mono) -> Mono {
        let mut out = self.0.clone();
        for (v, e) in &rhs.0 {
            *out.entry(v.clone()).or_insert(0) += e;
        }
        Mono(out)
    }

    /// Exact monomial quotient, `None` when an exponent would go negative.
    pub fn div(&self, rhs: &Mono) -> Option<Mono> {
        let mut out = self.0.clone();
        for (v, e) in &rhs.0 {
            let cur = out.get_mut(v)?;
            if *cur < *e {
                return None;
            }
            *cur -= e;
            if *cur == 0 {
                out.remove(v);
            }
        }
        Some(Mono(out))
    }

    pub fn exponent(&self, var: &str) -> u32 {
        *self.0.get(var).unwrap_or(&0)
    }
}

impl Ord for Mono {
    fn cmp(&self, other: &Self) -> Ordering {
        // graded lex: total degree first, then exponents on names in
        // ascending order, earlier names counting as bigger variables
        match self.total_degree().cmp(&other.total_degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let names: BTreeSet<&String> = self.0.keys().chain(other.0.keys()).collect();
        for name in names {
            match self.exponent(name).cmp(&other.exponent(name)) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse polynomial: monomial to nonzero rational coefficient.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Poly {
    pub terms: BTreeMap<Mono, BigRational>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { terms: BTreeMap::new() }
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(Mono::unit(), q);
        }
        Poly { terms }
    }

    pub fn from_int(v: i64) -> Self {
        Poly::constant(BigRational::from(BigInt::from(v)))
    }

    pub fn var(name: &str) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Mono::var(name), BigRational::one());
        Poly { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.len() <= 1 && self.terms.keys().all(|m| m.0.is_empty())
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.is_constant() {
            return self.terms.values().next().cloned();
        }
        None
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().map(|q| q.is_one()).unwrap_or(false)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in self.terms.keys() {
            out.extend(m.0.keys().cloned());
        }
        out
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.total_degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, var: &str) -> u32 {
        self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    fn insert_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.insert_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }

    pub fn sub(&self, rhs: &Poly) -> Poly {
        self.add(&rhs.neg())
    }

    pub fn mul(&self, rhs: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                out.insert_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }

    pub fn scale(&self, q: &BigRational) -> Poly {
        if q.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut out = Poly::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    /// Leading term in the graded-lex order.
    pub fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.terms.iter().next_back()
    }

    /// Divide by the leading coefficient.
    pub fn monic(&self) -> Poly {
        match self.leading() {
            Some((_, c)) => {
                let inv = BigRational::one() / c.clone();
                self.scale(&inv)
            }
            None => Poly::zero(),
        }
    }

    /// Exact division; errors when the divisor does not divide evenly.
    pub fn div_exact(&self, rhs: &Poly) -> Result<Poly> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero("polynomial division by zero".into()));
        }
        if let Some(c) = rhs.as_constant() {
            let inv = BigRational::one() / c;
            return Ok(self.scale(&inv));
        }
        let (lm, lc) = rhs.leading().expect("nonzero divisor");
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        while !rem.is_zero() {
            let (rm, rc) = rem.leading().expect("nonzero remainder");
            let qm = rm.div(&lm).ok_or_else(|| {
                Error::Internal("polynomial division is not exact".into())
            })?;
            let qc = rc / &lc;
            let mut step = Poly::zero();
            step.insert_term(qm, qc);
            rem = rem.sub(&step.mul(rhs));
            quot = quot.add(&step);
        }
        Ok(quot)
    }

    /// Coefficients as polynomials in the remaining variables, indexed by
    /// the power of `var` (length = degree + 1).
    pub fn coeffs_in(&self, var: &str) -> Vec<Poly> {
        let deg = self.degree_in(var) as usize;
        let mut out = vec![Poly::zero(); deg + 1];
        for (m, c) in &self.terms {
            let e = m.exponent(var) as usize;
            let mut rest = m.clone();
            rest.0.remove(var);
            out[e].insert_term(rest, c.clone());
        }
        out
    }

    pub fn from_coeffs(var: &str, coeffs: &[Poly]) -> Poly {
        let x = Poly::var(var);
        let mut out = Poly::zero();
        let mut xp = Poly::one();
        for c in coeffs {
            out = out.add(&c.mul(&xp));
            xp = xp.mul(&x);
        }
        out
    }

    /// Substitute variables by polynomials; unmapped variables stay.
    pub fn substitute(&self, map: &BTreeMap<String, Poly>) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut term = Poly::constant(c.clone());
            for (v, e) in &m.0 {
                let base = map.get(v).cloned().unwrap_or_else(|| Poly::var(v));
                term = term.mul(&base.pow(*e));
            }
            out = out.add(&term);
        }
        out
    }

    /// Evaluate with every variable bound to a rational.
    pub fn eval(&self, env: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        let mut acc = BigRational::zero();
        for (m, c) in &self.terms {
            let mut term = c.clone();
            for (v, e) in &m.0 {
                let q = env.get(v).ok_or_else(|| Error::UnboundSymbol(v.clone()))?;
                for _ in 0..*e {
                    term *= q;
                }
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Coefficient of `var^1` when the polynomial is affine in `var`.
    pub fn affine_coeff(&self, var: &str) -> Option<BigRational> {
        if self.degree_in(var) > 1 {
            return None;
        }
        let coeffs = self.coeffs_in(var);
        if coeffs.len() < 2 {
            return Some(BigRational::zero());
        }
        coeffs[1].as_constant()
    }
}

/// Pseudo-remainder of `a` by `b` viewed as univariate in `var`
/// (`deg_var(a) >= deg_var(b) >= 1`).
fn pseudo_rem(a: &Poly, b: &Poly, var: &str) -> Poly {
    let db = b.degree_in(var);
    let bc = b.coeffs_in(var);
    let lb = bc.last().expect("nonzero divisor").clone();
    let mut r = a.clone();
    while !r.is_zero() {
        let dr = r.degree_in(var);
        if dr < db {
            break;
        }
        let rc = r.coeffs_in(var);
        let lr = rc.last().expect("nonzero remainder").clone();
        // r := lb * r - lr * x^(dr-db) * b
        let shift = Poly::var(var).pow(dr - db);
        r = r.mul(&lb).sub(&lr.mul(&shift).mul(b));
    }
    r
}

/// Content of `a` with respect to `var`: gcd of its coefficient polynomials.
fn content_in(a: &Poly, var: &str) -> Poly {
    let mut g = Poly::zero();
    for c in a.coeffs_in(var) {
        if !c.is_zero() {
            g = gcd(&g, &c);
        }
    }
    g
}

/// Greatest common divisor, monic in the graded-lex leading coefficient.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    if a.is_constant() || b.is_constant() {
        // rationals are units
        return Poly::one();
    }
    let vars: BTreeSet<String> = a.vars().union(&b.vars()).cloned().collect();
    let var = vars.iter().next().expect("nonconstant polynomials have vars").clone();
    let (da, db) = (a.degree_in(&var), b.degree_in(&var));
    if da == 0 {
        // gcd is free of var: reduce b to its content
        return gcd(a, &content_in(b, &var));
    }
    if db == 0 {
        return gcd(&content_in(a, &var), b);
    }
    let (mut f, mut g) = if da >= db { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
    let cont_f = content_in(&f, &var);
    let cont_g = content_in(&g, &var);
    let cont = gcd(&cont_f, &cont_g);
    f = f.div_exact(&cont_f).expect("content divides");
    g = g.div_exact(&cont_g).expect("content divides");
    loop {
        let r = pseudo_rem(&f, &g, &var);
        if r.is_zero() {
            break;
        }
        let rc = content_in(&r, &var);
        f = g;
        g = r.div_exact(&rc).expect("content divides");
        if g.degree_in(&var) == 0 {
            // coprime in var: only the content survives
            return cont.monic();
        }
    }
    cont.mul(&g).monic()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Poly {
        // tiny builder: parse via the expression grammar
        let e = crate::expr::Expr::parse(src).unwrap();
        crate::expr::ratform::RationalForm::from_expr(&e)
            .unwrap()
            .expect_poly()
    }

    // ------------------------------------------------------------------
    // arithmetic and ordering
    // ------------------------------------------------------------------

    #[test]
    fn graded_lex_order() {
        let a2 = Mono::var("a").mul(&Mono::var("a"));
        let ab = Mono::var("a").mul(&Mono::var("b"));
        let b = Mono::var("b");
        let a = Mono::var("a");
        assert!(a2 > ab); // same degree, more weight on the earlier name
        assert!(ab > b.mul(&b).div(&b).unwrap().mul(&b)); // ab > b^2
        assert!(a > b);
        assert!(ab > a);
    }

    #[test]
    fn ring_operations() {
        let x = Poly::var("x");
        let one = Poly::one();
        let sq = x.add(&one).pow(2); // (x+1)^2
        let expanded = x.mul(&x).add(&x.scale(&BigRational::from(BigInt::from(2)))).add(&one);
        assert_eq!(sq, expanded);
        assert!(sq.sub(&expanded).is_zero());
        assert_eq!(sq.degree_in("x"), 2);
        assert_eq!(sq.total_degree(), 2);
    }

    #[test]
    fn exact_division() {
        let f = p("(* (+ x 1) (- x 2) (+ x y))");
        let q = f.div_exact(&p("(+ x y)")).unwrap();
        assert_eq!(q, p("(* (+ x 1) (- x 2))"));
        assert!(p("(+ (* x x) 1)").div_exact(&p("(+ x 1)")).is_err());
    }

    #[test]
    fn substitution_and_eval() {
        let f = p("(+ (* x x) y)");
        let mut map = BTreeMap::new();
        map.insert("x".to_string(), p("(+ y 1)"));
        assert_eq!(f.substitute(&map), p("(+ (* (+ y 1) (+ y 1)) y)"));

        let mut env = BTreeMap::new();
        env.insert("x".to_string(), BigRational::new(BigInt::from(1), BigInt::from(2)));
        env.insert("y".to_string(), BigRational::from(BigInt::from(3)));
        assert_eq!(
            f.eval(&env).unwrap(),
            BigRational::new(BigInt::from(13), BigInt::from(4))
        );
    }

    // ------------------------------------------------------------------
    // greatest common divisors
    // ------------------------------------------------------------------

    #[test]
    fn univariate_gcd() {
        let g = gcd(&p("(- (* x x) 1)"), &p("(+ (* x x) (* 2 x) 1)"));
        assert_eq!(g, p("(+ x 1)"));
        let g2 = gcd(&p("(- (* x x) 1)"), &p("(+ (* x x) 1)"));
        assert!(g2.is_one());
    }

    #[test]
    fn multivariate_gcd() {
        // (a^2 - b^2, a^2 + 2ab + b^2) -> a + b
        let g = gcd(
            &p("(- (* a a) (* b b))"),
            &p("(+ (* a a) (* 2 a b) (* b b))"),
        );
        assert_eq!(g, p("(+ a b)"));
        // common monomial content across three variables
        let g2 = gcd(&p("(* 6 x y y z)"), &p("(* 4 x x y)"));
        assert_eq!(g2, p("(* x y)"));
    }

    #[test]
    fn gcd_with_constants_and_zero() {
        assert!(gcd(&p("(+ x 1)"), &Poly::from_int(7)).is_one());
        assert_eq!(gcd(&Poly::zero(), &p("(* 3 (+ x 1))")), p("(+ x 1)"));
        assert!(gcd(&Poly::zero(), &Poly::zero()).is_zero());
    }

    #[test]
    fn affine_helpers() {
        let f = p("(- (* 2 a) (+ b 1))");
        assert_eq!(
            f.affine_coeff("a").unwrap(),
            BigRational::from(BigInt::from(2))
        );
        assert_eq!(
            f.affine_coeff("b").unwrap(),
            BigRational::from(BigInt::from(-1))
        );
        assert!(p("(* a a)").affine_coeff("a").is_none());
    }
}
