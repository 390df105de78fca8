//! Canonical rational forms: quotients of polynomials in lowest terms.
//!
//! Provides:
//! - [`RationalForm`]: numerator/denominator pairs with the common factor
//!   removed and the denominator made monic, so structural equality decides
//!   symbolic equality
//! - field arithmetic, substitution, evaluation, and conversion to and from
//!   the expression grammar
//!
//! Transformed parameters, matcher constraints, and affine symbol maps are
//! all carried in this shape.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::poly::{gcd, Poly};
use crate::expr::Expr;

/// A quotient of polynomials in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RationalForm {
    num: Poly,
    den: Poly,
}

impl RationalForm {
    /// Build and canonicalize. Errors when the denominator is zero.
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DivisionByZero("zero denominator in rational form".into()));
        }
        if num.is_zero() {
            return Ok(RationalForm { num: Poly::zero(), den: Poly::one() });
        }
        let g = gcd(&num, &den);
        let mut num = num.div_exact(&g)?;
        let mut den = den.div_exact(&g)?;
        // make the denominator monic, folding the scale into the numerator
        let lc = den.leading().expect("nonzero denominator").1.clone();
        if !lc.is_one() {
            let inv = BigRational::one() / lc;
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        Ok(RationalForm { num, den })
    }

    pub fn from_poly(p: Poly) -> Self {
        RationalForm { num: p, den: Poly::one() }
    }

    pub fn constant(q: BigRational) -> Self {
        RationalForm::from_poly(Poly::constant(q))
    }

    pub fn var(name: &str) -> Self {
        RationalForm::from_poly(Poly::var(name))
    }

    pub fn zero() -> Self {
        RationalForm::from_poly(Poly::zero())
    }

    pub fn one() -> Self {
        RationalForm::from_poly(Poly::one())
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// The underlying polynomial when the denominator is one.
    pub fn as_poly(&self) -> Option<&Poly> {
        if self.den.is_one() {
            Some(&self.num)
        } else {
            None
        }
    }

    /// Unwrap a known-polynomial form.
    pub fn expect_poly(self) -> Poly {
        assert!(self.den.is_one(), "rational form has a nontrivial denominator");
        self.num
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.den.is_one() {
            self.num.as_constant()
        } else {
            None
        }
    }

    pub fn add(&self, rhs: &Self) -> Result<Self> {
        RationalForm::new(
            self.num.mul(&rhs.den).add(&rhs.num.mul(&self.den)),
            self.den.mul(&rhs.den),
        )
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.neg())
    }

    pub fn neg(&self) -> Self {
        RationalForm { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        RationalForm::new(self.num.mul(&rhs.num), self.den.mul(&rhs.den))
    }

    pub fn div(&self, rhs: &Self) -> Result<Self> {
        if rhs.is_zero() {
            return Err(Error::DivisionByZero("division by zero rational form".into()));
        }
        RationalForm::new(self.num.mul(&rhs.den), self.den.mul(&rhs.num))
    }

    pub fn powi(&self, e: i64) -> Result<Self> {
        let mag = e.unsigned_abs() as u32;
        let (n, d) = (self.num.pow(mag), self.den.pow(mag));
        if e >= 0 {
            RationalForm::new(n, d)
        } else {
            RationalForm::new(d, n)
        }
    }

    /// Substitute variables by rational forms; unmapped variables stay.
    pub fn substitute(&self, map: &BTreeMap<String, RationalForm>) -> Result<Self> {
        let num = subst_poly(&self.num, map)?;
        let den = subst_poly(&self.den, map)?;
        num.div(&den)
    }

    /// Evaluate at a rational point.
    pub fn eval(&self, env: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        let d = self.den.eval(env)?;
        if d.is_zero() {
            return Err(Error::DivisionByZero("rational form pole at sample point".into()));
        }
        Ok(self.num.eval(env)? / d)
    }

    /// Convert from an expression; errors on non-rational heads.
    pub fn from_expr(e: &Expr) -> Result<Self> {
        match e {
            Expr::Int(v) => Ok(RationalForm::constant(BigRational::from(v.clone()))),
            Expr::Sym(s) => Ok(RationalForm::var(s)),
            Expr::Add(xs) => {
                let mut acc = RationalForm::zero();
                for x in xs {
                    acc = acc.add(&RationalForm::from_expr(x)?)?;
                }
                Ok(acc)
            }
            Expr::Sub(xs) => {
                if xs.len() == 1 {
                    return Ok(RationalForm::from_expr(&xs[0])?.neg());
                }
                let mut acc = RationalForm::from_expr(&xs[0])?;
                for x in &xs[1..] {
                    acc = acc.sub(&RationalForm::from_expr(x)?)?;
                }
                Ok(acc)
            }
            Expr::Mul(xs) => {
                let mut acc = RationalForm::one();
                for x in xs {
                    acc = acc.mul(&RationalForm::from_expr(x)?)?;
                }
                Ok(acc)
            }
            Expr::Div(xs) => {
                if xs.len() == 1 {
                    return RationalForm::one().div(&RationalForm::from_expr(&xs[0])?);
                }
                let mut acc = RationalForm::from_expr(&xs[0])?;
                for x in &xs[1..] {
                    acc = acc.div(&RationalForm::from_expr(x)?)?;
                }
                Ok(acc)
            }
            Expr::Pow(base, exp) => {
                let b = RationalForm::from_expr(base)?;
                let eform = RationalForm::from_expr(exp)?;
                let q = eform.as_constant().ok_or_else(|| {
                    Error::Internal("rational form needs a constant exponent".into())
                })?;
                if !q.is_integer() {
                    return Err(Error::Internal(
                        "rational form needs an integer exponent".into(),
                    ));
                }
                let k = q.numer().to_i64().ok_or_else(|| {
                    Error::Internal("exponent out of range".into())
                })?;
                b.powi(k)
            }
            other => Err(Error::Internal(format!(
                "not a rational form: {}",
                other.to_text()
            ))),
        }
    }

    /// Convert back to an expression (fully expanded form).
    pub fn to_expr(&self) -> Expr {
        let n = poly_to_expr(&self.num);
        if self.den.is_one() {
            n
        } else {
            Expr::Div(vec![n, poly_to_expr(&self.den)])
        }
    }

    /// Canonical text, used for hashing and display.
    pub fn key(&self) -> String {
        self.to_expr().to_text()
    }

    /// All variables appearing after cancellation.
    pub fn vars(&self) -> std::collections::BTreeSet<String> {
        let mut v = self.num.vars();
        v.extend(self.den.vars());
        v
    }
}

fn subst_poly(p: &Poly, map: &BTreeMap<String, RationalForm>) -> Result<RationalForm> {
    let mut acc = RationalForm::zero();
    for (m, c) in &p.terms {
        let mut term = RationalForm::constant(c.clone());
        for (v, e) in &m.0 {
            let base = map
                .get(v)
                .cloned()
                .unwrap_or_else(|| RationalForm::var(v));
            term = term.mul(&base.powi(*e as i64)?)?;
        }
        acc = acc.add(&term)?;
    }
    Ok(acc)
}

fn poly_to_expr(p: &Poly) -> Expr {
    if p.is_zero() {
        return Expr::int(0);
    }
    let mut terms: Vec<Expr> = Vec::new();
    // highest monomial first for readable output
    for (m, c) in p.terms.iter().rev() {
        let mut factors: Vec<Expr> = Vec::new();
        if !c.is_one() || m.0.is_empty() {
            factors.push(Expr::from_rational(c));
        }
        for (v, e) in &m.0 {
            if *e == 1 {
                factors.push(Expr::sym(v));
            } else {
                factors.push(Expr::Pow(Box::new(Expr::sym(v)), Box::new(Expr::int(*e as i64))));
            }
        }
        let term = match factors.len() {
            1 => factors.pop().expect("one factor"),
            _ => Expr::Mul(factors),
        };
        terms.push(term);
    }
    match terms.len() {
        1 => terms.pop().expect("one term"),
        _ => Expr::Add(terms),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rf(src: &str) -> RationalForm {
        RationalForm::from_expr(&Expr::parse(src).unwrap()).unwrap()
    }

    // ------------------------------------------------------------------
    // canonicalization
    // ------------------------------------------------------------------

    #[test]
    fn cancellation_makes_equals_structural() {
        // (x^2 - 1)/(x - 1) == x + 1
        assert_eq!(rf("(/ (- (* x x) 1) (- x 1))"), rf("(+ x 1)"));
        // scale normalization: (2a + 2)/2 == a + 1
        assert_eq!(rf("(/ (+ (* 2 a) 2) 2)"), rf("(+ a 1)"));
        // denominator made monic: 1/(2 - 2x) has den (x - 1) and num -1/2
        let f = rf("(/ 1 (- 2 (* 2 x)))");
        assert_eq!(f, rf("(/ (/ -1 2) (- x 1))"));
    }

    #[test]
    fn arithmetic_identities() {
        let a = rf("(/ 1 (+ x 1))");
        let b = rf("(/ x (+ x 1))");
        assert_eq!(a.add(&b).unwrap(), RationalForm::one());
        assert_eq!(
            rf("(- (/ 1 (- x 1)) (/ 1 (+ x 1)))"),
            rf("(/ 2 (- (* x x) 1))")
        );
        assert!(rf("(+ x 1)").sub(&rf("(+ x 1)")).unwrap().is_zero());
        assert_eq!(rf("(pow (+ x 1) -1)"), rf("(/ 1 (+ x 1))"));
    }

    #[test]
    fn substitution_composes() {
        // f = (a + b)/2 with a -> 1 - a gives (1 - a + b)/2
        let f = rf("(/ (+ a b) 2)");
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), rf("(- 1 a)"));
        assert_eq!(f.substitute(&map).unwrap(), rf("(/ (+ (- 1 a) b) 2)"));
        // substitution into a denominator cancels properly
        let g = rf("(/ 1 (- x y))");
        let mut m2 = BTreeMap::new();
        m2.insert("x".to_string(), rf("(+ y z)"));
        assert_eq!(g.substitute(&m2).unwrap(), rf("(/ 1 z)"));
    }

    #[test]
    fn eval_and_poles() {
        let f = rf("(/ (+ x 1) (- x 2))");
        let mut env = BTreeMap::new();
        env.insert("x".to_string(), BigRational::from(BigInt::from(3)));
        assert_eq!(f.eval(&env).unwrap(), BigRational::from(BigInt::from(4)));
        env.insert("x".to_string(), BigRational::from(BigInt::from(2)));
        assert!(matches!(f.eval(&env), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn expr_round_trip() {
        for src in ["(+ x 1)", "(/ (+ (pow x 2) -1) (+ x 2))", "(- (* 2 a) b)"] {
            let f = rf(src);
            let back = RationalForm::from_expr(&f.to_expr()).unwrap();
            assert_eq!(f, back, "{src}");
        }
    }

    #[test]
    fn rejects_non_rational_heads() {
        assert!(RationalForm::from_expr(&Expr::parse("(gamma x)").unwrap()).is_err());
        assert!(RationalForm::from_expr(&Expr::parse("(sqrt x)").unwrap()).is_err());
        assert!(rf("(+ x 1)").div(&RationalForm::zero()).is_err());
    }
}
