//! Symbolic expression trees for closed-form right-hand sides.
//!
//! Provides:
//! - [`Expr`]: the expression grammar (arithmetic, gamma family, Pochhammer,
//!   factorial, finite sums, and recursion-defined special heads)
//! - an s-expression reader/writer with exact tree round-tripping
//! - [`eval`]: evaluation that stays exact over the rationals whenever the
//!   expression permits it, promoting to big floats only when forced
//! - [`SpecialEval`]: hook for heads whose values come from recursion
//!   machinery rather than a formula
//!
//! Exactness in products is achieved by factoring gamma, sine, and square
//! root terms into a multiplicative bag and rationalizing: gamma quotients at
//! integer offsets collapse to Pochhammer rationals, reflection pairs
//! collapse to pi over a sine, and integer powers of pi cancel.

pub mod poly;
pub mod ratform;
pub mod sexp;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numerics::real::{digits_to_bits, Real};
use crate::numerics::{digamma, gamma, pochhammer_exact, sin_pi, trigamma};
use sexp::SExp;

/// Heads whose values are provided by recursion machinery.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum SpecialHead {
    Watson,
    MaierU,
    MaierV,
    MaierV2,
}

impl SpecialHead {
    pub fn name(self) -> &'static str {
        match self {
            SpecialHead::Watson => "watson",
            SpecialHead::MaierU => "maierU",
            SpecialHead::MaierV => "maierV",
            SpecialHead::MaierV2 => "maierV2",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "watson" => Some(SpecialHead::Watson),
            "maierU" => Some(SpecialHead::MaierU),
            "maierV" => Some(SpecialHead::MaierV),
            "maierV2" => Some(SpecialHead::MaierV2),
            _ => None,
        }
    }

    pub fn arity(self) -> usize {
        match self {
            SpecialHead::Watson => 5,
            _ => 2,
        }
    }
}

/// Expression tree. Lists in `Add`/`Sub`/`Mul`/`Div` mirror the source
/// s-expression so that parsing and serialization round-trip exactly.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(BigInt),
    Sym(String),
    Add(Vec<Expr>),
    /// `(- x)` is negation; `(- x y z)` is left-associated subtraction.
    Sub(Vec<Expr>),
    Mul(Vec<Expr>),
    /// `(/ x)` is the reciprocal; `(/ x y z)` divides left to right.
    Div(Vec<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    Pi,
    Gamma(Box<Expr>),
    Psi(Box<Expr>),
    Psi1(Box<Expr>),
    SinPi(Box<Expr>),
    Poch(Box<Expr>, Box<Expr>),
    Fact(Box<Expr>),
    Sum {
        index: String,
        lo: Box<Expr>,
        hi: Box<Expr>,
        body: Box<Expr>,
    },
    Special(SpecialHead, Vec<Expr>),
}

impl Expr {
    pub fn int(v: i64) -> Expr {
        Expr::Int(BigInt::from(v))
    }

    pub fn sym(s: &str) -> Expr {
        Expr::Sym(s.to_string())
    }

    /// Literal rational as `Int` or `(/ p q)`.
    pub fn from_rational(q: &BigRational) -> Expr {
        if q.is_integer() {
            Expr::Int(q.numer().clone())
        } else {
            Expr::Div(vec![Expr::Int(q.numer().clone()), Expr::Int(q.denom().clone())])
        }
    }

    /// Parse from s-expression text.
    pub fn parse(src: &str) -> Result<Expr> {
        Expr::from_sexp(&sexp::read_one(src)?)
    }

    pub fn from_sexp(node: &SExp) -> Result<Expr> {
        match node {
            SExp::Atom { text, .. } => {
                if let Ok(v) = text.parse::<BigInt>() {
                    return Ok(Expr::Int(v));
                }
                match text.as_str() {
                    "pi" => Ok(Expr::Pi),
                    t if is_symbol(t) => Ok(Expr::Sym(t.to_string())),
                    _ => Err(node.err(format!("invalid atom `{text}`"))),
                }
            }
            SExp::List { items, .. } => {
                let head = node
                    .head()
                    .ok_or_else(|| node.err("expected an operator head"))?;
                let args = &items[1..];
                let need = |n: usize| -> Result<()> {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(node.err(format!("`{head}` needs {n} arguments, got {}", args.len())))
                    }
                };
                let sub = |xs: &[SExp]| -> Result<Vec<Expr>> {
                    xs.iter().map(Expr::from_sexp).collect()
                };
                match head {
                    "+" => {
                        if args.is_empty() {
                            return Err(node.err("`+` needs at least one argument"));
                        }
                        Ok(Expr::Add(sub(args)?))
                    }
                    "-" => {
                        if args.is_empty() {
                            return Err(node.err("`-` needs at least one argument"));
                        }
                        Ok(Expr::Sub(sub(args)?))
                    }
                    "*" => {
                        if args.len() < 2 {
                            return Err(node.err("`*` needs at least two arguments"));
                        }
                        Ok(Expr::Mul(sub(args)?))
                    }
                    "/" => {
                        if args.is_empty() {
                            return Err(node.err("`/` needs at least one argument"));
                        }
                        Ok(Expr::Div(sub(args)?))
                    }
                    "pow" => {
                        need(2)?;
                        Ok(Expr::Pow(
                            Box::new(Expr::from_sexp(&args[0])?),
                            Box::new(Expr::from_sexp(&args[1])?),
                        ))
                    }
                    "sqrt" => {
                        need(1)?;
                        Ok(Expr::Sqrt(Box::new(Expr::from_sexp(&args[0])?)))
                    }
                    "gamma" => {
                        need(1)?;
                        Ok(Expr::Gamma(Box::new(Expr::from_sexp(&args[0])?)))
                    }
                    "psi" => {
                        need(1)?;
                        Ok(Expr::Psi(Box::new(Expr::from_sexp(&args[0])?)))
                    }
                    "psi1" => {
                        need(1)?;
                        Ok(Expr::Psi1(Box::new(Expr::from_sexp(&args[0])?)))
                    }
                    "sinpi" => {
                        need(1)?;
                        Ok(Expr::SinPi(Box::new(Expr::from_sexp(&args[0])?)))
                    }
                    "poch" => {
                        need(2)?;
                        Ok(Expr::Poch(
                            Box::new(Expr::from_sexp(&args[0])?),
                            Box::new(Expr::from_sexp(&args[1])?),
                        ))
                    }
                    "fact" => {
                        need(1)?;
                        Ok(Expr::Fact(Box::new(Expr::from_sexp(&args[0])?)))
                    }
                    "sum" => {
                        need(4)?;
                        let index = args[0]
                            .as_atom()
                            .filter(|s| is_symbol(s))
                            .ok_or_else(|| args[0].err("sum index must be a symbol"))?;
                        Ok(Expr::Sum {
                            index: index.to_string(),
                            lo: Box::new(Expr::from_sexp(&args[1])?),
                            hi: Box::new(Expr::from_sexp(&args[2])?),
                            body: Box::new(Expr::from_sexp(&args[3])?),
                        })
                    }
                    other => {
                        if let Some(h) = SpecialHead::from_name(other) {
                            need(h.arity())?;
                            Ok(Expr::Special(h, sub(args)?))
                        } else {
                            Err(node.err(format!("unknown head `{other}`")))
                        }
                    }
                }
            }
        }
    }

    /// Serialize to canonical s-expression text.
    pub fn to_text(&self) -> String {
        match self {
            Expr::Int(v) => v.to_string(),
            Expr::Sym(s) => s.clone(),
            Expr::Pi => "pi".into(),
            Expr::Add(xs) => write_list("+", xs),
            Expr::Sub(xs) => write_list("-", xs),
            Expr::Mul(xs) => write_list("*", xs),
            Expr::Div(xs) => write_list("/", xs),
            Expr::Pow(a, b) => format!("(pow {} {})", a.to_text(), b.to_text()),
            Expr::Sqrt(a) => format!("(sqrt {})", a.to_text()),
            Expr::Gamma(a) => format!("(gamma {})", a.to_text()),
            Expr::Psi(a) => format!("(psi {})", a.to_text()),
            Expr::Psi1(a) => format!("(psi1 {})", a.to_text()),
            Expr::SinPi(a) => format!("(sinpi {})", a.to_text()),
            Expr::Poch(a, b) => format!("(poch {} {})", a.to_text(), b.to_text()),
            Expr::Fact(a) => format!("(fact {})", a.to_text()),
            Expr::Sum { index, lo, hi, body } => format!(
                "(sum {} {} {} {})",
                index,
                lo.to_text(),
                hi.to_text(),
                body.to_text()
            ),
            Expr::Special(h, xs) => write_list(h.name(), xs),
        }
    }

    /// Substitute symbols by expressions (capture-naive; sum indices shadow).
    pub fn substitute(&self, map: &BTreeMap<String, Expr>) -> Expr {
        match self {
            Expr::Sym(s) => map.get(s).cloned().unwrap_or_else(|| self.clone()),
            Expr::Int(_) | Expr::Pi => self.clone(),
            Expr::Add(xs) => Expr::Add(xs.iter().map(|x| x.substitute(map)).collect()),
            Expr::Sub(xs) => Expr::Sub(xs.iter().map(|x| x.substitute(map)).collect()),
            Expr::Mul(xs) => Expr::Mul(xs.iter().map(|x| x.substitute(map)).collect()),
            Expr::Div(xs) => Expr::Div(xs.iter().map(|x| x.substitute(map)).collect()),
            Expr::Pow(a, b) => Expr::Pow(
                Box::new(a.substitute(map)),
                Box::new(b.substitute(map)),
            ),
            Expr::Sqrt(a) => Expr::Sqrt(Box::new(a.substitute(map))),
            Expr::Gamma(a) => Expr::Gamma(Box::new(a.substitute(map))),
            Expr::Psi(a) => Expr::Psi(Box::new(a.substitute(map))),
            Expr::Psi1(a) => Expr::Psi1(Box::new(a.substitute(map))),
            Expr::SinPi(a) => Expr::SinPi(Box::new(a.substitute(map))),
            Expr::Poch(a, b) => Expr::Poch(
                Box::new(a.substitute(map)),
                Box::new(b.substitute(map)),
            ),
            Expr::Fact(a) => Expr::Fact(Box::new(a.substitute(map))),
            Expr::Sum { index, lo, hi, body } => {
                let mut inner = map.clone();
                inner.remove(index);
                Expr::Sum {
                    index: index.clone(),
                    lo: Box::new(lo.substitute(map)),
                    hi: Box::new(hi.substitute(map)),
                    body: Box::new(body.substitute(&inner)),
                }
            }
            Expr::Special(h, xs) => {
                Expr::Special(*h, xs.iter().map(|x| x.substitute(map)).collect())
            }
        }
    }

    /// All free symbols.
    pub fn free_symbols(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_symbols(&mut out, &mut Vec::new());
        out.sort();
        out.dedup();
        out
    }

    fn collect_symbols(&self, out: &mut Vec<String>, bound: &mut Vec<String>) {
        match self {
            Expr::Sym(s) => {
                if !bound.contains(s) {
                    out.push(s.clone());
                }
            }
            Expr::Int(_) | Expr::Pi => {}
            Expr::Add(xs) | Expr::Sub(xs) | Expr::Mul(xs) | Expr::Div(xs) => {
                for x in xs {
                    x.collect_symbols(out, bound);
                }
            }
            Expr::Pow(a, b) | Expr::Poch(a, b) => {
                a.collect_symbols(out, bound);
                b.collect_symbols(out, bound);
            }
            Expr::Sqrt(a)
            | Expr::Gamma(a)
            | Expr::Psi(a)
            | Expr::Psi1(a)
            | Expr::SinPi(a)
            | Expr::Fact(a) => a.collect_symbols(out, bound),
            Expr::Sum { index, lo, hi, body } => {
                lo.collect_symbols(out, bound);
                hi.collect_symbols(out, bound);
                bound.push(index.clone());
                body.collect_symbols(out, bound);
                bound.pop();
            }
            Expr::Special(_, xs) => {
                for x in xs {
                    x.collect_symbols(out, bound);
                }
            }
        }
    }
}

fn write_list(head: &str, xs: &[Expr]) -> String {
    let inner: Vec<String> = xs.iter().map(|x| x.to_text()).collect();
    format!("({} {})", head, inner.join(" "))
}

fn is_symbol(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Evaluation result: exact rational, or big-float approximation.
#[derive(Clone, Debug)]
pub enum NumValue {
    Exact(BigRational),
    Approx(Real),
}

impl NumValue {
    pub fn zero() -> Self {
        NumValue::Exact(BigRational::zero())
    }

    pub fn to_real(&self, digits: usize) -> Real {
        match self {
            NumValue::Exact(q) => Real::from_rational(q, digits_to_bits(digits + 10)),
            NumValue::Approx(r) => r.clone(),
        }
    }

    pub fn as_exact(&self) -> Option<&BigRational> {
        match self {
            NumValue::Exact(q) => Some(q),
            NumValue::Approx(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            NumValue::Exact(q) => q.is_zero(),
            NumValue::Approx(r) => r.is_zero(),
        }
    }
}

/// Evaluator hook for recursion-defined heads.
pub trait SpecialEval {
    fn eval_special(&self, head: SpecialHead, args: &[NumValue], digits: usize)
        -> Result<NumValue>;
}

/// Default evaluator: rejects every special head.
pub struct NoSpecials;

impl SpecialEval for NoSpecials {
    fn eval_special(&self, head: SpecialHead, _: &[NumValue], _: usize) -> Result<NumValue> {
        Err(Error::NoSpecialEval(head.name().into()))
    }
}

/// Evaluation context: digit target, exact symbol bindings, special hook.
pub struct EvalCtx<'a> {
    pub digits: usize,
    pub env: &'a BTreeMap<String, BigRational>,
    pub specials: &'a dyn SpecialEval,
}

impl<'a> EvalCtx<'a> {
    pub fn new(
        digits: usize,
        env: &'a BTreeMap<String, BigRational>,
        specials: &'a dyn SpecialEval,
    ) -> Self {
        EvalCtx { digits, env, specials }
    }

    fn bits(&self) -> usize {
        digits_to_bits(self.digits + 10)
    }
}

/// Evaluate an expression. Results stay exact over the rationals when the
/// expression reduces to one; gamma poles and division by zero are errors.
pub fn eval(expr: &Expr, ctx: &EvalCtx) -> Result<NumValue> {
    match expr {
        Expr::Add(xs) => {
            let vals: Vec<NumValue> = xs.iter().map(|x| eval(x, ctx)).collect::<Result<_>>()?;
            Ok(sum_values(&vals, ctx))
        }
        Expr::Sub(xs) => {
            let vals: Vec<NumValue> = xs.iter().map(|x| eval(x, ctx)).collect::<Result<_>>()?;
            if vals.len() == 1 {
                return Ok(negate(&vals[0]));
            }
            let mut acc = vals[0].clone();
            for v in &vals[1..] {
                acc = add2(&acc, &negate(v), ctx);
            }
            Ok(acc)
        }
        Expr::Sum { index, lo, hi, body } => {
            let lo_v = eval_exact_integer(lo, ctx, "sum lower bound")?;
            let hi_v = eval_exact_integer(hi, ctx, "sum upper bound")?;
            let mut acc = NumValue::zero();
            let mut k = lo_v.clone();
            let mut env = ctx.env.clone();
            while k <= hi_v {
                env.insert(index.clone(), BigRational::from(k.clone()));
                let inner = EvalCtx { digits: ctx.digits, env: &env, specials: ctx.specials };
                let v = eval(body, &inner)?;
                acc = add2(&acc, &v, ctx);
                k += 1;
            }
            Ok(acc)
        }
        Expr::Psi(a) => {
            let v = eval(a, ctx)?;
            if let NumValue::Exact(q) = &v {
                if crate::numerics::is_nonpositive_integer(q) {
                    return Err(Error::GammaPole(format!("psi({q})")));
                }
            }
            Ok(NumValue::Approx(digamma(&v.to_real(ctx.digits), ctx.digits)?))
        }
        Expr::Psi1(a) => {
            let v = eval(a, ctx)?;
            if let NumValue::Exact(q) = &v {
                if crate::numerics::is_nonpositive_integer(q) {
                    return Err(Error::GammaPole(format!("psi1({q})")));
                }
            }
            Ok(NumValue::Approx(trigamma(&v.to_real(ctx.digits), ctx.digits)?))
        }
        Expr::Special(h, xs) => {
            let vals: Vec<NumValue> = xs.iter().map(|x| eval(x, ctx)).collect::<Result<_>>()?;
            ctx.specials.eval_special(*h, &vals, ctx.digits)
        }
        // everything multiplicative (including a bare factor) goes through
        // the factor bag so exact cancellations are found uniformly
        _ => eval_product(expr, ctx),
    }
}

fn eval_exact_integer(e: &Expr, ctx: &EvalCtx, what: &str) -> Result<BigInt> {
    match eval(e, ctx)? {
        NumValue::Exact(q) if q.is_integer() => Ok(q.numer().clone()),
        other => Err(Error::Internal(format!(
            "{what} must be an exact integer, got {other:?}"
        ))),
    }
}

fn sum_values(vals: &[NumValue], ctx: &EvalCtx) -> NumValue {
    let mut acc = NumValue::zero();
    for v in vals {
        acc = add2(&acc, v, ctx);
    }
    acc
}

fn add2(a: &NumValue, b: &NumValue, ctx: &EvalCtx) -> NumValue {
    match (a, b) {
        (NumValue::Exact(x), NumValue::Exact(y)) => NumValue::Exact(x + y),
        _ => {
            let bits = ctx.bits();
            NumValue::Approx(a.to_real(ctx.digits).add(&b.to_real(ctx.digits), bits))
        }
    }
}

fn negate(a: &NumValue) -> NumValue {
    match a {
        NumValue::Exact(q) => NumValue::Exact(-q.clone()),
        NumValue::Approx(r) => NumValue::Approx(r.neg()),
    }
}

/// Multiplicative factor bag.
struct Bag {
    rat: BigRational,
    pi_exp: i64,
    /// product of sqrt(radicand) factors, folded into one radicand
    radicand: BigRational,
    gammas: Vec<(BigRational, i64)>,
    sinpis: Vec<(BigRational, i64)>,
    numeric: Vec<(Real, i64)>,
    /// order of exact zeros (positive) minus poles from 1/gamma etc.
    zero_order: i64,
    pole_order: i64,
}

impl Bag {
    fn new() -> Self {
        Bag {
            rat: BigRational::one(),
            pi_exp: 0,
            radicand: BigRational::one(),
            gammas: Vec::new(),
            sinpis: Vec::new(),
            numeric: Vec::new(),
            zero_order: 0,
            pole_order: 0,
        }
    }

    fn push_rat(&mut self, q: &BigRational, exp: i64) -> Result<()> {
        if q.is_zero() {
            if exp > 0 {
                self.zero_order += exp;
                return Ok(());
            }
            return Err(Error::DivisionByZero("exact zero in a denominator".into()));
        }
        self.rat *= rat_powi(q, exp);
        Ok(())
    }
}

fn rat_powi(q: &BigRational, e: i64) -> BigRational {
    q.pow(e as i32)
}

fn eval_product(expr: &Expr, ctx: &EvalCtx) -> Result<NumValue> {
    let mut bag = Bag::new();
    collect_factors(expr, 1, &mut bag, ctx)?;
    finish_bag(bag, ctx)
}

fn collect_factors(expr: &Expr, exp: i64, bag: &mut Bag, ctx: &EvalCtx) -> Result<()> {
    match expr {
        Expr::Mul(xs) => {
            for x in xs {
                collect_factors(x, exp, bag, ctx)?;
            }
            Ok(())
        }
        Expr::Div(xs) => {
            if xs.len() == 1 {
                return collect_factors(&xs[0], -exp, bag, ctx);
            }
            collect_factors(&xs[0], exp, bag, ctx)?;
            for x in &xs[1..] {
                collect_factors(x, -exp, bag, ctx)?;
            }
            Ok(())
        }
        Expr::Pow(base, e) => {
            // integer exponents distribute over the bag; anything else is a
            // single numeric (or exact-root) factor
            match eval(e, ctx)? {
                NumValue::Exact(q) if q.is_integer() => {
                    let k = q.numer().to_i64().ok_or_else(|| {
                        Error::Internal("pow exponent too large".into())
                    })?;
                    collect_factors(base, exp * k, bag, ctx)
                }
                ev => {
                    let v = pow_value(&eval(base, ctx)?, &ev, ctx)?;
                    push_value(v, exp, bag, ctx)
                }
            }
        }
        Expr::Sqrt(a) => match eval(a, ctx)? {
            NumValue::Exact(q) => {
                if q.is_negative() {
                    return Err(Error::DegenerateCase(format!("sqrt of negative {q}")));
                }
                push_sqrt(&q, exp, bag);
                Ok(())
            }
            NumValue::Approx(r) => {
                if r.is_negative() {
                    return Err(Error::DegenerateCase("sqrt of negative value".into()));
                }
                bag.numeric.push((r.sqrt(ctx.bits()), exp));
                Ok(())
            }
        },
        Expr::Pi => {
            bag.pi_exp += exp;
            Ok(())
        }
        Expr::Gamma(a) => match eval(a, ctx)? {
            NumValue::Exact(q) => collect_gamma_exact(q, exp, bag),
            NumValue::Approx(r) => {
                bag.numeric.push((gamma(&r, ctx.digits)?, exp));
                Ok(())
            }
        },
        Expr::Fact(a) => match eval(a, ctx)? {
            // n! = Gamma(n+1)
            NumValue::Exact(q) => collect_gamma_exact(&q + BigRational::one(), exp, bag),
            NumValue::Approx(r) => {
                let one = Real::one(ctx.bits());
                bag.numeric.push((gamma(&r.add(&one, ctx.bits()), ctx.digits)?, exp));
                Ok(())
            }
        },
        Expr::Poch(x, n) => {
            let nv = eval(n, ctx)?;
            match (&eval(x, ctx)?, &nv) {
                (NumValue::Exact(xq), NumValue::Exact(nq)) if nq.is_integer() => {
                    let k = nq.numer().to_i64().ok_or_else(|| {
                        Error::Internal("pochhammer order too large".into())
                    })?;
                    if k >= 0 {
                        let v = pochhammer_exact(xq, k as u64);
                        bag.push_rat(&v, exp)?;
                    } else {
                        // (x)_(-m) = 1/(x-m)_m
                        let shifted = xq - BigRational::from(BigInt::from(-k));
                        let v = pochhammer_exact(&shifted, (-k) as u64);
                        bag.push_rat(&v, -exp)?;
                    }
                    Ok(())
                }
                // (x)_n = Gamma(x+n)/Gamma(x) via the bag when exact
                (NumValue::Exact(xq), NumValue::Exact(nq)) => {
                    collect_gamma_exact(xq + nq, exp, bag)?;
                    collect_gamma_exact(xq.clone(), -exp, bag)
                }
                (xv, nv) => {
                    let bits = ctx.bits();
                    let xr = xv.to_real(ctx.digits);
                    let nr = nv.to_real(ctx.digits);
                    let top = gamma(&xr.add(&nr, bits), ctx.digits)?;
                    let bot = gamma(&xr, ctx.digits)?;
                    bag.numeric.push((top.div(&bot, bits), exp));
                    Ok(())
                }
            }
        }
        Expr::SinPi(a) => match eval(a, ctx)? {
            NumValue::Exact(q) => {
                if q.is_integer() {
                    if exp > 0 {
                        bag.zero_order += exp;
                    } else {
                        bag.pole_order += -exp;
                    }
                } else {
                    bag.sinpis.push((q, exp));
                }
                Ok(())
            }
            NumValue::Approx(r) => {
                bag.numeric.push((sin_pi(&r, ctx.digits), exp));
                Ok(())
            }
        },
        Expr::Int(v) => bag.push_rat(&BigRational::from(v.clone()), exp),
        Expr::Sym(s) => {
            let q = ctx
                .env
                .get(s)
                .ok_or_else(|| Error::UnboundSymbol(s.clone()))?;
            bag.push_rat(q, exp)
        }
        // additive or special subtrees: evaluate and push as one factor
        other => {
            let v = eval(other, ctx)?;
            push_value(v, exp, bag, ctx)
        }
    }
}

/// Route an exact gamma argument: poles to the order counters, positive
/// integers to exact factorials, everything else to the pairing list.
fn collect_gamma_exact(arg: BigRational, exp: i64, bag: &mut Bag) -> Result<()> {
    if crate::numerics::is_nonpositive_integer(&arg) {
        if exp > 0 {
            bag.pole_order += exp;
        } else {
            bag.zero_order += -exp;
        }
        return Ok(());
    }
    if arg.is_integer() {
        let n = arg.numer().to_u64().ok_or_else(|| {
            Error::Internal("gamma argument too large for exact factorial".into())
        })?;
        let mut f = BigRational::one();
        for j in 2..n {
            f *= BigRational::from(BigInt::from(j));
        }
        bag.push_rat(&f, exp)?;
        return Ok(());
    }
    bag.gammas.push((arg, exp));
    Ok(())
}

fn push_value(v: NumValue, exp: i64, bag: &mut Bag, _ctx: &EvalCtx) -> Result<()> {
    match v {
        NumValue::Exact(q) => bag.push_rat(&q, exp),
        NumValue::Approx(r) => {
            if r.is_zero() {
                if exp > 0 {
                    bag.zero_order += exp;
                } else {
                    bag.pole_order += -exp;
                }
                return Ok(());
            }
            bag.numeric.push((r, exp));
            Ok(())
        }
    }
}

/// sqrt(q)^exp: even part goes to the rational, odd residue to the radicand.
fn push_sqrt(q: &BigRational, exp: i64, bag: &mut Bag) {
    if q.is_zero() {
        if exp > 0 {
            bag.zero_order += exp;
        } else if exp < 0 {
            bag.pole_order += -exp;
        }
        return;
    }
    let half = exp.div_euclid(2);
    let residue = exp.rem_euclid(2);
    bag.rat *= rat_powi(q, half);
    if residue == 1 {
        bag.radicand *= q;
    }
}

fn pow_value(base: &NumValue, e: &NumValue, ctx: &EvalCtx) -> Result<NumValue> {
    // non-integer exponent: exact q-th root when it exists, else numeric
    if let (NumValue::Exact(b), NumValue::Exact(p)) = (base, e) {
        if let Some(v) = exact_rational_pow(b, p) {
            return Ok(NumValue::Exact(v));
        }
    }
    let bits = ctx.bits();
    let b = base.to_real(ctx.digits);
    if !b.is_positive() {
        return Err(Error::DegenerateCase(
            "pow with non-integer exponent needs a positive base".into(),
        ));
    }
    let er = e.to_real(ctx.digits);
    Ok(NumValue::Approx(b.ln(bits).mul(&er, bits).exp(bits)))
}

/// b^(p/q) exactly, when b = (n/d) has exact rational q-th root.
fn exact_rational_pow(b: &BigRational, p: &BigRational) -> Option<BigRational> {
    if b.is_zero() {
        return if p.is_positive() { Some(BigRational::zero()) } else { None };
    }
    let num = p.numer().to_i64()?;
    let den = p.denom().to_u32()?;
    if den == 1 {
        return Some(rat_powi(b, num));
    }
    if b.is_negative() {
        return None;
    }
    let nr = b.numer().nth_root(den);
    let dr = b.denom().nth_root(den);
    if &nr.pow(den) == b.numer() && &dr.pow(den) == b.denom() {
        let root = BigRational::new(nr, dr);
        Some(rat_powi(&root, num))
    } else {
        None
    }
}

fn finish_bag(mut bag: Bag, ctx: &EvalCtx) -> Result<NumValue> {
    // pole/zero bookkeeping first
    if bag.pole_order > 0 && bag.zero_order > 0 {
        return Err(Error::DegenerateCase(
            "indeterminate product: pole times zero".into(),
        ));
    }
    if bag.pole_order > 0 {
        return Err(Error::GammaPole("pole in product".into()));
    }
    if bag.zero_order > 0 {
        return Ok(NumValue::zero());
    }

    reduce_gamma_quotients(&mut bag);
    reduce_gamma_reflections(&mut bag)?;
    reduce_sinpi(&mut bag);

    // exact exit: nothing numeric left, no stray pi power, radicand square
    if bag.numeric.is_empty() && bag.gammas.is_empty() && bag.sinpis.is_empty() && bag.pi_exp == 0 {
        if bag.radicand.is_one() {
            return Ok(NumValue::Exact(bag.rat));
        }
        if let Some(root) = exact_sqrt(&bag.radicand) {
            return Ok(NumValue::Exact(bag.rat * root));
        }
    }

    // numeric assembly
    let bits = ctx.bits();
    let mut acc = Real::from_rational(&bag.rat, bits);
    if bag.pi_exp != 0 {
        acc = acc.mul(&Real::pi(bits).powi(bag.pi_exp, bits), bits);
    }
    if !bag.radicand.is_one() {
        acc = acc.mul(&Real::from_rational(&bag.radicand, bits).sqrt(bits), bits);
    }
    for (g, e) in &bag.gammas {
        let gv = gamma(&Real::from_rational(g, bits), ctx.digits)?;
        acc = acc.mul(&gv.powi(*e, bits), bits);
    }
    for (q, e) in &bag.sinpis {
        let sv = sin_pi(&Real::from_rational(q, bits), ctx.digits);
        acc = acc.mul(&sv.powi(*e, bits), bits);
    }
    for (r, e) in &bag.numeric {
        acc = acc.mul(&r.powi(*e, bits), bits);
    }
    Ok(NumValue::Approx(acc))
}

fn exact_sqrt(q: &BigRational) -> Option<BigRational> {
    if q.is_negative() {
        return None;
    }
    let nr = q.numer().sqrt();
    let dr = q.denom().sqrt();
    if &(&nr * &nr) == q.numer() && &(&dr * &dr) == q.denom() {
        Some(BigRational::new(nr, dr))
    } else {
        None
    }
}

/// Collapse gamma quotients Gamma(x+k)/Gamma(x) into Pochhammer rationals.
fn reduce_gamma_quotients(bag: &mut Bag) {
    // combine equal args
    bag.gammas.sort_by(|a, b| a.0.cmp(&b.0));
    let mut combined: Vec<(BigRational, i64)> = Vec::new();
    for (g, e) in bag.gammas.drain(..) {
        if let Some(last) = combined.last_mut() {
            if last.0 == g {
                last.1 += e;
                continue;
            }
        }
        combined.push((g, e));
    }
    combined.retain(|(_, e)| *e != 0);

    // pair across integer differences, one unit at a time
    loop {
        let mut found: Option<(usize, usize)> = None;
        'outer: for i in 0..combined.len() {
            if combined[i].1 <= 0 {
                continue;
            }
            for j in 0..combined.len() {
                if combined[j].1 >= 0 || i == j {
                    continue;
                }
                if (&combined[i].0 - &combined[j].0).is_integer() {
                    found = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = found else { break };
        let (x, y) = (combined[i].0.clone(), combined[j].0.clone());
        let k = (&x - &y).to_integer();
        // Gamma(x)/Gamma(y) with x = y + k
        let ratio = if k.is_positive() {
            pochhammer_exact(&y, k.to_u64().unwrap_or(0))
        } else {
            let m = (-k.clone()).to_u64().unwrap_or(0);
            let v = pochhammer_exact(&x, m);
            BigRational::one() / v
        };
        bag.rat *= ratio;
        combined[i].1 -= 1;
        combined[j].1 += 1;
        combined.retain(|(_, e)| *e != 0);
    }
    bag.gammas = combined;
}

/// Collapse reflection pairs Gamma(x) Gamma(y) with x + y an integer into
/// pi / sinpi(x) (times a Pochhammer adjustment).
fn reduce_gamma_reflections(bag: &mut Bag) -> Result<()> {
    loop {
        let mut found: Option<(usize, usize, i64)> = None;
        'outer: for i in 0..bag.gammas.len() {
            for j in i..bag.gammas.len() {
                let (x, ex) = &bag.gammas[i];
                let (y, ey) = &bag.gammas[j];
                let same = i == j;
                let enough = if same { ex.abs() >= 2 } else { ex.signum() == ey.signum() };
                if !enough || *ex == 0 || *ey == 0 {
                    continue;
                }
                if (x + y).is_integer() {
                    let sign = ex.signum();
                    found = Some((i, j, sign));
                    break 'outer;
                }
            }
        }
        let Some((i, j, sign)) = found else { break };
        let x = bag.gammas[i].0.clone();
        let y = bag.gammas[j].0.clone();
        let m = (&x + &y).to_integer();
        // Gamma(y) = Gamma(m - x); rewrite against Gamma(1-x):
        //   m >= 1: Gamma(m-x) = (1-x)_(m-1) Gamma(1-x)
        //   m <= 0: Gamma(m-x) = Gamma(1-x) / (m-x)_(1-m)
        let one = BigRational::one();
        let adjust = {
            let mi = m.to_i64().ok_or_else(|| Error::Internal("reflection shift too big".into()))?;
            if mi >= 1 {
                pochhammer_exact(&(&one - &x), (mi - 1) as u64)
            } else {
                // here y = m - x, so divide by (m-x)_(1-m)
                let v = pochhammer_exact(&y, (1 - mi) as u64);
                BigRational::one() / v
            }
        };
        if adjust.is_zero() {
            // adjustment hit a pole/zero: bail out of symbolic reduction for
            // this pair by leaving the gammas for numeric evaluation
            break;
        }
        // Gamma(x) Gamma(1-x) = pi / sinpi(x)
        bag.rat *= rat_powi(&adjust, sign);
        bag.pi_exp += sign;
        bag.sinpis.push((x, -sign));
        bag.gammas[i].1 -= sign;
        bag.gammas[j].1 -= sign;
        bag.gammas.retain(|(_, e)| *e != 0);
    }
    Ok(())
}

/// Exact sine values at rational multiples of pi where they are rational or
/// square roots of rationals.
fn reduce_sinpi(bag: &mut Bag) {
    let mut rest = Vec::new();
    let pending = std::mem::take(&mut bag.sinpis);
    for (q, e) in pending {
        // reduce mod 2
        let two = BigRational::from(BigInt::from(2));
        let mut r = q.clone() - (&q / &two).floor() * &two;
        if r.is_negative() {
            r += &two;
        }
        // sin(pi r) for r in [0, 2)
        let den = r.denom().to_u32().unwrap_or(0);
        let handled = match den {
            2 => {
                // r = 1/2 -> 1 ; r = 3/2 -> -1
                let n = r.numer().to_i64().unwrap_or(0);
                let v = if n % 4 == 1 { 1 } else { -1 };
                bag.rat *= rat_powi(&BigRational::from(BigInt::from(v)), e);
                true
            }
            6 => {
                // r in {1/6, 5/6} -> 1/2 ; {7/6, 11/6} -> -1/2
                let n = r.numer().to_i64().unwrap_or(0) % 12;
                let v = if n == 1 || n == 5 {
                    BigRational::new(BigInt::from(1), BigInt::from(2))
                } else {
                    BigRational::new(BigInt::from(-1), BigInt::from(2))
                };
                bag.rat *= rat_powi(&v, e);
                true
            }
            4 => {
                // |sin| = sqrt(1/2)
                let n = r.numer().to_i64().unwrap_or(0) % 8;
                let sign = if n == 1 || n == 3 { 1 } else { -1 };
                bag.rat *= rat_powi(&BigRational::from(BigInt::from(sign)), e);
                push_sqrt(&BigRational::new(BigInt::from(1), BigInt::from(2)), e, bag);
                true
            }
            3 => {
                // |sin| = sqrt(3/4)
                let n = r.numer().to_i64().unwrap_or(0) % 6;
                let sign = if n == 1 || n == 2 { 1 } else { -1 };
                bag.rat *= rat_powi(&BigRational::from(BigInt::from(sign)), e);
                push_sqrt(&BigRational::new(BigInt::from(3), BigInt::from(4)), e, bag);
                true
            }
            _ => false,
        };
        if !handled {
            rest.push((q, e));
        }
    }
    bag.sinpis = rest;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, (i64, i64))]) -> BTreeMap<String, BigRational> {
        pairs
            .iter()
            .map(|(k, (n, d))| {
                (k.to_string(), BigRational::new(BigInt::from(*n), BigInt::from(*d)))
            })
            .collect()
    }

    fn eval_str(src: &str, e: &BTreeMap<String, BigRational>) -> Result<NumValue> {
        let expr = Expr::parse(src)?;
        let ctx = EvalCtx::new(50, e, &NoSpecials);
        eval(&expr, &ctx)
    }

    fn expect_exact(src: &str, e: &BTreeMap<String, BigRational>, num: i64, den: i64) {
        match eval_str(src, e).unwrap() {
            NumValue::Exact(q) => {
                assert_eq!(q, BigRational::new(BigInt::from(num), BigInt::from(den)), "{src}")
            }
            NumValue::Approx(r) => panic!("{src} gave approx {r:?}"),
        }
    }

    #[test]
    fn parse_serialize_round_trip() {
        let srcs = [
            "(+ 2 a (- 1 n))",
            "(/ (* n (- 1 a)) (- b 2))",
            "(pow 2 (- 1 (* 2 a)))",
            "(sum k 0 n (/ (poch a k) (fact k)))",
            "(gamma (+ a (/ 1 2)))",
            "(- (psi1 b))",
            "(watson a b c 0 1)",
            "(maierV2 a (- n 1))",
            "(sqrt (+ 1 (* 8 a)))",
            "(sinpi (- b a))",
        ];
        for s in srcs {
            let e = Expr::parse(s).unwrap();
            assert_eq!(e.to_text(), s);
            assert_eq!(Expr::from_sexp(&sexp::read_one(&e.to_text()).unwrap()).unwrap(), e);
        }
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(Expr::parse("(frob 1)").is_err());
        assert!(Expr::parse("(pow 1)").is_err());
        assert!(Expr::parse("(sum 3 0 1 k)").is_err());
        assert!(Expr::parse("2/3").is_err());
    }

    #[test]
    fn exact_arithmetic() {
        let e = env(&[("a", (1, 2)), ("b", (3, 1))]);
        expect_exact("(+ a b)", &e, 7, 2);
        expect_exact("(- a b 1)", &e, -7, 2);
        expect_exact("(- a)", &e, -1, 2);
        expect_exact("(* 2 a b)", &e, 3, 1);
        expect_exact("(/ b a)", &e, 6, 1);
        expect_exact("(/ a)", &e, 2, 1);
        expect_exact("(pow a 3)", &e, 1, 8);
        expect_exact("(pow a -2)", &e, 4, 1);
        expect_exact("(pow 8 (/ 2 3))", &e, 4, 1);
        expect_exact("(sqrt (/ 9 4))", &e, 3, 2);
        expect_exact("(fact 5)", &e, 120, 1);
        expect_exact("(poch a 3)", &e, 15, 8);
        expect_exact("(poch a -2)", &e, 4, 3);
        expect_exact("(sum k 1 4 k)", &e, 10, 1);
        expect_exact("(sum k 0 2 (* a (poch 2 k)))", &e, 9, 2);
    }

    #[test]
    fn gamma_quotients_collapse_exactly() {
        let e = env(&[("a", (5, 2))]);
        // Gamma(a+3)/Gamma(a) = a(a+1)(a+2) = (5/2)(7/2)(9/2) = 315/8
        expect_exact("(/ (gamma (+ a 3)) (gamma a))", &e, 315, 8);
        // Gamma(1/2 alignment): Gamma(1/2)Gamma(7/2) / (Gamma(3/2)Gamma(5/2)) = 5
        expect_exact(
            "(/ (* (gamma (/ 1 2)) (gamma (/ 7 2))) (* (gamma (/ 3 2)) (gamma (/ 5 2))))",
            &e,
            5,
            1,
        );
        // integer gammas
        expect_exact("(gamma 6)", &e, 120, 1);
    }

    #[test]
    fn reflection_pairs_collapse() {
        let e = env(&[]);
        // Gamma(1/2)^2 = pi
        expect_exact("(/ (* (gamma (/ 1 2)) (gamma (/ 1 2))) pi)", &e, 1, 1);
        // Gamma(1/3)Gamma(2/3) = pi / sin(pi/3) = pi * 2 / sqrt(3)
        expect_exact(
            "(/ (* (gamma (/ 1 3)) (gamma (/ 2 3)) (sqrt 3)) (* 2 pi))",
            &e,
            1,
            1,
        );
        // with an integer offset: Gamma(5/2)Gamma(1/2) = (3/2)(1/2) pi... = 3pi/4
        expect_exact("(/ (* (gamma (/ 5 2)) (gamma (/ 1 2))) pi)", &e, 3, 4);
    }

    #[test]
    fn sinpi_exact_values() {
        let e = env(&[]);
        expect_exact("(sinpi (/ 1 2))", &e, 1, 1);
        expect_exact("(sinpi (/ 3 2))", &e, -1, 1);
        expect_exact("(sinpi (/ 13 6))", &e, 1, 2);
        expect_exact("(sinpi (/ -7 6))", &e, 1, 2);
        expect_exact("(* (sinpi (/ 1 3)) (sinpi (/ 2 3)))", &e, 3, 4);
        expect_exact("(* (sinpi (/ 1 4)) (sinpi (/ 1 4)))", &e, 1, 2);
        expect_exact("(sinpi 5)", &e, 0, 1);
    }

    #[test]
    fn pole_and_zero_semantics() {
        let e = env(&[("n", (3, 1))]);
        // 1/Gamma(0) = 0 exactly
        expect_exact("(/ 1 (gamma 0))", &e, 0, 1);
        expect_exact("(/ 2 (gamma (- 1 n)))", &e, 0, 1);
        // Gamma at a pole is an error
        assert!(matches!(eval_str("(gamma -2)", &e), Err(Error::GammaPole(_))));
        assert!(matches!(eval_str("(fact -3)", &e), Err(Error::GammaPole(_))));
        // pole times zero is indeterminate
        assert!(matches!(
            eval_str("(* (gamma 0) (sinpi 0))", &e),
            Err(Error::DegenerateCase(_))
        ));
        // psi pole
        assert!(matches!(eval_str("(psi 0)", &e), Err(Error::GammaPole(_))));
        // division by exact zero
        assert!(matches!(
            eval_str("(/ 1 (- n 3))", &e),
            Err(Error::DivisionByZero(_)) | Err(Error::GammaPole(_))
        ));
    }

    #[test]
    fn numeric_promotions() {
        let e = env(&[]);
        // pi alone is numeric
        match eval_str("pi", &e).unwrap() {
            NumValue::Approx(r) => {
                assert!((r.to_f64() - std::f64::consts::PI).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
        // psi(1) + EulerGamma = 0 numerically
        match eval_str("(psi 1)", &e).unwrap() {
            NumValue::Approx(r) => assert!((r.to_f64() + 0.5772156649015329).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        // psi1(1) = pi^2/6
        match eval_str("(psi1 1)", &e).unwrap() {
            NumValue::Approx(r) => assert!((r.to_f64() - 1.6449340668482264).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        // gamma at non-rationalizable argument
        match eval_str("(gamma (/ 1 3))", &e).unwrap() {
            NumValue::Approx(r) => assert!((r.to_f64() - 2.678938534707747).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn substitution_and_symbols() {
        let expr = Expr::parse("(sum k 0 n (* a k))").unwrap();
        assert_eq!(expr.free_symbols(), vec!["a".to_string(), "n".to_string()]);
        let mut map = BTreeMap::new();
        map.insert("a".to_string(), Expr::parse("(+ b 1)").unwrap());
        map.insert("k".to_string(), Expr::int(9)); // bound: must not substitute
        let got = expr.substitute(&map);
        assert_eq!(got.to_text(), "(sum k 0 n (* (+ b 1) k))");
    }

    #[test]
    fn unbound_symbol_errors() {
        let e = env(&[]);
        assert!(matches!(eval_str("(+ q 1)", &e), Err(Error::UnboundSymbol(_))));
    }

    #[test]
    fn special_head_requires_hook() {
        let e = env(&[("a", (1, 3))]);
        assert!(matches!(
            eval_str("(maierU a 0)", &e),
            Err(Error::NoSpecialEval(_))
        ));
    }
}
