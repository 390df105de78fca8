//! The Thomae transformation group and the culling pipeline.
//!
//! Provides:
//! - the ten two-term relations as symbolic affine maps on the parameter
//!   slots (a, b, c, f, e) with gamma-ratio prefactors
//! - the 120-element group obtained by composing the relations with top
//!   and bottom permutations, plus composition and inverse lookup
//! - orbit generation for parameter templates, deduplicated by slot
//!   permutation
//! - template equivalence up to an affine symbol substitution, including
//!   series reversal for terminating templates
//! - the cull pipeline that reduces an entry list to a base set
//! - the best-excess transform used to pick a well-convergent orbit image
//!   for concrete parameters
//!
//! Every relation is normalized to the shape
//! `3F2(a, b, c; f, e | 1) = prefactor * 3F2(transformed | 1)`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::expr::poly::{Mono, Poly};
use crate::expr::ratform::RationalForm;
use crate::expr::Expr;
use crate::numerics::real::{digits_to_bits, Real};
use crate::numerics::{gamma, is_nonpositive_integer};

/// Slot variable names: three tops, then the two bottoms.
pub const SLOTS: [&str; 5] = ["a", "b", "c", "f", "e"];

/// One of the ten printed relations.
#[derive(Clone, Debug)]
pub struct ThomaeRelation {
    pub id: &'static str,
    /// Images of the five slots as forms in the slot variables.
    pub map: [RationalForm; 5],
    /// Gamma prefactor: numerator and denominator argument lists.
    pub gamma_num: Vec<RationalForm>,
    pub gamma_den: Vec<RationalForm>,
}

/// A relation composed with a top and bottom permutation.
#[derive(Clone, Debug)]
pub struct GroupElement {
    pub relation: &'static str,
    pub top_perm: [usize; 3],
    pub bot_perm: [usize; 2],
    pub map: [RationalForm; 5],
    pub gamma_num: Vec<RationalForm>,
    pub gamma_den: Vec<RationalForm>,
}

/// A 3F2 parameter template: five slot forms over the entry's symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct Template {
    pub tops: Vec<RationalForm>,
    pub bots: Vec<RationalForm>,
    /// Closed-form right-hand side, when known.
    pub rhs: Option<Expr>,
    /// Symbols constrained to nonnegative integers.
    pub int_syms: BTreeSet<String>,
}

/// Result of an equivalence search.
#[derive(Clone, Debug)]
pub struct Equivalence {
    /// Group element (possibly suffixed `+rev` for series reversal).
    pub via: String,
    /// Substitution from the first template's symbols.
    pub subst: BTreeMap<String, RationalForm>,
    /// Whether the substitution is an invertible change of variables.
    pub invertible: bool,
}

fn rf(src: &str) -> RationalForm {
    RationalForm::from_expr(&Expr::parse(src).expect("table source parses"))
        .expect("table source is rational")
}

fn relation(
    id: &'static str,
    tops: [&str; 3],
    bots: [&str; 2],
    num: &[&str],
    den: &[&str],
) -> ThomaeRelation {
    ThomaeRelation {
        id,
        map: [rf(tops[0]), rf(tops[1]), rf(tops[2]), rf(bots[0]), rf(bots[1])],
        gamma_num: num.iter().map(|s| rf(s)).collect(),
        gamma_den: den.iter().map(|s| rf(s)).collect(),
    }
}

/// The ten relations. Abbreviations inside the table source:
/// s = e+f-a-b-c, u = e+f-b-c, v = e+f-a-c, w = e+f-a-b.
pub fn relations() -> &'static Vec<ThomaeRelation> {
    static TABLE: OnceLock<Vec<ThomaeRelation>> = OnceLock::new();
    TABLE.get_or_init(|| {
        const S: &str = "(- (+ e f) a b c)";
        const U: &str = "(- (+ e f) b c)";
        const V: &str = "(- (+ e f) a c)";
        const W: &str = "(- (+ e f) a b)";
        vec![
            relation(
                "T1",
                [S, "(- f c)", "(- e c)"],
                [U, V],
                &[S, "f", "e"],
                &["c", U, V],
            ),
            relation(
                "T2",
                [S, "(- f b)", "(- e b)"],
                [U, W],
                &[S, "f", "e"],
                &["b", U, W],
            ),
            relation(
                "T3",
                ["(- f c)", "(- f b)", "a"],
                [U, "f"],
                &[S, "e"],
                &["(- e a)", U],
            ),
            relation(
                "T4",
                ["(- e c)", "(- e b)", "a"],
                [U, "e"],
                &[S, "f"],
                &["(- f a)", U],
            ),
            relation(
                "T5",
                [S, "(- f a)", "(- e a)"],
                [V, W],
                &[S, "f", "e"],
                &["a", V, W],
            ),
            relation(
                "T6",
                ["(- f c)", "(- f a)", "b"],
                [V, "f"],
                &[S, "e"],
                &["(- e b)", V],
            ),
            relation(
                "T7",
                ["(- e c)", "(- e a)", "b"],
                [V, "e"],
                &[S, "f"],
                &["(- f b)", V],
            ),
            relation(
                "T8",
                ["(- f b)", "(- f a)", "c"],
                [W, "f"],
                &[S, "e"],
                &["(- e c)", W],
            ),
            relation(
                "T9",
                ["(- e b)", "(- e a)", "c"],
                [W, "e"],
                &[S, "f"],
                &["(- f c)", W],
            ),
            relation("T10", ["a", "b", "c"], ["f", "e"], &[], &[]),
        ]
    })
}

const PERMS3: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];
const PERMS2: [[usize; 2]; 2] = [[0, 1], [1, 0]];

impl GroupElement {
    pub fn name(&self) -> String {
        if self.top_perm == [0, 1, 2] && self.bot_perm == [0, 1] {
            self.relation.to_string()
        } else {
            let t: String = self.top_perm.iter().map(|i| (b'1' + *i as u8) as char).collect();
            let b: String = self.bot_perm.iter().map(|i| (b'1' + *i as u8) as char).collect();
            format!("{}[{}|{}]", self.relation, t, b)
        }
    }

    pub fn is_identity(&self) -> bool {
        self.relation == "T10" && self.top_perm == [0, 1, 2] && self.bot_perm == [0, 1]
    }

    /// Canonical key for map plus prefactor (group-membership lookups).
    pub fn key(&self) -> String {
        element_key(&self.map, &self.gamma_num, &self.gamma_den)
    }

    /// Excess of the image as a form in the slot variables.
    pub fn image_excess(&self) -> RationalForm {
        let sum = |forms: &[RationalForm]| -> RationalForm {
            forms
                .iter()
                .fold(RationalForm::zero(), |acc, f| acc.add(f).expect("affine sum"))
        };
        sum(&self.map[3..5]).sub(&sum(&self.map[0..3])).expect("affine difference")
    }

    /// Apply the parameter map to concrete values.
    pub fn apply_concrete(
        &self,
        tops: &[BigRational],
        bots: &[BigRational],
    ) -> Result<(Vec<BigRational>, Vec<BigRational>)> {
        let env = slot_env(tops, bots);
        let mut out_tops = Vec::with_capacity(3);
        for i in 0..3 {
            out_tops.push(self.map[i].eval(&env)?);
        }
        let mut out_bots = Vec::with_capacity(2);
        for i in 3..5 {
            out_bots.push(self.map[i].eval(&env)?);
        }
        Ok((out_tops, out_bots))
    }

    /// Numeric prefactor at concrete values; gamma poles are errors.
    pub fn prefactor_concrete(
        &self,
        tops: &[BigRational],
        bots: &[BigRational],
        digits: usize,
    ) -> Result<Real> {
        let env = slot_env(tops, bots);
        let bits = digits_to_bits(digits + 10);
        let mut acc = Real::one(bits);
        for g in &self.gamma_num {
            let arg = g.eval(&env)?;
            acc = acc.mul(&gamma(&Real::from_rational(&arg, bits), digits)?, bits);
        }
        for g in &self.gamma_den {
            let arg = g.eval(&env)?;
            acc = acc.div(&gamma(&Real::from_rational(&arg, bits), digits)?, bits);
        }
        Ok(acc)
    }

    /// True when no prefactor gamma argument sits at a pole.
    pub fn prefactor_finite(&self, tops: &[BigRational], bots: &[BigRational]) -> bool {
        let env = slot_env(tops, bots);
        self.gamma_num
            .iter()
            .chain(self.gamma_den.iter())
            .all(|g| match g.eval(&env) {
                Ok(v) => !is_nonpositive_integer(&v),
                Err(_) => false,
            })
    }
}

fn slot_env(tops: &[BigRational], bots: &[BigRational]) -> BTreeMap<String, BigRational> {
    let mut env = BTreeMap::new();
    for (i, name) in SLOTS.iter().enumerate().take(3) {
        env.insert(name.to_string(), tops[i].clone());
    }
    env.insert(SLOTS[3].to_string(), bots[0].clone());
    env.insert(SLOTS[4].to_string(), bots[1].clone());
    env
}

fn element_key(
    map: &[RationalForm; 5],
    num: &[RationalForm],
    den: &[RationalForm],
) -> String {
    let mut n: Vec<String> = num.iter().map(|g| g.key()).collect();
    let mut d: Vec<String> = den.iter().map(|g| g.key()).collect();
    n.sort();
    d.sort();
    format!(
        "{} ;; {} ;; {}",
        map.iter().map(|f| f.key()).collect::<Vec<_>>().join(" | "),
        n.join(","),
        d.join(",")
    )
}

/// The full 120-element group.
pub fn group() -> &'static Vec<GroupElement> {
    static GROUP: OnceLock<Vec<GroupElement>> = OnceLock::new();
    GROUP.get_or_init(|| {
        let mut out = Vec::with_capacity(120);
        let mut seen = BTreeSet::new();
        for rel in relations() {
            for tp in PERMS3 {
                for bp in PERMS2 {
                    let map = [
                        rel.map[tp[0]].clone(),
                        rel.map[tp[1]].clone(),
                        rel.map[tp[2]].clone(),
                        rel.map[3 + bp[0]].clone(),
                        rel.map[3 + bp[1]].clone(),
                    ];
                    let el = GroupElement {
                        relation: rel.id,
                        top_perm: tp,
                        bot_perm: bp,
                        map,
                        gamma_num: rel.gamma_num.clone(),
                        gamma_den: rel.gamma_den.clone(),
                    };
                    assert!(seen.insert(el.key()), "duplicate group element {}", el.name());
                    out.push(el);
                }
            }
        }
        assert_eq!(out.len(), 120, "Thomae group must have 120 elements");
        out
    })
}

/// Substitute the slot variables of `form` by five replacement forms.
fn subst_slots(form: &RationalForm, slots: &[RationalForm; 5]) -> RationalForm {
    let mut map = BTreeMap::new();
    for (i, name) in SLOTS.iter().enumerate() {
        map.insert(name.to_string(), slots[i].clone());
    }
    form.substitute(&map).expect("affine substitution")
}

/// Compose two elements: `first` applied to the parameters, `then` applied
/// to the image. Returns the composite map and prefactor.
pub fn compose(
    first: &GroupElement,
    then: &GroupElement,
) -> ([RationalForm; 5], Vec<RationalForm>, Vec<RationalForm>) {
    let map = std::array::from_fn(|i| subst_slots(&then.map[i], &first.map));
    let mut num: Vec<RationalForm> = first.gamma_num.clone();
    let mut den: Vec<RationalForm> = first.gamma_den.clone();
    num.extend(then.gamma_num.iter().map(|g| subst_slots(g, &first.map)));
    den.extend(then.gamma_den.iter().map(|g| subst_slots(g, &first.map)));
    // cancel identical arguments across the fraction
    let mut i = 0;
    while i < num.len() {
        if let Some(j) = den.iter().position(|d| d == &num[i]) {
            den.remove(j);
            num.remove(i);
        } else {
            i += 1;
        }
    }
    (map, num, den)
}

/// Find the group element matching a composed map and prefactor.
pub fn find_element(
    map: &[RationalForm; 5],
    num: &[RationalForm],
    den: &[RationalForm],
) -> Option<&'static GroupElement> {
    let key = element_key(map, num, den);
    group().iter().find(|g| g.key() == key)
}

/// The inverse of an element within the group.
pub fn inverse(g: &GroupElement) -> Option<&'static GroupElement> {
    group().iter().find(|h| {
        let (map, num, den) = compose(g, h);
        map.iter().enumerate().all(|(i, f)| f == &RationalForm::var(SLOTS[i]))
            && num.is_empty()
            && den.is_empty()
    })
}

// ----------------------------------------------------------------------
// templates, orbits, equivalence
// ----------------------------------------------------------------------

impl Template {
    pub fn new(tops: Vec<RationalForm>, bots: Vec<RationalForm>) -> Self {
        Template { tops, bots, rhs: None, int_syms: BTreeSet::new() }
    }

    /// All symbols across the parameter forms.
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for f in self.tops.iter().chain(self.bots.iter()) {
            out.extend(f.vars());
        }
        out
    }

    /// Slot forms in engine order (a, b, c, f, e).
    fn slot_forms(&self) -> [RationalForm; 5] {
        [
            self.tops[0].clone(),
            self.tops[1].clone(),
            self.tops[2].clone(),
            self.bots[0].clone(),
            self.bots[1].clone(),
        ]
    }

    /// Canonical key up to top and bottom permutations.
    pub fn perm_key(&self) -> String {
        let mut t: Vec<String> = self.tops.iter().map(|f| f.key()).collect();
        let mut b: Vec<String> = self.bots.iter().map(|f| f.key()).collect();
        t.sort();
        b.sort();
        format!("[{}] [{}]", t.join(", "), b.join(", "))
    }

    /// Parametric excess as a form over the template's symbols.
    pub fn excess_form(&self) -> RationalForm {
        let sum = |forms: &[RationalForm]| {
            forms
                .iter()
                .fold(RationalForm::zero(), |acc, f| acc.add(f).expect("sum"))
        };
        sum(&self.bots).sub(&sum(&self.tops)).expect("difference")
    }

    /// True when some top forces termination for all admissible symbols:
    /// a nonpositive integer constant, or `constant - n` with `n` an
    /// integer-constrained symbol and the constant a nonpositive integer.
    pub fn is_terminating(&self) -> bool {
        self.tops.iter().any(|t| self.top_terminates(t))
    }

    fn top_terminates(&self, t: &RationalForm) -> bool {
        let Some(p) = t.as_poly() else { return false };
        if let Some(c) = p.as_constant() {
            return is_nonpositive_integer(&c);
        }
        if p.total_degree() != 1 {
            return false;
        }
        let vars: Vec<String> = p.vars().into_iter().collect();
        if vars.len() != 1 || !self.int_syms.contains(&vars[0]) {
            return false;
        }
        let coeff = p.affine_coeff(&vars[0]).unwrap_or_else(BigRational::zero);
        let konst = p
            .terms
            .get(&Mono::unit())
            .cloned()
            .unwrap_or_else(BigRational::zero);
        coeff == -BigRational::one() && (konst.is_zero() || is_nonpositive_integer(&konst))
    }
}

/// Apply a group element to a template: parameters through the map, the
/// right-hand side divided by the prefactor.
pub fn apply(g: &GroupElement, t: &Template) -> Template {
    let slots = t.slot_forms();
    let tops = (0..3).map(|i| subst_slots(&g.map[i], &slots)).collect();
    let bots = (3..5).map(|i| subst_slots(&g.map[i], &slots)).collect();
    let rhs = t.rhs.as_ref().map(|rhs| {
        // rhs' = rhs * product(den gammas) / product(num gammas)
        let gexpr = |f: &RationalForm| Expr::Gamma(Box::new(subst_slots(f, &slots).to_expr()));
        let mut num_factors = vec![rhs.clone()];
        num_factors.extend(g.gamma_den.iter().map(gexpr));
        let numerator = if num_factors.len() == 1 {
            num_factors.pop().expect("one factor")
        } else {
            Expr::Mul(num_factors)
        };
        if g.gamma_num.is_empty() {
            numerator
        } else {
            let mut parts = vec![numerator];
            parts.extend(g.gamma_num.iter().map(gexpr));
            Expr::Div(parts)
        }
    });
    Template { tops, bots, rhs, int_syms: t.int_syms.clone() }
}

/// One orbit class: a representative image and how it was reached.
#[derive(Clone, Debug)]
pub struct OrbitClass {
    pub template: Template,
    pub via: String,
    pub members: usize,
}

/// All images of a template under the group, deduplicated by slot
/// permutation. A fully generic template yields ten classes.
pub fn orbit(t: &Template) -> Vec<OrbitClass> {
    let mut classes: Vec<OrbitClass> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for g in group() {
        let image = apply(g, t);
        let key = image.perm_key();
        match index.get(&key) {
            Some(&i) => classes[i].members += 1,
            None => {
                index.insert(key, classes.len());
                classes.push(OrbitClass { template: image, via: g.name(), members: 1 });
            }
        }
    }
    classes
}

/// Series reversal of a terminating template whose first listed
/// terminating top is `-n`: sums the finite series from the other end.
/// For tops [t, x, y] and bots [p, q] the image is
/// tops [t, 1+t-p, 1+t-q], bots [1+t-x, 1+t-y].
pub fn reverse_terminating(t: &Template) -> Option<Template> {
    let idx = t.tops.iter().position(|f| t.top_terminates(f))?;
    let tt = &t.tops[idx];
    let one = RationalForm::one();
    let shift = one.add(tt).expect("affine");
    let others: Vec<&RationalForm> = t
        .tops
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, f)| f)
        .collect();
    let tops = vec![
        tt.clone(),
        shift.sub(&t.bots[0]).expect("affine"),
        shift.sub(&t.bots[1]).expect("affine"),
    ];
    let bots = vec![
        shift.sub(others[0]).expect("affine"),
        shift.sub(others[1]).expect("affine"),
    ];
    Some(Template { tops, bots, rhs: None, int_syms: t.int_syms.clone() })
}

/// Search for a group element plus affine symbol substitution carrying
/// `t1` onto `t2`. Terminating templates are additionally compared through
/// series reversal (marked `+rev` in `via`).
pub fn equivalent(t1: &Template, t2: &Template) -> Option<Equivalence> {
    let affine = |t: &Template| t.tops.iter().chain(t.bots.iter()).all(is_affine_form);
    if !affine(t1) || !affine(t2) {
        return None;
    }
    let variants: Vec<(Template, &str)> = {
        let mut v = vec![(t1.clone(), "")];
        if t1.is_terminating() && t2.is_terminating() {
            if let Some(r) = reverse_terminating(t1) {
                v.push((r, "+rev"));
            }
        }
        v
    };
    let syms2: Vec<String> = t2.symbols().into_iter().collect();
    for (base, suffix) in &variants {
        let slots = base.slot_forms();
        for g in group() {
            let image: Vec<RationalForm> =
                (0..5).map(|i| subst_slots(&g.map[i], &slots)).collect();
            let target = t2.slot_forms();
            if let Some(subst) = affine_match(&image, &target, &syms2) {
                let n1 = base.symbols().len();
                let invertible = n1 == syms2.len() && substitution_invertible(&subst, &syms2);
                return Some(Equivalence {
                    via: format!("{}{}", g.name(), suffix),
                    subst,
                    invertible,
                });
            }
        }
    }
    None
}

fn is_affine_form(f: &RationalForm) -> bool {
    match f.as_poly() {
        Some(p) => p.total_degree() <= 1,
        None => false,
    }
}

/// Solve for an affine substitution sigma with sigma(from_i) = to_i for
/// every slot; `to` lives over the symbols `syms2`.
fn affine_match(
    from: &[RationalForm],
    to: &[RationalForm],
    syms2: &[String],
) -> Option<BTreeMap<String, RationalForm>> {
    let syms1: Vec<String> = {
        let mut s = BTreeSet::new();
        for f in from {
            s.extend(f.vars());
        }
        s.into_iter().collect()
    };
    // unknowns: for each sym x of syms1, coefficients over syms2 plus a
    // constant term
    let per = syms2.len() + 1;
    let ncols = syms1.len() * per;
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    for (f, t) in from.iter().zip(to.iter()) {
        let fp = f.as_poly()?;
        let tp = t.as_poly()?;
        if fp.total_degree() > 1 || tp.total_degree() > 1 {
            return None;
        }
        let f_const = constant_term(fp);
        // one equation per target coordinate (each sym2, then the constant)
        for (yi, y) in syms2.iter().enumerate() {
            let mut row = vec![BigRational::zero(); ncols + 1];
            for (xi, x) in syms1.iter().enumerate() {
                let cx = fp.affine_coeff(x)?;
                row[xi * per + yi] = cx;
            }
            row[ncols] = tp.affine_coeff(y)?;
            rows.push(row);
        }
        let mut row = vec![BigRational::zero(); ncols + 1];
        for (xi, x) in syms1.iter().enumerate() {
            let cx = fp.affine_coeff(x)?;
            row[xi * per + syms2.len()] = cx;
        }
        row[ncols] = constant_term(tp) - f_const;
        rows.push(row);
    }
    let sol = solve_linear(rows, ncols)?;
    // build sigma and verify by substitution
    let mut subst = BTreeMap::new();
    for (xi, x) in syms1.iter().enumerate() {
        let mut form = RationalForm::constant(sol[xi * per + syms2.len()].clone());
        for (yi, y) in syms2.iter().enumerate() {
            let c = RationalForm::constant(sol[xi * per + yi].clone());
            let term = c.mul(&RationalForm::var(y)).expect("product");
            form = form.add(&term).expect("sum");
        }
        subst.insert(x.clone(), form);
    }
    for (f, t) in from.iter().zip(to.iter()) {
        let image = f.substitute(&subst).ok()?;
        if &image != t {
            return None;
        }
    }
    Some(subst)
}

fn constant_term(p: &Poly) -> BigRational {
    p.terms.get(&Mono::unit()).cloned().unwrap_or_else(BigRational::zero)
}

/// Gaussian elimination over the rationals; inconsistent systems yield
/// `None`, free unknowns are set to zero.
fn solve_linear(mut rows: Vec<Vec<BigRational>>, ncols: usize) -> Option<Vec<BigRational>> {
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; ncols];
    let mut rank = 0usize;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, p);
        let inv = BigRational::one() / rows[rank][col].clone();
        for v in rows[rank].iter_mut() {
            *v *= &inv;
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in 0..=ncols {
                    let delta = &factor * &rows[rank][c];
                    rows[r][c] -= delta;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    // consistency: a zero row with nonzero augment has no solution
    for row in &rows {
        if row[..ncols].iter().all(|v| v.is_zero()) && !row[ncols].is_zero() {
            return None;
        }
    }
    let mut sol = vec![BigRational::zero(); ncols];
    for col in 0..ncols {
        if let Some(r) = pivot_of_col[col] {
            sol[col] = rows[r][ncols].clone();
        }
    }
    Some(sol)
}

/// Whether the linear part of a substitution over `syms2` is invertible.
fn substitution_invertible(subst: &BTreeMap<String, RationalForm>, syms2: &[String]) -> bool {
    let n = subst.len();
    if n != syms2.len() {
        return false;
    }
    let mut rows: Vec<Vec<BigRational>> = Vec::new();
    for form in subst.values() {
        let Some(p) = form.as_poly() else { return false };
        let mut row: Vec<BigRational> = Vec::with_capacity(n + 1);
        for y in syms2 {
            match p.affine_coeff(y) {
                Some(c) => row.push(c),
                None => return false,
            }
        }
        row.push(BigRational::zero());
        rows.push(row);
    }
    // full rank iff elimination finds n pivots
    let mut rank = 0usize;
    for col in 0..n {
        let Some(pi) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pi);
        let inv = BigRational::one() / rows[rank][col].clone();
        for v in rows[rank].iter_mut() {
            *v *= &inv;
        }
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                for c in 0..n {
                    let delta = &factor * &rows[rank][c];
                    rows[r][c] -= delta;
                }
            }
        }
        rank += 1;
    }
    rank == n
}

// ----------------------------------------------------------------------
// culling
// ----------------------------------------------------------------------

/// An identified entry fed to the cull pipeline.
#[derive(Clone, Debug)]
pub struct CullItem {
    pub id: String,
    pub template: Template,
}

/// Why an entry was removed.
#[derive(Clone, Debug, PartialEq)]
pub enum CullReason {
    EquivalentTo { survivor: String, via: String },
    NonpositiveExcess,
    KarlssonMinton,
}

/// Outcome of a cull run.
#[derive(Clone, Debug)]
pub struct CullOutcome {
    pub kept: Vec<CullItem>,
    pub dropped: Vec<(String, CullReason)>,
}

/// Maximal integer top-minus-bottom difference treated as reducible.
pub const KM_MAX: i64 = 3;

fn km_reducible(t: &Template, km_max: i64) -> bool {
    for top in &t.tops {
        for bot in &t.bots {
            if let Ok(d) = top.sub(bot) {
                if let Some(c) = d.as_constant() {
                    if c.is_integer() {
                        if let Some(v) = c.numer().to_i64() {
                            if (0..=km_max).contains(&v) {
                                return true;
                            }
                        }
                    }
                }
            }
        }
    }
    false
}

/// Reduce a list of entries to a base set:
/// - drop entries whose excess is a constant nonpositive integer, unless
///   the series terminates
/// - drop Karlsson-Minton entries (top exceeds a bottom by an integer in
///   0..=`km_max`)
/// - drop entries expressible through a kept entry by a group element and
///   affine substitution (series reversal included for terminating pairs),
///   keeping the entry with more free symbols, then lower id
pub fn cull(items: &[CullItem], km_max: i64) -> CullOutcome {
    let mut dropped: Vec<(String, CullReason)> = Vec::new();
    let mut candidates: Vec<&CullItem> = Vec::new();
    for item in items {
        let excess = item.template.excess_form();
        let divergent = match excess.as_constant() {
            Some(c) => is_nonpositive_integer(&c) && !item.template.is_terminating(),
            None => false,
        };
        if divergent {
            dropped.push((item.id.clone(), CullReason::NonpositiveExcess));
            continue;
        }
        if km_reducible(&item.template, km_max) {
            dropped.push((item.id.clone(), CullReason::KarlssonMinton));
            continue;
        }
        candidates.push(item);
    }
    // most general first, then id, for a deterministic, order-insensitive
    // survivor choice
    candidates.sort_by(|x, y| {
        let nx = x.template.symbols().len();
        let ny = y.template.symbols().len();
        ny.cmp(&nx).then_with(|| x.id.cmp(&y.id))
    });
    let mut kept: Vec<CullItem> = Vec::new();
    'cand: for item in candidates {
        for k in &kept {
            if let Some(eq) = equivalent(&k.template, &item.template) {
                dropped.push((
                    item.id.clone(),
                    CullReason::EquivalentTo { survivor: k.id.clone(), via: eq.via },
                ));
                continue 'cand;
            }
        }
        kept.push(item.clone());
    }
    kept.sort_by(|x, y| x.id.cmp(&y.id));
    CullOutcome { kept, dropped }
}

// ----------------------------------------------------------------------
// best-excess transform
// ----------------------------------------------------------------------

/// The group element whose image has maximal excess at the given concrete
/// parameters and a pole-free prefactor. The identity wins ties.
pub fn best_excess_transform(
    tops: &[BigRational],
    bots: &[BigRational],
) -> Result<&'static GroupElement> {
    let mut best: Option<(&GroupElement, BigRational)> = None;
    for g in group() {
        if !g.prefactor_finite(tops, bots) {
            continue;
        }
        let (it, ib) = g.apply_concrete(tops, bots)?;
        let x = crate::series::excess(&it, &ib);
        let better = match &best {
            None => true,
            Some((bg, bx)) => {
                x > *bx || (x == *bx && g.is_identity() && !bg.is_identity())
            }
        };
        if better {
            best = Some((g, x));
        }
    }
    best.map(|(g, _)| g)
        .ok_or_else(|| Error::Internal("every prefactor has a pole".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn generic_template() -> Template {
        Template::new(
            vec![rf("a"), rf("b"), rf("c")],
            vec![rf("f"), rf("e")],
        )
    }

    fn dixon_template() -> Template {
        Template::new(
            vec![rf("a"), rf("b"), rf("c")],
            vec![rf("(+ 1 (- a b))"), rf("(+ 1 (- a c))")],
        )
    }

    // ------------------------------------------------------------------
    // group structure
    // ------------------------------------------------------------------

    #[test]
    fn group_has_exactly_120_elements() {
        assert_eq!(group().len(), 120);
        let identities: Vec<_> = group().iter().filter(|g| g.is_identity()).collect();
        assert_eq!(identities.len(), 1);
    }

    #[test]
    fn relation_maps_are_affine_with_integer_coefficients() {
        for rel in relations() {
            for form in rel.map.iter().chain(rel.gamma_num.iter()).chain(rel.gamma_den.iter()) {
                let p = form.as_poly().expect("affine");
                assert!(p.total_degree() <= 1, "{} not affine", rel.id);
                for coeff in p.terms.values() {
                    assert!(coeff.is_integer(), "{} has non-integer coefficient", rel.id);
                }
            }
        }
    }

    #[test]
    fn image_excess_is_affine_for_all_elements() {
        for g in group() {
            let x = g.image_excess();
            let p = x.as_poly().expect("affine excess");
            assert!(p.total_degree() <= 1, "{} excess not affine", g.name());
        }
    }

    #[test]
    fn relation_compositions_stay_in_the_group() {
        let rels: Vec<&GroupElement> = group()
            .iter()
            .filter(|g| g.top_perm == [0, 1, 2] && g.bot_perm == [0, 1])
            .collect();
        assert_eq!(rels.len(), 10);
        for g1 in &rels {
            for g2 in &rels {
                let (map, num, den) = compose(g1, g2);
                assert!(
                    find_element(&map, &num, &den).is_some(),
                    "{} then {} leaves the group",
                    g1.name(),
                    g2.name()
                );
            }
        }
    }

    #[test]
    fn every_relation_has_an_inverse() {
        for g in group().iter().filter(|g| g.top_perm == [0, 1, 2] && g.bot_perm == [0, 1]) {
            let inv = inverse(g).unwrap_or_else(|| panic!("{} lacks an inverse", g.name()));
            let (_, num, den) = compose(g, inv);
            assert!(num.is_empty() && den.is_empty());
        }
    }

    // ------------------------------------------------------------------
    // agreement with the concrete table
    // ------------------------------------------------------------------

    #[test]
    fn symbolic_table_matches_concrete_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (tops, bots) = crate::series::sample_3f2(&mut rng);
            let concrete = crate::series::thomae_images_concrete(&tops, &bots);
            for (rel, conc) in relations().iter().zip(concrete.iter()) {
                assert_eq!(rel.id, conc.name);
                let g = group()
                    .iter()
                    .find(|g| {
                        g.relation == rel.id && g.top_perm == [0, 1, 2] && g.bot_perm == [0, 1]
                    })
                    .expect("pure relation in group");
                let (it, ib) = g.apply_concrete(&tops, &bots).unwrap();
                assert_eq!(it, conc.tops, "{} tops", rel.id);
                assert_eq!(ib, conc.bots, "{} bots", rel.id);
                let env = slot_env(&tops, &bots);
                let num: Vec<BigRational> =
                    g.gamma_num.iter().map(|f| f.eval(&env).unwrap()).collect();
                let den: Vec<BigRational> =
                    g.gamma_den.iter().map(|f| f.eval(&env).unwrap()).collect();
                assert_eq!(num, conc.gamma_num, "{} prefactor numerator", rel.id);
                assert_eq!(den, conc.gamma_den, "{} prefactor denominator", rel.id);
            }
        }
    }

    #[test]
    fn value_invariance_with_permutations() {
        let digits = 30;
        let bits = digits_to_bits(digits + 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (tops, bots) = crate::series::sample_3f2(&mut rng);
        let base = crate::series::pfq_value(&tops, &bots, digits).unwrap();
        // pick a few elements with nontrivial permutations
        for idx in [13usize, 47, 95] {
            let g = &group()[idx];
            let (it, ib) = g.apply_concrete(&tops, &bots).unwrap();
            let pre = g.prefactor_concrete(&tops, &bots, digits).unwrap();
            let image = crate::series::pfq_value(&it, &ib, digits).unwrap();
            let lhs = pre.mul(&image, bits);
            let err = crate::numerics::rel_err(&lhs, &base, bits);
            assert!(
                err.to_f64() < 1e-25,
                "{} breaks value invariance: {}",
                g.name(),
                err.to_f64()
            );
        }
    }

    // ------------------------------------------------------------------
    // orbits
    // ------------------------------------------------------------------

    #[test]
    fn generic_orbit_has_ten_classes_of_twelve() {
        let classes = orbit(&generic_template());
        assert_eq!(classes.len(), 10);
        assert!(classes.iter().all(|c| c.members == 12));
    }

    #[test]
    fn dixon_orbit_contains_watson_and_whipple_patterns() {
        let classes = orbit(&dixon_template());
        // Watson: 3F2(A, B, C; (A+B+1)/2, 2C)
        let watson = Template::new(
            vec![rf("A"), rf("B"), rf("C")],
            vec![rf("(/ (+ A B 1) 2)"), rf("(* 2 C)")],
        );
        // Whipple: 3F2(A, 1-A, C; D, 1+2C-D)
        let whipple = Template::new(
            vec![rf("A"), rf("(- 1 A)"), rf("C")],
            vec![rf("D"), rf("(- (+ 1 (* 2 C)) D)")],
        );
        let found_watson = classes.iter().any(|c| equivalent(&c.template, &watson).is_some());
        let found_whipple = classes.iter().any(|c| equivalent(&c.template, &whipple).is_some());
        assert!(found_watson, "no Watson-shaped class in the Dixon orbit");
        assert!(found_whipple, "no Whipple-shaped class in the Dixon orbit");
    }

    // ------------------------------------------------------------------
    // equivalence
    // ------------------------------------------------------------------

    #[test]
    fn identity_equivalence() {
        let t = dixon_template();
        let eq = equivalent(&t, &t).expect("self-equivalent");
        assert!(eq.invertible);
    }

    #[test]
    fn relabeled_image_is_equivalent() {
        let t = generic_template();
        let g = group().iter().find(|g| g.relation == "T3").unwrap();
        let mut image = apply(g, &t);
        // relabel symbols: a -> 2p+1, b -> q, c -> r, f -> s2, e -> t2
        let mut relabel = BTreeMap::new();
        relabel.insert("a".to_string(), rf("(+ (* 2 p) 1)"));
        relabel.insert("b".to_string(), rf("q"));
        relabel.insert("c".to_string(), rf("r"));
        relabel.insert("f".to_string(), rf("s2"));
        relabel.insert("e".to_string(), rf("t2"));
        image.tops = image
            .tops
            .iter()
            .map(|f| f.substitute(&relabel).unwrap())
            .collect();
        image.bots = image
            .bots
            .iter()
            .map(|f| f.substitute(&relabel).unwrap())
            .collect();
        let eq = equivalent(&t, &image).expect("image equivalent to source");
        assert!(eq.invertible);
    }

    #[test]
    fn inequivalent_templates_rejected() {
        // Dixon vs a template with an unrelated second bottom
        let t2 = Template::new(
            vec![rf("a"), rf("b"), rf("c")],
            vec![rf("(+ 1 (- a b))"), rf("d")],
        );
        assert!(equivalent(&dixon_template(), &t2).is_none());
    }

    #[test]
    fn reversal_map_has_the_expected_slots() {
        let mut t = Template::new(
            vec![rf("(- 0 n)"), rf("x"), rf("y")],
            vec![rf("p"), rf("q")],
        );
        t.int_syms.insert("n".to_string());
        let r = reverse_terminating(&t).expect("terminating");
        assert_eq!(r.tops[0], rf("(- 0 n)"));
        assert_eq!(r.tops[1], rf("(- 1 n p)"));
        assert_eq!(r.tops[2], rf("(- 1 n q)"));
        assert_eq!(r.bots[0], rf("(- 1 n x)"));
        assert_eq!(r.bots[1], rf("(- 1 n y)"));
    }

    #[test]
    fn reversal_detects_reflected_terminating_pair() {
        // constants picked so only the identity image shares the excess,
        // forcing the match to go through series reversal
        let t = Template::new(
            vec![rf("-3"), rf("(/ 1 4)"), rf("(/ 1 3)")],
            vec![rf("(/ 5 4)"), rf("(/ 7 3)")],
        );
        let rt = reverse_terminating(&t).expect("terminating");
        assert!(rt.is_terminating());
        let eq = equivalent(&t, &rt).expect("reversal pair is equivalent");
        assert!(eq.via.ends_with("+rev"), "via = {}", eq.via);
        // and without matching term counts there is no equivalence
        let other = Template::new(
            vec![rf("-4"), rf("(/ 1 4)"), rf("(/ 1 3)")],
            vec![rf("(/ 5 4)"), rf("(/ 7 3)")],
        );
        assert!(equivalent(&t, &other).is_none());
    }

    // ------------------------------------------------------------------
    // cull
    // ------------------------------------------------------------------

    fn item(id: &str, t: Template) -> CullItem {
        CullItem { id: id.to_string(), template: t }
    }

    #[test]
    fn cull_drops_applied_duplicate() {
        let t = dixon_template();
        let g = group().iter().find(|g| g.relation == "T3").unwrap();
        let out = cull(
            &[item("X", t.clone()), item("Y", apply(g, &t))],
            KM_MAX,
        );
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "X");
        assert!(matches!(
            &out.dropped[0].1,
            CullReason::EquivalentTo { survivor, .. } if survivor == "X"
        ));
    }

    #[test]
    fn cull_collapses_dixon_orbit_to_one_survivor() {
        let items: Vec<CullItem> = orbit(&dixon_template())
            .into_iter()
            .enumerate()
            .map(|(i, c)| item(&format!("O{i:02}"), c.template))
            .collect();
        assert!(items.len() > 1);
        let out = cull(&items, KM_MAX);
        assert_eq!(out.kept.len(), 1, "Dixon orbit must cull to one survivor");
        // idempotent
        let again = cull(&out.kept, KM_MAX);
        assert_eq!(again.kept.len(), 1);
        assert!(again.dropped.is_empty());
    }

    #[test]
    fn cull_drops_karlsson_minton_and_divergent_entries() {
        // top exceeds a bottom by 1
        let km = Template::new(
            vec![rf("(+ d 1)"), rf("x"), rf("y")],
            vec![rf("d"), rf("p")],
        );
        // constant excess 0, nonterminating
        let divergent = Template::new(
            vec![rf("x"), rf("y"), rf("(- (+ p q) x y)")],
            vec![rf("p"), rf("q")],
        );
        // terminating with constant excess -1 must survive
        let mut term = Template::new(
            vec![rf("(- 0 n)"), rf("x"), rf("(+ 1 (- (+ p q) x))")],
            vec![rf("p"), rf("(- q n)")],
        );
        term.int_syms.insert("n".to_string());
        assert_eq!(
            term.excess_form().as_constant(),
            Some(q(-1, 1)),
            "fixture excess should be the constant -1"
        );
        assert!(term.is_terminating());
        let out = cull(
            &[item("KM", km), item("DIV", divergent), item("TERM", term)],
            KM_MAX,
        );
        let dropped_ids: Vec<&str> = out.dropped.iter().map(|(id, _)| id.as_str()).collect();
        assert!(dropped_ids.contains(&"KM"));
        assert!(dropped_ids.contains(&"DIV"));
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.kept[0].id, "TERM");
        assert!(out
            .dropped
            .iter()
            .any(|(id, r)| id == "KM" && *r == CullReason::KarlssonMinton));
        assert!(out
            .dropped
            .iter()
            .any(|(id, r)| id == "DIV" && *r == CullReason::NonpositiveExcess));
    }

    // ------------------------------------------------------------------
    // best-excess transform
    // ------------------------------------------------------------------

    #[test]
    fn best_excess_beats_or_matches_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let (tops, bots) = crate::series::sample_3f2(&mut rng);
            let here = crate::series::excess(&tops, &bots);
            let g = best_excess_transform(&tops, &bots).unwrap();
            let (it, ib) = g.apply_concrete(&tops, &bots).unwrap();
            let there = crate::series::excess(&it, &ib);
            assert!(there >= here);
            // must agree with the orbit maximum
            let max = crate::series::orbit_excesses(&tops, &bots)
                .into_iter()
                .max()
                .unwrap();
            assert_eq!(there, max);
        }
    }
}
