//! Concrete-parameter matching against catalog templates.
//!
//! Given numeric parameters `(a1, a2, a3; b1, b2)`, the matcher finds every
//! catalog entry whose template instantiates to them:
//! - all twelve slot permutations (top order times bottom order) are tried,
//!   since a series is symmetric in its tops and in its bottoms
//! - continuous symbols are bound by exact rational solving, slot by slot,
//!   so an affine match never needs a search bound
//! - integer symbols that cannot be solved for are enumerated up to `nmax`
//! - every candidate assignment is checked back into all five slots, the
//!   declared symbol kinds, and the entry constraints before it is reported
//!
//! Matches are exact: parameters are rationals, no tolerance is involved.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;

use super::{Catalog, Entry, Slot};
use crate::expr::ratform::RationalForm;

/// One successful template match.
#[derive(Clone, Debug)]
pub struct MatchResult {
    /// Matched entry id.
    pub id: String,
    /// `top_perm[i]` is the concrete top placed in template top slot `i`.
    pub top_perm: [usize; 3],
    /// `bot_perm[i]` is the concrete bottom placed in template bottom `i`.
    pub bot_perm: [usize; 2],
    /// Symbol values in entry declaration order.
    pub assignment: BTreeMap<String, BigRational>,
    /// Number of symbols bound by enumeration rather than solving.
    pub enumerated: usize,
    /// Constraints that were verified for this assignment.
    pub checks: Vec<String>,
}

impl MatchResult {
    /// Render the assignment like `a=1/2 n=2 b=3`, in declaration order.
    pub fn describe(&self, entry: &Entry) -> String {
        let parts: Vec<String> = entry
            .symbols
            .iter()
            .map(|(name, _)| format!("{name}={}", self.assignment[name]))
            .collect();
        format!("{} {}", self.id, parts.join(" "))
    }
}

const TOP_PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];
const BOT_PERMS: [[usize; 2]; 2] = [[0, 1], [1, 0]];

/// A slot paired with the concrete value it must take.
struct Goal<'a> {
    form: &'a RationalForm,
    target: &'a BigRational,
    done: bool,
}

/// Outcome of one solving pass over the open goals.
enum Pass {
    Progress,
    Stuck,
    Contradiction,
}

/// Substitute bound symbols as constants. `None` when the binding lands on
/// a pole of the slot (such a binding can never match).
fn substituted(
    form: &RationalForm,
    bound: &BTreeMap<String, BigRational>,
) -> Option<RationalForm> {
    if bound.is_empty() {
        return Some(form.clone());
    }
    let map: BTreeMap<String, RationalForm> = bound
        .iter()
        .map(|(k, v)| (k.clone(), RationalForm::constant(v.clone())))
        .collect();
    form.substitute(&map).ok()
}

/// Try to close one goal under the current binding.
///
/// Returns `Some(true)` when the goal resolved (possibly binding a symbol),
/// `Some(false)` on contradiction, `None` when the goal must wait.
fn step_goal(
    goal: &RationalForm,
    target: &BigRational,
    entry: &Entry,
    bound: &mut BTreeMap<String, BigRational>,
) -> Option<bool> {
    let Some(form) = substituted(goal, bound) else {
        return Some(false);
    };
    let vars = form.vars();
    match vars.len() {
        0 => Some(form.as_constant().as_ref() == Some(target)),
        1 => {
            let x = vars.into_iter().next().expect("one var");
            // solve num(x) - target * den(x) = 0
            let shifted = form
                .sub(&RationalForm::constant(target.clone()))
                .expect("shift by constant");
            if shifted.is_zero() {
                // the slot holds for every value of x: no information
                return Some(true);
            }
            let poly = shifted.num();
            let coeffs = poly.coeffs_in(&x);
            match coeffs.len() {
                0 => Some(true),
                1 => Some(coeffs[0].is_zero()),
                2 => {
                    let c0 = coeffs[0].as_constant().expect("ground coefficient");
                    let c1 = coeffs[1].as_constant().expect("ground coefficient");
                    if c1.is_zero() {
                        return Some(c0.is_zero());
                    }
                    let value = -c0 / c1;
                    let kind = entry.kind_of(&x).expect("declared symbol");
                    if !kind.admits(&value) {
                        return Some(false);
                    }
                    bound.insert(x, value);
                    Some(true)
                }
                // higher degree in one unknown: leave it for enumeration
                _ => None,
            }
        }
        _ => None,
    }
}

fn run_passes(
    goals: &mut [Goal<'_>],
    entry: &Entry,
    bound: &mut BTreeMap<String, BigRational>,
) -> Pass {
    loop {
        let mut progressed = false;
        let mut waiting = false;
        for goal in goals.iter_mut() {
            if goal.done {
                continue;
            }
            match step_goal(goal.form, goal.target, entry, bound) {
                Some(true) => {
                    goal.done = true;
                    progressed = true;
                }
                Some(false) => return Pass::Contradiction,
                None => waiting = true,
            }
        }
        if !waiting {
            return Pass::Progress;
        }
        if !progressed {
            return Pass::Stuck;
        }
    }
}

/// Verify a full assignment against all slots, kinds, and constraints.
fn accept(
    entry: &Entry,
    tops: &[BigRational],
    bots: &[BigRational],
    tp: [usize; 3],
    bp: [usize; 2],
    bound: &BTreeMap<String, BigRational>,
    enumerated: usize,
    out: &mut Vec<MatchResult>,
) {
    if !entry.admissible(bound) {
        return;
    }
    let (t_slots, b_slots) = entry.slots();
    let slot_ok = |slot: &Slot, want: &BigRational| {
        slot.eval(bound).map(|v| v == *want).unwrap_or(false)
    };
    for (i, slot) in t_slots.iter().enumerate() {
        if !slot_ok(slot, &tops[tp[i]]) {
            return;
        }
    }
    for (i, slot) in b_slots.iter().enumerate() {
        if !slot_ok(slot, &bots[bp[i]]) {
            return;
        }
    }
    let checks = entry
        .constraints
        .iter()
        .map(|c| format!("{} {}", c.head(), c.slot().expr.to_text()))
        .collect();
    out.push(MatchResult {
        id: entry.id.clone(),
        top_perm: tp,
        bot_perm: bp,
        assignment: bound.clone(),
        enumerated,
        checks,
    });
}

/// Solve the open goals, enumerating integer symbols when solving stalls.
fn search(
    entry: &Entry,
    tops: &[BigRational],
    bots: &[BigRational],
    tp: [usize; 3],
    bp: [usize; 2],
    goals: &mut Vec<Goal<'_>>,
    bound: &mut BTreeMap<String, BigRational>,
    enumerated: usize,
    nmax: i64,
    out: &mut Vec<MatchResult>,
) {
    let snapshot: Vec<bool> = goals.iter().map(|g| g.done).collect();
    let before = bound.clone();
    match run_passes(goals, entry, bound) {
        Pass::Contradiction => {}
        Pass::Progress => {
            if entry.symbols.iter().all(|(n, _)| bound.contains_key(n)) {
                accept(entry, tops, bots, tp, bp, bound, enumerated, out);
            }
            // all goals closed but a symbol is unbound: under-determined,
            // nothing to report
        }
        Pass::Stuck => {
            // enumerate the first unbound integer symbol
            let next = entry
                .symbols
                .iter()
                .find(|(n, k)| k.is_integer() && !bound.contains_key(n))
                .map(|(n, k)| (n.clone(), *k));
            if let Some((name, kind)) = next {
                let lo = if kind == super::SymbolKind::PositiveInteger { 1 } else { 0 };
                for v in lo..=nmax {
                    let inner_snapshot: Vec<bool> =
                        goals.iter().map(|g| g.done).collect();
                    let inner_before = bound.clone();
                    bound.insert(name.clone(), BigRational::from_integer(v.into()));
                    search(
                        entry,
                        tops,
                        bots,
                        tp,
                        bp,
                        goals,
                        bound,
                        enumerated + 1,
                        nmax,
                        out,
                    );
                    *bound = inner_before;
                    for (g, d) in goals.iter_mut().zip(&inner_snapshot) {
                        g.done = *d;
                    }
                }
            }
        }
    }
    *bound = before;
    for (g, d) in goals.iter_mut().zip(&snapshot) {
        g.done = *d;
    }
}

/// Match one entry against concrete parameters over all slot permutations.
pub fn match_entry(
    entry: &Entry,
    tops: &[BigRational],
    bots: &[BigRational],
    nmax: i64,
) -> Vec<MatchResult> {
    let mut out: Vec<MatchResult> = Vec::new();
    if !entry.matchable() {
        return out;
    }
    let (t_slots, b_slots) = entry.slots();
    for tp in TOP_PERMS {
        for bp in BOT_PERMS {
            let mut goals: Vec<Goal<'_>> = Vec::with_capacity(5);
            for (i, slot) in t_slots.iter().enumerate() {
                goals.push(Goal { form: &slot.form, target: &tops[tp[i]], done: false });
            }
            for (i, slot) in b_slots.iter().enumerate() {
                goals.push(Goal { form: &slot.form, target: &bots[bp[i]], done: false });
            }
            let mut bound = BTreeMap::new();
            search(entry, tops, bots, tp, bp, &mut goals, &mut bound, 0, nmax, &mut out);
        }
    }
    dedupe(&mut out);
    out
}

fn dedupe(results: &mut Vec<MatchResult>) {
    let mut seen: Vec<(String, BTreeMap<String, BigRational>)> = Vec::new();
    results.retain(|r| {
        let key = (r.id.clone(), r.assignment.clone());
        if seen.contains(&key) {
            false
        } else {
            seen.push(key);
            true
        }
    });
}

impl Catalog {
    /// Every entry match for concrete parameters, fewest-enumerations first
    /// and entry id as the tie break.
    pub fn match_concrete(
        &self,
        tops: &[BigRational],
        bots: &[BigRational],
        nmax: i64,
    ) -> Vec<MatchResult> {
        assert_eq!(tops.len(), 3, "a 3F2 has three tops");
        assert_eq!(bots.len(), 2, "a 3F2 has two bottoms");
        let mut out: Vec<MatchResult> = Vec::new();
        for entry in self.entries() {
            out.extend(match_entry(entry, tops, bots, nmax));
        }
        out.sort_by(|x, y| x.enumerated.cmp(&y.enumerated).then(x.id.cmp(&y.id)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::parse_entry;
    use crate::expr::sexp;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn sample_entry() -> Entry {
        let src = r#"(entry "B.18"
  (status paper)
  (symbols (a cont) (n posint) (b cont))
  (top 2 a (- 1 n))
  (bottom b (+ 2 (/ (* n (- 1 a)) (- b 2))))
  (rhs (/ (* (- (+ (* a n) 2) (+ b n)) (- b 1)) (* (- (+ 1 a) b) (- (+ b n) 2))))
  (source "test")
  (constraints (nonzero (- b 2)) (nonzero (- (+ b n) 2))))"#;
        parse_entry(&sexp::read_one(src).unwrap(), "test.cat").unwrap()
    }

    // ------------------------------------------------------------------
    // direct solving
    // ------------------------------------------------------------------

    #[test]
    fn affine_slots_solve_without_enumeration() {
        let e = sample_entry();
        let tops = vec![q(2, 1), q(1, 2), q(-1, 1)];
        let bots = vec![q(3, 1), q(3, 1)];
        let found = match_entry(&e, &tops, &bots, 8);
        assert_eq!(found.len(), 1, "one assignment expected: {found:?}");
        let m = &found[0];
        assert_eq!(m.assignment["a"], q(1, 2));
        assert_eq!(m.assignment["b"], q(3, 1));
        assert_eq!(m.assignment["n"], q(2, 1));
        assert_eq!(m.enumerated, 0, "triangular solve needs no enumeration");
        assert_eq!(m.describe(&e), "B.18 a=1/2 n=2 b=3");
    }

    #[test]
    fn permuted_parameters_still_match() {
        let e = sample_entry();
        let tops = vec![q(1, 2), q(-1, 1), q(2, 1)];
        let bots = vec![q(3, 1), q(3, 1)];
        let found = match_entry(&e, &tops, &bots, 8);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].assignment["n"], q(2, 1));
    }

    #[test]
    fn non_matching_parameters_return_nothing() {
        let e = sample_entry();
        let tops = vec![q(1, 3), q(1, 5), q(1, 7)];
        let bots = vec![q(20, 1), q(30, 1)];
        assert!(match_entry(&e, &tops, &bots, 8).is_empty());
    }

    #[test]
    fn solved_integers_ignore_the_enumeration_bound() {
        // n = 40 solves affinely from the third top, far beyond nmax; the
        // bottoms fit the template either way around, giving two readings
        let e = sample_entry();
        let tops = vec![q(2, 1), q(1, 2), q(-39, 1)];
        let bots = vec![q(3, 1), q(22, 1)];
        let found = match_entry(&e, &tops, &bots, 8);
        assert_eq!(found.len(), 2, "{found:?}");
        for m in &found {
            assert_eq!(m.assignment["n"], q(40, 1));
            assert_eq!(m.enumerated, 0);
        }
    }

    #[test]
    fn kind_violations_are_rejected_during_solving() {
        // the only consistent n would be 1/2: posint refuses it
        let e = sample_entry();
        let tops = vec![q(2, 1), q(1, 2), q(1, 2)];
        let bots = vec![q(3, 1), q(9, 4)];
        assert!(match_entry(&e, &tops, &bots, 8).is_empty());
    }

    // ------------------------------------------------------------------
    // constraints and status
    // ------------------------------------------------------------------

    #[test]
    fn constraint_failures_block_the_match() {
        // b = 2 hits the (nonzero (- b 2)) guard before slots even evaluate
        let e = sample_entry();
        let tops = vec![q(2, 1), q(1, 2), q(0, 1)];
        let bots = vec![q(2, 1), q(2, 1)];
        assert!(match_entry(&e, &tops, &bots, 8).is_empty());
    }

    #[test]
    fn negative_fixtures_never_match() {
        let src = r#"(entry "NEG.T"
  (status negative-fixture)
  (symbols (a cont))
  (top a a a)
  (bottom a a)
  (rhs 1)
  (source "test"))"#;
        let e = parse_entry(&sexp::read_one(src).unwrap(), "t").unwrap();
        let tops = vec![q(1, 2), q(1, 2), q(1, 2)];
        let bots = vec![q(1, 2), q(1, 2)];
        assert!(match_entry(&e, &tops, &bots, 8).is_empty());
    }

    #[test]
    fn lookup_off_entries_never_match() {
        let src = r#"(entry "DEF.T"
  (status paper)
  (symbols (a cont))
  (top a a a)
  (bottom a a)
  (rhs 1)
  (lookup off)
  (source "test"))"#;
        let e = parse_entry(&sexp::read_one(src).unwrap(), "t").unwrap();
        let tops = vec![q(1, 2), q(1, 2), q(1, 2)];
        let bots = vec![q(1, 2), q(1, 2)];
        assert!(match_entry(&e, &tops, &bots, 8).is_empty());
    }

    // ------------------------------------------------------------------
    // enumeration
    // ------------------------------------------------------------------

    #[test]
    fn nonlinear_integer_symbols_enumerate() {
        // n appears only squared, so no slot solves for it linearly and
        // n = 3 must be found by trial
        let src = r#"(entry "SQ.T"
  (status paper)
  (symbols (a cont) (n posint))
  (top (* n n) a (- a (* n n)))
  (bottom (+ a 1) (- a 1))
  (rhs 1)
  (source "test"))"#;
        let e = parse_entry(&sexp::read_one(src).unwrap(), "t").unwrap();
        let tops = vec![q(9, 1), q(1, 2), q(-17, 2)];
        let bots = vec![q(3, 2), q(-1, 2)];
        let found = match_entry(&e, &tops, &bots, 8);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].assignment["n"], q(3, 1));
        assert_eq!(found[0].enumerated, 1);
        // with nmax below the answer the match disappears
        assert!(match_entry(&e, &tops, &bots, 2).is_empty());
    }
}
