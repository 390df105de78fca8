//! Sampling verification and derivation replay for catalog entries.
//!
//! Two independent checks guard the catalog:
//! - [`Catalog::verify_entry`] compares an entry's closed form against the
//!   series oracle at random admissible points. Negative fixtures are
//!   expected to fail every sample; everything else must pass every sample.
//! - [`Catalog::derivation_check`] replays a recorded derivation: it finds
//!   a group element carrying the source identity onto the entry and
//!   confirms numerical agreement at three random points. Slot
//!   permutations shuffle a transformation's label, so the search walks
//!   the label's whole permutation class before giving up.
//!
//! Per-entry randomness is seeded as `seed ^ fnv1a(id)`, so runs are
//! reproducible for a fixed seed regardless of scheduling order.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use num_rational::BigRational;
use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::matcher::match_entry;
use super::sample::{draw_admissible, Draw};
use super::{Body, Catalog, Entry, EntryStatus};
use crate::contiguity::SessionSpecials;
use crate::error::{Error, Result};
use crate::expr::{eval, EvalCtx};
use crate::numerics::real::{digits_to_bits, rel_err, Real};
use crate::series::{pfq_exact, pfq_value};
use crate::thomae::{compose, find_element, group, GroupElement};

/// Outcome class of one entry verification.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyStatus {
    /// Every sample agreed within tolerance.
    Pass,
    /// At least one sample disagreed.
    Fail,
    /// A negative fixture failed every sample, as it must.
    XFail,
    /// A negative fixture passed at least one sample: the fixture is bad.
    XPass,
}

impl VerifyStatus {
    /// Token used in reports and CSV output.
    pub fn token(self) -> &'static str {
        match self {
            VerifyStatus::Pass => "pass",
            VerifyStatus::Fail => "fail",
            VerifyStatus::XFail => "xfail",
            VerifyStatus::XPass => "xpass",
        }
    }

    /// True when the outcome is the expected one for the entry's status.
    pub fn expected(self) -> bool {
        matches!(self, VerifyStatus::Pass | VerifyStatus::XFail)
    }
}

/// Verification report for one entry.
#[derive(Clone, Debug)]
pub struct Report {
    pub id: String,
    pub status: VerifyStatus,
    /// Samples actually compared.
    pub samples: usize,
    /// Samples that disagreed beyond tolerance.
    pub failures: usize,
    /// Draws abandoned because a side could not be evaluated there.
    pub skipped: usize,
    /// Largest relative error seen across the compared samples.
    pub max_rel_err: f64,
    pub notes: Vec<String>,
}

impl Report {
    /// Column header matching [`Report::csv_line`].
    pub fn csv_header() -> &'static str {
        "id,status,samples,max_rel_err,provenance"
    }

    /// One CSV row; `provenance` is the entry's source label.
    pub fn csv_line(&self, catalog: &Catalog) -> String {
        let provenance = catalog
            .get(&self.id)
            .map(|e| e.source.clone())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.id,
            self.status.token(),
            self.samples,
            fmt_err(self.max_rel_err),
            provenance
        )
    }
}

/// Render a relative error compactly and deterministically.
pub fn fmt_err(err: f64) -> String {
    if err == 0.0 {
        "0".to_string()
    } else {
        format!("{err:.3e}")
    }
}

/// FNV-1a, fixed constants, so per-entry seeds never depend on the
/// platform or process (the standard hasher is randomized per process).
pub fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic per-entry RNG.
fn entry_rng(seed: u64, id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(id))
}

/// Eval-error retries allowed while collecting one comparable sample.
const EVAL_RETRIES: usize = 40;

fn rational_rel_err(lhs: &BigRational, rhs: &BigRational) -> f64 {
    if lhs == rhs {
        return 0.0;
    }
    let denom = if lhs.is_zero() { rhs.clone() } else { lhs.clone() };
    let ratio = (lhs - rhs) / denom;
    let bits = digits_to_bits(40);
    Real::from_rational(&ratio, bits).abs().to_f64()
}

/// Compare both sides of an entry at one draw. Returns the relative error.
fn compare_at(
    entry: &Entry,
    draw: &Draw,
    digits: usize,
    specials: &SessionSpecials,
) -> Result<f64> {
    match &entry.body {
        Body::Standard { rhs, .. } => {
            let work = digits + 5;
            let lhs = pfq_value(&draw.tops, &draw.bots, work)?;
            let ctx = EvalCtx { digits: work, env: &draw.env, specials };
            let rhs_v = eval(rhs, &ctx)?.to_real(work);
            let bits = digits_to_bits(work);
            Ok(rel_err(&lhs, &rhs_v, bits).to_f64())
        }
        Body::Fixture { terms, .. } => {
            let lhs = pfq_exact(&draw.tops, &draw.bots)?;
            let mut rhs = BigRational::zero();
            for term in terms {
                let coeff = term.coeff.eval(&draw.env)?;
                let tt = term
                    .tops
                    .iter()
                    .map(|s| s.eval(&draw.env))
                    .collect::<Result<Vec<_>>>()?;
                let tb = term
                    .bots
                    .iter()
                    .map(|s| s.eval(&draw.env))
                    .collect::<Result<Vec<_>>>()?;
                rhs += coeff * pfq_exact(&tt, &tb)?;
            }
            Ok(rational_rel_err(&lhs, &rhs))
        }
    }
}

impl Catalog {
    /// Verify one entry at `samples` random admissible points.
    ///
    /// Comparisons run at `digits + 5` working digits and pass when the
    /// relative error is at most `10^tol_exp`.
    pub fn verify_entry(
        &self,
        id: &str,
        samples: usize,
        seed: u64,
        digits: usize,
        tol_exp: i64,
    ) -> Result<Report> {
        let entry = self
            .get(id)
            .ok_or_else(|| Error::Catalog { id: id.to_string(), msg: "unknown entry".into() })?;
        let mut rng = entry_rng(seed, id);
        let specials = SessionSpecials::new(digits + 5);
        let tol = 10f64.powi(tol_exp as i32);
        let mut failures = 0usize;
        let mut skipped = 0usize;
        let mut max_err = 0f64;
        let mut notes = Vec::new();

        for index in 0..samples {
            let mut compared = false;
            for _ in 0..EVAL_RETRIES {
                let draw = draw_admissible(entry, &mut rng)?;
                match compare_at(entry, &draw, digits, &specials) {
                    Ok(err) => {
                        if err > max_err {
                            max_err = err;
                        }
                        if err > tol {
                            failures += 1;
                            if entry.status != EntryStatus::NegativeFixture {
                                notes.push(format!(
                                    "sample {index}: rel err {} at {:?}",
                                    fmt_err(err),
                                    draw.env
                                ));
                            }
                        }
                        compared = true;
                        break;
                    }
                    Err(_) => {
                        skipped += 1;
                    }
                }
            }
            if !compared {
                return Err(Error::SamplingExhausted(format!(
                    "no evaluable point for {id} after {EVAL_RETRIES} draws"
                )));
            }
        }

        let status = match entry.status {
            EntryStatus::NegativeFixture => {
                if failures == samples && samples > 0 {
                    VerifyStatus::XFail
                } else {
                    VerifyStatus::XPass
                }
            }
            _ => {
                if failures == 0 {
                    VerifyStatus::Pass
                } else {
                    VerifyStatus::Fail
                }
            }
        };
        Ok(Report {
            id: id.to_string(),
            status,
            samples,
            failures,
            skipped,
            max_rel_err: max_err,
            notes,
        })
    }

    /// Verify every entry in parallel, one report per entry in file order.
    ///
    /// Entries whose sampling fails outright are reported as failures
    /// rather than aborting the run.
    pub fn verify_all(
        &self,
        samples: usize,
        seed: u64,
        digits: usize,
        tol_exp: i64,
    ) -> Vec<Report> {
        self.entries()
            .par_iter()
            .map(|e| {
                self.verify_entry(&e.id, samples, seed, digits, tol_exp)
                    .unwrap_or_else(|err| Report {
                        id: e.id.clone(),
                        status: VerifyStatus::Fail,
                        samples: 0,
                        failures: 0,
                        skipped: 0,
                        max_rel_err: 0.0,
                        notes: vec![format!("{err}")],
                    })
            })
            .collect()
    }
}

// ----------------------------------------------------------------------
// derivation replay
// ----------------------------------------------------------------------

/// Result of replaying one entry's recorded derivation.
#[derive(Clone, Debug)]
pub struct DerivationOutcome {
    pub id: String,
    /// Source entry id, when a derivation is recorded.
    pub source: Option<String>,
    /// Group element that reproduced the entry, when one was found.
    pub via: Option<String>,
    pub passed: bool,
    pub note: String,
}

/// Relation labels reachable from `label` by pre-permuting the series
/// slots. Replay must search this whole class: the recorded label speaks
/// about one slot ordering, and catalog templates use their own.
fn relation_class(label: &str) -> &'static BTreeSet<String> {
    static CLASSES: OnceLock<BTreeMap<String, BTreeSet<String>>> = OnceLock::new();
    let classes = CLASSES.get_or_init(|| {
        let perms: Vec<&GroupElement> =
            group().iter().filter(|g| g.relation == "T10").collect();
        let mut out = BTreeMap::new();
        for rel in crate::thomae::relations() {
            let canon = group()
                .iter()
                .find(|g| {
                    g.relation == rel.id && g.top_perm == [0, 1, 2] && g.bot_perm == [0, 1]
                })
                .expect("canonical element");
            let mut set = BTreeSet::new();
            for tau in &perms {
                let (map, num, den) = compose(tau, canon);
                let found = find_element(&map, &num, &den).expect("group is closed");
                set.insert(found.relation.to_string());
            }
            out.insert(rel.id.to_string(), set);
        }
        out
    });
    classes.get(label).expect("known relation label")
}

/// Candidate elements for a chain label, most plausible first: the label's
/// own twelve variants, then the rest of its permutation class, then the
/// remaining elements as a safety net.
fn candidates_for(label: &str) -> Vec<&'static GroupElement> {
    let class = relation_class(label);
    let mut first = Vec::new();
    let mut second = Vec::new();
    let mut rest = Vec::new();
    for g in group() {
        if g.relation == label {
            first.push(g);
        } else if class.contains(g.relation) {
            second.push(g);
        } else {
            rest.push(g);
        }
    }
    first.extend(second);
    first.extend(rest);
    first
}

/// Compose a chain of canonical relation elements into one element.
fn compose_chain(chain: &[String]) -> Option<&'static GroupElement> {
    let canon = |label: &str| {
        group().iter().find(|g| {
            g.relation == label && g.top_perm == [0, 1, 2] && g.bot_perm == [0, 1]
        })
    };
    let mut acc = canon(&chain[0])?;
    for label in &chain[1..] {
        let step = canon(label)?;
        let (map, num, den) = compose(acc, step);
        acc = find_element(&map, &num, &den)?;
    }
    Some(acc)
}

/// Replay points drawn from the source entry, with the source value cached.
struct SourcePoint {
    draw: Draw,
    value: Real,
}

/// Digits used for derivation replay comparisons.
const REPLAY_DIGITS: usize = 30;
/// Relative tolerance for replay agreement.
const REPLAY_TOL: f64 = 1e-20;
/// Admissible points kept in the replay pool.
const POOL_SIZE: usize = 8;
/// Points that must agree for a candidate to be accepted.
const POINTS_NEEDED: usize = 3;

fn source_pool(
    source: &Entry,
    rng: &mut ChaCha8Rng,
    specials: &SessionSpecials,
) -> Result<Vec<SourcePoint>> {
    let mut pool = Vec::new();
    let mut tries = 0usize;
    while pool.len() < POOL_SIZE && tries < EVAL_RETRIES {
        tries += 1;
        let draw = draw_admissible(source, rng)?;
        let Some(rhs) = source.rhs() else {
            return Err(Error::Catalog {
                id: source.id.clone(),
                msg: "derivation source must be a standard entry".into(),
            });
        };
        let ctx = EvalCtx { digits: REPLAY_DIGITS, env: &draw.env, specials };
        match eval(rhs, &ctx) {
            Ok(v) => {
                let value = v.to_real(REPLAY_DIGITS);
                pool.push(SourcePoint { draw, value });
            }
            Err(_) => continue,
        }
    }
    if pool.len() < POINTS_NEEDED {
        return Err(Error::SamplingExhausted(format!(
            "only {} evaluable replay points for {}",
            pool.len(),
            source.id
        )));
    }
    Ok(pool)
}

/// Try one candidate element across the pool. Success needs
/// [`POINTS_NEEDED`] agreeing points; a finite, comparable disagreement
/// disqualifies the candidate outright, while pole-struck or unmatchable
/// points are merely skipped.
fn candidate_works(
    entry: &Entry,
    rhs: &crate::expr::Expr,
    g: &GroupElement,
    pool: &[SourcePoint],
    specials: &SessionSpecials,
) -> bool {
    let bits = digits_to_bits(REPLAY_DIGITS);
    let tol = Real::from_f64(REPLAY_TOL, bits);
    let mut agreed = 0usize;
    for point in pool {
        // cheap structural steps first: image parameters and the template
        // match cost nothing compared to gamma prefactors
        let Ok((tops_i, bots_i)) = g.apply_concrete(&point.draw.tops, &point.draw.bots)
        else {
            continue;
        };
        let matches = match_entry(entry, &tops_i, &bots_i, 8);
        if matches.is_empty() {
            continue;
        }
        if !g.prefactor_finite(&point.draw.tops, &point.draw.bots) {
            continue;
        }
        let Ok(pre) = g.prefactor_concrete(&point.draw.tops, &point.draw.bots, REPLAY_DIGITS)
        else {
            continue;
        };
        if pre.is_zero() {
            continue;
        }
        let target = point.value.div(&pre, bits);
        // None: no comparison possible here; Some(v): a comparison happened
        let mut point_ok: Option<bool> = None;
        for m in &matches {
            let ctx = EvalCtx { digits: REPLAY_DIGITS, env: &m.assignment, specials };
            let Ok(value) = eval(rhs, &ctx) else { continue };
            let value = value.to_real(REPLAY_DIGITS);
            let err = rel_err(&value, &target, bits);
            if err.partial_cmp_val(&tol) != Some(std::cmp::Ordering::Greater) {
                point_ok = Some(true);
                break;
            }
            point_ok = Some(false);
        }
        match point_ok {
            Some(true) => {
                agreed += 1;
                if agreed >= POINTS_NEEDED {
                    return true;
                }
            }
            Some(false) => return false,
            None => continue,
        }
    }
    false
}

impl Catalog {
    /// Replay one entry's recorded derivation numerically.
    ///
    /// The recorded chain is composed into a relation label, and every
    /// group element in that label's permutation class is tried until one
    /// maps the source identity onto this entry at three random points.
    /// Symbolic equality is not required; numerical agreement at 1e-20 is.
    pub fn derivation_check(&self, id: &str, seed: u64) -> Result<DerivationOutcome> {
        let entry = self
            .get(id)
            .ok_or_else(|| Error::Catalog { id: id.to_string(), msg: "unknown entry".into() })?;
        let Some(der) = &entry.derived_from else {
            return Ok(DerivationOutcome {
                id: id.to_string(),
                source: None,
                via: None,
                passed: true,
                note: "no derivation recorded".into(),
            });
        };
        let source = self.get(&der.source_id).ok_or_else(|| Error::Catalog {
            id: id.to_string(),
            msg: format!("derivation source `{}` missing", der.source_id),
        })?;
        if !entry.is_standard() {
            return Err(Error::Catalog {
                id: id.to_string(),
                msg: "derivation replay needs a standard entry".into(),
            });
        }
        let composed = compose_chain(&der.chain).ok_or_else(|| Error::Catalog {
            id: id.to_string(),
            msg: "derivation chain does not compose".into(),
        })?;
        let rhs = entry.rhs().expect("standard entry");
        let mut rng = entry_rng(seed, id);
        let specials = SessionSpecials::new(REPLAY_DIGITS);
        let pool = source_pool(source, &mut rng, &specials)?;
        for g in candidates_for(composed.relation) {
            if candidate_works(entry, rhs, g, &pool, &specials) {
                return Ok(DerivationOutcome {
                    id: id.to_string(),
                    source: Some(der.source_id.clone()),
                    via: Some(g.name()),
                    passed: true,
                    note: format!("replayed from {} via {}", der.source_id, g.name()),
                });
            }
        }
        Ok(DerivationOutcome {
            id: id.to_string(),
            source: Some(der.source_id.clone()),
            via: None,
            passed: false,
            note: format!(
                "no group element in the class of {} carries {} onto {}",
                composed.relation, der.source_id, id
            ),
        })
    }

    /// Replay every recorded derivation in parallel.
    pub fn derivation_check_all(&self, seed: u64) -> Vec<DerivationOutcome> {
        self.entries()
            .par_iter()
            .filter(|e| e.derived_from.is_some())
            .map(|e| {
                self.derivation_check(&e.id, seed).unwrap_or_else(|err| DerivationOutcome {
                    id: e.id.clone(),
                    source: e.derived_from.as_ref().map(|d| d.source_id.clone()),
                    via: None,
                    passed: false,
                    note: format!("{err}"),
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // ------------------------------------------------------------------
    // deterministic seeding
    // ------------------------------------------------------------------

    #[test]
    fn fnv1a_is_stable() {
        // fixed reference values so a platform change cannot slip through
        assert_eq!(fnv1a(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a("a"), 0xaf63_dc4c_8601_ec8c);
        assert_ne!(fnv1a("B.18"), fnv1a("B.19"));
    }

    #[test]
    fn error_formatting_is_compact() {
        assert_eq!(fmt_err(0.0), "0");
        assert_eq!(fmt_err(1.25e-41), "1.250e-41");
    }

    // ------------------------------------------------------------------
    // relation classes
    // ------------------------------------------------------------------

    #[test]
    fn relation_classes_partition_into_expected_sizes() {
        // pre-permuting slots never changes the identity relation, and the
        // remaining relations split into classes of three and six
        assert_eq!(relation_class("T10").len(), 1);
        assert_eq!(relation_class("T1").len(), 3);
        assert_eq!(relation_class("T2").len(), 3);
        assert_eq!(relation_class("T5").len(), 3);
        for label in ["T3", "T4", "T6", "T7", "T8", "T9"] {
            assert_eq!(relation_class(label).len(), 6, "{label}");
        }
        assert!(relation_class("T3").contains("T4"));
        assert!(relation_class("T1").contains("T5"));
    }

    #[test]
    fn candidates_put_the_labeled_relation_first() {
        let c = candidates_for("T8");
        assert_eq!(c.len(), 120);
        for g in &c[..12] {
            assert_eq!(g.relation, "T8");
        }
        for g in &c[12..72] {
            assert!(relation_class("T8").contains(g.relation));
        }
    }
}
