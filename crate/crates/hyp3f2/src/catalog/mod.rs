//! Closed-form catalog: the identity database, its file format, and queries.
//!
//! Provides:
//! - [`Entry`]: one closed-form identity, carrying template parameters over
//!   declared symbols, a right-hand side, admissibility constraints, and
//!   provenance
//! - [`Catalog`]: an immutable, validated collection loaded from `.cat`
//!   files or from the embedded copy shipped with the crate
//! - concrete-parameter matching ([`Catalog::match_concrete`]), the
//!   evaluation pipeline ([`Catalog::evaluate`]), sampling verification
//!   ([`Catalog::verify_entry`]), and derivation replay
//!   ([`Catalog::derivation_check`])
//!
//! The file format is s-expression blocks, one `(entry "ID" ...)` per
//! identity. Loading validates every entry: symbols must be declared and
//! used, parameter slots must be rational forms over the declared symbols,
//! and a stated excess annotation must equal the bottom sum minus the top
//! sum exactly. Serialization is canonical and the shipped files are
//! exactly the canonical form, so a load/serialize round trip is
//! byte-identical.
//!
//! Entry status drives behavior: `paper` and `seed-external` entries join
//! the matcher and must pass verification; `negative-fixture` entries are
//! excluded from lookup and must fail it.

mod lookup;
mod matcher;
mod sample;
mod verify;

pub use lookup::{EvalOutcome, OutcomeKind};
pub use matcher::MatchResult;
pub use sample::Draw;
pub use verify::{DerivationOutcome, Report, VerifyStatus};

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::expr::ratform::RationalForm;
use crate::expr::sexp::{self, SExp};
use crate::expr::Expr;
use crate::thomae::Template;

// ----------------------------------------------------------------------
// data model
// ----------------------------------------------------------------------

/// Admissible value range of a declared symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SymbolKind {
    /// Any rational value (file token `cont`).
    Continuous,
    /// Integer at least one (file token `posint`).
    PositiveInteger,
    /// Integer at least zero (file token `nonneg`).
    NonnegativeInteger,
}

impl SymbolKind {
    /// File token for this kind.
    pub fn token(self) -> &'static str {
        match self {
            SymbolKind::Continuous => "cont",
            SymbolKind::PositiveInteger => "posint",
            SymbolKind::NonnegativeInteger => "nonneg",
        }
    }

    fn from_token(tok: &str) -> Option<SymbolKind> {
        match tok {
            "cont" => Some(SymbolKind::Continuous),
            "posint" => Some(SymbolKind::PositiveInteger),
            "nonneg" => Some(SymbolKind::NonnegativeInteger),
            _ => None,
        }
    }

    /// True for the two integer-constrained kinds.
    pub fn is_integer(self) -> bool {
        !matches!(self, SymbolKind::Continuous)
    }

    /// True when `v` lies in the kind's range.
    pub fn admits(self, v: &BigRational) -> bool {
        use num_traits::{One, Zero};
        match self {
            SymbolKind::Continuous => true,
            SymbolKind::PositiveInteger => v.is_integer() && *v >= BigRational::one(),
            SymbolKind::NonnegativeInteger => v.is_integer() && *v >= BigRational::zero(),
        }
    }
}

/// How the entry participates in verification and lookup.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntryStatus {
    /// Printed identity: verified, matched, and replayed.
    Paper,
    /// Literature seed kept for derivation chains: verified and matched.
    SeedExternal,
    /// Known-false identity: excluded from lookup, must fail verification.
    NegativeFixture,
}

impl EntryStatus {
    /// File token for this status.
    pub fn token(self) -> &'static str {
        match self {
            EntryStatus::Paper => "paper",
            EntryStatus::SeedExternal => "seed-external",
            EntryStatus::NegativeFixture => "negative-fixture",
        }
    }

    fn from_token(tok: &str) -> Option<EntryStatus> {
        match tok {
            "paper" => Some(EntryStatus::Paper),
            "seed-external" => Some(EntryStatus::SeedExternal),
            "negative-fixture" => Some(EntryStatus::NegativeFixture),
            _ => None,
        }
    }
}

/// One template parameter slot: the expression as written in the file and
/// its canonical rational form.
#[derive(Clone, Debug)]
pub struct Slot {
    pub expr: Expr,
    pub form: RationalForm,
}

impl Slot {
    fn from_sexp(node: &SExp) -> Result<Slot> {
        let expr = Expr::from_sexp(node)?;
        let form = RationalForm::from_expr(&expr)
            .map_err(|e| node.err(format!("parameter slot must be rational: {e}")))?;
        Ok(Slot { expr, form })
    }

    /// Evaluate the slot at a concrete assignment.
    pub fn eval(&self, env: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        self.form.eval(env)
    }
}

/// Admissibility constraint on the symbol assignment.
#[derive(Clone, Debug)]
pub enum Constraint {
    /// The form must not vanish (excluded rational values, pole guards).
    Nonzero(Slot),
    /// The form must be strictly positive (sign conditions, radicands).
    Positive(Slot),
}

impl Constraint {
    /// True when the assignment satisfies the constraint.
    pub fn holds(&self, env: &BTreeMap<String, BigRational>) -> bool {
        use num_traits::Zero;
        match self {
            Constraint::Nonzero(s) => {
                s.eval(env).map(|v| !v.is_zero()).unwrap_or(false)
            }
            Constraint::Positive(s) => {
                s.eval(env).map(|v| v > BigRational::zero()).unwrap_or(false)
            }
        }
    }

    fn head(&self) -> &'static str {
        match self {
            Constraint::Nonzero(_) => "nonzero",
            Constraint::Positive(_) => "positive",
        }
    }

    fn slot(&self) -> &Slot {
        match self {
            Constraint::Nonzero(s) | Constraint::Positive(s) => s,
        }
    }
}

/// One right-hand-side series term of a fixture identity.
#[derive(Clone, Debug)]
pub struct FixtureTerm {
    pub coeff: Slot,
    pub tops: Vec<Slot>,
    pub bots: Vec<Slot>,
}

/// The identity's shape.
#[derive(Clone, Debug)]
pub enum Body {
    /// A 3F2 with a closed-form (or recursion-head) right-hand side.
    Standard { tops: Vec<Slot>, bots: Vec<Slot>, rhs: Expr },
    /// A higher-order series equated to a combination of 3F2 terms.
    Fixture { tops: Vec<Slot>, bots: Vec<Slot>, terms: Vec<FixtureTerm> },
}

/// In-catalog derivation provenance: a source entry and a chain of
/// transformation ids to replay.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub source_id: String,
    pub chain: Vec<String>,
}

/// One catalog entry.
#[derive(Clone, Debug)]
pub struct Entry {
    pub id: String,
    pub status: EntryStatus,
    /// Declared symbols in declaration order.
    pub symbols: Vec<(String, SymbolKind)>,
    pub body: Body,
    /// Stated excess annotation, when the printed table carries one.
    pub excess: Option<Slot>,
    /// Human-readable literature source label.
    pub source: String,
    /// Machine-replayable derivation, when the source is in the catalog.
    pub derived_from: Option<Derivation>,
    pub constraints: Vec<Constraint>,
    /// False for definitional entries excluded from matching and lookup.
    pub lookup: bool,
    pub note: Option<String>,
    /// Basename of the file the entry was loaded from.
    pub origin: String,
}

impl Entry {
    /// Kind of a declared symbol, if declared.
    pub fn kind_of(&self, name: &str) -> Option<SymbolKind> {
        self.symbols.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }

    /// Template parameter slots, tops then bottoms.
    pub fn slots(&self) -> (&[Slot], &[Slot]) {
        match &self.body {
            Body::Standard { tops, bots, .. } | Body::Fixture { tops, bots, .. } => {
                (tops, bots)
            }
        }
    }

    /// Closed-form right-hand side of a standard entry.
    pub fn rhs(&self) -> Option<&Expr> {
        match &self.body {
            Body::Standard { rhs, .. } => Some(rhs),
            Body::Fixture { .. } => None,
        }
    }

    /// True for the 3F2-shaped entries the matcher serves.
    pub fn is_standard(&self) -> bool {
        matches!(self.body, Body::Standard { .. })
    }

    /// True when the entry participates in matching and lookup.
    pub fn matchable(&self) -> bool {
        self.lookup && self.status != EntryStatus::NegativeFixture && self.is_standard()
    }

    /// Instantiate the template at an assignment.
    pub fn instantiate(
        &self,
        env: &BTreeMap<String, BigRational>,
    ) -> Result<(Vec<BigRational>, Vec<BigRational>)> {
        let (tops, bots) = self.slots();
        let t = tops.iter().map(|s| s.eval(env)).collect::<Result<Vec<_>>>()?;
        let b = bots.iter().map(|s| s.eval(env)).collect::<Result<Vec<_>>>()?;
        Ok((t, b))
    }

    /// True when the assignment satisfies kinds and constraints.
    pub fn admissible(&self, env: &BTreeMap<String, BigRational>) -> bool {
        for (name, kind) in &self.symbols {
            match env.get(name) {
                Some(v) if kind.admits(v) => {}
                _ => return false,
            }
        }
        self.constraints.iter().all(|c| c.holds(env))
    }

    /// The entry as a transformation-ready template (standard entries).
    pub fn template(&self) -> Option<Template> {
        let Body::Standard { tops, bots, rhs } = &self.body else {
            return None;
        };
        let mut t = Template::new(
            tops.iter().map(|s| s.form.clone()).collect(),
            bots.iter().map(|s| s.form.clone()).collect(),
        );
        t.rhs = Some(rhs.clone());
        t.int_syms = self
            .symbols
            .iter()
            .filter(|(_, k)| k.is_integer())
            .map(|(n, _)| n.clone())
            .collect();
        Some(t)
    }

    /// Excess of the template as a canonical rational form.
    pub fn computed_excess(&self) -> RationalForm {
        let (tops, bots) = self.slots();
        let sum = |slots: &[Slot]| {
            slots.iter().fold(RationalForm::zero(), |acc, s| {
                acc.add(&s.form).expect("slot sum")
            })
        };
        sum(bots).sub(&sum(tops)).expect("excess difference")
    }
}

// ----------------------------------------------------------------------
// loading
// ----------------------------------------------------------------------

fn string_atom(node: &SExp) -> Option<String> {
    let text = node.as_atom()?;
    let inner = text.strip_prefix('"')?.strip_suffix('"')?;
    Some(inner.to_string())
}

fn catalog_err(id: &str, msg: impl Into<String>) -> Error {
    Error::Catalog { id: id.to_string(), msg: msg.into() }
}

/// Parse one `(entry ...)` block.
fn parse_entry(node: &SExp, origin: &str) -> Result<Entry> {
    let items = node
        .as_list()
        .ok_or_else(|| node.err("expected an (entry ...) list"))?;
    if node.head() != Some("entry") {
        return Err(node.err("expected an (entry ...) list"));
    }
    if items.len() < 2 {
        return Err(node.err("entry needs an id"));
    }
    let id = string_atom(&items[1])
        .ok_or_else(|| items[1].err("entry id must be a quoted string"))?;
    let ce = |msg: String| catalog_err(&id, msg);

    let mut status = None;
    let mut symbols: Option<Vec<(String, SymbolKind)>> = None;
    let mut tops: Option<Vec<Slot>> = None;
    let mut bots: Option<Vec<Slot>> = None;
    let mut rhs: Option<Expr> = None;
    let mut terms: Option<Vec<FixtureTerm>> = None;
    let mut excess: Option<Slot> = None;
    let mut source: Option<String> = None;
    let mut derived_from: Option<Derivation> = None;
    let mut constraints: Vec<Constraint> = Vec::new();
    let mut lookup = true;
    let mut note: Option<String> = None;

    for field in &items[2..] {
        let head = field
            .head()
            .ok_or_else(|| field.err("entry field must be a list with a keyword head"))?;
        let args = &field.as_list().expect("list")[1..];
        let dup = |name: &str| ce(format!("duplicate field ({name} ...)"));
        match head {
            "status" => {
                if status.is_some() {
                    return Err(dup("status"));
                }
                let tok = args
                    .first()
                    .and_then(|a| a.as_atom())
                    .ok_or_else(|| field.err("status needs a token"))?;
                status = Some(
                    EntryStatus::from_token(tok)
                        .ok_or_else(|| ce(format!("unknown status `{tok}`")))?,
                );
            }
            "symbols" => {
                if symbols.is_some() {
                    return Err(dup("symbols"));
                }
                let mut out = Vec::new();
                for decl in args {
                    let pair = decl
                        .as_list()
                        .ok_or_else(|| decl.err("symbol declaration must be (name kind)"))?;
                    if pair.len() != 2 {
                        return Err(decl.err("symbol declaration must be (name kind)"));
                    }
                    let name = pair[0]
                        .as_atom()
                        .ok_or_else(|| pair[0].err("symbol name must be an atom"))?;
                    let kind_tok = pair[1]
                        .as_atom()
                        .ok_or_else(|| pair[1].err("symbol kind must be an atom"))?;
                    let kind = SymbolKind::from_token(kind_tok)
                        .ok_or_else(|| ce(format!("unknown symbol kind `{kind_tok}`")))?;
                    if out.iter().any(|(n, _): &(String, _)| n == name) {
                        return Err(ce(format!("symbol `{name}` declared twice")));
                    }
                    out.push((name.to_string(), kind));
                }
                symbols = Some(out);
            }
            "top" => {
                if tops.is_some() {
                    return Err(dup("top"));
                }
                tops = Some(args.iter().map(Slot::from_sexp).collect::<Result<_>>()?);
            }
            "bottom" => {
                if bots.is_some() {
                    return Err(dup("bottom"));
                }
                bots = Some(args.iter().map(Slot::from_sexp).collect::<Result<_>>()?);
            }
            "rhs" => {
                if rhs.is_some() {
                    return Err(dup("rhs"));
                }
                if args.len() != 1 {
                    return Err(field.err("rhs takes one expression"));
                }
                rhs = Some(Expr::from_sexp(&args[0])?);
            }
            "terms" => {
                if terms.is_some() {
                    return Err(dup("terms"));
                }
                let mut out = Vec::new();
                for t in args {
                    out.push(parse_fixture_term(t)?);
                }
                terms = Some(out);
            }
            "excess" => {
                if excess.is_some() {
                    return Err(dup("excess"));
                }
                if args.len() != 1 {
                    return Err(field.err("excess takes one expression"));
                }
                excess = Some(Slot::from_sexp(&args[0])?);
            }
            "source" => {
                if source.is_some() {
                    return Err(dup("source"));
                }
                source = Some(
                    args.first()
                        .and_then(string_atom)
                        .ok_or_else(|| field.err("source needs a quoted string"))?,
                );
            }
            "derived-from" => {
                if derived_from.is_some() {
                    return Err(dup("derived-from"));
                }
                let src = args
                    .first()
                    .and_then(string_atom)
                    .ok_or_else(|| field.err("derived-from needs a quoted entry id"))?;
                let mut chain = Vec::new();
                for step in &args[1..] {
                    let tok = step
                        .as_atom()
                        .ok_or_else(|| step.err("derivation step must be an atom"))?;
                    if !crate::thomae::relations().iter().any(|r| r.id == tok) {
                        return Err(ce(format!("unknown transformation `{tok}` in chain")));
                    }
                    chain.push(tok.to_string());
                }
                if chain.is_empty() {
                    return Err(ce("derived-from needs at least one step".into()));
                }
                derived_from = Some(Derivation { source_id: src, chain });
            }
            "constraints" => {
                if !constraints.is_empty() {
                    return Err(dup("constraints"));
                }
                for c in args {
                    let chead = c
                        .head()
                        .ok_or_else(|| c.err("constraint must be (nonzero f) or (positive f)"))?;
                    let cargs = &c.as_list().expect("list")[1..];
                    if cargs.len() != 1 {
                        return Err(c.err("constraint takes one expression"));
                    }
                    let slot = Slot::from_sexp(&cargs[0])?;
                    match chead {
                        "nonzero" => constraints.push(Constraint::Nonzero(slot)),
                        "positive" => constraints.push(Constraint::Positive(slot)),
                        other => return Err(ce(format!("unknown constraint `{other}`"))),
                    }
                }
            }
            "lookup" => {
                match args.first().and_then(|a| a.as_atom()) {
                    Some("off") => lookup = false,
                    _ => return Err(field.err("lookup field only accepts `off`")),
                }
            }
            "note" => {
                if note.is_some() {
                    return Err(dup("note"));
                }
                note = Some(
                    args.first()
                        .and_then(string_atom)
                        .ok_or_else(|| field.err("note needs a quoted string"))?,
                );
            }
            other => return Err(ce(format!("unknown field ({other} ...)"))),
        }
    }

    let status = status.ok_or_else(|| ce("missing (status ...)".into()))?;
    let symbols = symbols.ok_or_else(|| ce("missing (symbols ...)".into()))?;
    let tops = tops.ok_or_else(|| ce("missing (top ...)".into()))?;
    let bots = bots.ok_or_else(|| ce("missing (bottom ...)".into()))?;
    let source = source.ok_or_else(|| ce("missing (source ...)".into()))?;

    let body = match (tops.len(), bots.len(), rhs, terms) {
        (3, 2, Some(rhs), None) => Body::Standard { tops, bots, rhs },
        (3, 2, None, _) => return Err(ce("a 3F2 entry needs (rhs ...)".into())),
        (4, 3, None, Some(terms)) if !terms.is_empty() => {
            Body::Fixture { tops, bots, terms }
        }
        (4, 3, _, _) => {
            return Err(ce("a fixture entry needs (terms ...) and no (rhs ...)".into()))
        }
        (t, b, _, _) => {
            return Err(ce(format!("unsupported parameter shape: {t} tops, {b} bottoms")))
        }
    };

    let entry = Entry {
        id: id.clone(),
        status,
        symbols,
        body,
        excess,
        source,
        derived_from,
        constraints,
        lookup,
        note,
        origin: origin.to_string(),
    };
    validate_entry(&entry)?;
    Ok(entry)
}

fn parse_fixture_term(node: &SExp) -> Result<FixtureTerm> {
    if node.head() != Some("term") {
        return Err(node.err("expected (term coeff (top ...) (bottom ...))"));
    }
    let items = &node.as_list().expect("list")[1..];
    if items.len() != 3 {
        return Err(node.err("term takes a coefficient, (top ...), and (bottom ...)"));
    }
    let coeff = Slot::from_sexp(&items[0])?;
    let tops_n = &items[1];
    let bots_n = &items[2];
    if tops_n.head() != Some("top") || bots_n.head() != Some("bottom") {
        return Err(node.err("term parameter lists must be (top ...) and (bottom ...)"));
    }
    let tops = tops_n.as_list().expect("list")[1..]
        .iter()
        .map(Slot::from_sexp)
        .collect::<Result<Vec<_>>>()?;
    let bots = bots_n.as_list().expect("list")[1..]
        .iter()
        .map(Slot::from_sexp)
        .collect::<Result<Vec<_>>>()?;
    if tops.len() != bots.len() + 1 {
        return Err(node.err("term series must have one more top than bottoms"));
    }
    Ok(FixtureTerm { coeff, tops, bots })
}

/// Structural checks beyond field shapes.
fn validate_entry(entry: &Entry) -> Result<()> {
    let ce = |msg: String| catalog_err(&entry.id, msg);
    let declared: BTreeSet<&str> =
        entry.symbols.iter().map(|(n, _)| n.as_str()).collect();

    // every symbol referenced anywhere must be declared
    let mut used: BTreeSet<String> = BTreeSet::new();
    let mut check_vars = |vars: BTreeSet<String>| -> Result<()> {
        for v in vars {
            if !declared.contains(v.as_str()) {
                return Err(ce(format!("undeclared symbol `{v}`")));
            }
            used.insert(v);
        }
        Ok(())
    };
    let (tops, bots) = entry.slots();
    for s in tops.iter().chain(bots.iter()) {
        check_vars(s.form.vars())?;
    }
    match &entry.body {
        Body::Standard { rhs, .. } => {
            check_vars(rhs.free_symbols().into_iter().collect())?;
        }
        Body::Fixture { terms, .. } => {
            for t in terms {
                check_vars(t.coeff.form.vars())?;
                for s in t.tops.iter().chain(t.bots.iter()) {
                    check_vars(s.form.vars())?;
                }
            }
        }
    }
    for c in &entry.constraints {
        check_vars(c.slot().form.vars())?;
    }
    if let Some(x) = &entry.excess {
        check_vars(x.form.vars())?;
    }

    // every declared symbol must be referenced
    for (name, _) in &entry.symbols {
        if !used.contains(name) {
            return Err(ce(format!("declared symbol `{name}` is never used")));
        }
    }

    // a stated excess must equal the computed one exactly
    if let Some(x) = &entry.excess {
        let computed = entry.computed_excess();
        if computed != x.form {
            return Err(ce(format!(
                "stated excess {} disagrees with computed excess {}",
                x.form.key(),
                computed.key()
            )));
        }
    }

    if entry.source.trim().is_empty() {
        return Err(ce("source label is empty".into()));
    }
    Ok(())
}

// ----------------------------------------------------------------------
// serialization
// ----------------------------------------------------------------------

fn write_slots(head: &str, slots: &[Slot]) -> String {
    let inner: Vec<String> = slots.iter().map(|s| s.expr.to_text()).collect();
    format!("({head} {})", inner.join(" "))
}

/// Canonical text of one entry.
pub fn write_entry(entry: &Entry) -> String {
    let mut lines: Vec<String> = Vec::new();
    lines.push(format!("(entry \"{}\"", entry.id));
    lines.push(format!("  (status {})", entry.status.token()));
    let syms: Vec<String> = entry
        .symbols
        .iter()
        .map(|(n, k)| format!("({n} {})", k.token()))
        .collect();
    lines.push(format!("  (symbols {})", syms.join(" ")));
    let (tops, bots) = entry.slots();
    lines.push(format!("  {}", write_slots("top", tops)));
    lines.push(format!("  {}", write_slots("bottom", bots)));
    match &entry.body {
        Body::Standard { rhs, .. } => {
            lines.push(format!("  (rhs {})", rhs.to_text()));
        }
        Body::Fixture { terms, .. } => {
            lines.push("  (terms".to_string());
            for t in terms {
                lines.push(format!(
                    "    (term {} {} {})",
                    t.coeff.expr.to_text(),
                    write_slots("top", &t.tops),
                    write_slots("bottom", &t.bots)
                ));
            }
            let last = lines.len() - 1;
            lines[last].push(')');
        }
    }
    if let Some(x) = &entry.excess {
        lines.push(format!("  (excess {})", x.expr.to_text()));
    }
    lines.push(format!("  (source \"{}\")", entry.source));
    if let Some(d) = &entry.derived_from {
        lines.push(format!(
            "  (derived-from \"{}\" {})",
            d.source_id,
            d.chain.join(" ")
        ));
    }
    if !entry.constraints.is_empty() {
        let cs: Vec<String> = entry
            .constraints
            .iter()
            .map(|c| format!("({} {})", c.head(), c.slot().expr.to_text()))
            .collect();
        lines.push(format!("  (constraints {})", cs.join(" ")));
    }
    if !entry.lookup {
        lines.push("  (lookup off)".to_string());
    }
    if let Some(n) = &entry.note {
        lines.push(format!("  (note \"{n}\")"));
    }
    let mut out = lines.join("\n");
    out.push(')');
    out
}

// ----------------------------------------------------------------------
// the catalog
// ----------------------------------------------------------------------

/// Immutable, validated entry collection.
#[derive(Clone, Debug)]
pub struct Catalog {
    entries: Vec<Entry>,
    index: BTreeMap<String, usize>,
    files: Vec<String>,
}

/// Embedded copies of the shipped catalog files.
pub const BUILTIN_SOURCES: [(&str, &str); 6] = [
    ("seeds.cat", include_str!("../../catalog/seeds.cat")),
    ("eq.cat", include_str!("../../catalog/eq.cat")),
    ("b.cat", include_str!("../../catalog/b.cat")),
    ("c.cat", include_str!("../../catalog/c.cat")),
    ("d.cat", include_str!("../../catalog/d.cat")),
    ("negative.cat", include_str!("../../catalog/negative.cat")),
];

impl Catalog {
    /// Load from (file name, file text) pairs, failing on the first
    /// diagnostic. Use [`Catalog::diagnostics`] to list every problem.
    pub fn from_sources(sources: &[(&str, &str)]) -> Result<Catalog> {
        let mut diags = Vec::new();
        let cat = Self::collect(sources, &mut diags);
        match diags.into_iter().next() {
            Some(first) => Err(first),
            None => Ok(cat),
        }
    }

    /// Every per-entry diagnostic across the sources.
    pub fn diagnostics(sources: &[(&str, &str)]) -> Vec<Error> {
        let mut diags = Vec::new();
        let _ = Self::collect(sources, &mut diags);
        diags
    }

    fn collect(sources: &[(&str, &str)], diags: &mut Vec<Error>) -> Catalog {
        let mut entries: Vec<Entry> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut files = Vec::new();
        for (name, text) in sources {
            files.push(name.to_string());
            let nodes = match sexp::read_all(text) {
                Ok(n) => n,
                Err(e) => {
                    diags.push(Error::Catalog {
                        id: name.to_string(),
                        msg: format!("unreadable file: {e}"),
                    });
                    continue;
                }
            };
            for node in &nodes {
                match parse_entry(node, name) {
                    Ok(entry) => {
                        if index.contains_key(&entry.id) {
                            diags.push(catalog_err(&entry.id, "duplicate entry id"));
                            continue;
                        }
                        index.insert(entry.id.clone(), entries.len());
                        entries.push(entry);
                    }
                    Err(e) => diags.push(e),
                }
            }
        }
        // cross-entry checks once all ids are known
        for entry in &entries {
            if let Some(d) = &entry.derived_from {
                if !index.contains_key(&d.source_id) {
                    diags.push(catalog_err(
                        &entry.id,
                        format!("derived-from names missing entry `{}`", d.source_id),
                    ));
                }
            }
        }
        Catalog { entries, index, files }
    }

    /// The catalog shipped inside the crate.
    pub fn builtin() -> &'static Catalog {
        static BUILTIN: OnceLock<Catalog> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            Catalog::from_sources(&BUILTIN_SOURCES).expect("embedded catalog is valid")
        })
    }

    /// Load a `.cat` file or a directory of them (sorted by file name).
    pub fn load_path(path: &std::path::Path) -> Result<Catalog> {
        let io_err = |e: std::io::Error| Error::Catalog {
            id: path.display().to_string(),
            msg: format!("io error: {e}"),
        };
        let mut sources: Vec<(String, String)> = Vec::new();
        if path.is_dir() {
            let mut names: Vec<std::path::PathBuf> = std::fs::read_dir(path)
                .map_err(io_err)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "cat").unwrap_or(false))
                .collect();
            names.sort();
            for p in names {
                let name = p
                    .file_name()
                    .map(|s| s.to_string_lossy().to_string())
                    .unwrap_or_default();
                sources.push((name, std::fs::read_to_string(&p).map_err(io_err)?));
            }
        } else {
            let name = path
                .file_name()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            sources.push((name, std::fs::read_to_string(path).map_err(io_err)?));
        }
        let borrowed: Vec<(&str, &str)> =
            sources.iter().map(|(n, t)| (n.as_str(), t.as_str())).collect();
        Catalog::from_sources(&borrowed)
    }

    /// All entries in file order.
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Entry ids in file order.
    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    /// Entry by id.
    pub fn get(&self, id: &str) -> Option<&Entry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    /// Names of the loaded files.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Canonical text of one loaded file: entries in order, blank-line
    /// separated, trailing newline.
    pub fn serialize_file(&self, name: &str) -> String {
        let blocks: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.origin == name)
            .map(write_entry)
            .collect();
        if blocks.is_empty() {
            return String::new();
        }
        let mut out = blocks.join("\n\n");
        out.push('\n');
        out
    }
}
