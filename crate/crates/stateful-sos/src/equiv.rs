//! Bounded equivalence checking for the three semantics, and a congruence
//! probing harness over generated single-hole contexts.
//!
//! Equivalence over an infinite state space is checked on a finite probe
//! set: a `Distinguished` verdict is sound, while `Equivalent` is bounded
//! evidence unless the probe set is exhaustive. Fuel exhaustion is never
//! treated as divergence, so a final state on one side against exhausted
//! fuel on the other yields `Inconclusive`.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::{
    resumption, run, trace, ResumptionChild, ResumptionEdge, ResumptionNode, StepError,
    TerminationResult, Trace,
};
use crate::spec::{Specification, State, StateDomain};
use crate::syntax::{validate_term, MetaVar, Program, Signature, Term, TermError};

/// A finite stand-in for quantification over all states. `exhaustive` marks
/// probe sets that enumerate the whole (finite) state domain, in which case
/// bounded `Equivalent` verdicts are genuine ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeSet<S> {
    states: Vec<S>,
    exhaustive: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProbeSetError {
    #[error("probe sets are nonempty")]
    Empty,
    #[error("probe set contains a duplicate state")]
    Duplicate,
}

impl<S: State> ProbeSet<S> {
    pub fn new(states: Vec<S>) -> Result<ProbeSet<S>, ProbeSetError> {
        if states.is_empty() {
            return Err(ProbeSetError::Empty);
        }
        for (i, a) in states.iter().enumerate() {
            if states[i + 1..].contains(a) {
                return Err(ProbeSetError::Duplicate);
            }
        }
        Ok(ProbeSet {
            states,
            exhaustive: false,
        })
    }

    /// The full enumeration of a finite domain; `None` for infinite domains.
    pub fn exhaustive(domain: &StateDomain<S>) -> Option<ProbeSet<S>> {
        domain.enumeration().map(|states| ProbeSet {
            states: states.to_vec(),
            exhaustive: true,
        })
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn is_exhaustive(&self) -> bool {
        self.exhaustive
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Which semantics to compare under, with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Semantics {
    Trace { k: usize },
    Termination { fuel: usize },
    Resumption { depth: usize },
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semantics::Trace { k } => write!(f, "trace(k={k})"),
            Semantics::Termination { fuel } => write!(f, "termination(fuel={fuel})"),
            Semantics::Resumption { depth } => write!(f, "resumption(depth={depth})"),
        }
    }
}

/// Where two resumption trees first diverge: the probes fed from the root
/// down to the divergence, and what each side shows there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeView<S> {
    pub path: Vec<S>,
    pub label: S,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Terminated,
    Continues,
    Unexpanded,
}

/// The observation backing one side of a `Distinguished` verdict.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evidence<S> {
    Trace(Trace<S>),
    Termination(TerminationResult<S>),
    Tree(EdgeView<S>),
}

impl<S: State> fmt::Display for Evidence<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::Trace(t) => {
                let states: Vec<String> = t.states().iter().map(|s| s.to_string()).collect();
                write!(f, "[{}] {:?}", states.join(", "), t.status())
            }
            Evidence::Termination(r) => write!(f, "{r}"),
            Evidence::Tree(view) => {
                let path: Vec<String> = view.path.iter().map(|s| s.to_string()).collect();
                write!(
                    f,
                    "at probes [{}]: label {} ({:?})",
                    path.join(" -> "),
                    view.label,
                    view.kind
                )
            }
        }
    }
}

/// Outcome of a bounded equivalence check. `Distinguished` is sound;
/// `Equivalent` is evidence bounded by the probe set and the semantics
/// parameter, and genuine when the probe set is exhaustive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EquivVerdict<S> {
    Equivalent {
        semantics: Semantics,
        probes: usize,
        exhaustive: bool,
    },
    Distinguished {
        witness: S,
        left: Evidence<S>,
        right: Evidence<S>,
    },
    Inconclusive {
        reason: String,
    },
}

impl<S: State> EquivVerdict<S> {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivVerdict::Equivalent { .. })
    }

    pub fn is_distinguished(&self) -> bool {
        matches!(self, EquivVerdict::Distinguished { .. })
    }
}

impl<S: State> fmt::Display for EquivVerdict<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquivVerdict::Equivalent {
                semantics,
                probes,
                exhaustive,
            } => {
                let scope = if *exhaustive { "all states" } else { "probes" };
                write!(f, "EQUIVALENT under {semantics} over {probes} {scope}")
            }
            EquivVerdict::Distinguished {
                witness,
                left,
                right,
            } => {
                write!(f, "DISTINGUISHED at {witness}: left {left} / right {right}")
            }
            EquivVerdict::Inconclusive { reason } => write!(f, "INCONCLUSIVE: {reason}"),
        }
    }
}

/// k-step trace equivalence restricted to the probe set. `k = 0` is
/// vacuously equivalent.
pub fn trace_equiv<S: State>(
    spec: &Specification<S>,
    left: &Program,
    right: &Program,
    probes: &ProbeSet<S>,
    k: usize,
) -> Result<EquivVerdict<S>, StepError<S>> {
    if k == 0 {
        return Ok(EquivVerdict::Equivalent {
            semantics: Semantics::Trace { k },
            probes: probes.len(),
            exhaustive: probes.is_exhaustive(),
        });
    }
    for s in probes.states() {
        let lt = trace(spec, s, left, k)?;
        let rt = trace(spec, s, right, k)?;
        if lt != rt {
            return Ok(EquivVerdict::Distinguished {
                witness: s.clone(),
                left: Evidence::Trace(lt),
                right: Evidence::Trace(rt),
            });
        }
    }
    Ok(EquivVerdict::Equivalent {
        semantics: Semantics::Trace { k },
        probes: probes.len(),
        exhaustive: probes.is_exhaustive(),
    })
}

/// Fuel-bounded termination equivalence restricted to the probe set.
/// Distinct final states distinguish; a final state against exhausted fuel
/// is inconclusive; two exhausted runs count as equal at this fuel.
pub fn term_equiv<S: State>(
    spec: &Specification<S>,
    left: &Program,
    right: &Program,
    probes: &ProbeSet<S>,
    fuel: usize,
) -> Result<EquivVerdict<S>, StepError<S>> {
    assert!(fuel >= 1, "term_equiv requires fuel >= 1");
    let mut asymmetry: Option<String> = None;
    for s in probes.states() {
        let lr = run(spec, s, left, fuel)?;
        let rr = run(spec, s, right, fuel)?;
        match (&lr, &rr) {
            (
                TerminationResult::Final { state: ls, .. },
                TerminationResult::Final { state: rs, .. },
            ) => {
                if ls != rs {
                    return Ok(EquivVerdict::Distinguished {
                        witness: s.clone(),
                        left: Evidence::Termination(lr),
                        right: Evidence::Termination(rr),
                    });
                }
            }
            (TerminationResult::FuelExhausted { .. }, TerminationResult::FuelExhausted { .. }) => {}
            _ => {
                if asymmetry.is_none() {
                    asymmetry = Some(format!(
                        "at {s}: one side terminated, the other exhausted fuel {fuel} \
                         (divergence not proven)"
                    ));
                }
            }
        }
    }
    Ok(match asymmetry {
        Some(reason) => EquivVerdict::Inconclusive { reason },
        None => EquivVerdict::Equivalent {
            semantics: Semantics::Termination { fuel },
            probes: probes.len(),
            exhaustive: probes.is_exhaustive(),
        },
    })
}

/// Structural equality of the two programs' resumption trees over the probe
/// set, down to `depth`.
pub fn resumption_equiv<S: State>(
    spec: &Specification<S>,
    left: &Program,
    right: &Program,
    probes: &ProbeSet<S>,
    depth: usize,
) -> Result<EquivVerdict<S>, StepError<S>> {
    let lt = resumption(spec, left, probes, depth)?;
    let rt = resumption(spec, right, probes, depth)?;
    if lt == rt {
        return Ok(EquivVerdict::Equivalent {
            semantics: Semantics::Resumption { depth },
            probes: probes.len(),
            exhaustive: probes.is_exhaustive(),
        });
    }
    let (path, le, re) = first_divergence(&lt, &rt, Vec::new())
        .expect("unequal trees must have a divergence");
    let witness = path.first().cloned().unwrap_or_else(|| le.path[0].clone());
    Ok(EquivVerdict::Distinguished {
        witness,
        left: Evidence::Tree(le),
        right: Evidence::Tree(re),
    })
}

fn edge_view<S: State>(edge: &ResumptionEdge<S>, path: &[S]) -> EdgeView<S> {
    let kind = match edge.child {
        ResumptionChild::Terminated => EdgeKind::Terminated,
        ResumptionChild::Unexpanded => EdgeKind::Unexpanded,
        ResumptionChild::Node(_) => EdgeKind::Continues,
    };
    EdgeView {
        path: path.to_vec(),
        label: edge.label.clone(),
        kind,
    }
}

type Divergence<S> = (Vec<S>, EdgeView<S>, EdgeView<S>);

fn first_divergence<S: State>(
    left: &ResumptionNode<S>,
    right: &ResumptionNode<S>,
    path: Vec<S>,
) -> Option<Divergence<S>> {
    for (le, re) in left.edges().iter().zip(right.edges()) {
        debug_assert_eq!(le.probe, re.probe, "trees share one probe set");
        let mut here = path.clone();
        here.push(le.probe.clone());
        let lv = edge_view(le, &here);
        let rv = edge_view(re, &here);
        if lv.label != rv.label || lv.kind != rv.kind {
            return Some((here, lv, rv));
        }
        if let (ResumptionChild::Node(ln), ResumptionChild::Node(rn)) = (&le.child, &re.child) {
            if ln != rn {
                if let Some(found) = first_divergence(ln, rn, here) {
                    return Some(found);
                }
            }
        }
    }
    None
}

/// Dispatches to the checker selected by `semantics`.
pub fn equiv_check<S: State>(
    spec: &Specification<S>,
    semantics: &Semantics,
    left: &Program,
    right: &Program,
    probes: &ProbeSet<S>,
) -> Result<EquivVerdict<S>, StepError<S>> {
    match semantics {
        Semantics::Trace { k } => trace_equiv(spec, left, right, probes, *k),
        Semantics::Termination { fuel } => term_equiv(spec, left, right, probes, *fuel),
        Semantics::Resumption { depth } => resumption_equiv(spec, left, right, probes, *depth),
    }
}

// ---------------------------------------------------------------------------
// Contexts
// ---------------------------------------------------------------------------

/// A term with exactly one hole leaf, otherwise valid for the signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context(Term);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("a context has exactly one hole, found {0}")]
    HoleCount(usize),
    #[error("context contains a metavariable `{0}`")]
    OpenLeaf(MetaVar),
    #[error(transparent)]
    Term(TermError),
}

impl Context {
    /// The identity context: just the hole.
    pub fn identity() -> Context {
        Context(Term::Hole)
    }

    pub fn new(sig: &Signature, term: Term) -> Result<Context, ContextError> {
        let holes = term.holes();
        if holes != 1 {
            return Err(ContextError::HoleCount(holes));
        }
        if let Some(v) = term.metavars().into_iter().next() {
            return Err(ContextError::OpenLeaf(v));
        }
        match validate_term(sig, &term) {
            Ok(()) | Err(TermError::UnexpectedHole) => {}
            Err(e) => return Err(ContextError::Term(e)),
        }
        Ok(Context(term))
    }

    fn from_term_unchecked(term: Term) -> Context {
        debug_assert_eq!(term.holes(), 1);
        Context(term)
    }

    pub fn term(&self) -> &Term {
        &self.0
    }

    /// Replaces the hole by `program`.
    pub fn apply(&self, program: &Program) -> Program {
        Program::from_term_unchecked(fill(&self.0, program.term()))
    }
}

fn fill(term: &Term, plug: &Term) -> Term {
    match term {
        Term::Hole => plug.clone(),
        Term::Var(_) => term.clone(),
        Term::Node { op, children } => Term::Node {
            op: op.clone(),
            children: children.iter().map(|c| fill(c, plug)).collect(),
        },
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Applies `context` to `program`; mirrors [`Context::apply`] as a free
/// function.
pub fn apply_context(context: &Context, program: &Program) -> Program {
    context.apply(program)
}

/// A seeded, reproducible enumeration of single-hole contexts, breadth-first
/// by hole depth, with non-hole leaves drawn from a program pool. The
/// identity context is always emitted first. Within each level the
/// enumeration is exhaustive over (wrapped inner context, operator, hole
/// position, leaf tuple); the seed only permutes the leaf pool.
pub fn gen_contexts(
    sig: &Signature,
    leaf_pool: &[Program],
    max_depth: usize,
    seed: u64,
) -> ContextStream {
    assert!(!leaf_pool.is_empty(), "the leaf pool is nonempty");
    let mut pool: Vec<Term> = leaf_pool.iter().map(|p| p.term().clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    let ops: Vec<(String, usize)> = sig
        .operators()
        .iter()
        .filter(|op| op.arity() >= 1)
        .map(|op| (op.name().to_string(), op.arity()))
        .collect();
    ContextStream {
        ops,
        pool,
        max_depth,
        depth: 0,
        emitted_identity: false,
        prev_level: vec![Term::Hole],
        current_level: Vec::new(),
        inner_idx: 0,
        op_idx: 0,
        hole_pos: 0,
        leaf_combo: 0,
    }
}

/// Iterator state for [`gen_contexts`].
pub struct ContextStream {
    ops: Vec<(String, usize)>,
    pool: Vec<Term>,
    max_depth: usize,
    depth: usize,
    emitted_identity: bool,
    prev_level: Vec<Term>,
    current_level: Vec<Term>,
    inner_idx: usize,
    op_idx: usize,
    hole_pos: usize,
    leaf_combo: usize,
}

impl ContextStream {
    fn combos_for(&self, arity: usize) -> usize {
        self.pool.len().pow(arity.saturating_sub(1) as u32)
    }

    fn build(&self) -> Term {
        let (op, arity) = &self.ops[self.op_idx];
        let inner = self.prev_level[self.inner_idx].clone();
        let mut children = Vec::with_capacity(*arity);
        let mut combo = self.leaf_combo;
        for pos in 0..*arity {
            if pos == self.hole_pos {
                children.push(inner.clone());
            } else {
                children.push(self.pool[combo % self.pool.len()].clone());
                combo /= self.pool.len();
            }
        }
        Term::node(op.clone(), children)
    }

    fn advance(&mut self) {
        self.leaf_combo += 1;
        let (_, arity) = self.ops[self.op_idx];
        if self.leaf_combo < self.combos_for(arity) {
            return;
        }
        self.leaf_combo = 0;
        self.hole_pos += 1;
        if self.hole_pos < arity {
            return;
        }
        self.hole_pos = 0;
        self.op_idx += 1;
        if self.op_idx < self.ops.len() {
            return;
        }
        self.op_idx = 0;
        self.inner_idx += 1;
    }
}

impl Iterator for ContextStream {
    type Item = Context;

    fn next(&mut self) -> Option<Context> {
        if !self.emitted_identity {
            self.emitted_identity = true;
            if self.max_depth == 0 {
                self.depth = usize::MAX; // nothing beyond the identity
            } else {
                self.depth = 1;
            }
            return Some(Context::identity());
        }
        loop {
            if self.depth > self.max_depth || self.ops.is_empty() {
                return None;
            }
            if self.inner_idx >= self.prev_level.len() {
                // level finished: the emitted contexts become the next basis
                self.prev_level = std::mem::take(&mut self.current_level);
                self.inner_idx = 0;
                self.depth += 1;
                if self.prev_level.is_empty() {
                    return None;
                }
                continue;
            }
            let term = self.build();
            self.advance();
            self.current_level.push(term.clone());
            return Some(Context::from_term_unchecked(term));
        }
    }
}

// ---------------------------------------------------------------------------
// Congruence probing
// ---------------------------------------------------------------------------

/// One witnessed congruence violation: a pre-verified equivalent pair that a
/// context distinguishes.
#[derive(Debug, Clone)]
pub struct Counterexample<S> {
    pub pair_index: usize,
    pub left: Program,
    pub right: Program,
    pub context: Context,
    pub verdict: EquivVerdict<S>,
}

/// A pair skipped because it failed the up-front equivalence check.
#[derive(Debug, Clone)]
pub struct SkippedPair<S> {
    pub pair_index: usize,
    pub verdict: EquivVerdict<S>,
}

/// Result of [`congruence_probe`].
#[derive(Debug, Clone)]
pub struct CongruenceReport<S> {
    pub semantics: Semantics,
    pub combos_run: usize,
    pub budget: usize,
    pub counterexamples: Vec<Counterexample<S>>,
    pub skipped: Vec<SkippedPair<S>>,
}

impl<S: State> CongruenceReport<S> {
    pub fn none_found(&self) -> bool {
        self.counterexamples.is_empty()
    }

    /// Plain-text rendering with a custom term printer (languages pass their
    /// concrete syntax here; `[]` marks the hole either way).
    pub fn render(&self, print: &dyn Fn(&Term) -> String) -> String {
        let mut out = String::new();
        for skip in &self.skipped {
            out.push_str(&format!(
                "pair #{} skipped: not equivalent up front ({})\n",
                skip.pair_index, skip.verdict
            ));
        }
        for ce in &self.counterexamples {
            out.push_str(&format!(
                "counterexample: pair #{} ({} vs {})\n  context: {}\n  {}\n",
                ce.pair_index,
                print(ce.left.term()),
                print(ce.right.term()),
                print(ce.context.term()),
                ce.verdict
            ));
        }
        out.push_str(&format!(
            "combos={} budget={} under {}\n",
            self.combos_run, self.budget, self.semantics
        ));
        out.push_str(&format!("COUNTEREXAMPLES={}\n", self.counterexamples.len()));
        out
    }
}

impl<S: State> fmt::Display for CongruenceReport<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(&|t| t.to_string()))
    }
}

/// For up to `budget` (pair, context) combinations, checks whether the
/// context preserves the pair's equivalence under the chosen semantics.
/// Pairs that are not equivalent up front are skipped with a notice.
/// Contexts are consumed in enumeration order; for each context every
/// surviving pair is tried before the next context, so small contexts are
/// exercised first.
pub fn congruence_probe<S: State>(
    spec: &Specification<S>,
    semantics: &Semantics,
    pairs: &[(Program, Program)],
    contexts: impl IntoIterator<Item = Context>,
    probes: &ProbeSet<S>,
    budget: usize,
) -> Result<CongruenceReport<S>, StepError<S>> {
    let mut report = CongruenceReport {
        semantics: *semantics,
        combos_run: 0,
        budget,
        counterexamples: Vec::new(),
        skipped: Vec::new(),
    };
    let mut live: Vec<(usize, &(Program, Program))> = Vec::new();
    for (idx, pair) in pairs.iter().enumerate() {
        let verdict = equiv_check(spec, semantics, &pair.0, &pair.1, probes)?;
        if verdict.is_equivalent() {
            live.push((idx, pair));
        } else {
            report.skipped.push(SkippedPair {
                pair_index: idx,
                verdict,
            });
        }
    }
    if live.is_empty() {
        return Ok(report);
    }
    'outer: for context in contexts {
        for (idx, (left, right)) in &live {
            if report.combos_run == budget {
                break 'outer;
            }
            report.combos_run += 1;
            let cl = context.apply(left);
            let cr = context.apply(right);
            let verdict = equiv_check(spec, semantics, &cl, &cr, probes)?;
            if verdict.is_distinguished() {
                report.counterexamples.push(Counterexample {
                    pair_index: *idx,
                    left: left.clone(),
                    right: right.clone(),
                    context: context.clone(),
                    verdict,
                });
            }
        }
    }
    Ok(report)
}
