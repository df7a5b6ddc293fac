//! Specifications as guarded rule schemes, their static validation, rule
//! resolution per trigger, and the per-operator rule-family view.
//!
//! A scheme stands for the set of rules obtained by letting its guard select
//! input states and premiss outputs. One scheme with an `Omitted` premiss
//! shape represents the whole family of rules whose conclusion does not
//! depend on that argument's behaviour. A specification must be
//! deterministic: every trigger resolves to exactly one rule. That property
//! is enforced dynamically at each resolution (guards are arbitrary
//! predicates, so static exhaustiveness is out of reach) and spot-checked by
//! [`determinism_check`] over sampled triggers.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::syntax::{validate_term, Signature, Term, TermError, VarKind};

/// Bounds every state type must satisfy. Equality is the domain's equality
/// predicate; `Display` is its rendering.
pub trait State: Clone + Eq + fmt::Debug + fmt::Display + Send + Sync + 'static {}

impl<T: Clone + Eq + fmt::Debug + fmt::Display + Send + Sync + 'static> State for T {}

/// A state space: an optional exhaustive enumeration (present exactly when
/// the space is finite) and a seeded sampler for probe generation.
#[derive(Clone)]
pub struct StateDomain<S> {
    name: String,
    enumeration: Option<Vec<S>>,
    sampler: Arc<dyn Fn(u64) -> S + Send + Sync>,
}

impl<S: State> StateDomain<S> {
    pub fn new(
        name: impl Into<String>,
        sampler: impl Fn(u64) -> S + Send + Sync + 'static,
    ) -> StateDomain<S> {
        StateDomain {
            name: name.into(),
            enumeration: None,
            sampler: Arc::new(sampler),
        }
    }

    /// A finite domain; the sampler cycles through the enumeration.
    pub fn with_enumeration(name: impl Into<String>, states: Vec<S>) -> StateDomain<S> {
        assert!(!states.is_empty(), "enumeration may not be empty");
        for (i, a) in states.iter().enumerate() {
            for b in &states[i + 1..] {
                assert!(a != b, "enumeration may not contain duplicates");
            }
        }
        let pool = states.clone();
        StateDomain {
            name: name.into(),
            enumeration: Some(states),
            sampler: Arc::new(move |seed| pool[(seed % pool.len() as u64) as usize].clone()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn enumeration(&self) -> Option<&[S]> {
        self.enumeration.as_deref()
    }

    pub fn sample(&self, seed: u64) -> S {
        (self.sampler)(seed)
    }
}

impl<S: State> fmt::Debug for StateDomain<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateDomain")
            .field("name", &self.name)
            .field("finite", &self.enumeration.is_some())
            .finish()
    }
}

/// Whether a premiss (or a trigger component) progresses or terminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Progressing,
    Terminating,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Progressing => write!(f, "pr"),
            Mode::Terminating => write!(f, "te"),
        }
    }
}

/// Per-argument premiss shape of a scheme. `Progressing` at position `j`
/// binds the output state `s'_j` and the target variable `y_j`;
/// `Terminating` binds only `s'_j`; `Omitted` binds nothing and matches
/// either mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PremissShape {
    Omitted,
    Progressing,
    Terminating,
}

impl PremissShape {
    pub fn admits(self, mode: Mode) -> bool {
        match self {
            PremissShape::Omitted => true,
            PremissShape::Progressing => mode == Mode::Progressing,
            PremissShape::Terminating => mode == Mode::Terminating,
        }
    }

    pub fn binds_output(self) -> bool {
        !matches!(self, PremissShape::Omitted)
    }
}

/// The declared set of bound state variables an expression or guard may
/// inspect: the rule input `s` and premiss outputs `s'_j`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadSet {
    input: bool,
    outputs: BTreeSet<usize>,
}

impl ReadSet {
    pub fn none() -> ReadSet {
        ReadSet::default()
    }

    pub fn input_only() -> ReadSet {
        ReadSet {
            input: true,
            outputs: BTreeSet::new(),
        }
    }

    pub fn output_only(j: usize) -> ReadSet {
        ReadSet::none().with_output(j)
    }

    pub fn with_input(mut self) -> ReadSet {
        self.input = true;
        self
    }

    pub fn with_output(mut self, j: usize) -> ReadSet {
        assert!(j >= 1, "premiss positions are 1-based");
        self.outputs.insert(j);
        self
    }

    pub fn reads_input(&self) -> bool {
        self.input
    }

    pub fn reads_output(&self, j: usize) -> bool {
        self.outputs.contains(&j)
    }

    pub fn outputs(&self) -> &BTreeSet<usize> {
        &self.outputs
    }

    /// True when every read variable lies within `{s} ∪ {s'_j | j ∈ bound}`.
    pub fn within(&self, input_allowed: bool, bound_outputs: &BTreeSet<usize>) -> bool {
        (!self.input || input_allowed) && self.outputs.is_subset(bound_outputs)
    }
}

/// The states bound while resolving one rule: the input plus the premiss
/// outputs at non-omitted positions.
pub struct BoundStates<'a, S> {
    input: &'a S,
    outputs: &'a [Option<S>],
}

impl<'a, S> BoundStates<'a, S> {
    pub fn new(input: &'a S, outputs: &'a [Option<S>]) -> BoundStates<'a, S> {
        BoundStates { input, outputs }
    }

    pub fn input(&self) -> &S {
        self.input
    }

    /// The output state of premiss `j` (1-based). Panics when the position is
    /// not bound by the scheme's shapes; `validate_spec` rules that out for
    /// well-formed schemes.
    pub fn output(&self, j: usize) -> &S {
        self.try_output(j)
            .unwrap_or_else(|| panic!("premiss output s'_{j} is not bound"))
    }

    pub fn try_output(&self, j: usize) -> Option<&S> {
        self.outputs.get(j - 1).and_then(Option::as_ref)
    }
}

/// A host-language state function with a declared read-set.
#[derive(Clone)]
pub struct OpaqueExpr<S> {
    reads: ReadSet,
    func: Arc<dyn Fn(&BoundStates<'_, S>) -> S + Send + Sync>,
}

impl<S: State> OpaqueExpr<S> {
    pub fn new(
        reads: ReadSet,
        func: impl Fn(&BoundStates<'_, S>) -> S + Send + Sync + 'static,
    ) -> OpaqueExpr<S> {
        OpaqueExpr {
            reads,
            func: Arc::new(func),
        }
    }

    pub fn reads(&self) -> &ReadSet {
        &self.reads
    }

    pub fn eval(&self, bound: &BoundStates<'_, S>) -> S {
        (self.func)(bound)
    }
}

impl<S> fmt::Debug for OpaqueExpr<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OpaqueExpr({:?})", self.reads)
    }
}

/// An output-state expression of a conclusion.
///
/// Pass-through of a premiss output is recognized syntactically: the
/// expression must literally be `PremissOut(j)`. Opaque expressions never
/// count as pass-through, which keeps the format checkers conservative.
#[derive(Debug, Clone)]
pub enum StateExpr<S> {
    /// The rule input `s`.
    Input,
    /// The premiss output `s'_j`, 1-based.
    PremissOut(usize),
    Const(S),
    Opaque(OpaqueExpr<S>),
}

impl<S: State> StateExpr<S> {
    pub fn eval(&self, bound: &BoundStates<'_, S>) -> S {
        match self {
            StateExpr::Input => bound.input().clone(),
            StateExpr::PremissOut(j) => bound.output(*j).clone(),
            StateExpr::Const(s) => s.clone(),
            StateExpr::Opaque(op) => op.eval(bound),
        }
    }

    pub fn reads(&self) -> ReadSet {
        match self {
            StateExpr::Input => ReadSet::input_only(),
            StateExpr::PremissOut(j) => ReadSet::output_only(*j),
            StateExpr::Const(_) => ReadSet::none(),
            StateExpr::Opaque(op) => op.reads().clone(),
        }
    }
}

/// A pure, total predicate over the bound states, with a declared read-set.
#[derive(Clone)]
pub struct Guard<S> {
    reads: ReadSet,
    pred: Arc<dyn Fn(&BoundStates<'_, S>) -> bool + Send + Sync>,
}

impl<S: State> Guard<S> {
    pub fn new(
        reads: ReadSet,
        pred: impl Fn(&BoundStates<'_, S>) -> bool + Send + Sync + 'static,
    ) -> Guard<S> {
        Guard {
            reads,
            pred: Arc::new(pred),
        }
    }

    /// The trivially true guard.
    pub fn always() -> Guard<S> {
        Guard::new(ReadSet::none(), |_| true)
    }

    pub fn reads(&self) -> &ReadSet {
        &self.reads
    }

    pub fn holds(&self, bound: &BoundStates<'_, S>) -> bool {
        (self.pred)(bound)
    }
}

impl<S> fmt::Debug for Guard<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Guard({:?})", self.reads)
    }
}

/// The conclusion of a scheme: either progress to a target term with an
/// output state, or terminate with an output state.
#[derive(Debug, Clone)]
pub enum Conclusion<S> {
    Progress { output: StateExpr<S>, target: Term },
    Terminate { output: StateExpr<S> },
}

impl<S> Conclusion<S> {
    pub fn output(&self) -> &StateExpr<S> {
        match self {
            Conclusion::Progress { output, .. } => output,
            Conclusion::Terminate { output } => output,
        }
    }

    pub fn target(&self) -> Option<&Term> {
        match self {
            Conclusion::Progress { target, .. } => Some(target),
            Conclusion::Terminate { .. } => None,
        }
    }

    pub fn is_progress(&self) -> bool {
        matches!(self, Conclusion::Progress { .. })
    }
}

/// A guarded rule scheme for one operator.
#[derive(Debug, Clone)]
pub struct RuleScheme<S> {
    label: String,
    op: String,
    shapes: Vec<PremissShape>,
    guard: Guard<S>,
    conclusion: Conclusion<S>,
}

impl<S: State> RuleScheme<S> {
    pub fn new(
        label: impl Into<String>,
        op: impl Into<String>,
        shapes: Vec<PremissShape>,
        guard: Guard<S>,
        conclusion: Conclusion<S>,
    ) -> RuleScheme<S> {
        RuleScheme {
            label: label.into(),
            op: op.into(),
            shapes,
            guard,
            conclusion,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn op(&self) -> &str {
        &self.op
    }

    pub fn shapes(&self) -> &[PremissShape] {
        &self.shapes
    }

    pub fn guard(&self) -> &Guard<S> {
        &self.guard
    }

    pub fn conclusion(&self) -> &Conclusion<S> {
        &self.conclusion
    }

    /// Positions bound by the shapes (those with a non-omitted premiss).
    pub fn bound_positions(&self) -> BTreeSet<usize> {
        self.shapes
            .iter()
            .enumerate()
            .filter(|(_, sh)| sh.binds_output())
            .map(|(i, _)| i + 1)
            .collect()
    }

    fn bound_outputs(&self, trigger: &Trigger<S>) -> Vec<Option<S>> {
        self.shapes
            .iter()
            .zip(trigger.premisses())
            .map(|(shape, (out, _))| shape.binds_output().then(|| out.clone()))
            .collect()
    }

    /// Shape/mode compatibility plus the guard.
    pub fn matches(&self, trigger: &Trigger<S>) -> bool {
        if self.shapes.len() != trigger.premisses().len() {
            return false;
        }
        let compatible = self
            .shapes
            .iter()
            .zip(trigger.premisses())
            .all(|(shape, (_, mode))| shape.admits(*mode));
        if !compatible {
            return false;
        }
        let outputs = self.bound_outputs(trigger);
        self.guard
            .holds(&BoundStates::new(trigger.input(), &outputs))
    }

    /// Evaluates the conclusion on the trigger's bound states.
    pub fn answer(&self, trigger: &Trigger<S>) -> RuleAnswer<S> {
        let outputs = self.bound_outputs(trigger);
        let bound = BoundStates::new(trigger.input(), &outputs);
        match &self.conclusion {
            Conclusion::Progress { output, target } => RuleAnswer::Progress {
                output: output.eval(&bound),
                target: target.clone(),
            },
            Conclusion::Terminate { output } => RuleAnswer::Final {
                output: output.eval(&bound),
            },
        }
    }
}

/// A trigger: the rule input together with, per argument position, the
/// argument's output state and progressing/terminating mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger<S> {
    input: S,
    premisses: Vec<(S, Mode)>,
}

impl<S: State> Trigger<S> {
    pub fn new(input: S, premisses: Vec<(S, Mode)>) -> Trigger<S> {
        Trigger { input, premisses }
    }

    pub fn input(&self) -> &S {
        &self.input
    }

    pub fn premisses(&self) -> &[(S, Mode)] {
        &self.premisses
    }

    /// The set of progressing positions, 1-based.
    pub fn progressing_positions(&self) -> BTreeSet<usize> {
        self.premisses
            .iter()
            .enumerate()
            .filter(|(_, (_, m))| *m == Mode::Progressing)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

impl<S: State> fmt::Display for Trigger<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({};", self.input)?;
        for (i, (s, m)) in self.premisses.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, " ({s},{m})")?;
        }
        write!(f, ")")
    }
}

/// A resolved rule, evaluated on a concrete trigger: progress to a target
/// term over `x_1..x_n` and the bound `y_j`, or a final state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleAnswer<S> {
    Progress { output: S, target: Term },
    Final { output: S },
}

/// The rule-family form of a specification: one function answering each
/// (operator, trigger) query.
pub type FamilyFn<S> = Arc<dyn Fn(&str, &Trigger<S>) -> Result<RuleAnswer<S>, ResolveError<S>> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ResolveError<S: State> {
    #[error("{spec}: no rule for `{op}` matches trigger {trigger}")]
    MissingRule {
        spec: String,
        op: String,
        trigger: Trigger<S>,
    },
    #[error("{spec}: rules {labels:?} for `{op}` all match trigger {trigger}")]
    AmbiguousRules {
        spec: String,
        op: String,
        labels: Vec<String>,
        trigger: Trigger<S>,
    },
    #[error("{spec}: operator `{op}` does not exist or got {found} premisses")]
    BadQuery {
        spec: String,
        op: String,
        found: usize,
    },
}

#[derive(Clone)]
enum Backend<S: State> {
    Schemes(Vec<RuleScheme<S>>),
    Family(FamilyFn<S>),
}

/// A specification: a signature, a state domain, and either a finite set of
/// rule schemes or a query backend generating rules on demand.
#[derive(Clone)]
pub struct Specification<S: State> {
    name: String,
    signature: Signature,
    states: StateDomain<S>,
    backend: Backend<S>,
}

impl<S: State> Specification<S> {
    pub fn from_schemes(
        name: impl Into<String>,
        signature: Signature,
        states: StateDomain<S>,
        schemes: Vec<RuleScheme<S>>,
    ) -> Specification<S> {
        Specification {
            name: name.into(),
            signature,
            states,
            backend: Backend::Schemes(schemes),
        }
    }

    pub fn from_family(
        name: impl Into<String>,
        signature: Signature,
        states: StateDomain<S>,
        family: FamilyFn<S>,
    ) -> Specification<S> {
        Specification {
            name: name.into(),
            signature,
            states,
            backend: Backend::Family(family),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn states(&self) -> &StateDomain<S> {
        &self.states
    }

    /// The rule schemes, when this specification has a syntactic
    /// presentation. Query-backed specifications return `None`.
    pub fn schemes(&self) -> Option<&[RuleScheme<S>]> {
        match &self.backend {
            Backend::Schemes(s) => Some(s),
            Backend::Family(_) => None,
        }
    }

    pub fn schemes_for<'a>(&'a self, op: &'a str) -> impl Iterator<Item = &'a RuleScheme<S>> + 'a {
        self.schemes()
            .unwrap_or(&[])
            .iter()
            .filter(move |sch| sch.op() == op)
    }

    /// All schemes for `op` compatible with the trigger's modes and whose
    /// guard holds. More than one match is a determinism violation, surfaced
    /// by [`Specification::resolve_rule`].
    pub fn match_schemes(&self, op: &str, trigger: &Trigger<S>) -> Vec<&RuleScheme<S>> {
        self.schemes()
            .unwrap_or(&[])
            .iter()
            .filter(|sch| sch.op() == op && sch.matches(trigger))
            .collect()
    }

    /// The unique rule scheme answering the trigger. For query-backed
    /// specifications the scheme is synthesized from the family's answer.
    pub fn resolve_rule(&self, op: &str, trigger: &Trigger<S>) -> Result<RuleScheme<S>, ResolveError<S>> {
        match &self.backend {
            Backend::Schemes(_) => {
                let matches = self.match_schemes(op, trigger);
                match matches.len() {
                    0 => Err(ResolveError::MissingRule {
                        spec: self.name.clone(),
                        op: op.to_string(),
                        trigger: trigger.clone(),
                    }),
                    1 => Ok(matches[0].clone()),
                    _ => Err(ResolveError::AmbiguousRules {
                        spec: self.name.clone(),
                        op: op.to_string(),
                        labels: matches.iter().map(|s| s.label().to_string()).collect(),
                        trigger: trigger.clone(),
                    }),
                }
            }
            Backend::Family(family) => {
                let answer = family(op, trigger)?;
                Ok(synthesize_scheme(op, trigger, answer))
            }
        }
    }

    /// Resolves the trigger and evaluates the conclusion.
    pub fn answer(&self, op: &str, trigger: &Trigger<S>) -> Result<RuleAnswer<S>, ResolveError<S>> {
        match &self.backend {
            Backend::Schemes(_) => {
                let matches = self.match_schemes(op, trigger);
                match matches.len() {
                    0 => Err(ResolveError::MissingRule {
                        spec: self.name.clone(),
                        op: op.to_string(),
                        trigger: trigger.clone(),
                    }),
                    1 => Ok(matches[0].answer(trigger)),
                    _ => Err(ResolveError::AmbiguousRules {
                        spec: self.name.clone(),
                        op: op.to_string(),
                        labels: matches.iter().map(|s| s.label().to_string()).collect(),
                        trigger: trigger.clone(),
                    }),
                }
            }
            Backend::Family(family) => family(op, trigger),
        }
    }

    /// The rule family `r_{f,W}`: resolves the trigger with progressing mode
    /// exactly at the positions in `w` and terminating mode elsewhere.
    pub fn r_family(
        &self,
        op: &str,
        w: &BTreeSet<usize>,
        input: S,
        outputs: Vec<S>,
    ) -> Result<RuleAnswer<S>, ResolveError<S>> {
        let arity = self.signature.arity(op).unwrap_or(usize::MAX);
        if arity != outputs.len() {
            return Err(ResolveError::BadQuery {
                spec: self.name.clone(),
                op: op.to_string(),
                found: outputs.len(),
            });
        }
        let premisses = outputs
            .into_iter()
            .enumerate()
            .map(|(i, out)| {
                let mode = if w.contains(&(i + 1)) {
                    Mode::Progressing
                } else {
                    Mode::Terminating
                };
                (out, mode)
            })
            .collect();
        self.answer(op, &Trigger::new(input, premisses))
    }

    /// This specification as a rule family, for use with [`spec_of_family`].
    pub fn as_family(&self) -> FamilyFn<S> {
        let spec = self.clone();
        Arc::new(move |op, trigger| spec.answer(op, trigger))
    }
}

impl<S: State> fmt::Debug for Specification<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let backend = match &self.backend {
            Backend::Schemes(s) => format!("{} schemes", s.len()),
            Backend::Family(_) => "query backend".to_string(),
        };
        f.debug_struct("Specification")
            .field("name", &self.name)
            .field("operators", &self.signature.operators().len())
            .field("backend", &backend)
            .finish()
    }
}

/// Builds a query-backed specification from a rule family.
pub fn spec_of_family<S: State>(
    name: impl Into<String>,
    signature: Signature,
    states: StateDomain<S>,
    family: FamilyFn<S>,
) -> Specification<S> {
    Specification::from_family(name, signature, states, family)
}

/// A scheme answering exactly one trigger, synthesized from a family answer.
fn synthesize_scheme<S: State>(op: &str, trigger: &Trigger<S>, answer: RuleAnswer<S>) -> RuleScheme<S> {
    let shapes = trigger
        .premisses()
        .iter()
        .map(|(_, m)| match m {
            Mode::Progressing => PremissShape::Progressing,
            Mode::Terminating => PremissShape::Terminating,
        })
        .collect();
    let mut reads = ReadSet::input_only();
    for j in 1..=trigger.premisses().len() {
        reads = reads.with_output(j);
    }
    let expected = trigger.clone();
    let guard = Guard::new(reads, move |bound| {
        if bound.input() != expected.input() {
            return false;
        }
        expected
            .premisses()
            .iter()
            .enumerate()
            .all(|(i, (s, _))| bound.try_output(i + 1) == Some(s))
    });
    let w: Vec<String> = trigger
        .progressing_positions()
        .iter()
        .map(usize::to_string)
        .collect();
    let label = format!("family:{op}:{{{}}}", w.join(","));
    let conclusion = match answer {
        RuleAnswer::Progress { output, target } => Conclusion::Progress {
            output: StateExpr::Const(output),
            target,
        },
        RuleAnswer::Final { output } => Conclusion::Terminate {
            output: StateExpr::Const(output),
        },
    };
    RuleScheme::new(label, op, shapes, guard, conclusion)
}

// ---------------------------------------------------------------------------
// Static validation
// ---------------------------------------------------------------------------

/// One static well-formedness finding, attributed to a scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub scheme: String,
    pub message: String,
}

/// The result of [`validate_spec`]: empty is ok.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    spec: String,
    findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "{}: ok", self.spec);
        }
        for finding in &self.findings {
            writeln!(f, "{}:{}: {}", self.spec, finding.scheme, finding.message)?;
        }
        Ok(())
    }
}

/// Static checks per scheme: arity and operator resolution, target
/// variables bound per the shapes, output-state references bound, and
/// guard/output read-sets within the bound variables. Query-backed
/// specifications have nothing syntactic to check and report ok.
pub fn validate_spec<S: State>(spec: &Specification<S>) -> ValidationReport {
    let mut report = ValidationReport {
        spec: spec.name().to_string(),
        findings: Vec::new(),
    };
    let Some(schemes) = spec.schemes() else {
        return report;
    };
    for scheme in schemes {
        let mut add = |message: String| {
            report.findings.push(Finding {
                scheme: scheme.label().to_string(),
                message,
            });
        };
        let Some(arity) = spec.signature().arity(scheme.op()) else {
            add(format!("operator `{}` is not in the signature", scheme.op()));
            continue;
        };
        if scheme.shapes().len() != arity {
            add(format!(
                "scheme has {} premiss shapes but `{}` has arity {arity}",
                scheme.shapes().len(),
                scheme.op()
            ));
            continue;
        }
        let bound = scheme.bound_positions();
        if let Some(target) = scheme.conclusion().target() {
            match validate_term(spec.signature(), target) {
                Ok(()) | Err(TermError::UnexpectedHole) => {}
                Err(e) => add(format!("target: {e}")),
            }
            if target.holes() > 0 {
                add("target contains a hole marker".to_string());
            }
            for v in target.metavars() {
                match v.kind() {
                    VarKind::X => {
                        if v.index() > arity {
                            add(format!("unbound target variable {v}"));
                        }
                    }
                    VarKind::Y => {
                        let progressing = scheme
                            .shapes()
                            .get(v.index() - 1)
                            .is_some_and(|sh| *sh == PremissShape::Progressing);
                        if !progressing {
                            add(format!("unbound target variable {v}"));
                        }
                    }
                }
            }
        }
        let output_reads = scheme.conclusion().output().reads();
        if let StateExpr::PremissOut(j) = scheme.conclusion().output() {
            if !bound.contains(j) {
                add(format!("conclusion output references unbound premiss output s'_{j}"));
            }
        } else if !output_reads.within(true, &bound) {
            add(format!(
                "conclusion output read-set {:?} exceeds bound variables {bound:?}",
                output_reads.outputs()
            ));
        }
        if !scheme.guard().reads().within(true, &bound) {
            add(format!(
                "guard read-set {:?} exceeds bound variables {bound:?}",
                scheme.guard().reads().outputs()
            ));
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Determinism and read-set spot checks
// ---------------------------------------------------------------------------

/// Outcome of probing a specification with sampled triggers.
#[derive(Debug, Clone)]
pub struct DeterminismReport<S: State> {
    pub probes: usize,
    pub missing: Vec<(String, Trigger<S>)>,
    pub ambiguous: Vec<(String, Trigger<S>, Vec<String>)>,
}

impl<S: State> DeterminismReport<S> {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty() && self.ambiguous.is_empty()
    }
}

impl<S: State> fmt::Display for DeterminismReport<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "probes={} missing={} ambiguous={}",
            self.probes,
            self.missing.len(),
            self.ambiguous.len()
        )?;
        for (op, t) in &self.missing {
            writeln!(f, "missing: {op} {t}")?;
        }
        for (op, t, labels) in &self.ambiguous {
            writeln!(f, "ambiguous: {op} {t} -> {labels:?}")?;
        }
        Ok(())
    }
}

/// Checks that each probe trigger resolves to exactly one rule.
pub fn determinism_check<S: State>(
    spec: &Specification<S>,
    probes: &[(String, Trigger<S>)],
) -> DeterminismReport<S> {
    let mut report = DeterminismReport {
        probes: probes.len(),
        missing: Vec::new(),
        ambiguous: Vec::new(),
    };
    for (op, trigger) in probes {
        match spec.answer(op, trigger) {
            Ok(_) => {}
            Err(ResolveError::MissingRule { .. }) | Err(ResolveError::BadQuery { .. }) => {
                report.missing.push((op.clone(), trigger.clone()));
            }
            Err(ResolveError::AmbiguousRules { labels, .. }) => {
                report.ambiguous.push((op.clone(), trigger.clone(), labels));
            }
        }
    }
    report
}

/// Samples `per_operator` triggers for every operator, using the domain's
/// seeded sampler. Reproducible for a fixed seed.
pub fn sample_triggers<S: State>(
    spec: &Specification<S>,
    per_operator: usize,
    seed: u64,
) -> Vec<(String, Trigger<S>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::new();
    for op in spec.signature().operators() {
        for _ in 0..per_operator {
            let input = spec.states().sample(rng.gen());
            let premisses = (0..op.arity())
                .map(|_| {
                    let out = spec.states().sample(rng.gen());
                    let mode = if rng.gen() {
                        Mode::Progressing
                    } else {
                        Mode::Terminating
                    };
                    (out, mode)
                })
                .collect();
            probes.push((op.name().to_string(), Trigger::new(input, premisses)));
        }
    }
    probes
}

/// Findings of the read-set honesty fuzz check.
#[derive(Debug, Clone, Default)]
pub struct ReadSetReport {
    pub findings: Vec<Finding>,
}

impl ReadSetReport {
    pub fn is_ok(&self) -> bool {
        self.findings.is_empty()
    }
}

impl fmt::Display for ReadSetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "read-sets: ok");
        }
        for finding in &self.findings {
            writeln!(f, "{}: {}", finding.scheme, finding.message)?;
        }
        Ok(())
    }
}

/// Spot-checks that guards and output expressions never inspect a bound
/// variable outside their declared read-set: perturbing a non-read variable
/// must leave the result unchanged.
pub fn fuzz_read_sets<S: State>(spec: &Specification<S>, rounds: usize, seed: u64) -> ReadSetReport {
    let mut report = ReadSetReport::default();
    let Some(schemes) = spec.schemes() else {
        return report;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for scheme in schemes {
        let Some(arity) = spec.signature().arity(scheme.op()) else {
            continue;
        };
        if scheme.shapes().len() != arity {
            continue;
        }
        for _ in 0..rounds {
            let input = spec.states().sample(rng.gen());
            let outputs: Vec<Option<S>> = scheme
                .shapes()
                .iter()
                .map(|sh| sh.binds_output().then(|| spec.states().sample(rng.gen())))
                .collect();
            let bound = BoundStates::new(&input, &outputs);
            let guard_before = scheme.guard().holds(&bound);
            let output_before = scheme.conclusion().output().eval(&bound);

            // one perturbation site per round: the input or one bound output
            let mut sites: Vec<usize> = vec![0];
            sites.extend(
                outputs
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| o.is_some())
                    .map(|(i, _)| i + 1),
            );
            let site = sites[rng.gen_range(0..sites.len())];
            let original = if site == 0 {
                input.clone()
            } else {
                outputs[site - 1].clone().unwrap()
            };
            let Some(perturbed) = resample_distinct(spec.states(), &original, &mut rng) else {
                continue;
            };
            let mut new_input = input.clone();
            let mut new_outputs = outputs.clone();
            if site == 0 {
                new_input = perturbed;
            } else {
                new_outputs[site - 1] = Some(perturbed);
            }
            let bound_after = BoundStates::new(&new_input, &new_outputs);
            let site_name = if site == 0 {
                "s".to_string()
            } else {
                format!("s'_{site}")
            };
            let guard_reads = scheme.guard().reads();
            let guard_reads_site = if site == 0 {
                guard_reads.reads_input()
            } else {
                guard_reads.reads_output(site)
            };
            if !guard_reads_site && scheme.guard().holds(&bound_after) != guard_before {
                report.findings.push(Finding {
                    scheme: scheme.label().to_string(),
                    message: format!("guard depends on {site_name} outside its declared read-set"),
                });
            }
            let out_reads = scheme.conclusion().output().reads();
            let out_reads_site = if site == 0 {
                out_reads.reads_input()
            } else {
                out_reads.reads_output(site)
            };
            if !out_reads_site && scheme.conclusion().output().eval(&bound_after) != output_before {
                report.findings.push(Finding {
                    scheme: scheme.label().to_string(),
                    message: format!("output depends on {site_name} outside its declared read-set"),
                });
            }
        }
    }
    report.findings.dedup();
    report
}

fn resample_distinct<S: State>(domain: &StateDomain<S>, avoid: &S, rng: &mut ChaCha8Rng) -> Option<S> {
    for _ in 0..16 {
        let candidate = domain.sample(rng.gen());
        if candidate != *avoid {
            return Some(candidate);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bit_domain() -> StateDomain<u8> {
        StateDomain::with_enumeration("bit", vec![0, 1])
    }

    fn toy_sig() -> Signature {
        Signature::new(vec![
            crate::syntax::Operator::new("halt", 0),
            crate::syntax::Operator::new("flip", 0),
            crate::syntax::Operator::new("then", 2),
        ])
        .unwrap()
    }

    fn toy_spec() -> Specification<u8> {
        let schemes = vec![
            RuleScheme::new(
                "halt",
                "halt",
                vec![],
                Guard::always(),
                Conclusion::Terminate {
                    output: StateExpr::Input,
                },
            ),
            RuleScheme::new(
                "flip",
                "flip",
                vec![],
                Guard::always(),
                Conclusion::Terminate {
                    output: StateExpr::Opaque(OpaqueExpr::new(ReadSet::input_only(), |b| {
                        1 - *b.input()
                    })),
                },
            ),
            RuleScheme::new(
                "then-step",
                "then",
                vec![PremissShape::Progressing, PremissShape::Omitted],
                Guard::always(),
                Conclusion::Progress {
                    output: StateExpr::PremissOut(1),
                    target: Term::node("then", vec![Term::y(1), Term::x(2)]),
                },
            ),
            RuleScheme::new(
                "then-done",
                "then",
                vec![PremissShape::Terminating, PremissShape::Omitted],
                Guard::always(),
                Conclusion::Progress {
                    output: StateExpr::PremissOut(1),
                    target: Term::x(2),
                },
            ),
        ];
        Specification::from_schemes("toy", toy_sig(), bit_domain(), schemes)
    }

    #[test]
    fn validate_accepts_toy_spec() {
        assert!(validate_spec(&toy_spec()).is_ok());
    }

    #[test]
    fn validate_flags_unbound_target_variable() {
        let bad = RuleScheme::new(
            "bad",
            "then",
            vec![PremissShape::Terminating, PremissShape::Omitted],
            Guard::<u8>::always(),
            Conclusion::Progress {
                output: StateExpr::PremissOut(1),
                target: Term::y(1),
            },
        );
        let spec = Specification::from_schemes("t", toy_sig(), bit_domain(), vec![bad]);
        let report = validate_spec(&spec);
        assert!(!report.is_ok());
        assert!(report.findings()[0].message.contains("unbound target variable y1"));
    }

    #[test]
    fn validate_flags_read_set_violation() {
        let bad = RuleScheme::new(
            "bad-guard",
            "then",
            vec![PremissShape::Progressing, PremissShape::Omitted],
            Guard::<u8>::new(ReadSet::none().with_output(2), |_| true),
            Conclusion::Terminate {
                output: StateExpr::Input,
            },
        );
        let spec = Specification::from_schemes("t", toy_sig(), bit_domain(), vec![bad]);
        let report = validate_spec(&spec);
        assert!(!report.is_ok());
        assert!(report.findings()[0].message.contains("guard read-set"));
    }

    #[test]
    fn resolve_is_unique_on_toy_spec() {
        let spec = toy_spec();
        let trig = Trigger::new(0, vec![(1, Mode::Progressing), (0, Mode::Terminating)]);
        let rule = spec.resolve_rule("then", &trig).unwrap();
        assert_eq!(rule.label(), "then-step");
        let trig = Trigger::new(0, vec![(1, Mode::Terminating), (0, Mode::Progressing)]);
        let rule = spec.resolve_rule("then", &trig).unwrap();
        assert_eq!(rule.label(), "then-done");
    }

    #[test]
    fn missing_and_ambiguous_are_reported() {
        let only_step = vec![RuleScheme::new(
            "then-step",
            "then",
            vec![PremissShape::Progressing, PremissShape::Omitted],
            Guard::<u8>::always(),
            Conclusion::Progress {
                output: StateExpr::PremissOut(1),
                target: Term::node("then", vec![Term::y(1), Term::x(2)]),
            },
        )];
        let spec = Specification::from_schemes("t", toy_sig(), bit_domain(), only_step);
        let trig = Trigger::new(0u8, vec![(1, Mode::Terminating), (0, Mode::Terminating)]);
        assert!(matches!(
            spec.answer("then", &trig),
            Err(ResolveError::MissingRule { .. })
        ));

        let dup = vec![
            RuleScheme::new(
                "a",
                "halt",
                vec![],
                Guard::<u8>::always(),
                Conclusion::Terminate {
                    output: StateExpr::Input,
                },
            ),
            RuleScheme::new(
                "b",
                "halt",
                vec![],
                Guard::always(),
                Conclusion::Terminate {
                    output: StateExpr::Input,
                },
            ),
        ];
        let spec = Specification::from_schemes("t", toy_sig(), bit_domain(), dup);
        let trig = Trigger::new(0u8, vec![]);
        match spec.answer("halt", &trig) {
            Err(ResolveError::AmbiguousRules { labels, .. }) => {
                assert_eq!(labels, vec!["a".to_string(), "b".to_string()]);
            }
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn family_round_trip_on_toy_spec() {
        let spec = toy_spec();
        let derived = spec_of_family(
            "toy-derived",
            spec.signature().clone(),
            spec.states().clone(),
            spec.as_family(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let op = spec.signature().operators()[rng.gen_range(0..3)].clone();
            let w: BTreeSet<usize> = (1..=op.arity()).filter(|_| rng.gen()).collect();
            let input = spec.states().sample(rng.gen());
            let outputs: Vec<u8> = (0..op.arity()).map(|_| spec.states().sample(rng.gen())).collect();
            let lhs = spec.r_family(op.name(), &w, input, outputs.clone());
            let rhs = derived.r_family(op.name(), &w, input, outputs);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn determinism_check_flags_gaps() {
        let spec = toy_spec();
        let probes = sample_triggers(&spec, 100, 3);
        assert!(determinism_check(&spec, &probes).is_ok());
    }

    #[test]
    fn fuzz_read_sets_accepts_honest_and_flags_liars() {
        assert!(fuzz_read_sets(&toy_spec(), 50, 11).is_ok());

        // a guard that claims to read nothing but inspects the input
        let liar = RuleScheme::new(
            "liar",
            "halt",
            vec![],
            Guard::<u8>::new(ReadSet::none(), |b| *b.input() == 0),
            Conclusion::Terminate {
                output: StateExpr::Input,
            },
        );
        let spec = Specification::from_schemes("t", toy_sig(), bit_domain(), vec![liar]);
        let report = fuzz_read_sets(&spec, 50, 11);
        assert!(!report.is_ok());
        assert!(report.findings[0].message.contains("guard depends on s"));
    }
}
