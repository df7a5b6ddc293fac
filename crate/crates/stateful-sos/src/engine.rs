//! Executing a specification: single steps, k-truncated traces, fuel-bounded
//! runs, bounded resumption trees, and the maps connecting them.
//!
//! A step of `f(t_1,...,t_n)` on input `s` first computes the behaviour of
//! every argument on the *same* input `s` (that full tuple is the trigger),
//! resolves the unique rule, evaluates its conclusion, and substitutes the
//! arguments (`x_j`) and their continuations (`y_j`) into the target.
//! Argument results are memoized per subterm within one step call, since the
//! whole recursion shares a single input state.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::equiv::ProbeSet;
use crate::spec::{Mode, ResolveError, RuleAnswer, Specification, State, Trigger};
use crate::syntax::{Binding, MetaVar, Program, Term};

/// One transition: the program either continues or terminates, producing an
/// output state either way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome<S> {
    Continue { state: S, program: Program },
    Terminated { state: S },
}

impl<S: State> StepOutcome<S> {
    pub fn state(&self) -> &S {
        match self {
            StepOutcome::Continue { state, .. } => state,
            StepOutcome::Terminated { state } => state,
        }
    }
}

/// A resolution failure, with the path (child indices from the root) of the
/// subterm whose trigger had no unique rule.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("at subterm path {path:?}: {source}")]
pub struct StepError<S: State> {
    pub path: Vec<usize>,
    #[source]
    pub source: ResolveError<S>,
}

/// The states a program writes, in order; the input state is not included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace<S> {
    states: Vec<S>,
    status: TraceStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStatus {
    Terminated,
    Truncated(usize),
}

impl<S: State> Trace<S> {
    pub fn new(states: Vec<S>, status: TraceStatus) -> Trace<S> {
        assert!(!states.is_empty(), "traces are nonempty");
        if let TraceStatus::Truncated(k) = status {
            assert_eq!(states.len(), k, "a truncated trace has exactly k states");
        }
        Trace { states, status }
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn status(&self) -> TraceStatus {
        self.status
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("traces are nonempty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        false
    }
}

impl<S: State> fmt::Display for Trace<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.states {
            writeln!(f, "{s}")?;
        }
        match self.status {
            TraceStatus::Terminated => writeln!(f, "TERMINATED"),
            TraceStatus::Truncated(k) => writeln!(f, "TRUNCATED({k})"),
        }
    }
}

/// Result of a fuel-bounded run. Divergence is only ever semi-decided:
/// exhausted fuel is reported as such, never as nontermination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TerminationResult<S> {
    Final { state: S, steps: usize },
    FuelExhausted { fuel: usize },
}

impl<S: State> fmt::Display for TerminationResult<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationResult::Final { state, steps } => {
                write!(f, "FINAL {state} after {steps} step(s)")
            }
            TerminationResult::FuelExhausted { fuel } => write!(f, "FUEL EXHAUSTED ({fuel})"),
        }
    }
}

/// A depth- and probe-bounded approximant of a program's behaviour tree:
/// each probe state maps to the output-state label of that step and the
/// behaviour of the continuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumptionNode<S> {
    depth: usize,
    edges: Vec<ResumptionEdge<S>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumptionEdge<S> {
    pub probe: S,
    pub label: S,
    pub child: ResumptionChild<S>,
}

/// Children below depth 1 are left unexpanded rather than rejected, so tree
/// equality at depth k ignores deeper structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResumptionChild<S> {
    Terminated,
    Unexpanded,
    Node(Arc<ResumptionNode<S>>),
}

impl<S: State> ResumptionNode<S> {
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn edges(&self) -> &[ResumptionEdge<S>] {
        &self.edges
    }

    pub fn lookup(&self, probe: &S) -> Option<&ResumptionEdge<S>> {
        self.edges.iter().find(|e| e.probe == *probe)
    }
}

/// A forwarded state fell outside the probe set while walking a resumption
/// tree. This signals an under-sampled probe set, not a semantic fact.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("state {0} is outside the resumption tree's probe set")]
pub struct ProbeMiss<S: State>(pub S);

/// Performs the first computation step of `program` on input `state`.
pub fn step<S: State>(
    spec: &Specification<S>,
    state: &S,
    program: &Program,
) -> Result<StepOutcome<S>, StepError<S>> {
    let mut memo = HashMap::new();
    let mut path = Vec::new();
    step_term(spec, state, program.term(), &mut path, &mut memo)
}

fn step_term<S: State>(
    spec: &Specification<S>,
    state: &S,
    term: &Term,
    path: &mut Vec<usize>,
    memo: &mut HashMap<Term, StepOutcome<S>>,
) -> Result<StepOutcome<S>, StepError<S>> {
    if let Some(hit) = memo.get(term) {
        return Ok(hit.clone());
    }
    let Term::Node { op, children } = term else {
        unreachable!("programs are closed and hole-free");
    };
    let mut premisses = Vec::with_capacity(children.len());
    let mut continuations: Vec<Option<Term>> = Vec::with_capacity(children.len());
    for (idx, child) in children.iter().enumerate() {
        path.push(idx);
        let outcome = step_term(spec, state, child, path, memo)?;
        path.pop();
        match outcome {
            StepOutcome::Continue { state, program } => {
                premisses.push((state, Mode::Progressing));
                continuations.push(Some(program.into_term()));
            }
            StepOutcome::Terminated { state } => {
                premisses.push((state, Mode::Terminating));
                continuations.push(None);
            }
        }
    }
    let trigger = Trigger::new(state.clone(), premisses);
    let answer = spec.answer(op, &trigger).map_err(|source| StepError {
        path: path.clone(),
        source,
    })?;
    let outcome = match answer {
        RuleAnswer::Final { output } => StepOutcome::Terminated { state: output },
        RuleAnswer::Progress { output, target } => {
            let mut binding = Binding::new();
            for (j, child) in children.iter().enumerate() {
                binding.insert(MetaVar::x(j + 1), child.clone());
            }
            for (j, cont) in continuations.into_iter().enumerate() {
                if let Some(cont) = cont {
                    binding.insert(MetaVar::y(j + 1), cont);
                }
            }
            StepOutcome::Continue {
                state: output,
                program: Program::from_term_unchecked(target.substitute(&binding)),
            }
        }
    };
    memo.insert(term.clone(), outcome.clone());
    Ok(outcome)
}

/// Iterates `step`, feeding each output state into the next step, and
/// collects the output states. Stops on termination or after `k` outputs.
pub fn trace<S: State>(
    spec: &Specification<S>,
    state: &S,
    program: &Program,
    k: usize,
) -> Result<Trace<S>, StepError<S>> {
    assert!(k >= 1, "trace requires k >= 1");
    let mut states = Vec::new();
    let mut current = state.clone();
    let mut prog = program.clone();
    for _ in 0..k {
        match step(spec, &current, &prog)? {
            StepOutcome::Terminated { state } => {
                states.push(state);
                return Ok(Trace::new(states, TraceStatus::Terminated));
            }
            StepOutcome::Continue { state, program } => {
                states.push(state.clone());
                current = state;
                prog = program;
            }
        }
    }
    Ok(Trace::new(states, TraceStatus::Truncated(k)))
}

/// Like [`trace`] but keeps only the final state and step count. A
/// terminating step counts as one step.
pub fn run<S: State>(
    spec: &Specification<S>,
    state: &S,
    program: &Program,
    fuel: usize,
) -> Result<TerminationResult<S>, StepError<S>> {
    assert!(fuel >= 1, "run requires fuel >= 1");
    let mut current = state.clone();
    let mut prog = program.clone();
    for i in 1..=fuel {
        match step(spec, &current, &prog)? {
            StepOutcome::Terminated { state } => {
                return Ok(TerminationResult::Final { state, steps: i });
            }
            StepOutcome::Continue { state, program } => {
                current = state;
                prog = program;
            }
        }
    }
    Ok(TerminationResult::FuelExhausted { fuel })
}

/// Builds the probe-bounded behaviour tree of `program` down to `depth`.
/// Identical continuations share subtrees.
pub fn resumption<S: State>(
    spec: &Specification<S>,
    program: &Program,
    probes: &ProbeSet<S>,
    depth: usize,
) -> Result<ResumptionNode<S>, StepError<S>> {
    assert!(depth >= 1, "resumption requires depth >= 1");
    let mut memo: HashMap<(Term, usize), Arc<ResumptionNode<S>>> = HashMap::new();
    build_node(spec, program, probes, depth, &mut memo)
}

fn build_node<S: State>(
    spec: &Specification<S>,
    program: &Program,
    probes: &ProbeSet<S>,
    depth: usize,
    memo: &mut HashMap<(Term, usize), Arc<ResumptionNode<S>>>,
) -> Result<ResumptionNode<S>, StepError<S>> {
    let mut edges = Vec::with_capacity(probes.states().len());
    for probe in probes.states() {
        match step(spec, probe, program)? {
            StepOutcome::Terminated { state } => edges.push(ResumptionEdge {
                probe: probe.clone(),
                label: state,
                child: ResumptionChild::Terminated,
            }),
            StepOutcome::Continue { state, program: next } => {
                let child = if depth == 1 {
                    ResumptionChild::Unexpanded
                } else {
                    let key = (next.term().clone(), depth - 1);
                    match memo.get(&key) {
                        Some(node) => ResumptionChild::Node(node.clone()),
                        None => {
                            let node = Arc::new(build_node(spec, &next, probes, depth - 1, memo)?);
                            memo.insert(key, node.clone());
                            ResumptionChild::Node(node)
                        }
                    }
                };
                edges.push(ResumptionEdge {
                    probe: probe.clone(),
                    label: state,
                    child,
                });
            }
        }
    }
    Ok(ResumptionNode { depth, edges })
}

/// Walks a resumption tree feeding each edge label forward as the next
/// lookup state. Agrees with direct execution wherever the probe set covers
/// the forwarded states.
pub fn trc_exec<S: State>(root: &ResumptionNode<S>, start: &S) -> Result<Trace<S>, ProbeMiss<S>> {
    let mut states = Vec::new();
    let mut node = root;
    let mut lookup = start.clone();
    loop {
        let edge = node
            .lookup(&lookup)
            .ok_or_else(|| ProbeMiss(lookup.clone()))?;
        states.push(edge.label.clone());
        match &edge.child {
            ResumptionChild::Terminated => return Ok(Trace::new(states, TraceStatus::Terminated)),
            ResumptionChild::Unexpanded => {
                return Ok(Trace::new(states, TraceStatus::Truncated(root.depth)))
            }
            ResumptionChild::Node(next) => {
                lookup = edge.label.clone();
                node = next;
            }
        }
    }
}

/// What a trace reveals about termination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceOutcome<S> {
    Final(S),
    Unknown,
}

/// Final state of a terminated trace; `Unknown` for truncated ones.
pub fn fn_of_trace<S: State>(trace: &Trace<S>) -> TraceOutcome<S> {
    match trace.status() {
        TraceStatus::Terminated => TraceOutcome::Final(trace.last().clone()),
        TraceStatus::Truncated(_) => TraceOutcome::Unknown,
    }
}
