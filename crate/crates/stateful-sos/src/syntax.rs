//! Signatures, metavariables, and the terms they generate.
//!
//! Terms are immutable trees. A leaf is a metavariable (`x1`, `y2`, ...) or
//! the hole marker used by program contexts; an inner node applies an
//! operator of the ambient [`Signature`] to child terms. Closed, hole-free
//! terms are [`Program`]s. Structural equality is the only term equality.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// An operation symbol together with its arity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Operator {
    name: String,
    arity: usize,
}

impl Operator {
    pub fn new(name: impl Into<String>, arity: usize) -> Operator {
        Operator {
            name: name.into(),
            arity,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

/// A finite set of operators with pairwise distinct, nonempty names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Signature {
    operators: Vec<Operator>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("operator names may not be empty")]
    EmptyName,
    #[error("duplicate operator `{0}`")]
    DuplicateOperator(String),
}

impl Signature {
    pub fn new(operators: Vec<Operator>) -> Result<Signature, SignatureError> {
        let mut seen = BTreeSet::new();
        for op in &operators {
            if op.name.is_empty() {
                return Err(SignatureError::EmptyName);
            }
            if !seen.insert(op.name.clone()) {
                return Err(SignatureError::DuplicateOperator(op.name.clone()));
            }
        }
        Ok(Signature { operators })
    }

    pub fn operators(&self) -> &[Operator] {
        &self.operators
    }

    pub fn get(&self, name: &str) -> Option<&Operator> {
        self.operators.iter().find(|op| op.name == name)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.get(name).map(Operator::arity)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }
}

/// Metavariable kinds: `X` names rule sources, `Y` names premiss targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    X,
    Y,
}

/// A metavariable `x_i` or `y_i`. Indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MetaVar {
    kind: VarKind,
    index: usize,
}

impl MetaVar {
    pub fn new(kind: VarKind, index: usize) -> MetaVar {
        assert!(index >= 1, "metavariable indices start at 1");
        MetaVar { kind, index }
    }

    pub fn x(index: usize) -> MetaVar {
        MetaVar::new(VarKind::X, index)
    }

    pub fn y(index: usize) -> MetaVar {
        MetaVar::new(VarKind::Y, index)
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

impl fmt::Display for MetaVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::X => write!(f, "x{}", self.index),
            VarKind::Y => write!(f, "y{}", self.index),
        }
    }
}

/// A binding of metavariables to replacement terms.
pub type Binding = BTreeMap<MetaVar, Term>;

/// An open term over a signature, possibly containing metavariables and the
/// hole marker. Only context values may contain `Hole`; `validate_term`
/// rejects it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(MetaVar),
    Hole,
    Node { op: String, children: Vec<Term> },
}

impl Term {
    pub fn x(index: usize) -> Term {
        Term::Var(MetaVar::x(index))
    }

    pub fn y(index: usize) -> Term {
        Term::Var(MetaVar::y(index))
    }

    pub fn node(op: impl Into<String>, children: Vec<Term>) -> Term {
        Term::Node {
            op: op.into(),
            children,
        }
    }

    pub fn constant(op: impl Into<String>) -> Term {
        Term::node(op, Vec::new())
    }

    /// The exact set of metavariable leaves.
    pub fn metavars(&self) -> BTreeSet<MetaVar> {
        let mut out = BTreeSet::new();
        self.collect_metavars(&mut out);
        out
    }

    fn collect_metavars(&self, out: &mut BTreeSet<MetaVar>) {
        match self {
            Term::Var(v) => {
                out.insert(*v);
            }
            Term::Hole => {}
            Term::Node { children, .. } => {
                for c in children {
                    c.collect_metavars(out);
                }
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Hole => true,
            Term::Node { children, .. } => children.iter().all(Term::is_closed),
        }
    }

    /// Number of hole leaves.
    pub fn holes(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::Hole => 1,
            Term::Node { children, .. } => children.iter().map(Term::holes).sum(),
        }
    }

    /// Simultaneous replacement of metavariables. Metavariables are atomic
    /// names, so the replacement is capture-free; variables absent from the
    /// binding are left intact.
    pub fn substitute(&self, binding: &Binding) -> Term {
        match self {
            Term::Var(v) => binding.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Hole => Term::Hole,
            Term::Node { op, children } => Term::Node {
                op: op.clone(),
                children: children.iter().map(|c| c.substitute(binding)).collect(),
            },
        }
    }
}

impl fmt::Display for Term {
    /// Canonical applicative printer: `f(t1,...,tn)`. Language corpora
    /// override this with concrete syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Hole => write!(f, "[]"),
            Term::Node { op, children } => {
                if children.is_empty() {
                    write!(f, "{op}")
                } else {
                    write!(f, "{op}(")?;
                    for (i, c) in children.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{c}")?;
                    }
                    write!(f, ")")
                }
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("operator `{op}` expects {expected} argument(s), found {found}")]
    ArityMismatch {
        op: String,
        expected: usize,
        found: usize,
    },
    #[error("hole marker is only valid inside a context")]
    UnexpectedHole,
    #[error("term is not closed: contains `{0}`")]
    OpenTerm(MetaVar),
}

/// Checks that every node resolves in `sig` with the right child count and
/// that no hole occurs. Metavariable leaves are permitted (open terms).
pub fn validate_term(sig: &Signature, term: &Term) -> Result<(), TermError> {
    match term {
        Term::Var(_) => Ok(()),
        Term::Hole => Err(TermError::UnexpectedHole),
        Term::Node { op, children } => {
            let arity = sig
                .arity(op)
                .ok_or_else(|| TermError::UnknownOperator(op.clone()))?;
            if children.len() != arity {
                return Err(TermError::ArityMismatch {
                    op: op.clone(),
                    expected: arity,
                    found: children.len(),
                });
            }
            children.iter().try_for_each(|c| validate_term(sig, c))
        }
    }
}

/// A closed, hole-free term of the ambient signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program(Term);

impl Program {
    pub fn new(sig: &Signature, term: Term) -> Result<Program, TermError> {
        validate_term(sig, &term)?;
        if let Some(v) = term.metavars().into_iter().next() {
            return Err(TermError::OpenTerm(v));
        }
        Ok(Program(term))
    }

    /// Wraps a term known to be closed and hole-free (e.g. the result of
    /// substituting programs into a validated rule target).
    pub(crate) fn from_term_unchecked(term: Term) -> Program {
        debug_assert!(term.is_closed() && term.holes() == 0);
        Program(term)
    }

    pub fn term(&self) -> &Term {
        &self.0
    }

    pub fn into_term(self) -> Term {
        self.0
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig() -> Signature {
        Signature::new(vec![
            Operator::new("skip", 0),
            Operator::new(";", 2),
            Operator::new("f", 2),
            Operator::new("g", 1),
        ])
        .unwrap()
    }

    #[test]
    fn signature_rejects_duplicates_and_empty_names() {
        let err = Signature::new(vec![Operator::new("a", 0), Operator::new("a", 1)]).unwrap_err();
        assert_eq!(err, SignatureError::DuplicateOperator("a".into()));
        let err = Signature::new(vec![Operator::new("", 0)]).unwrap_err();
        assert_eq!(err, SignatureError::EmptyName);
    }

    #[test]
    fn substitute_replaces_named_variables_only() {
        // x1 ; x2 with x1 -> y1 leaves x2 intact
        let t = Term::node(";", vec![Term::x(1), Term::x(2)]);
        let mut b = Binding::new();
        b.insert(MetaVar::x(1), Term::y(1));
        assert_eq!(
            t.substitute(&b),
            Term::node(";", vec![Term::y(1), Term::x(2)])
        );
    }

    #[test]
    fn substitute_empty_binding_is_identity() {
        let t = Term::x(1);
        assert_eq!(t.substitute(&Binding::new()), t);
    }

    #[test]
    fn substitute_is_uniform() {
        let t = Term::node("f", vec![Term::x(1), Term::x(1)]);
        let mut b = Binding::new();
        b.insert(MetaVar::x(1), Term::constant("skip"));
        assert_eq!(
            t.substitute(&b),
            Term::node("f", vec![Term::constant("skip"), Term::constant("skip")])
        );
    }

    #[test]
    fn metavars_examples() {
        let t = Term::node(";", vec![Term::x(1), Term::y(1)]);
        let vars: Vec<_> = t.metavars().into_iter().collect();
        assert_eq!(vars, vec![MetaVar::x(1), MetaVar::y(1)]);
        assert!(Term::constant("skip").metavars().is_empty());
        let t = Term::node(
            "f",
            vec![Term::x(2), Term::node("f", vec![Term::y(2), Term::x(2)])],
        );
        let vars: Vec<_> = t.metavars().into_iter().collect();
        assert_eq!(vars, vec![MetaVar::x(2), MetaVar::y(2)]);
    }

    #[test]
    fn validate_term_examples() {
        let sig = sig();
        assert_eq!(validate_term(&sig, &Term::constant("skip")), Ok(()));
        assert_eq!(
            validate_term(&sig, &Term::node(";", vec![Term::constant("skip")])),
            Err(TermError::ArityMismatch {
                op: ";".into(),
                expected: 2,
                found: 1
            })
        );
        assert_eq!(
            validate_term(&sig, &Term::node("h", vec![Term::constant("skip")])),
            Err(TermError::UnknownOperator("h".into()))
        );
        assert_eq!(validate_term(&sig, &Term::Hole), Err(TermError::UnexpectedHole));
    }

    #[test]
    fn program_rejects_open_terms_and_holes() {
        let sig = sig();
        assert!(Program::new(&sig, Term::constant("skip")).is_ok());
        assert_eq!(
            Program::new(&sig, Term::x(1)),
            Err(TermError::OpenTerm(MetaVar::x(1)))
        );
        assert_eq!(
            Program::new(&sig, Term::node("g", vec![Term::Hole])),
            Err(TermError::UnexpectedHole)
        );
    }

    #[test]
    fn applicative_display() {
        let t = Term::node("f", vec![Term::x(1), Term::node("g", vec![Term::Hole])]);
        assert_eq!(t.to_string(), "f(x1, g([]))");
        assert_eq!(Term::constant("skip").to_string(), "skip");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn term_strategy() -> impl Strategy<Value = Term> {
            let leaf = prop_oneof![
                (1usize..3, prop_oneof![Just(VarKind::X), Just(VarKind::Y)])
                    .prop_map(|(i, k)| Term::Var(MetaVar::new(k, i))),
                Just(Term::constant("skip")),
            ];
            leaf.prop_recursive(3, 24, 2, |inner| {
                prop_oneof![
                    (inner.clone(), inner.clone())
                        .prop_map(|(a, b)| Term::node("f", vec![a, b])),
                    inner.prop_map(|a| Term::node("g", vec![a])),
                ]
            })
        }

        fn small_binding() -> impl Strategy<Value = Binding> {
            proptest::collection::btree_map(
                (1usize..3).prop_map(MetaVar::x),
                prop_oneof![Just(Term::constant("skip")), Just(Term::y(7))],
                0..3,
            )
        }

        proptest! {
            // metavars(substitute(t, b)) =
            //   (metavars(t) \ dom b) ∪ ⋃ { metavars(b(v)) | v ∈ metavars(t) ∩ dom b }
            #[test]
            fn metavars_of_substitution(t in term_strategy(), b in small_binding()) {
                let subst = t.substitute(&b);
                let mut expected = BTreeSet::new();
                for v in t.metavars() {
                    match b.get(&v) {
                        Some(r) => expected.extend(r.metavars()),
                        None => {
                            expected.insert(v);
                        }
                    }
                }
                prop_assert_eq!(subst.metavars(), expected);
            }

            // sequential composition of bindings with disjoint domains and
            // non-interfering ranges equals the fused simultaneous binding
            #[test]
            fn substitution_composes(t in term_strategy()) {
                let mut b1 = Binding::new();
                b1.insert(MetaVar::x(1), Term::constant("skip"));
                let mut b2 = Binding::new();
                b2.insert(MetaVar::x(2), Term::y(9));
                let mut fused = b1.clone();
                fused.extend(b2.clone());
                prop_assert_eq!(
                    t.substitute(&b1).substitute(&b2),
                    t.substitute(&fused)
                );
            }
        }
    }
}
