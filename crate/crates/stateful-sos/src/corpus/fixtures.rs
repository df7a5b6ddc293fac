//! Deliberately broken specifications for exercising the resolution error
//! paths: a missing loop rule and a pair of overlapping loop guards.

use super::{build_spec, WhileVariant};
use crate::spec::{Conclusion, Guard, PremissShape, ReadSet, RuleScheme, Specification, StateExpr};
use super::store::Store;
use super::expr::Expr;

/// The base language without any `while1` rules: triggers whose loop
/// condition evaluates to zero have no matching rule.
pub fn broken_missing_while1() -> Specification<Store> {
    let base = build_spec(&WhileVariant::Base);
    let schemes = base
        .schemes()
        .expect("corpus specs are scheme-based")
        .iter()
        .filter(|s| !s.label().starts_with("while1"))
        .cloned()
        .collect();
    Specification::from_schemes(
        "while(broken: missing while1)",
        base.signature().clone(),
        base.states().clone(),
        schemes,
    )
}

/// The base language with `while2[while x]` made unconditional, so its
/// guard overlaps `while1[while x]` on stores with `x = 0`.
pub fn broken_overlapping_while() -> Specification<Store> {
    let base = build_spec(&WhileVariant::Base);
    let op = "while x";
    let mut schemes: Vec<RuleScheme<Store>> = base
        .schemes()
        .expect("corpus specs are scheme-based")
        .iter()
        .filter(|s| s.label() != format!("while2[{op}]"))
        .cloned()
        .collect();
    let unfold = crate::syntax::Term::node(
        ";",
        vec![
            crate::syntax::Term::x(1),
            crate::syntax::Term::node(op, vec![crate::syntax::Term::x(1)]),
        ],
    );
    schemes.push(RuleScheme::new(
        format!("while2[{op}] (overlapping)"),
        op,
        vec![PremissShape::Omitted],
        Guard::new(ReadSet::input_only(), |_| true),
        Conclusion::Progress {
            output: StateExpr::Input,
            target: unfold,
        },
    ));
    let _ = Expr::Const(0); // the overlap is against `x = 0`
    Specification::from_schemes(
        "while(broken: overlapping while guards)",
        base.signature().clone(),
        base.states().clone(),
        schemes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_store, program_for};
    use crate::engine::step;
    use crate::spec::{Mode, ResolveError, Trigger};

    #[test]
    fn missing_while1_raises_missing_rule() {
        let spec = broken_missing_while1();
        let p = program_for(&spec, "while x { skip }").unwrap();
        let s = parse_store("").unwrap();
        let err = step(&spec, &s, &p).unwrap_err();
        assert!(matches!(err.source, ResolveError::MissingRule { .. }));
        assert_eq!(err.path, Vec::<usize>::new());
    }

    #[test]
    fn overlapping_guards_raise_ambiguity_with_both_labels() {
        let spec = broken_overlapping_while();
        let s = parse_store("").unwrap();
        let trigger = Trigger::new(s.clone(), vec![(s, Mode::Terminating)]);
        match spec.answer("while x", &trigger) {
            Err(ResolveError::AmbiguousRules { labels, .. }) => {
                assert_eq!(labels.len(), 2);
                assert!(labels.iter().all(|l| l.starts_with("while")));
            }
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn error_paths_point_at_the_offending_subterm() {
        let spec = broken_missing_while1();
        let p = program_for(&spec, "(while x { skip }) ; skip").unwrap();
        let s = parse_store("").unwrap();
        let err = step(&spec, &s, &p).unwrap_err();
        assert_eq!(err.path, vec![0]);
    }
}
