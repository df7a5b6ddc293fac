//! A small imperative language over variable stores — `skip`, assignment,
//! sequencing, and `while` — plus five extensions that probe the limits of
//! compositionality: a store-erasing wrapper, interrupt-aware sequencing,
//! left-first interleaving, state-dependent branching, and a wrapper that
//! leaks its subterm on termination.
//!
//! Assignments and loop headers are operator families: each distinct
//! assignment `x := e` is a constant and each `while e` a unary operator.
//! A specification therefore carries the finite sub-signature spanned by a
//! default atom set plus the programs under test; schemes are regenerated
//! uniformly from the operator names.

mod expr;
mod parse;
mod store;
pub mod fixtures;
pub mod suites;

pub use expr::Expr;
pub use parse::{parse_program, parse_store, print_program, print_term, ParseError, WhileOp};
pub use store::Store;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spec::{
    BoundStates, Conclusion, Guard, OpaqueExpr, PremissShape, ReadSet, RuleScheme, Specification,
    StateDomain, StateExpr,
};
use crate::syntax::{Operator, Program, Signature, Term};

type Bound<'a> = BoundStates<'a, Store>;

/// A named store predicate, used by the interrupt and branch variants.
#[derive(Clone)]
pub struct StorePred {
    name: String,
    pred: Arc<dyn Fn(&Store) -> bool + Send + Sync>,
}

impl StorePred {
    pub fn new(
        name: impl Into<String>,
        pred: impl Fn(&Store) -> bool + Send + Sync + 'static,
    ) -> StorePred {
        StorePred {
            name: name.into(),
            pred: Arc::new(pred),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn holds(&self, store: &Store) -> bool {
        (self.pred)(store)
    }

    /// Matches the interrupt example: fires when `x` holds 42.
    pub fn default_interrupt() -> StorePred {
        StorePred::new("x = 42", |s| s.get("x") == 42)
    }

    /// Matches the branching example: selects the left branch when `x` is 0.
    pub fn default_branch() -> StorePred {
        StorePred::new("x = 0", |s| s.get("x") == 0)
    }
}

impl fmt::Debug for StorePred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StorePred({})", self.name)
    }
}

/// The language variants. The base language plus one extension each.
#[derive(Debug, Clone)]
pub enum WhileVariant {
    Base,
    Floor,
    Interrupt(StorePred),
    Interleave,
    Branch(StorePred),
    Ceil,
}

impl WhileVariant {
    /// The CLI names: `while`, `while+floor`, `while+interrupt`,
    /// `while+interleave`, `while+branch`, `while+ceil`.
    pub fn parse(name: &str) -> Option<WhileVariant> {
        match name {
            "while" => Some(WhileVariant::Base),
            "while+floor" => Some(WhileVariant::Floor),
            "while+interrupt" => Some(WhileVariant::Interrupt(StorePred::default_interrupt())),
            "while+interleave" => Some(WhileVariant::Interleave),
            "while+branch" => Some(WhileVariant::Branch(StorePred::default_branch())),
            "while+ceil" => Some(WhileVariant::Ceil),
            _ => None,
        }
    }

    pub fn all_names() -> &'static [&'static str] {
        &[
            "while",
            "while+floor",
            "while+interrupt",
            "while+interleave",
            "while+branch",
            "while+ceil",
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            WhileVariant::Base => "while",
            WhileVariant::Floor => "while+floor",
            WhileVariant::Interrupt(_) => "while+interrupt",
            WhileVariant::Interleave => "while+interleave",
            WhileVariant::Branch(_) => "while+branch",
            WhileVariant::Ceil => "while+ceil",
        }
    }

    fn extension_op(&self) -> Option<WhileOp> {
        match self {
            WhileVariant::Base | WhileVariant::Interrupt(_) => None,
            WhileVariant::Floor => Some(WhileOp::Floor),
            WhileVariant::Interleave => Some(WhileOp::Interleave),
            WhileVariant::Branch(_) => Some(WhileOp::Branch),
            WhileVariant::Ceil => Some(WhileOp::Ceil),
        }
    }
}

impl fmt::Display for WhileVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// The atoms every specification carries: enough assignment constants and
/// loop headers for the shipped examples and test suites.
pub fn default_atoms() -> Vec<WhileOp> {
    let x = || Expr::var("x");
    vec![
        WhileOp::Skip,
        WhileOp::Assign("x".into(), Expr::Const(0)),
        WhileOp::Assign("x".into(), Expr::Const(1)),
        WhileOp::Assign("x".into(), Expr::Const(2)),
        WhileOp::Assign("x".into(), Expr::Const(42)),
        WhileOp::Assign("x".into(), Expr::add(x(), Expr::Const(0))),
        WhileOp::Assign("x".into(), Expr::add(x(), Expr::Const(1))),
        WhileOp::Assign("x".into(), Expr::add(x(), Expr::Const(2))),
        WhileOp::Assign("x".into(), Expr::mul(x(), Expr::Const(2))),
        WhileOp::Assign("x".into(), Expr::monus(x(), Expr::Const(1))),
        WhileOp::Assign("x".into(), Expr::var("y")),
        WhileOp::Assign("y".into(), Expr::Const(1)),
        WhileOp::Assign("y".into(), Expr::Const(2)),
        WhileOp::Assign("y".into(), x()),
        WhileOp::Assign("i".into(), Expr::Const(1)),
        WhileOp::Seq,
        WhileOp::While(x()),
        WhileOp::While(Expr::Const(1)),
    ]
}

fn atoms_of_term(variant: &WhileVariant, term: &Term, out: &mut Vec<WhileOp>) {
    if let Term::Node { op, children } = term {
        if let Some(kind) = WhileOp::from_name(op) {
            let admitted = match kind {
                WhileOp::Skip | WhileOp::Assign(_, _) | WhileOp::Seq | WhileOp::While(_) => true,
                ref ext => variant.extension_op().as_ref() == Some(ext),
            };
            if admitted {
                out.push(kind);
            }
        }
        for c in children {
            atoms_of_term(variant, c, out);
        }
    }
}

/// The store domain: infinite, sampled over a few variables and small
/// values.
pub fn store_domain() -> StateDomain<Store> {
    StateDomain::new("stores", |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = Store::empty();
        for var in ["x", "y", "i"] {
            store = store.with(var, rng.gen_range(0..5));
        }
        store
    })
}

/// All stores over the given variables with values drawn from `values`.
pub fn stores_over(vars: &[&str], values: &[u64]) -> Vec<Store> {
    let mut out = vec![Store::empty()];
    for var in vars {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for store in &out {
            for value in values {
                next.push(store.with(var, *value));
            }
        }
        out = next;
    }
    out
}

// ---------------------------------------------------------------------------
// Scheme generation
// ---------------------------------------------------------------------------

fn terminate(output: StateExpr<Store>) -> Conclusion<Store> {
    Conclusion::Terminate { output }
}

fn progress(output: StateExpr<Store>, target: Term) -> Conclusion<Store> {
    Conclusion::Progress { output, target }
}

fn seq_term(left: Term, right: Term) -> Term {
    Term::node(WhileOp::Seq.name(), vec![left, right])
}

fn schemes_for_atom(variant: &WhileVariant, atom: &WhileOp) -> Vec<RuleScheme<Store>> {
    let name = atom.name();
    match atom {
        WhileOp::Skip => vec![RuleScheme::new(
            "skip",
            name,
            vec![],
            Guard::always(),
            terminate(StateExpr::Input),
        )],
        WhileOp::Assign(var, expr) => {
            let (var, expr) = (var.clone(), expr.clone());
            vec![RuleScheme::new(
                format!("asn[{name}]"),
                name,
                vec![],
                Guard::always(),
                terminate(StateExpr::Opaque(OpaqueExpr::new(
                    ReadSet::input_only(),
                    move |b: &Bound<'_>| b.input().with(&var, expr.eval(b.input())),
                ))),
            )]
        }
        WhileOp::While(expr) => {
            let stop = expr.clone();
            let go = expr.clone();
            let unfold = seq_term(Term::x(1), Term::node(&name, vec![Term::x(1)]));
            vec![
                RuleScheme::new(
                    format!("while1[{name}]"),
                    name.clone(),
                    vec![PremissShape::Omitted],
                    Guard::new(ReadSet::input_only(), move |b: &Bound<'_>| stop.eval(b.input()) == 0),
                    terminate(StateExpr::Input),
                ),
                RuleScheme::new(
                    format!("while2[{name}]"),
                    name,
                    vec![PremissShape::Omitted],
                    Guard::new(ReadSet::input_only(), move |b: &Bound<'_>| go.eval(b.input()) != 0),
                    progress(StateExpr::Input, unfold),
                ),
            ]
        }
        WhileOp::Seq => match variant {
            WhileVariant::Interrupt(pred) => interrupt_seq_schemes(pred),
            _ => vec![
                RuleScheme::new(
                    "seq1",
                    ";",
                    vec![PremissShape::Terminating, PremissShape::Omitted],
                    Guard::always(),
                    progress(StateExpr::PremissOut(1), Term::x(2)),
                ),
                RuleScheme::new(
                    "seq2",
                    ";",
                    vec![PremissShape::Progressing, PremissShape::Omitted],
                    Guard::always(),
                    progress(StateExpr::PremissOut(1), seq_term(Term::y(1), Term::x(2))),
                ),
            ],
        },
        WhileOp::Floor => vec![
            // a progressing subterm resets the store to all zeroes
            RuleScheme::new(
                "floor-step",
                name.clone(),
                vec![PremissShape::Progressing],
                Guard::always(),
                progress(
                    StateExpr::Const(Store::empty()),
                    Term::node(&name, vec![Term::y(1)]),
                ),
            ),
            RuleScheme::new(
                "floor-done",
                name,
                vec![PremissShape::Terminating],
                Guard::always(),
                terminate(StateExpr::PremissOut(1)),
            ),
        ],
        WhileOp::Interleave => vec![
            // left-first: after each step of the left subterm, swap sides
            RuleScheme::new(
                "il-step",
                name.clone(),
                vec![PremissShape::Progressing, PremissShape::Omitted],
                Guard::always(),
                progress(
                    StateExpr::PremissOut(1),
                    Term::node(&name, vec![Term::x(2), Term::y(1)]),
                ),
            ),
            RuleScheme::new(
                "il-done",
                name,
                vec![PremissShape::Terminating, PremissShape::Omitted],
                Guard::always(),
                progress(StateExpr::PremissOut(1), Term::x(2)),
            ),
        ],
        WhileOp::Branch => {
            let WhileVariant::Branch(pred) = variant else {
                return Vec::new();
            };
            branch_schemes(pred)
        }
        WhileOp::Ceil => vec![
            RuleScheme::new(
                "ceil-step",
                name.clone(),
                vec![PremissShape::Progressing],
                Guard::always(),
                progress(
                    StateExpr::PremissOut(1),
                    Term::node(&name, vec![Term::y(1)]),
                ),
            ),
            // the terminated subterm is kept, not discarded
            RuleScheme::new(
                "ceil-done",
                name,
                vec![PremissShape::Terminating],
                Guard::always(),
                progress(StateExpr::PremissOut(1), Term::x(1)),
            ),
        ],
    }
}

/// Sequencing with an interrupt flag: while variable `i` is set, a left
/// step whose output satisfies the predicate terminates the left subterm
/// prematurely.
fn interrupt_seq_schemes(pred: &StorePred) -> Vec<RuleScheme<Store>> {
    let fire = {
        let p = pred.clone();
        move |b: &Bound<'_>| {
            b.input().get("i") != 0 && p.holds(b.output(1))
        }
    };
    let hold = {
        let p = pred.clone();
        move |b: &Bound<'_>| {
            b.input().get("i") != 0 && !p.holds(b.output(1))
        }
    };
    vec![
        RuleScheme::new(
            "int1",
            ";",
            vec![PremissShape::Terminating, PremissShape::Omitted],
            Guard::always(),
            progress(StateExpr::PremissOut(1), Term::x(2)),
        ),
        RuleScheme::new(
            "int2",
            ";",
            vec![PremissShape::Progressing, PremissShape::Omitted],
            Guard::new(ReadSet::input_only(), |b: &Bound<'_>| b.input().get("i") == 0),
            progress(StateExpr::PremissOut(1), seq_term(Term::y(1), Term::x(2))),
        ),
        RuleScheme::new(
            "int3",
            ";",
            vec![PremissShape::Progressing, PremissShape::Omitted],
            Guard::new(ReadSet::input_only().with_output(1), fire),
            progress(StateExpr::PremissOut(1), Term::x(2)),
        ),
        RuleScheme::new(
            "int4",
            ";",
            vec![PremissShape::Progressing, PremissShape::Omitted],
            Guard::new(ReadSet::input_only().with_output(1), hold),
            progress(StateExpr::PremissOut(1), seq_term(Term::y(1), Term::x(2))),
        ),
    ]
}

/// Step-by-step branching: the predicate picks which subterm advances.
/// Triggers not covered by the two stepping rules terminate with the input
/// state (the rules leave the output of the default unspecified; the input
/// is the least surprising choice).
fn branch_schemes(pred: &StorePred) -> Vec<RuleScheme<Store>> {
    let name = WhileOp::Branch.name();
    let left = {
        let p = pred.clone();
        move |b: &Bound<'_>| p.holds(b.input())
    };
    let right = {
        let p = pred.clone();
        move |b: &Bound<'_>| !p.holds(b.input())
    };
    vec![
        RuleScheme::new(
            "br-left",
            name.clone(),
            vec![PremissShape::Progressing, PremissShape::Omitted],
            Guard::new(ReadSet::input_only(), left.clone()),
            progress(
                StateExpr::PremissOut(1),
                Term::node(&name, vec![Term::y(1), Term::x(2)]),
            ),
        ),
        RuleScheme::new(
            "br-right",
            name.clone(),
            vec![PremissShape::Omitted, PremissShape::Progressing],
            Guard::new(ReadSet::input_only(), right.clone()),
            progress(
                StateExpr::PremissOut(2),
                Term::node(&name, vec![Term::x(1), Term::y(2)]),
            ),
        ),
        RuleScheme::new(
            "br-stop-left",
            name.clone(),
            vec![PremissShape::Terminating, PremissShape::Omitted],
            Guard::new(ReadSet::input_only(), left),
            terminate(StateExpr::Input),
        ),
        RuleScheme::new(
            "br-stop-right",
            name,
            vec![PremissShape::Omitted, PremissShape::Terminating],
            Guard::new(ReadSet::input_only(), right),
            terminate(StateExpr::Input),
        ),
    ]
}

/// Builds the specification for a variant over the default atoms.
pub fn build_spec(variant: &WhileVariant) -> Specification<Store> {
    build_spec_for(variant, &[])
}

/// Builds the specification for a variant whose signature additionally
/// covers every operator occurring in `programs`.
pub fn build_spec_for(variant: &WhileVariant, programs: &[Program]) -> Specification<Store> {
    let mut atoms = default_atoms();
    atoms.extend(variant.extension_op());
    for program in programs {
        atoms_of_term(variant, program.term(), &mut atoms);
    }
    let mut seen = Vec::new();
    let mut operators = Vec::new();
    let mut schemes = Vec::new();
    for atom in atoms {
        let name = atom.name();
        if seen.contains(&name) {
            continue;
        }
        seen.push(name.clone());
        operators.push(Operator::new(name, atom.arity()));
        schemes.extend(schemes_for_atom(variant, &atom));
    }
    let signature = Signature::new(operators).expect("atom names are distinct");
    Specification::from_schemes(variant.name(), signature, store_domain(), schemes)
}

/// Parses a program and validates it against a specification's signature.
pub fn program_for(spec: &Specification<Store>, text: &str) -> Result<Program, String> {
    let parsed = parse_program(text).map_err(|e| e.to_string())?;
    Program::new(spec.signature(), parsed.into_term()).map_err(|e| e.to_string())
}

/// A seeded random program over the default atoms (variables `x` and `y`,
/// constants up to 2, occasional loops).
pub fn gen_program(rng: &mut ChaCha8Rng, depth: usize) -> Program {
    Program::from_term_unchecked(gen_term(rng, depth))
}

fn gen_term(rng: &mut ChaCha8Rng, depth: usize) -> Term {
    let leaves: &[&str] = &[
        "skip", "x := 0", "x := 1", "x := 2", "x := x + 1", "x := x * 2", "x := x + 2", "y := 1",
        "y := x",
    ];
    if depth == 0 || rng.gen_range(0..100) < 35 {
        return Term::constant(leaves[rng.gen_range(0..leaves.len())]);
    }
    if rng.gen_range(0..100) < 80 {
        Term::node(
            ";",
            vec![gen_term(rng, depth - 1), gen_term(rng, depth - 1)],
        )
    } else {
        let cond = if rng.gen_range(0..100) < 85 { "while x" } else { "while 1" };
        Term::node(cond, vec![gen_term(rng, depth - 1)])
    }
}

/// `count` seeded random programs.
pub fn gen_programs(seed: u64, count: usize, depth: usize) -> Vec<Program> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| gen_program(&mut rng, depth)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{step, trace, StepOutcome};
    use crate::spec::{determinism_check, fuzz_read_sets, sample_triggers, validate_spec};
    use crate::syntax::validate_term;

    fn st(text: &str) -> Store {
        parse_store(text).unwrap()
    }

    fn all_variants() -> Vec<WhileVariant> {
        WhileVariant::all_names()
            .iter()
            .map(|n| WhileVariant::parse(n).unwrap())
            .collect()
    }

    #[test]
    fn variant_names_round_trip() {
        for name in WhileVariant::all_names() {
            assert_eq!(WhileVariant::parse(name).unwrap().name(), *name);
        }
        assert!(WhileVariant::parse("nope").is_none());
    }

    #[test]
    fn base_while_unfolds_on_nonzero_condition() {
        let spec = build_spec(&WhileVariant::Base);
        let p = program_for(&spec, "while x { skip }").unwrap();
        let out = step(&spec, &st("x=3"), &p).unwrap();
        assert_eq!(
            out,
            StepOutcome::Continue {
                state: st("x=3"),
                program: program_for(&spec, "skip ; while x { skip }").unwrap(),
            }
        );
    }

    #[test]
    fn floor_erases_the_store_between_steps() {
        let spec = build_spec(&WhileVariant::Floor);
        let t1 = program_for(&spec, "floor(x := 1 ; x := x + 1)").unwrap();
        let t2 = program_for(&spec, "floor(x := 1 ; x := x * 2)").unwrap();
        let s = st("");
        let tr1 = trace(&spec, &s, &t1, 8).unwrap();
        let tr2 = trace(&spec, &s, &t2, 8).unwrap();
        assert_ne!(tr1, tr2);
        assert_eq!(tr1.states(), &[st(""), st("x=1")]);
        assert_eq!(tr2.states(), &[st(""), st("")]);
    }

    #[test]
    fn interleave_swaps_sides_after_a_step() {
        let spec = build_spec(&WhileVariant::Interleave);
        let p = program_for(&spec, "(x := 1 ; x := 2) <| y := 1").unwrap();
        let out = step(&spec, &st(""), &p).unwrap();
        assert_eq!(
            out,
            StepOutcome::Continue {
                state: st("x=1"),
                program: program_for(&spec, "y := 1 <| x := 2").unwrap(),
            }
        );
    }

    #[test]
    fn interrupt_fires_on_flag_and_predicate() {
        let spec = build_spec(&WhileVariant::Interrupt(StorePred::default_interrupt()));
        let p = program_for(&spec, "(x := 42 ; x := 2) ; skip").unwrap();
        // flag set: the left subterm is cut off once its output has x = 42
        let out = step(&spec, &st("i=1"), &p).unwrap();
        assert_eq!(
            out,
            StepOutcome::Continue {
                state: st("i=1,x=42"),
                program: program_for(&spec, "skip").unwrap(),
            }
        );
        // flag clear: ordinary sequencing
        let out = step(&spec, &st(""), &p).unwrap();
        assert_eq!(
            out,
            StepOutcome::Continue {
                state: st("x=42"),
                program: program_for(&spec, "x := 2 ; skip").unwrap(),
            }
        );
    }

    #[test]
    fn branch_steps_the_side_chosen_by_the_predicate() {
        let spec = build_spec(&WhileVariant::Branch(StorePred::default_branch()));
        let p = program_for(&spec, "(x := 1 ; skip) \\/ (x := 2 ; skip)").unwrap();
        // x = 0: left side steps
        let out = step(&spec, &st(""), &p).unwrap();
        assert_eq!(
            out,
            StepOutcome::Continue {
                state: st("x=1"),
                program: program_for(&spec, "skip \\/ (x := 2 ; skip)").unwrap(),
            }
        );
        // x != 0: right side steps
        let out = step(&spec, &st("x=7"), &p).unwrap();
        assert_eq!(
            out,
            StepOutcome::Continue {
                state: st("x=2"),
                program: program_for(&spec, "(x := 1 ; skip) \\/ skip").unwrap(),
            }
        );
        // chosen side cannot step: terminate with the input store
        let q = program_for(&spec, "skip \\/ skip").unwrap();
        let out = step(&spec, &st("x=7"), &q).unwrap();
        assert_eq!(out, StepOutcome::Terminated { state: st("x=7") });
    }

    #[test]
    fn ceil_keeps_the_terminated_subterm() {
        let spec = build_spec(&WhileVariant::Ceil);
        let p = program_for(&spec, "ceil(x := x + 2)").unwrap();
        let out = step(&spec, &st("x=2"), &p).unwrap();
        assert_eq!(
            out,
            StepOutcome::Continue {
                state: st("x=4"),
                program: program_for(&spec, "x := x + 2").unwrap(),
            }
        );
    }

    #[test]
    fn all_variants_validate_and_are_deterministic() {
        for variant in all_variants() {
            let spec = build_spec(&variant);
            let report = validate_spec(&spec);
            assert!(report.is_ok(), "{variant}: {report}");
            let probes = sample_triggers(&spec, 500, 17);
            let det = determinism_check(&spec, &probes);
            assert!(det.is_ok(), "{variant}: {det}");
        }
    }

    #[test]
    fn read_sets_are_honest_on_all_variants() {
        for variant in all_variants() {
            let spec = build_spec(&variant);
            let report = fuzz_read_sets(&spec, 40, 23);
            assert!(report.is_ok(), "{variant}: {report}");
        }
    }

    #[test]
    fn parsed_programs_validate_against_their_spec() {
        let texts = [
            ("while", "x := 1 ; while x { x := x - 1 }"),
            ("while+floor", "floor(x := 1 ; y := x)"),
            ("while+interleave", "skip <| x := 2"),
            ("while+branch", "skip \\/ x := 2"),
            ("while+ceil", "ceil(skip)"),
        ];
        for (variant, text) in texts {
            let variant = WhileVariant::parse(variant).unwrap();
            let parsed = parse_program(text).unwrap();
            let spec = build_spec_for(&variant, std::slice::from_ref(&parsed));
            assert_eq!(validate_term(spec.signature(), parsed.term()), Ok(()));
        }
    }

    #[test]
    fn generated_programs_validate_against_the_base_spec() {
        let spec = build_spec(&WhileVariant::Base);
        for p in gen_programs(5, 50, 3) {
            assert_eq!(validate_term(spec.signature(), p.term()), Ok(()));
        }
    }

    #[test]
    fn generated_programs_round_trip_through_the_printer() {
        for p in gen_programs(11, 60, 3) {
            let printed = print_program(&p);
            let reparsed = parse_program(&printed)
                .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
            assert_eq!(p, reparsed);
        }
    }
}
