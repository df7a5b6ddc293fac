//! Named congruence suites for the CLI and the acceptance checks: per
//! pathological variant, a pair plus leaf pool that witness the broken
//! format; for the well-behaved formats, seeded property suites expected to
//! come up empty.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{build_spec_for, gen_program, parse_program, stores_over, Store, WhileVariant};
use crate::engine::StepError;
use crate::equiv::{congruence_probe, gen_contexts, CongruenceReport, ProbeSet, Semantics};
use crate::syntax::Program;

/// A ready-to-run congruence experiment.
pub struct CongruenceSuite {
    pub name: String,
    pub semantics: Semantics,
    pub pairs: Vec<(Program, Program)>,
    pub leaf_pool: Vec<Program>,
    pub probes: ProbeSet<Store>,
    pub max_depth: usize,
}

pub fn suite_names() -> &'static [&'static str] {
    &["counterexample", "trace-props", "termination-props"]
}

fn progs(texts: &[&str]) -> Vec<Program> {
    texts.iter().map(|t| parse_program(t).unwrap()).collect()
}

fn pairs(texts: &[(&str, &str)]) -> Vec<(Program, Program)> {
    texts
        .iter()
        .map(|(a, b)| (parse_program(a).unwrap(), parse_program(b).unwrap()))
        .collect()
}

fn xy_probes() -> ProbeSet<Store> {
    ProbeSet::new(stores_over(&["x", "y"], &[0, 1, 2])).expect("distinct stores")
}

fn xi_probes() -> ProbeSet<Store> {
    ProbeSet::new(stores_over(&["x", "i"], &[0, 1, 2])).expect("distinct stores")
}

/// The counterexample suite for a pathological variant: a pair that is
/// equivalent on its own but distinguished inside some small context.
fn counterexample_suite(variant: &WhileVariant) -> Option<CongruenceSuite> {
    let doubling_pair = &[("x := 2 ; x := x + 2", "x := 2 ; x := x * 2")];
    let suite = match variant {
        WhileVariant::Base => return None,
        WhileVariant::Floor => CongruenceSuite {
            name: "counterexample".into(),
            semantics: Semantics::Trace { k: 8 },
            pairs: pairs(&[("x := 1 ; x := x + 1", "x := 1 ; x := x * 2")]),
            leaf_pool: progs(&["skip", "x := 0", "x := 1"]),
            probes: xy_probes(),
            max_depth: 2,
        },
        WhileVariant::Interrupt(_) => CongruenceSuite {
            name: "counterexample".into(),
            semantics: Semantics::Termination { fuel: 50 },
            pairs: pairs(&[("x := 42 ; x := 2", "x := 2")]),
            leaf_pool: progs(&["skip", "x := 0"]),
            probes: xi_probes(),
            max_depth: 2,
        },
        WhileVariant::Interleave => CongruenceSuite {
            name: "counterexample".into(),
            semantics: Semantics::Trace { k: 8 },
            pairs: pairs(doubling_pair),
            leaf_pool: progs(&["skip", "x := 0", "x := 1"]),
            probes: xy_probes(),
            max_depth: 2,
        },
        WhileVariant::Branch(_) => CongruenceSuite {
            name: "counterexample".into(),
            semantics: Semantics::Trace { k: 8 },
            // the separating context needs depth 2: one wrap that keeps the
            // pair progressing, branched against a loop back to `x = 0`
            pairs: pairs(doubling_pair),
            leaf_pool: progs(&["skip", "x := 0", "x := 0 ; x := 0", "x := 1"]),
            probes: xy_probes(),
            max_depth: 2,
        },
        WhileVariant::Ceil => CongruenceSuite {
            name: "counterexample".into(),
            semantics: Semantics::Trace { k: 8 },
            pairs: pairs(doubling_pair),
            leaf_pool: progs(&["skip", "x := 0", "x := 1"]),
            probes: xy_probes(),
            max_depth: 2,
        },
    };
    Some(suite)
}

/// Trace-equivalent pairs (sequencing reassociation and the write-through
/// pair) expected to stay equivalent in every context of a streamlined
/// specification.
fn trace_props_suite(seed: u64) -> CongruenceSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = pairs(&[("x := 1 ; y := x", "x := 1 ; y := 1")]);
    for _ in 0..3 {
        let (p, q, r) = (
            gen_program(&mut rng, 1),
            gen_program(&mut rng, 1),
            gen_program(&mut rng, 1),
        );
        pairs.push(reassociated(&p, &q, &r));
    }
    CongruenceSuite {
        name: "trace-props".into(),
        semantics: Semantics::Trace { k: 6 },
        pairs,
        leaf_pool: progs(&["skip", "x := 1", "y := x"]),
        probes: xy_probes(),
        max_depth: 4,
    }
}

/// Termination-equivalent pairs (overwrite, skip-elimination, sequencing
/// reassociation) expected to stay equivalent in every context of a cool
/// specification.
fn termination_props_suite(seed: u64) -> CongruenceSuite {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = pairs(&[("x := 1 ; x := 2", "x := 2")]);
    for _ in 0..3 {
        let p = gen_program(&mut rng, 1);
        all.push((seq(&parse_program("skip").unwrap(), &p), p.clone()));
    }
    for _ in 0..3 {
        let (p, q, r) = (
            gen_program(&mut rng, 1),
            gen_program(&mut rng, 1),
            gen_program(&mut rng, 1),
        );
        all.push(reassociated(&p, &q, &r));
    }
    CongruenceSuite {
        name: "termination-props".into(),
        semantics: Semantics::Termination { fuel: 500 },
        pairs: all,
        leaf_pool: progs(&["skip", "x := 1", "y := x"]),
        probes: xy_probes(),
        max_depth: 4,
    }
}

fn seq(a: &Program, b: &Program) -> Program {
    let term = crate::syntax::Term::node(";", vec![a.term().clone(), b.term().clone()]);
    parse_program(&super::print_term(&term)).expect("printable program")
}

fn reassociated(p: &Program, q: &Program, r: &Program) -> (Program, Program) {
    (seq(&seq(p, q), r), seq(p, &seq(q, r)))
}

/// Looks up a suite by name for a variant. `None` when the combination does
/// not exist (e.g. a counterexample suite for the base language).
pub fn suite_for(variant: &WhileVariant, name: &str, seed: u64) -> Option<CongruenceSuite> {
    match name {
        "counterexample" => counterexample_suite(variant),
        "trace-props" => match variant {
            WhileVariant::Base | WhileVariant::Interrupt(_) => Some(trace_props_suite(seed)),
            _ => None,
        },
        "termination-props" => match variant {
            WhileVariant::Base => Some(termination_props_suite(seed)),
            _ => None,
        },
        _ => None,
    }
}

/// Builds the variant's specification over the suite's programs and runs
/// the congruence probe with the given context seed and budget.
pub fn run_suite(
    variant: &WhileVariant,
    suite: &CongruenceSuite,
    seed: u64,
    budget: usize,
) -> Result<CongruenceReport<Store>, StepError<Store>> {
    let mut programs: Vec<Program> = Vec::new();
    for (a, b) in &suite.pairs {
        programs.push(a.clone());
        programs.push(b.clone());
    }
    programs.extend(suite.leaf_pool.iter().cloned());
    let spec = build_spec_for(variant, &programs);
    let contexts = gen_contexts(spec.signature(), &suite.leaf_pool, suite.max_depth, seed);
    congruence_probe(
        &spec,
        &suite.semantics,
        &suite.pairs,
        contexts,
        &suite.probes,
        budget,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn variant(name: &str) -> WhileVariant {
        WhileVariant::parse(name).unwrap()
    }

    #[test]
    fn every_pathological_variant_has_a_counterexample_suite() {
        for name in ["while+floor", "while+interrupt", "while+interleave", "while+branch", "while+ceil"] {
            let v = variant(name);
            let suite = suite_for(&v, "counterexample", 0).unwrap();
            let report = run_suite(&v, &suite, 1, 200).unwrap();
            assert!(
                !report.none_found(),
                "{name}: no counterexample found within budget\n{}",
                report.render(&super::super::print_term)
            );
        }
    }

    #[test]
    fn base_has_no_counterexample_suite() {
        assert!(suite_for(&variant("while"), "counterexample", 0).is_none());
    }

    #[test]
    fn property_suites_come_up_empty() {
        let v = variant("while");
        let suite = suite_for(&v, "termination-props", 3).unwrap();
        let report = run_suite(&v, &suite, 3, 120).unwrap();
        assert!(
            report.none_found(),
            "{}",
            report.render(&super::super::print_term)
        );

        for name in ["while", "while+interrupt"] {
            let v = variant(name);
            let suite = suite_for(&v, "trace-props", 4).unwrap();
            let report = run_suite(&v, &suite, 4, 120).unwrap();
            assert!(
                report.none_found(),
                "{name}: {}",
                report.render(&super::super::print_term)
            );
        }
    }
}
