//! Stateful small-step operational semantics.
//!
//! This crate provides a library for authoring operational semantics of
//! imperative languages as *guarded rule schemes* over an explicit state
//! space, executing the induced transition system, comparing programs under
//! three denotational readings of decreasing granularity (resumption trees,
//! state traces, final states), and checking two syntactic rule formats —
//! *streamlined* and *cool* — that guarantee the coarser two readings are
//! compositional.
//!
//! The main entry points are:
//!
//! - [`syntax`]: signatures, terms, programs, substitution.
//! - [`spec`]: rule schemes, triggers, specifications, validation, and the
//!   per-operator rule-family view of a specification.
//! - [`engine`]: single steps, traces, fuel-bounded runs, resumption trees.
//! - [`equiv`]: bounded equivalence checks and congruence probing over
//!   generated program contexts.
//! - [`format`]: operator classification and the streamlined/cool checkers.
//! - [`corpus`]: a small imperative language (`skip`, assignment, `;`,
//!   `while`) with five pathological extensions, parsers, and test suites.
//! - [`tm`]: Turing machines and the specification generator that embeds the
//!   halting problem into congruence checking.
//! - [`cli`]: the `isos` command-line front end.
//!
//! See the crate `examples/` directory for one runnable example per major
//! capability.

pub mod cli;
pub mod corpus;
pub mod engine;
pub mod equiv;
pub mod format;
pub mod spec;
pub mod syntax;
pub mod tm;
