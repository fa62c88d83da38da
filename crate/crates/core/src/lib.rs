//! Effectively-callback-free execution checking for a small contract
//! language.
//!
//! An execution of an object is effectively callback free when an equivalent
//! execution without callbacks to that object exists. This crate provides:
//!
//! - [`lang`]: the contract language, parser, and context validation;
//! - [`interp`]: a small-step interpreter with trace recording, havoc
//!   transitions, and a most-general-client executor;
//! - [`monitor`]: the online polynomial-time conflict-ECF monitor built on
//!   segments, read/write sets, and an invocation-order-constraint graph;
//! - [`oracle`]: brute-force reference checkers for conflict equivalence and
//!   final-state equivalence on small executions;
//! - [`decider`]: a static conflict-SECF decision for finite-state objects
//!   via depth-2 configuration exploration against a set-tracking acceptor;
//! - [`corpus`]: the executable example corpus with expected outcomes;
//! - [`workload`]: synthetic workload generation for benchmarks.

pub mod corpus;
pub mod decider;
pub mod gen;
pub mod interp;
pub mod lang;
pub mod monitor;
pub mod oracle;
pub mod workload;

pub use interp::{
    project_trace, run_mgc, Event, EventKind, Scenario, Store, Trace,
};
pub use lang::{parse_contract, validate_context, CodeContext, Contract, ObjectId, ObjectName};
pub use monitor::{EcfReport, Monitor, Verdict};
