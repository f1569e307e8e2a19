//! Stateless model checking of C11-style litmus programs restricted to
//! multi-copy-atomic executions.
//!
//! Write reordering is expressed as interleaving: every program write is
//! split into an *issue* event and a *shadow-write* that later publishes the
//! value, executed by a per-(thread, object) shadow-thread. The explorer
//! enumerates sequences of program and shadow events with source-DPOR and
//! filters them with coherence rules so that exactly the MCA-valid traces
//! survive.

pub mod coherence;
pub mod engine;
pub mod explorer;
pub mod ir;
pub mod par;
pub mod relations;
pub mod transform;

pub use ir::{parse_program, MemoryOrder, Program};
