//! Program and event model for the litmus DSL.

pub mod dep;
mod event;
mod order;
pub mod parse;
pub mod print;
mod program;

pub use dep::{dep, DepInfo, ExecContext};
pub use event::{Action, Actor, Event};
pub use order::MemoryOrder;
pub use parse::{parse_program, ParseError, ParseErrorKind, ParseErrors};
pub use print::print_program;
pub use program::*;
