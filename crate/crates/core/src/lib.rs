//! Example-driven synthesis of table transformations.
//!
//! Given an example input table and the desired output table, `tabsynth`
//! looks for a short program in a table-edit operator language ([`dsl`]) that
//! turns one into the other. Two routes are available and can be combined:
//!
//! * [`search`]: best-first search over operator sequences, ordered by
//!   program length plus a table-edit-distance estimate ([`ted`]);
//! * [`llm`]: a prompt / execute / repair loop against a chat-completion
//!   model, with one-shot and two multi-round variants.
//!
//! [`hybrid`] runs the search first and hands budget-exhausted scenarios to
//! the model. [`eval`] scores produced tables row by row against held-out
//! test cases and aggregates the results into reports.

pub mod dsl;
pub mod eval;
pub mod hybrid;
pub mod llm;
pub mod search;
pub mod table;
pub mod ted;

pub use dsl::{interpret, parse_program, print_program, Operator, Program};
pub use table::{tables_equal, Scenario, ScenarioSet, Table, TestCase};
