//! Coordination tiers for multi-agent task specifications.
//!
//! - [`task`]: the declarative task format and its validator.
//! - [`lattice`]: join-semilattice values used to merge agent outputs.
//! - [`classifier`]: assigns each spec a tier (M, M-O, NM) with evidence.
//! - [`engine`]: deterministic simulation under uncoordinated, causal and
//!   orchestrated scheduling.
//! - [`portfolio`]: portfolio statistics, Wilson intervals and the
//!   coordination tax.
//! - [`cli`] and [`report`]: the `calmtier` command line.

pub mod classifier;
pub mod cli;
pub mod data;
pub mod engine;
pub mod lattice;
pub mod portfolio;
pub mod rational;
pub mod report;
pub mod task;

pub use classifier::{classify, Classification, Tier};
pub use engine::{run, RunResult, ScheduleMode};
pub use lattice::{JoinKind, LatticeValue};
pub use task::{load_task, TaskSpec};
