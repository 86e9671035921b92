//! Online machine activation with a makespan budget.
//!
//! Machines carry startup costs; jobs arrive online with a processing time per
//! machine. The goal is a cheap set of activated machines and an assignment
//! whose makespan stays within `O(log m)` of the budget `L`.
//!
//! The crate provides
//!  * [`fractional`]: the online primal-dual update of the relaxed LP,
//!  * [`rounding`]: online randomized rounding to an integer schedule,
//!  * [`oracle`]: exact offline optima for small instances,
//!  * [`doubling`]: the guess-and-double wrapper for an unknown optimum,
//!  * [`harness`]: experiment pipelines, CSV logs, verification and sweeps.

pub mod doubling;
pub mod error;
pub mod fractional;
pub mod generator;
pub mod harness;
pub mod instance;
pub mod oracle;
pub mod rounding;

pub use error::{Error, Result};
pub use fractional::{EngineConfig, FractionalState, StepOutcome, StepType};
pub use generator::{generate, GeneratorConfig, PtimeModel};
pub use instance::{Instance, Job, Machine};
pub use oracle::OracleResult;
pub use rounding::RoundingState;
