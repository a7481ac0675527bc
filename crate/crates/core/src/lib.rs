//! Simulated communication-efficient distributed ridge regression.
//!
//! Implements DANE with exact, SGD and single-stage SVRG local solvers, the SGD and
//! distributed SGD baselines, the two limited-data-access variants, and exact accounting
//! of per-machine gradient evaluations and communication.

pub mod cost;
pub mod data;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod objective;
pub mod rng;
pub mod schedules;
pub mod sim;
pub mod solvers;
pub mod trace;

pub use cost::{CostLedger, MachineCost};
pub use data::{Dataset, Example, Shard, SyntheticSpec, View};
pub use error::{Error, Result};
pub use metrics::EvalContext;
pub use objective::{Loss, RidgeLoss, SubproblemSpec};
pub use schedules::{Schedule, ScheduleKind};
pub use sim::{AccessMode, Problem, RunConfig, RunOutput, SeedPolicy, StepCount};
pub use solvers::LocalSolverKind;
pub use trace::{Algorithm, Trace, TracePoint};
