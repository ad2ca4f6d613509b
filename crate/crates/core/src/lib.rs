//! Deterministic discrete-event simulator for MapReduce-style cluster
//! scheduling, with three disciplines behind one callback interface:
//!
//! * `fifo` — jobs served in submission order, greedy data locality;
//! * `fair` — deficit-based fair sharing with delay scheduling;
//! * `hfsp` — size-based preemptive scheduling: job sizes are estimated
//!   online from sample tasks, jobs are ranked by their projected
//!   completion time under processor sharing in a virtual cluster, and
//!   excess slots are reclaimed by waiting, suspending or killing tasks.
//!
//! The crate is `no_std` + `alloc`; all file formats, reports and the CLI
//! live in the companion `hfsp-sim` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod baselines;
pub mod engine;
pub mod estimator;
pub mod hfsp;
pub mod metrics;
pub mod model;
pub mod vcluster;
pub mod workload;

pub use engine::{
    run_simulation, run_simulation_with, EngineError, EngineOptions, Scheduler, SchedulerAction,
    SimState, SimulationResult,
};
pub use model::{ClusterConfig, JobSpec, MachineId, PhaseId, TaskKind, TaskRef};
pub use workload::{WorkloadSpec, WorkloadTrace};
