//! File formats, reports, built-in scenarios and the command-line front
//! end for the `hfsp-core` cluster-scheduling simulator.

pub mod config;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod trace_io;

pub use config::{parse_seeds, RunConfig};
pub use runner::{run_matrix, run_one};
pub use trace_io::{parse_trace, write_trace};
