//! Scenario-driven simulation: loading, the time-stepped loop, coverage maps
//! and output writers.

pub mod bundled;
pub mod coverage;
pub mod emit;
mod model;
pub mod run;
pub mod scenario;

pub use coverage::{coverage_map, CoverageMap, CoveragePoint};
pub use emit::{write_coverage, write_events, write_trace, Format};
pub use run::{run, RunOutput, TraceRow};
pub use scenario::{load_scenario, Scenario};
