//! Scenarios, the closed-loop simulation, trace files and benchmarks.

pub mod bench;
pub mod run;
pub mod scenario;
pub mod trace;
pub mod validate;

pub use bench::{bench, BenchConfig, BenchReport};
pub use run::{run_simulation, SimConfig};
pub use scenario::{flat_walk, generate_staircase, load_scenario, Scenario, StaircaseParams};
pub use trace::{audit_trace, Trace};
pub use validate::{validate_tick, ForceCheck};
