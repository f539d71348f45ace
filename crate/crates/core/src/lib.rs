//! Trace-driven, cycle-level simulator of a GPU sub-core register file whose
//! operand collectors double as small register caches.
//!
//! The pipeline is: [`trace`] (load or generate), [`profiler`] (reuse-distance
//! annotation), [`engine::simulate`] (cycle loop driven by [`policies`] and
//! [`adaptive`]), and [`metrics`] (counters, energy, normalized tables).

pub mod adaptive;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod policies;
pub mod profiler;
pub mod trace;

pub use config::{Mode, SimConfig, SthldMode};
pub use engine::simulate;
pub use error::{CompareError, ConfigError, SimError, TraceError};
pub use metrics::MetricsReport;
pub use trace::{KernelTrace, TraceInstruction};
