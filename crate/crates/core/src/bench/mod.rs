//! Trace replay, workload generation, file formats and metrics.

mod config;
mod files;
mod metrics;
mod replay;
mod trace;

pub use crate::platform::FunctionModel;
pub use config::{ConfigError, SimConfig};
pub use files::{parse_dag, parse_registry, parse_trace, write_trace};
pub use metrics::{percentile, InvocationRow, MemorySample, Metrics, Spread};
pub use replay::{makespan, replay, replay_with, ReplayError, ReplayOptions};
pub use trace::{from_minute_counts, from_minute_table, gen_spike_trace, Trace, TraceEvent};
