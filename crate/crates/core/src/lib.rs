//! Two-timescale resource allocation for vehicle-to-vehicle links.
//!
//! A roadside unit groups VUE pairs into zones once per frame and hands each
//! zone an orthogonal set of resource blocks in proportion to its traffic
//! and queue-length targets. Within a zone, every pair picks its transmit
//! power each slot by minimizing a Lyapunov drift-plus-penalty bound, which
//! reduces to water-filling over the zone's RBs.
//!
//! The crate is `no_std` (with `alloc`): it holds the models and the
//! simulation loop only. File formats, the CLI and parallel sweeps live in
//! the `v2v-sim` companion crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod engine;
pub mod mobility;
pub mod queueing;
pub mod rsu;
pub mod scenario;
pub mod streams;
pub mod vue_power;

pub use engine::{ccdf, run, run_with, sweep_v, RunMetrics, RunOptions, Simulation, SlotRecord};
pub use scenario::{ConfigFile, ScenarioConfig, Scheme};
