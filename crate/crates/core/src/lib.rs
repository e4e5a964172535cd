//! Event-driven simulation of pulse-coupled oscillator networks with a
//! transmission delay and excitatory coupling.
//!
//! The crate is organised bottom-up:
//!
//! - [`phase_model`]: phase maps `f` and the `(τ, ε)` region partition.
//! - [`network`]: coupling topologies and their normalization invariants.
//! - [`engine`]: exact event-driven integration and firing logs.
//! - [`analysis`]: interspike intervals, firing-property checkers, period and
//!   synchronization detection.
//! - [`montecarlo`]: synchronized-basin estimation and parameter sweeps.
//! - [`output`]: CSV, JSON and SVG writers.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod montecarlo;
pub mod network;
pub mod output;
pub mod phase_model;

pub use analysis::{
    classify_run, PropertyId, PropertyReport, RunClassification, Tolerances,
};
pub use engine::{
    Engine, EngineSettings, FiringLog, FiringRecord, RunOutput, RunStatus, SimState, Snapshot,
    StopCriteria, TieRule,
};
pub use error::{Error, Result};
pub use montecarlo::{Budget, EstimateCell, SampleOutcome, SweepSpec};
pub use network::NetworkTopology;
pub use phase_model::{PhaseMap, PhaseMapSpec, RegionClass};
