//! Simulation and stability analysis of peer-to-peer file swarms.
//!
//! A fixed seed and a stream of arriving peers exchange the pieces of a
//! `k`-piece file. [`engine`] simulates the continuous-time chain under each
//! [`Protocol`], [`lyapunov`] certifies drift bounds for the two-piece
//! group-suppression chain, and [`bt`] is a round-based client model.

pub mod bt;
pub mod config;
pub mod engine;
pub mod error;
pub mod lyapunov;
pub mod metrics;
pub mod model;
pub mod protocols;

pub use config::{InitSpec, Protocol, ScenarioConfig};
pub use engine::{run_replications, run_scenario, Observer, RngStream, Simulator};
pub use error::{Error, Result};
pub use metrics::{MetricsSample, RunResult, SojournRecord, SojournStats};
pub use model::{GroupHistogram, NetworkState, PeerId, PieceProfile, Uploader};
