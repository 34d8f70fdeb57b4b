//! Microscopic traffic simulator with green-light speed advisories.
//!
//! Vehicles follow a collision-free car-following model over a road graph
//! with fixed-cycle signals. Equipped vehicles in radio range of equipped
//! lights receive signal timing messages and adapt their speed so they
//! reach the stop line during green.

pub mod config;
pub mod dynamics;
pub mod emissions;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod glosa;
pub mod netgraph;
pub mod rng;
pub mod scenarios;
pub mod signalctl;
pub mod v2i;

pub use engine::{run, collect_baseline_pair, SimConfig, SimulationResult, VehicleRecord};
pub use error::{Error, Result};
pub use scenarios::{build, ScenarioInstance, ScenarioSpec};
