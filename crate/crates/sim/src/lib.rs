//! Intersection traffic simulation: road network construction, kinematic
//! vehicle dynamics, rule-based human-driver models, a multi-agent
//! decision-step environment, episode traces, and evaluation metrics.
//!
//! The world is a four-approach unsignalized intersection. Automated
//! vehicles pick discrete speed adjustments once per decision step; the
//! simulator expands each decision into several physics substeps in which
//! low-level controllers track lane geometry and speed targets.

pub mod behavior;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod metrics;
pub mod network;
pub mod route;
pub mod trace;
pub mod world;

pub use config::{ScenarioConfig, StyleMode};
pub use error::Error;
pub use geom::Vec2;
pub use network::{Movement, RoadNetwork, Route};
pub use world::{AgentStatus, Event, MetaAction, Observation, StepOutput, Vehicle, World};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
