//! Simulation and analysis toolkit for human-robot joint action on a shared
//! table.
//!
//! A human and a robot arm sort labelled blocks into two zones. The robot
//! announces each target with a yellow highlight, commits with red after a
//! fixed delay, and may read the human's gaze to steer away from the block
//! the human is about to take. A safety monitor stops the robot whenever the
//! human picks a committed block or places into the zone the robot is using.
//!
//! The crate is organised bottom up:
//!
//! - [`model`]: blocks, zones, events and the workspace transition function
//! - [`gaze`]: the dwell-based intent predictor
//! - [`robot`]: the robot's announce/commit state machine
//! - [`human`]: a stochastic simulated participant
//! - [`engine`]: the shared coordination core and safety monitor
//! - [`sim`]: fixed-tick simulation of one trial
//! - [`experiment`]: within-subjects experiment runner and results table
//! - [`stats`]: the statistical tests used in the analysis
//! - [`trace`]: JSONL traces with content hashes

pub mod engine;
pub mod experiment;
pub mod gaze;
pub mod human;
pub mod model;
pub mod robot;
pub mod sim;
pub mod stats;
pub mod trace;

pub use engine::{detect_violation, Engine, HumanAction};
pub use gaze::{DwellConfig, DwellPredictor, GazeSample, PredictedIntent};
pub use human::{Human, HumanParams};
pub use model::{BlockId, Condition, Event, EventKind, ScenarioConfig, WorkspaceState, ZoneId};
pub use robot::{Robot, RobotConfig, RobotPhase};
pub use sim::{run, RunMetrics, Scenario};
pub use trace::Trace;
