//! The robot's planner and traffic-light commitment state machine.
//!
//! A cycle runs `Idle → Announce (yellow) → Committed (red) → MovingToPick →
//! GraspCheck → Placing → Returning → Idle`. While a target is yellow the
//! robot gives it up if the user's predicted intent lands on it; once red the
//! target is fixed until the grasp either succeeds or finds the block gone.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaze::PredictedIntent;
use crate::model::{
    Actor, BlockId, Event, EventKind, GraspOutcome, Highlight, HighlightColor, Seconds,
    WorkspaceState, ZoneId, TIME_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    /// How long a selection stays yellow before the robot commits.
    pub announce_duration: Seconds,
    pub move_to_pick: Seconds,
    pub grasp: Seconds,
    pub place: Seconds,
    #[serde(rename = "return")]
    pub return_time: Seconds,
    /// Width of a block between the gripper fingers, in meters.
    pub block_width: f64,
    pub rng_seed: u64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        RobotConfig {
            announce_duration: 3.0,
            move_to_pick: 9.0,
            grasp: 2.0,
            place: 9.0,
            return_time: 5.0,
            block_width: 0.04,
            rng_seed: 0,
        }
    }
}

impl RobotConfig {
    /// Short motion segments (4 s moves, 1 s grasp, 2 s return): a 14 s cycle.
    pub fn brisk() -> Self {
        RobotConfig { move_to_pick: 4.0, grasp: 1.0, place: 4.0, return_time: 2.0, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), RobotError> {
        let all = [self.announce_duration, self.move_to_pick, self.grasp, self.place, self.return_time];
        if all.iter().any(|d| !(*d > 0.0)) || !(self.block_width > 0.0) {
            return Err(RobotError::InvalidConfig);
        }
        Ok(())
    }

    /// Duration of one uncontested pick-and-place cycle.
    pub fn cycle_time(&self) -> Seconds {
        self.announce_duration + self.move_to_pick + self.grasp + self.place + self.return_time
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RobotError {
    #[error("gripper and block widths must be non-negative (got {0})")]
    NegativeWidth(f64),
    #[error("robot durations and block width must be positive")]
    InvalidConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum RobotPhase {
    Idle,
    Announce { target: BlockId, zone: ZoneId, since: Seconds },
    Committed { target: BlockId, zone: ZoneId, at: Seconds },
    MovingToPick { target: BlockId, zone: ZoneId, until: Seconds },
    GraspCheck { target: BlockId, zone: ZoneId, until: Seconds },
    Placing { block: BlockId, zone: ZoneId, until: Seconds },
    Returning { until: Seconds },
}

impl RobotPhase {
    pub fn name(&self) -> &'static str {
        match self {
            RobotPhase::Idle => "idle",
            RobotPhase::Announce { .. } => "announce",
            RobotPhase::Committed { .. } => "committed",
            RobotPhase::MovingToPick { .. } => "moving_to_pick",
            RobotPhase::GraspCheck { .. } => "grasp_check",
            RobotPhase::Placing { .. } => "placing",
            RobotPhase::Returning { .. } => "returning",
        }
    }

    /// The block the robot has committed to and not yet grasped.
    pub fn committed_target(&self) -> Option<BlockId> {
        match *self {
            RobotPhase::Committed { target, .. }
            | RobotPhase::MovingToPick { target, .. }
            | RobotPhase::GraspCheck { target, .. } => Some(target),
            _ => None,
        }
    }

    /// Zone the robot is committed to but not yet placing into.
    pub fn committed_zone(&self) -> Option<ZoneId> {
        match *self {
            RobotPhase::Committed { zone, .. }
            | RobotPhase::MovingToPick { zone, .. }
            | RobotPhase::GraspCheck { zone, .. } => Some(zone),
            _ => None,
        }
    }

    /// Zone the robot is physically placing into.
    pub fn placing_zone(&self) -> Option<ZoneId> {
        match *self {
            RobotPhase::Placing { zone, .. } => Some(zone),
            _ => None,
        }
    }

    /// Traffic-light display for this phase.
    pub fn highlight(&self) -> Option<Highlight> {
        match *self {
            RobotPhase::Announce { target, zone, .. } => {
                Some(Highlight { color: HighlightColor::Yellow, block: target, zone })
            }
            RobotPhase::Committed { target, zone, .. }
            | RobotPhase::MovingToPick { target, zone, .. }
            | RobotPhase::GraspCheck { target, zone, .. } => {
                Some(Highlight { color: HighlightColor::Red, block: target, zone })
            }
            RobotPhase::Placing { block, zone, .. } => {
                Some(Highlight { color: HighlightColor::Red, block, zone })
            }
            RobotPhase::Idle | RobotPhase::Returning { .. } => None,
        }
    }
}

/// What the robot knows when it acts.
#[derive(Debug, Clone, Copy)]
pub struct Perception<'a> {
    /// Physical workspace, consulted only through the gripper at grasp time.
    pub workspace: &'a WorkspaceState,
    /// Blocks the robot believes are still available to pick.
    pub believed_remaining: &'a BTreeSet<BlockId>,
    /// Latched user intent, when the gaze stream is available.
    pub predicted: Option<BlockId>,
}

/// Picks a uniformly random block from `remaining` excluding the user's
/// predicted target, and a uniformly random zone. Returns `None` when nothing
/// is left to choose, in which case the robot yields.
pub fn select_target<R: Rng + ?Sized>(
    remaining: &BTreeSet<BlockId>,
    predicted: Option<BlockId>,
    rng: &mut R,
) -> Option<(BlockId, ZoneId)> {
    let candidates: Vec<BlockId> = remaining.iter().copied().filter(|b| Some(*b) != predicted).collect();
    if candidates.is_empty() {
        return None;
    }
    let block = candidates[rng.random_range(0..candidates.len())];
    let zone = if rng.random_bool(0.5) { ZoneId::Zone1 } else { ZoneId::Zone2 };
    Some((block, zone))
}

/// Grasp check after closing the gripper: nearly closed fingers mean there was
/// nothing to grasp.
pub fn check_grasp(gripper_width: f64, block_width: f64) -> Result<GraspOutcome, RobotError> {
    if gripper_width < 0.0 || gripper_width.is_nan() {
        return Err(RobotError::NegativeWidth(gripper_width));
    }
    if block_width < 0.0 || block_width.is_nan() {
        return Err(RobotError::NegativeWidth(block_width));
    }
    if gripper_width < block_width / 2.0 {
        Ok(GraspOutcome::BlockMissing)
    } else {
        Ok(GraspOutcome::Grasped)
    }
}

#[derive(Debug, Clone)]
pub struct Robot {
    config: RobotConfig,
    phase: RobotPhase,
    rng: ChaCha8Rng,
    last_step: Seconds,
}

fn due(now: Seconds, deadline: Seconds) -> bool {
    now + TIME_EPS >= deadline
}

impl Robot {
    pub fn new(config: RobotConfig) -> Self {
        Robot {
            rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
            config,
            phase: RobotPhase::Idle,
            last_step: 0.0,
        }
    }

    /// Builds a robot in an arbitrary phase, mainly for tests and replays.
    pub fn with_phase(config: RobotConfig, phase: RobotPhase) -> Self {
        Robot { phase, ..Robot::new(config) }
    }

    pub fn phase(&self) -> &RobotPhase {
        &self.phase
    }

    pub fn config(&self) -> &RobotConfig {
        &self.config
    }

    fn event(&self, t: Seconds, kind: EventKind) -> Event {
        Event::new(t, Actor::Robot, kind)
    }

    fn announce(&mut self, now: Seconds, remaining: &BTreeSet<BlockId>, predicted: Option<BlockId>) -> Vec<Event> {
        match select_target(remaining, predicted, &mut self.rng) {
            Some((target, zone)) => {
                self.phase = RobotPhase::Announce { target, zone, since: now };
                vec![
                    self.event(now, EventKind::Select { block: target, zone }),
                    self.event(
                        now,
                        EventKind::Announce(Highlight { color: HighlightColor::Yellow, block: target, zone }),
                    ),
                ]
            }
            None => {
                self.phase = RobotPhase::Idle;
                Vec::new()
            }
        }
    }

    /// Reacts to a freshly fired user intent. Only a yellow target is given
    /// up; a committed robot proceeds regardless.
    pub fn on_user_intent(&mut self, intent: &PredictedIntent, perception: &Perception<'_>) -> Vec<Event> {
        match self.phase {
            RobotPhase::Announce { target, .. } if target == intent.block => {
                let now = intent.t_fired.max(self.last_step);
                self.announce(now, perception.believed_remaining, Some(intent.block))
            }
            _ => Vec::new(),
        }
    }

    /// Advances the phase machine to `now`, emitting the events of every
    /// transition that has come due.
    pub fn step(&mut self, now: Seconds, perception: &Perception<'_>) -> Vec<Event> {
        self.last_step = self.last_step.max(now);
        let mut events = Vec::new();
        loop {
            match self.phase {
                RobotPhase::Idle => {
                    if perception.workspace.held_by(crate::model::AgentId::Robot).is_some() {
                        break;
                    }
                    let announced = self.announce(now, perception.believed_remaining, perception.predicted);
                    if announced.is_empty() {
                        break;
                    }
                    events.extend(announced);
                }
                RobotPhase::Announce { target, zone, since } => {
                    if !perception.believed_remaining.contains(&target) {
                        // Told (via the confirmation menu) that the user took it.
                        events.extend(self.announce(now, perception.believed_remaining, perception.predicted));
                        if matches!(self.phase, RobotPhase::Announce { .. }) {
                            continue;
                        }
                        break;
                    }
                    if !due(now, since + self.config.announce_duration) {
                        break;
                    }
                    self.phase = RobotPhase::Committed { target, zone, at: since + self.config.announce_duration };
                    events.push(self.event(
                        now,
                        EventKind::Commit(Highlight { color: HighlightColor::Red, block: target, zone }),
                    ));
                }
                RobotPhase::Committed { target, zone, at } => {
                    self.phase = RobotPhase::MovingToPick { target, zone, until: at + self.config.move_to_pick };
                    events.push(self.event(now, EventKind::PickStart { block: target }));
                }
                RobotPhase::MovingToPick { target, zone, until } => {
                    if !due(now, until) {
                        break;
                    }
                    self.phase = RobotPhase::GraspCheck { target, zone, until: until + self.config.grasp };
                }
                RobotPhase::GraspCheck { target, zone, until } => {
                    if !due(now, until) {
                        break;
                    }
                    let width = if perception.workspace.is_at_start(target) { self.config.block_width } else { 0.0 };
                    let outcome = check_grasp(width, self.config.block_width).expect("widths are non-negative");
                    events.push(self.event(now, EventKind::GraspCheck { block: target, outcome }));
                    match outcome {
                        GraspOutcome::Grasped => {
                            events.push(self.event(now, EventKind::PickDone { block: target }));
                            events.push(self.event(now, EventKind::PlaceStart { block: target, zone }));
                            self.phase = RobotPhase::Placing { block: target, zone, until: until + self.config.place };
                        }
                        GraspOutcome::BlockMissing => {
                            self.phase = RobotPhase::Returning { until: until + self.config.return_time };
                        }
                    }
                }
                RobotPhase::Placing { block, zone, until } => {
                    if !due(now, until) {
                        break;
                    }
                    events.push(self.event(now, EventKind::PlaceDone { block, zone }));
                    self.phase = RobotPhase::Returning { until: until + self.config.return_time };
                }
                RobotPhase::Returning { until } => {
                    if !due(now, until) {
                        break;
                    }
                    self.phase = RobotPhase::Idle;
                }
            }
        }
        events
    }

    /// Emergency stop: drop everything and go idle.
    pub fn halt(&mut self) {
        self.phase = RobotPhase::Idle;
    }
}
