//! The coordination core shared by the simulator and the live server: the
//! authoritative workspace, the robot, the dwell predictor and the safety
//! monitor, plus the trace of everything that happened.
//!
//! Drivers feed human actions and gaze samples in, call
//! [`Engine::robot_tick`] once per tick, and check [`Engine::check_complete`].
//! Within a tick, human actions are handled first, then gaze, then the
//! robot, so an intent that fires on the same tick as the robot's commit
//! timeout wins.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaze::{DwellConfig, DwellPredictor, GazeError, GazeSample, PredictedIntent};
use crate::model::{
    Actor, AgentId, BlockId, BlockState, Condition, Event, EventKind, Seconds, TransitionError, Violation,
    ViolationKind, WorkspaceState, ZoneId, TIME_EPS,
};
use crate::robot::{Perception, Robot, RobotPhase};
use crate::trace::Trace;

/// A human action awaiting validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum HumanAction {
    Pick { block: BlockId },
    Place { block: BlockId, zone: ZoneId },
    ConfirmPick { block: BlockId },
}

impl HumanAction {
    /// Converts a human-model request event into an action.
    pub fn from_event(kind: &EventKind) -> Option<HumanAction> {
        match *kind {
            EventKind::HumanPick { block, .. } => Some(HumanAction::Pick { block }),
            EventKind::HumanPlace { block, zone } => Some(HumanAction::Place { block, zone }),
            EventKind::ConfirmPick { block } => Some(HumanAction::ConfirmPick { block }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyRules {
    /// Also stop the robot when the human places into a red zone before the
    /// robot has started placing there.
    pub red_zone_intrusion: bool,
}

/// The safety monitor. Picks of a yellow (announced) target are allowed;
/// picks of a committed target and places into the zone the robot is
/// placing into are violations.
pub fn detect_violation(
    workspace: &WorkspaceState,
    robot_phase: &RobotPhase,
    action: &HumanAction,
    rules: SafetyRules,
) -> Option<Violation> {
    match *action {
        HumanAction::Pick { block } if robot_phase.committed_target() == Some(block) => Some(Violation {
            kind: ViolationKind::PickingError,
            block: Some(block),
            zone: None,
        }),
        HumanAction::Place { block, zone } => {
            if workspace.zone_occupant(zone) == Some(AgentId::Robot) || robot_phase.placing_zone() == Some(zone) {
                Some(Violation { kind: ViolationKind::PlacingError, block: Some(block), zone: Some(zone) })
            } else if rules.red_zone_intrusion && robot_phase.committed_zone() == Some(zone) {
                Some(Violation { kind: ViolationKind::ZoneIntrusion, block: Some(block), zone: Some(zone) })
            } else {
                None
            }
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NotAtStart,
    AlreadyHolding,
    NotHolding,
    UnknownBlock,
    AlreadyConfirmed,
    Recovering,
    Finished,
}

impl RejectReason {
    pub fn describe(self) -> &'static str {
        match self {
            RejectReason::NotAtStart => "block is not at its start position",
            RejectReason::AlreadyHolding => "already holding a block",
            RejectReason::NotHolding => "not holding that block",
            RejectReason::UnknownBlock => "no such block",
            RejectReason::AlreadyConfirmed => "pick already confirmed",
            RejectReason::Recovering => "robot is recovering from an e-stop",
            RejectReason::Finished => "task already complete",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionOutcome {
    Applied(Event),
    Violation(Violation),
    Rejected(RejectReason),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("internal transition failed: {0}")]
    Transition(#[from] TransitionError),
    #[error("gaze stream: {0}")]
    Gaze(#[from] GazeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub condition: Condition,
    /// The robot learns of human picks only through explicit confirmations.
    pub confirm_menu: bool,
    pub rules: SafetyRules,
    /// Both agents stay still this long after an e-stop.
    pub recovery_delay: Seconds,
    pub record_gaze: bool,
}

impl Default for EngineSettings {
    fn default() -> Self {
        EngineSettings {
            condition: Condition::FULL,
            confirm_menu: true,
            rules: SafetyRules::default(),
            recovery_delay: 5.0,
            record_gaze: false,
        }
    }
}

/// Optional instrumentation, for tests and diagnostics.
pub trait EngineObserver {
    /// Called for every Commit with the predictor's latched intent at that instant.
    fn on_commit(&mut self, _t: Seconds, _block: BlockId, _latched_intent: Option<BlockId>) {}
}

impl EngineObserver for () {}

#[derive(Debug, Clone)]
pub struct Engine {
    settings: EngineSettings,
    ws: WorkspaceState,
    robot: Robot,
    predictor: DwellPredictor,
    /// Blocks the human has taken since the last reset.
    human_taken: BTreeSet<BlockId>,
    /// Of those, the ones the robot has been told about.
    confirmed: BTreeSet<BlockId>,
    frozen_until: Seconds,
    complete: bool,
    trace: Trace,
}

impl Engine {
    pub fn new(
        settings: EngineSettings,
        ws: WorkspaceState,
        robot: Robot,
        dwell: DwellConfig,
        trace: Trace,
    ) -> Self {
        Engine {
            settings,
            ws,
            robot,
            predictor: DwellPredictor::new(dwell),
            human_taken: BTreeSet::new(),
            confirmed: BTreeSet::new(),
            frozen_until: f64::NEG_INFINITY,
            complete: false,
            trace,
        }
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub fn workspace(&self) -> &WorkspaceState {
        &self.ws
    }

    pub fn robot(&self) -> &Robot {
        &self.robot
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn frozen(&self, now: Seconds) -> bool {
        now + TIME_EPS < self.frozen_until
    }

    pub fn frozen_until(&self) -> Seconds {
        self.frozen_until
    }

    /// What the robot believes is still available.
    pub fn believed_remaining(&self) -> BTreeSet<BlockId> {
        let mut set = self.ws.remaining_blocks();
        if self.settings.confirm_menu {
            set.extend(self.human_taken.difference(&self.confirmed).copied());
        }
        set
    }

    /// The predictor's latched intent, or `None` when the robot has no gaze stream.
    pub fn latched_intent(&self, now: Seconds) -> Option<BlockId> {
        if !self.settings.condition.gaze_enabled {
            return None;
        }
        let believed = self.believed_remaining();
        self.predictor.current_intent(now, |b| believed.contains(&b)).map(|i| i.block)
    }

    fn record(&mut self, event: Event) -> Result<(), EngineError> {
        self.ws.apply_event_mut(&event)?;
        self.trace.events.push(event);
        Ok(())
    }

    fn check_legal(&self, action: &HumanAction) -> Option<RejectReason> {
        let held = self.ws.held_by(AgentId::Human);
        let state = |b: BlockId| self.ws.block(b).map(|blk| blk.state);
        match *action {
            HumanAction::Pick { block } => match state(block) {
                None => Some(RejectReason::UnknownBlock),
                Some(_) if held.is_some() => Some(RejectReason::AlreadyHolding),
                Some(BlockState::AtStart) => None,
                Some(_) => Some(RejectReason::NotAtStart),
            },
            HumanAction::Place { block, .. } => match state(block) {
                None => Some(RejectReason::UnknownBlock),
                Some(_) if held != Some(block) => Some(RejectReason::NotHolding),
                _ => None,
            },
            HumanAction::ConfirmPick { block } => match state(block) {
                None => Some(RejectReason::UnknownBlock),
                Some(_) if held != Some(block) => Some(RejectReason::NotHolding),
                Some(_) if self.confirmed.contains(&block) => Some(RejectReason::AlreadyConfirmed),
                _ => None,
            },
        }
    }

    /// Validates a human action, runs the safety monitor, and either applies
    /// it or executes an e-stop.
    pub fn human_action(&mut self, now: Seconds, action: HumanAction) -> Result<ActionOutcome, EngineError> {
        if self.complete {
            return Ok(ActionOutcome::Rejected(RejectReason::Finished));
        }
        if self.frozen(now) {
            return Ok(ActionOutcome::Rejected(RejectReason::Recovering));
        }
        if let Some(reason) = self.check_legal(&action) {
            return Ok(ActionOutcome::Rejected(reason));
        }
        if let Some(v) = detect_violation(&self.ws, self.robot.phase(), &action, self.settings.rules) {
            self.record(Event::new(now, Actor::System, EventKind::Violation(v)))?;
            self.execute_estop(now)?;
            return Ok(ActionOutcome::Violation(v));
        }
        let kind = match action {
            HumanAction::Pick { block } => {
                self.human_taken.insert(block);
                if !self.settings.confirm_menu {
                    self.confirmed.insert(block);
                }
                EventKind::HumanPick { block, predicted: self.latched_intent(now) }
            }
            HumanAction::Place { block, zone } => EventKind::HumanPlace { block, zone },
            HumanAction::ConfirmPick { block } => {
                self.confirmed.insert(block);
                EventKind::ConfirmPick { block }
            }
        };
        let event = Event::new(now, Actor::Human, kind);
        self.record(event.clone())?;
        Ok(ActionOutcome::Applied(event))
    }

    /// E-stop and reset: held blocks go back to their start positions, the
    /// robot idles, the predictor forgets, and nobody moves until the
    /// recovery delay has passed.
    pub fn execute_estop(&mut self, now: Seconds) -> Result<Vec<Event>, EngineError> {
        let returned: Vec<BlockId> = self
            .ws
            .blocks
            .values()
            .filter(|b| matches!(b.state, BlockState::HeldBy { .. }))
            .map(|b| b.id)
            .collect();
        for b in &returned {
            self.human_taken.remove(b);
            self.confirmed.remove(b);
        }
        let events = vec![
            Event::new(now, Actor::System, EventKind::EStop {}),
            Event::new(now, Actor::System, EventKind::Reset { returned }),
        ];
        for e in &events {
            self.record(e.clone())?;
        }
        self.robot.halt();
        self.predictor.reset();
        self.frozen_until = now + self.settings.recovery_delay;
        Ok(events)
    }

    /// Feeds one gaze sample. Samples only reach the predictor when the
    /// condition gives the robot a gaze stream; a fired intent is forwarded
    /// to the robot immediately.
    pub fn gaze(&mut self, sample: GazeSample) -> Result<(Option<PredictedIntent>, Vec<Event>), EngineError> {
        if self.settings.record_gaze {
            self.trace.events.push(Event::new(sample.t, Actor::Human, EventKind::Gaze { block: sample.block }));
        }
        if !self.settings.condition.gaze_enabled || self.frozen(sample.t) || self.complete {
            return Ok((None, Vec::new()));
        }
        let Some(intent) = self.predictor.ingest(sample)? else {
            return Ok((None, Vec::new()));
        };
        self.record(Event::new(intent.t_fired, Actor::System, EventKind::GazeIntent { block: intent.block }))?;
        let believed = self.believed_remaining();
        let perception = Perception { workspace: &self.ws, believed_remaining: &believed, predicted: Some(intent.block) };
        let events = self.robot.on_user_intent(&intent, &perception);
        for e in &events {
            self.record(e.clone())?;
        }
        Ok((Some(intent), events))
    }

    /// Advances the robot to `now`.
    pub fn robot_tick(&mut self, now: Seconds, observer: &mut dyn EngineObserver) -> Result<Vec<Event>, EngineError> {
        if self.frozen(now) || self.complete {
            return Ok(Vec::new());
        }
        let believed = self.believed_remaining();
        let latched = self.latched_intent(now);
        let perception = Perception { workspace: &self.ws, believed_remaining: &believed, predicted: latched };
        let events = self.robot.step(now, &perception);
        for e in &events {
            if let EventKind::Commit(h) = &e.kind {
                observer.on_commit(now, h.block, latched);
            }
            self.record(e.clone())?;
        }
        Ok(events)
    }

    /// Emits TaskComplete once every block is placed and the robot is back at rest.
    pub fn check_complete(&mut self, now: Seconds) -> Result<bool, EngineError> {
        if !self.complete && self.ws.all_placed() && matches!(self.robot.phase(), RobotPhase::Idle) {
            self.record(Event::new(now, Actor::System, EventKind::TaskComplete {}))?;
            self.complete = true;
        }
        Ok(self.complete)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScenarioConfig;
    use crate::robot::RobotConfig;

    fn ws() -> WorkspaceState {
        WorkspaceState::new(&ScenarioConfig::default()).unwrap()
    }

    fn committed(b: u32, zone: ZoneId) -> RobotPhase {
        RobotPhase::Committed { target: BlockId(b), zone, at: 0.0 }
    }

    #[test]
    fn pick_of_committed_block_is_a_picking_error() {
        let v = detect_violation(&ws(), &committed(5, ZoneId::Zone1), &HumanAction::Pick { block: BlockId(5) }, SafetyRules::default());
        assert_eq!(v.map(|v| v.kind), Some(ViolationKind::PickingError));
        let moving = RobotPhase::MovingToPick { target: BlockId(5), zone: ZoneId::Zone1, until: 9.0 };
        let v = detect_violation(&ws(), &moving, &HumanAction::Pick { block: BlockId(5) }, SafetyRules::default());
        assert_eq!(v.map(|v| v.kind), Some(ViolationKind::PickingError));
    }

    #[test]
    fn place_into_robot_zone_is_a_placing_error() {
        let phase = RobotPhase::Placing { block: BlockId(1), zone: ZoneId::Zone2, until: 9.0 };
        let action = HumanAction::Place { block: BlockId(4), zone: ZoneId::Zone2 };
        let v = detect_violation(&ws(), &phase, &action, SafetyRules::default()).unwrap();
        assert_eq!(v.kind, ViolationKind::PlacingError);
        assert_eq!(v.zone, Some(ZoneId::Zone2));
        let other = HumanAction::Place { block: BlockId(4), zone: ZoneId::Zone1 };
        assert_eq!(detect_violation(&ws(), &phase, &other, SafetyRules::default()), None);
    }

    #[test]
    fn pick_of_yellow_target_is_an_allowed_override() {
        let phase = RobotPhase::Announce { target: BlockId(5), zone: ZoneId::Zone1, since: 0.0 };
        assert_eq!(detect_violation(&ws(), &phase, &HumanAction::Pick { block: BlockId(5) }, SafetyRules::default()), None);
    }

    #[test]
    fn red_zone_rule_is_opt_in() {
        let phase = committed(5, ZoneId::Zone1);
        let action = HumanAction::Place { block: BlockId(2), zone: ZoneId::Zone1 };
        assert_eq!(detect_violation(&ws(), &phase, &action, SafetyRules::default()), None);
        let v = detect_violation(&ws(), &phase, &action, SafetyRules { red_zone_intrusion: true }).unwrap();
        assert_eq!(v.kind, ViolationKind::ZoneIntrusion);
    }

    fn engine_with(phase: RobotPhase) -> Engine {
        Engine::new(
            EngineSettings::default(),
            ws(),
            Robot::with_phase(RobotConfig::default(), phase),
            DwellConfig::default(),
            Trace::new(0, String::new()),
        )
    }

    #[test]
    fn estop_returns_both_held_blocks() {
        let mut e = engine_with(RobotPhase::Idle);
        e.record(Event::new(0.0, Actor::Robot, EventKind::PickDone { block: BlockId(2) })).unwrap();
        e.human_action(0.0, HumanAction::Pick { block: BlockId(9) }).unwrap();
        e.execute_estop(1.0).unwrap();
        assert!(e.workspace().is_at_start(BlockId(2)));
        assert!(e.workspace().is_at_start(BlockId(9)));
        assert_eq!(*e.robot().phase(), RobotPhase::Idle);
        assert!(e.frozen(5.9));
        assert!(!e.frozen(6.0));
    }

    #[test]
    fn estop_with_empty_hands_only_resets_phases() {
        let mut e = engine_with(RobotPhase::Announce { target: BlockId(1), zone: ZoneId::Zone1, since: 0.0 });
        let before = e.workspace().blocks.clone();
        let events = e.execute_estop(1.0).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(e.workspace().blocks, before);
        assert_eq!(*e.robot().phase(), RobotPhase::Idle);
    }

    #[test]
    fn violation_triggers_estop_in_same_tick() {
        let mut e = engine_with(committed(5, ZoneId::Zone1));
        let out = e.human_action(2.0, HumanAction::Pick { block: BlockId(5) }).unwrap();
        assert!(matches!(out, ActionOutcome::Violation(_)));
        let kinds: Vec<_> = e.trace().events.iter().map(|ev| (ev.kind.name(), ev.t)).collect();
        assert_eq!(kinds, [("Violation", 2.0), ("EStop", 2.0), ("Reset", 2.0)]);
        // the picked block never left the table
        assert!(e.workspace().is_at_start(BlockId(5)));
        let out = e.human_action(3.0, HumanAction::Pick { block: BlockId(1) }).unwrap();
        assert_eq!(out, ActionOutcome::Rejected(RejectReason::Recovering));
    }

    #[test]
    fn illegal_actions_are_rejected() {
        let mut e = engine_with(RobotPhase::Idle);
        assert_eq!(
            e.human_action(0.0, HumanAction::ConfirmPick { block: BlockId(3) }).unwrap(),
            ActionOutcome::Rejected(RejectReason::NotHolding)
        );
        e.human_action(0.0, HumanAction::Pick { block: BlockId(3) }).unwrap();
        assert_eq!(
            e.human_action(0.1, HumanAction::Pick { block: BlockId(4) }).unwrap(),
            ActionOutcome::Rejected(RejectReason::AlreadyHolding)
        );
        assert_eq!(
            e.human_action(0.1, HumanAction::Place { block: BlockId(4), zone: ZoneId::Zone1 }).unwrap(),
            ActionOutcome::Rejected(RejectReason::NotHolding)
        );
        assert_eq!(
            e.human_action(0.1, HumanAction::Pick { block: BlockId(99) }).unwrap(),
            ActionOutcome::Rejected(RejectReason::UnknownBlock)
        );
    }

    #[test]
    fn robot_believes_unconfirmed_picks_are_still_there() {
        let mut e = engine_with(RobotPhase::Idle);
        e.human_action(0.0, HumanAction::Pick { block: BlockId(3) }).unwrap();
        assert!(e.believed_remaining().contains(&BlockId(3)));
        e.human_action(1.0, HumanAction::ConfirmPick { block: BlockId(3) }).unwrap();
        assert!(!e.believed_remaining().contains(&BlockId(3)));
    }

    #[test]
    fn gaze_is_ignored_without_gaze_stream() {
        let mut e = engine_with(RobotPhase::Idle);
        e.settings.condition = Condition::AR_ONLY;
        for k in 0..60 {
            let (intent, _) = e.gaze(GazeSample::new(k as f64 / 30.0, Some(BlockId(1)))).unwrap();
            assert!(intent.is_none());
        }
        assert_eq!(e.trace().count(|k| matches!(k, EventKind::GazeIntent { .. })), 0);
    }
}
