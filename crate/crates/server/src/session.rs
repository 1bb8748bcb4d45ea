//! One live session: the engine driven by client messages and server ticks.
//!
//! Everything here is synchronous and takes the current time as an argument,
//! so a session can be scripted deterministically without a socket.

use std::collections::BTreeMap;

use jointaction::engine::{ActionOutcome, EngineError, HumanAction};
use jointaction::model::{BlockId, BlockState, Seconds};
use jointaction::sim::{finalize_metrics, SimError};
use jointaction::{Condition, Engine, GazeSample, RobotPhase, RunMetrics, Scenario, Trace, WorkspaceState};
use serde::{Deserialize, Serialize};

use crate::protocol::{parse_client, ClientMessage, ServerMessage, StateMessage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Everything except the condition and seed, which come from `hello`.
    pub scenario: Scenario,
    /// Seed used when `hello` does not carry one.
    pub default_seed: u64,
    /// Seconds between full state snapshots; other broadcasts are deltas.
    pub snapshot_interval: Seconds,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            scenario: Scenario { record_gaze: true, ..Scenario::default() },
            default_seed: 0,
            snapshot_interval: 2.0,
        }
    }
}

#[derive(Debug)]
enum Stage {
    AwaitingHello,
    Live(Box<Live>),
    Closed(Box<Live>),
}

#[derive(Debug)]
struct Live {
    engine: Engine,
    epoch: Seconds,
    clock: Seconds,
    hover: Option<BlockId>,
    last_full: Option<Seconds>,
    sent: BTreeMap<BlockId, BlockState>,
    metrics: Option<RunMetrics>,
}

#[derive(Debug)]
pub struct Session {
    id: u64,
    config: SessionConfig,
    stage: Stage,
}

impl Session {
    pub fn new(id: u64, config: SessionConfig) -> Self {
        Session { id, config, stage: Stage::AwaitingHello }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn is_started(&self) -> bool {
        !matches!(self.stage, Stage::AwaitingHello)
    }

    /// True once `done` has been sent; the connection should be closed.
    pub fn is_closed(&self) -> bool {
        matches!(self.stage, Stage::Closed(_))
    }

    fn live(&self) -> Option<&Live> {
        match &self.stage {
            Stage::AwaitingHello => None,
            Stage::Live(l) | Stage::Closed(l) => Some(l),
        }
    }

    pub fn condition(&self) -> Option<Condition> {
        self.live().map(|l| l.engine.settings().condition)
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.live().map(|l| l.engine.trace())
    }

    pub fn workspace(&self) -> Option<&WorkspaceState> {
        self.live().map(|l| l.engine.workspace())
    }

    pub fn robot_phase(&self) -> Option<&RobotPhase> {
        self.live().map(|l| l.engine.robot().phase())
    }

    pub fn metrics(&self) -> Option<RunMetrics> {
        self.live().and_then(|l| l.metrics)
    }

    /// Handles one raw text frame received at wall time `now`.
    pub fn handle_text(&mut self, now: Seconds, text: &str) -> Vec<ServerMessage> {
        match parse_client(text) {
            Ok(msg) => self.handle_message(now, msg),
            Err(reject) => vec![reject],
        }
    }

    pub fn handle_message(&mut self, now: Seconds, msg: ClientMessage) -> Vec<ServerMessage> {
        if let ClientMessage::Hello { condition, seed } = msg {
            return self.hello(now, &condition, seed);
        }
        let live = match &mut self.stage {
            Stage::AwaitingHello => return vec![ServerMessage::reject("no_session", "send hello first")],
            Stage::Closed(_) => return vec![ServerMessage::reject("finished", "the session is over")],
            Stage::Live(l) => l,
        };
        let t = live.advance(now);
        let action = match msg {
            ClientMessage::Hello { .. } => unreachable!("handled above"),
            ClientMessage::Gaze { block } => {
                live.hover = block;
                return Vec::new();
            }
            ClientMessage::Pick { block } => HumanAction::Pick { block },
            ClientMessage::Place { block, zone } => HumanAction::Place { block, zone },
            ClientMessage::ConfirmPick { block } => HumanAction::ConfirmPick { block },
        };
        match live.engine.human_action(t, action) {
            Ok(ActionOutcome::Applied(_)) => Vec::new(),
            Ok(ActionOutcome::Violation(v)) => vec![
                ServerMessage::Violation { kind: v.kind, block: v.block, zone: v.zone },
                ServerMessage::Estop {},
                live.state(t, true),
            ],
            Ok(ActionOutcome::Rejected(r)) => {
                let code = serde_json::to_value(r).ok().and_then(|v| v.as_str().map(str::to_string));
                vec![ServerMessage::reject(code.as_deref().unwrap_or("rejected"), r.describe())]
            }
            Err(e) => vec![internal(e)],
        }
    }

    fn hello(&mut self, now: Seconds, condition: &str, seed: Option<u64>) -> Vec<ServerMessage> {
        if self.is_started() {
            return vec![ServerMessage::reject("already_started", "hello may only be sent once")];
        }
        let Some(condition) = Condition::from_name(condition) else {
            return vec![ServerMessage::reject(
                "bad_condition",
                format!("unknown condition {condition:?}; expected both, ar, gaze or none"),
            )];
        };
        let scenario = Scenario {
            condition,
            master_seed: seed.unwrap_or(self.config.default_seed),
            ..self.config.scenario.clone()
        };
        let engine = match scenario.build_engine() {
            Ok(e) => e,
            Err(e) => return vec![ServerMessage::reject("bad_config", e.to_string())],
        };
        let mut live = Live {
            engine,
            epoch: now,
            clock: 0.0,
            hover: None,
            last_full: None,
            sent: BTreeMap::new(),
            metrics: None,
        };
        let snapshot = live.state(0.0, true);
        self.stage = Stage::Live(Box::new(live));
        vec![snapshot]
    }

    /// Advances the robot and predictor to wall time `now` and returns the
    /// broadcasts for this tick.
    pub fn tick(&mut self, now: Seconds) -> Vec<ServerMessage> {
        let Stage::Live(live) = &mut self.stage else { return Vec::new() };
        let t = live.advance(now);
        let mut out = Vec::new();
        match live.step(t, &mut out) {
            Ok(true) => {
                let metrics = finalize_metrics(live.engine.trace());
                let full = live.state(t, true);
                out.push(full);
                match metrics {
                    Ok(m) => {
                        live.metrics = Some(m);
                        out.push(ServerMessage::Done { metrics: m });
                    }
                    Err(e) => out.push(internal_sim(e)),
                }
                let Stage::Live(live) = std::mem::replace(&mut self.stage, Stage::AwaitingHello) else {
                    unreachable!("matched above")
                };
                self.stage = Stage::Closed(live);
            }
            Ok(false) => {
                let full = live.last_full.is_none_or(|last| t - last + 1e-9 >= self.config.snapshot_interval);
                out.push(live.state(t, full));
            }
            Err(e) => out.push(internal(e)),
        }
        out
    }
}

impl Live {
    /// Server time since hello; never runs backwards.
    fn advance(&mut self, now: Seconds) -> Seconds {
        self.clock = self.clock.max(now - self.epoch);
        self.clock
    }

    fn step(&mut self, t: Seconds, out: &mut Vec<ServerMessage>) -> Result<bool, EngineError> {
        let (intent, _) = self.engine.gaze(GazeSample::new(t, self.hover))?;
        if let Some(intent) = intent {
            out.push(ServerMessage::IntentAck { block: intent.block });
        }
        self.engine.robot_tick(t, &mut ())?;
        self.engine.check_complete(t)
    }

    fn state(&mut self, t: Seconds, full: bool) -> ServerMessage {
        let ws = self.engine.workspace();
        let blocks = ws
            .blocks
            .values()
            .filter(|b| full || self.sent.get(&b.id) != Some(&b.state))
            .cloned()
            .collect();
        self.sent = ws.blocks.values().map(|b| (b.id, b.state)).collect();
        if full {
            self.last_full = Some(t);
        }
        let phase = self.engine.robot().phase();
        let highlights = self
            .engine
            .settings()
            .condition
            .ar_enabled
            .then(|| phase.highlight().into_iter().collect());
        ServerMessage::State(StateMessage {
            t,
            full,
            blocks,
            highlights,
            robot_phase: phase.name().to_string(),
            frozen: self.engine.frozen(t),
        })
    }
}

fn internal(e: EngineError) -> ServerMessage {
    ServerMessage::reject("internal", e.to_string())
}

fn internal_sim(e: SimError) -> ServerMessage {
    ServerMessage::reject("internal", e.to_string())
}

