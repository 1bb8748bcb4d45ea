//! Fixed-tick simulation of one trial: a simulated human, the robot, the
//! predictor and the safety monitor, all driven from one master seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ActionOutcome, Engine, EngineError, EngineObserver, EngineSettings, HumanAction, SafetyRules};
use crate::gaze::DwellConfig;
use crate::human::{Human, HumanObservation, HumanParams};
use crate::model::{BlockId, Condition, EventKind, ScenarioConfig, Seconds, ViolationKind, WorkspaceState};
use crate::robot::{Robot, RobotConfig, RobotPhase};
use crate::trace::{digest_json, Trace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub workspace: ScenarioConfig,
    pub robot: RobotConfig,
    pub human: HumanParams,
    pub dwell: DwellConfig,
    pub condition: Condition,
    pub master_seed: u64,
    pub recovery_delay: Seconds,
    /// A run that has not finished by this time is an error.
    pub time_limit: Seconds,
    pub confirm_menu: bool,
    pub red_zone_rule: bool,
    /// Also write every raw gaze sample into the trace.
    pub record_gaze: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            workspace: ScenarioConfig::default(),
            robot: RobotConfig::default(),
            human: HumanParams::default(),
            dwell: DwellConfig::default(),
            condition: Condition::FULL,
            master_seed: 0,
            recovery_delay: 5.0,
            time_limit: 3600.0,
            confirm_menu: true,
            red_zone_rule: false,
            record_gaze: false,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |e: &dyn std::fmt::Display| SimError::Config(e.to_string());
        self.workspace.validate().map_err(|e| invalid(&e))?;
        self.robot.validate().map_err(|e| invalid(&e))?;
        self.human.validate().map_err(|e| invalid(&e))?;
        self.dwell.validate().map_err(|e| invalid(&e))?;
        if !(self.recovery_delay >= 0.0) || !(self.time_limit > 0.0) {
            return Err(SimError::Config("recovery_delay must be >= 0 and time_limit > 0".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        digest_json(self)
    }

    pub fn engine_settings(&self) -> EngineSettings {
        EngineSettings {
            condition: self.condition,
            confirm_menu: self.confirm_menu,
            rules: SafetyRules { red_zone_intrusion: self.red_zone_rule },
            recovery_delay: self.recovery_delay,
            record_gaze: self.record_gaze,
        }
    }

    /// A fresh engine for this scenario, seeded the same way for offline runs
    /// and live sessions.
    pub fn build_engine(&self) -> Result<Engine, SimError> {
        self.validate()?;
        let ws = WorkspaceState::new(&self.workspace).map_err(|e| SimError::Config(e.to_string()))?;
        let robot = Robot::new(RobotConfig { rng_seed: sub_seed(self.master_seed ^ self.robot.rng_seed, 1), ..self.robot });
        Ok(Engine::new(self.engine_settings(), ws, robot, self.dwell, Trace::new(self.master_seed, self.digest())))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("run did not finish within {limit} s")]
    TimeLimit { limit: Seconds },
    #[error("trace has no TaskComplete event")]
    Incomplete,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetrics {
    pub completion_time: Seconds,
    pub picking_errors: u32,
    pub placing_errors: u32,
    pub zone_intrusions: u32,
    pub estop_count: u32,
    pub human_picks: u32,
    pub robot_picks: u32,
    /// Fraction of human picks whose block matched the latched intent at pick time.
    pub predictor_accuracy: f64,
}

/// Derives an independent stream seed from the master seed.
pub fn sub_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Tick `k` in seconds. Dividing by an integral rate keeps round tick
/// counts on exact decimals (tick 24 at 30 Hz is exactly 0.8).
pub fn tick_time(k: u64, sample_period: Seconds) -> Seconds {
    let rate = 1.0 / sample_period;
    if (rate - rate.round()).abs() < 1e-9 {
        k as f64 / rate.round()
    } else {
        k as f64 * sample_period
    }
}

pub fn finalize_metrics(trace: &Trace) -> Result<RunMetrics, SimError> {
    let mut m = RunMetrics::default();
    let mut correct = 0u32;
    let mut done = None;
    for e in &trace.events {
        match &e.kind {
            EventKind::Violation(v) => match v.kind {
                ViolationKind::PickingError => m.picking_errors += 1,
                ViolationKind::PlacingError => m.placing_errors += 1,
                ViolationKind::ZoneIntrusion => m.zone_intrusions += 1,
            },
            EventKind::EStop {} => m.estop_count += 1,
            EventKind::HumanPick { block, predicted } => {
                m.human_picks += 1;
                if *predicted == Some(*block) {
                    correct += 1;
                }
            }
            EventKind::PickDone { .. } => m.robot_picks += 1,
            EventKind::TaskComplete {} => done = Some(e.t),
            _ => {}
        }
    }
    m.completion_time = done.ok_or(SimError::Incomplete)?;
    m.predictor_accuracy = if m.human_picks == 0 { 0.0 } else { correct as f64 / m.human_picks as f64 };
    Ok(m)
}

/// Instrumentation for tests: sees every observation handed to the human and
/// every robot commit.
pub trait SimObserver: EngineObserver {
    fn on_observation(&mut self, _t: Seconds, _obs: &HumanObservation<'_>) {}
}

impl SimObserver for () {}

/// Whether the human noticed the robot moving toward its current target.
/// Drawn once per movement.
struct MotionNotice {
    rng: ChaCha8Rng,
    current: Option<(BlockId, bool)>,
}

impl MotionNotice {
    fn cue(&mut self, phase: &RobotPhase, p: f64) -> Option<BlockId> {
        let moving = match *phase {
            RobotPhase::MovingToPick { target, .. } | RobotPhase::GraspCheck { target, .. } => Some(target),
            _ => None,
        };
        let Some(target) = moving else {
            self.current = None;
            return None;
        };
        let noticed = match self.current {
            Some((b, n)) if b == target => n,
            _ => {
                let n = self.rng.random_bool(p);
                self.current = Some((target, n));
                n
            }
        };
        noticed.then_some(target)
    }
}

pub fn run(scenario: &Scenario) -> Result<(RunMetrics, Trace), SimError> {
    run_observed(scenario, &mut ())
}

pub fn run_observed<O: SimObserver>(scenario: &Scenario, observer: &mut O) -> Result<(RunMetrics, Trace), SimError> {
    scenario.validate()?;
    let seed = scenario.master_seed;
    let mut human =
        Human::new(HumanParams { rng_seed: sub_seed(seed ^ scenario.human.rng_seed, 2), ..scenario.human });
    let mut notice = MotionNotice { rng: ChaCha8Rng::seed_from_u64(sub_seed(seed, 3)), current: None };
    let mut engine = scenario.build_engine()?;
    let condition = scenario.condition;

    for k in 0u64.. {
        let t = tick_time(k, scenario.dwell.sample_period);
        if t > scenario.time_limit {
            return Err(SimError::TimeLimit { limit: scenario.time_limit });
        }
        if !engine.frozen(t) {
            let phase = *engine.robot().phase();
            let step = {
                let obs = HumanObservation {
                    workspace: engine.workspace(),
                    visible_highlight: if condition.ar_enabled { phase.highlight() } else { None },
                    robot_motion_cue: notice.cue(&phase, scenario.human.p_notice_motion),
                    robot_placing_zone: phase.placing_zone(),
                    robot_reads_gaze: condition.gaze_enabled,
                };
                observer.on_observation(t, &obs);
                human.step(&obs, t)
            };
            for event in &step.actions {
                let Some(action) = HumanAction::from_event(&event.kind) else { continue };
                match engine.human_action(t, action)? {
                    ActionOutcome::Applied(_) => {}
                    ActionOutcome::Violation(_) => {
                        human.reset(engine.frozen_until());
                        break;
                    }
                    ActionOutcome::Rejected(_) => {
                        human.reset(t);
                        break;
                    }
                }
            }
            if let Some(sample) = step.gaze {
                engine.gaze(sample)?;
            }
            engine.robot_tick(t, observer)?;
        }
        if engine.check_complete(t)? {
            break;
        }
    }

    let trace = engine.into_trace();
    let metrics = finalize_metrics(&trace)?;
    Ok((metrics, trace))
}
