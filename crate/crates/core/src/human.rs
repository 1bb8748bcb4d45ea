//! Synthetic human collaborator.
//!
//! The model looks before it reaches (so the robot's dwell predictor sees the
//! intent), places every block in the zone matching its label, and reacts to
//! the robot only through what the condition lets it observe: the
//! traffic-light highlights when AR is on, and otherwise occasional glimpses
//! of the robot's motion or of the zone it is placing into.
//!
//! All parameter values are calibration knobs chosen to reproduce the
//! qualitative ordering of errors across the four conditions. They are not
//! fitted to any participant data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaze::GazeSample;
use crate::model::{
    Actor, BlockId, Event, EventKind, Highlight, HighlightColor, Position, Seconds, WorkspaceState, ZoneId,
    TIME_EPS,
};

/// Where the human stands, in workspace cm; used by the `Nearest` pick policy.
pub const HUMAN_HOME: Position = Position { x_cm: 12.0, y_cm: -30.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PickPolicy {
    Nearest,
    LeftToRight,
    UniformRandom,
}

/// A duration drawn uniformly from `mean ± jitter`, floored at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jittered {
    pub mean: Seconds,
    pub jitter: Seconds,
}

impl Jittered {
    pub const fn new(mean: Seconds, jitter: Seconds) -> Self {
        Jittered { mean, jitter }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Seconds {
        let u: f64 = rng.random_range(-1.0..=1.0);
        if self.mean.is_infinite() {
            return self.mean;
        }
        (self.mean + u * self.jitter).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanParams {
    /// An inactive human never looks at or touches anything.
    pub active: bool,
    pub pick_policy: PickPolicy,
    /// Time spent looking over the workspace before settling on a block.
    pub scan_time: Jittered,
    /// Length of each wandering glance while scanning.
    pub scan_fixation: Jittered,
    /// Fixation on the chosen block before the reach begins.
    pub gaze_lead: Seconds,
    pub reach_time: Jittered,
    /// Pressing the block's button on the confirmation menu after a pick.
    pub confirm_time: Jittered,
    /// Carrying the block over and setting it down.
    pub place_time: Jittered,
    /// Walking back to the start area after a place.
    pub return_time: Jittered,
    /// Respect a visible red highlight.
    pub p_comply_red: f64,
    /// Infer the robot's target from its motion when no highlight is shown.
    pub p_notice_motion: f64,
    /// Check which zone the robot is placing into before placing, without AR.
    pub p_zone_check: f64,
    /// Notice a visible highlight on the zone the human is about to place into.
    pub p_heed_zone_highlight: f64,
    /// When the robot cannot read the human's gaze, the chance of missing the
    /// robot's zone is multiplied by this (the human has to guard their own
    /// block as well).
    pub unassisted_miss_factor: f64,
    /// Per-sample chance that a fixation sample lands off the intended block.
    pub gaze_noise: f64,
    pub rng_seed: u64,
}

impl Default for HumanParams {
    fn default() -> Self {
        HumanParams {
            active: true,
            pick_policy: PickPolicy::Nearest,
            scan_time: Jittered::new(4.0, 2.0),
            scan_fixation: Jittered::new(0.35, 0.25),
            gaze_lead: 1.2,
            reach_time: Jittered::new(2.0, 0.5),
            confirm_time: Jittered::new(3.0, 1.0),
            place_time: Jittered::new(2.0, 0.5),
            return_time: Jittered::new(2.0, 0.5),
            p_comply_red: 0.95,
            p_notice_motion: 0.7,
            p_zone_check: 0.3,
            p_heed_zone_highlight: 0.75,
            unassisted_miss_factor: 1.6,
            gaze_noise: 0.0,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum HumanError {
    #[error("probability {name} = {value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
    #[error("duration {name} must be non-negative")]
    Duration { name: &'static str },
    #[error("{name} must be non-negative")]
    Factor { name: &'static str },
}

impl HumanParams {
    /// Long, wandering glances plus dropped samples during fixation: the
    /// predictor misfires on scanning glances and misses some real targets.
    pub fn noisy_gaze() -> Self {
        HumanParams { scan_fixation: Jittered::new(0.7, 0.5), gaze_noise: 0.12, ..Default::default() }
    }

    /// A human that never completes a reach, leaving the task to the robot.
    pub fn disabled() -> Self {
        HumanParams { active: false, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), HumanError> {
        for (name, value) in [
            ("p_comply_red", self.p_comply_red),
            ("p_notice_motion", self.p_notice_motion),
            ("p_zone_check", self.p_zone_check),
            ("p_heed_zone_highlight", self.p_heed_zone_highlight),
            ("gaze_noise", self.gaze_noise),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(HumanError::Probability { name, value });
            }
        }
        for (name, j) in [
            ("scan_time", self.scan_time),
            ("scan_fixation", self.scan_fixation),
            ("reach_time", self.reach_time),
            ("confirm_time", self.confirm_time),
            ("place_time", self.place_time),
            ("return_time", self.return_time),
        ] {
            if !(j.mean >= 0.0) || !(j.jitter >= 0.0) {
                return Err(HumanError::Duration { name });
            }
        }
        if !(self.unassisted_miss_factor >= 0.0) {
            return Err(HumanError::Factor { name: "unassisted_miss_factor" });
        }
        if !(self.gaze_lead >= 0.0) {
            return Err(HumanError::Duration { name: "gaze_lead" });
        }
        Ok(())
    }
}

/// What the human can perceive at one instant.
#[derive(Debug, Clone, Copy)]
pub struct HumanObservation<'a> {
    pub workspace: &'a WorkspaceState,
    /// Present only when AR is enabled and the robot shows a highlight.
    pub visible_highlight: Option<Highlight>,
    /// The robot's target, inferred from watching it move (no AR needed).
    pub robot_motion_cue: Option<BlockId>,
    /// Zone the robot is visibly placing into right now.
    pub robot_placing_zone: Option<ZoneId>,
    /// Participants are told whether the robot is tracking their gaze.
    pub robot_reads_gaze: bool,
}

impl HumanObservation<'_> {
    fn red_block(&self) -> Option<BlockId> {
        self.visible_highlight.filter(|h| h.color == HighlightColor::Red).map(|h| h.block)
    }

    fn red_zone(&self) -> Option<ZoneId> {
        self.visible_highlight.filter(|h| h.color == HighlightColor::Red).map(|h| h.zone)
    }
}

/// Chooses the next block to pick, or `None` if nothing is eligible.
pub fn choose_block<R: Rng + ?Sized>(
    params: &HumanParams,
    obs: &HumanObservation<'_>,
    rng: &mut R,
) -> Option<BlockId> {
    let avoid_red = obs.red_block().filter(|_| rng.random_bool(params.p_comply_red));
    let eligible: Vec<_> = obs
        .workspace
        .blocks
        .values()
        .filter(|b| obs.workspace.is_at_start(b.id))
        .filter(|b| Some(b.id) != avoid_red && Some(b.id) != obs.robot_motion_cue)
        .collect();
    if eligible.is_empty() {
        return None;
    }
    let chosen = match params.pick_policy {
        PickPolicy::Nearest => eligible.iter().min_by(|a, b| {
            a.start
                .distance(&HUMAN_HOME)
                .total_cmp(&b.start.distance(&HUMAN_HOME))
                .then(a.id.cmp(&b.id))
        }),
        PickPolicy::LeftToRight => eligible.iter().min_by(|a, b| {
            a.start
                .x_cm
                .total_cmp(&b.start.x_cm)
                .then(a.start.y_cm.total_cmp(&b.start.y_cm))
                .then(a.id.cmp(&b.id))
        }),
        PickPolicy::UniformRandom => eligible.get(rng.random_range(0..eligible.len())),
    };
    chosen.map(|b| b.id)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum HumanPhase {
    Scanning { until: Seconds },
    Fixating { target: BlockId, since: Seconds },
    Reaching { target: BlockId, until: Seconds },
    Carrying { block: BlockId, confirm_at: Seconds },
    Placing { block: BlockId, zone: ZoneId, until: Seconds },
    Returning { until: Seconds },
    Idle,
}

/// Output of one human step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HumanStep {
    /// HumanPick / ConfirmPick / HumanPlace requests, for the driver to
    /// validate and apply.
    pub actions: Vec<Event>,
    pub gaze: Option<GazeSample>,
}

#[derive(Debug, Clone)]
struct Glance {
    block: Option<BlockId>,
    until: Seconds,
}

#[derive(Debug, Clone)]
pub struct Human {
    params: HumanParams,
    phase: HumanPhase,
    rng: ChaCha8Rng,
    glance: Option<Glance>,
    /// Compliance draw for the red highlight on the current target.
    red_compliance: Option<(BlockId, bool)>,
    /// Zone-awareness draw for the block being placed.
    zone_aware: Option<bool>,
    last_step: Seconds,
}

impl Human {
    pub fn new(params: HumanParams) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
        let until = params.scan_time.sample(&mut rng);
        Human {
            params,
            phase: HumanPhase::Scanning { until },
            rng,
            glance: None,
            red_compliance: None,
            zone_aware: None,
            last_step: 0.0,
        }
    }

    pub fn phase(&self) -> &HumanPhase {
        &self.phase
    }

    pub fn params(&self) -> &HumanParams {
        &self.params
    }

    /// Target of the current fixation or reach.
    pub fn target(&self) -> Option<BlockId> {
        match self.phase {
            HumanPhase::Fixating { target, .. } | HumanPhase::Reaching { target, .. } => Some(target),
            _ => None,
        }
    }

    /// After an e-stop: empty-handed, scanning again once `resume_at` passes.
    pub fn reset(&mut self, resume_at: Seconds) {
        let scan = self.params.scan_time.sample(&mut self.rng);
        self.phase = HumanPhase::Scanning { until: resume_at + scan };
        self.glance = None;
        self.red_compliance = None;
        self.zone_aware = None;
    }

    fn start_scanning(&mut self, now: Seconds) {
        let scan = self.params.scan_time.sample(&mut self.rng);
        self.phase = HumanPhase::Scanning { until: now + scan };
        self.glance = None;
    }

    fn fixate(&mut self, target: BlockId, now: Seconds) {
        self.phase = HumanPhase::Fixating { target, since: now };
        self.red_compliance = None;
    }

    /// Abort the current target and pick another straight away.
    fn rechoose(&mut self, obs: &HumanObservation<'_>, now: Seconds) {
        match choose_block(&self.params, obs, &mut self.rng) {
            Some(b) => self.fixate(b, now),
            None => self.start_scanning(now),
        }
    }

    fn complies_with_red(&mut self, block: BlockId) -> bool {
        match self.red_compliance {
            Some((b, decided)) if b == block => decided,
            _ => {
                let decided = self.rng.random_bool(self.params.p_comply_red);
                self.red_compliance = Some((block, decided));
                decided
            }
        }
    }

    /// Whether the human pays attention to the robot's zone for this place.
    fn draw_zone_awareness(&mut self, obs: &HumanObservation<'_>) -> bool {
        let p_aware =
            if obs.visible_highlight.is_some() { self.params.p_heed_zone_highlight } else { self.params.p_zone_check };
        let mut p_miss = 1.0 - p_aware;
        if !obs.robot_reads_gaze {
            p_miss = (p_miss * self.params.unassisted_miss_factor).min(1.0);
        }
        !self.rng.random_bool(p_miss)
    }

    fn noisy_target(&mut self, target: BlockId, ws: &WorkspaceState) -> Option<BlockId> {
        if self.params.gaze_noise > 0.0 && self.rng.random_bool(self.params.gaze_noise) {
            let others: Vec<_> = ws.blocks.keys().copied().filter(|b| *b != target).collect();
            if others.is_empty() || self.rng.random_bool(0.5) {
                return None;
            }
            return Some(others[self.rng.random_range(0..others.len())]);
        }
        Some(target)
    }

    fn scanning_gaze(&mut self, now: Seconds, ws: &WorkspaceState) -> Option<BlockId> {
        let expired = self.glance.as_ref().is_none_or(|g| now + TIME_EPS >= g.until);
        if expired {
            let remaining: Vec<_> = ws.remaining_blocks().into_iter().collect();
            let block = if remaining.is_empty() || self.rng.random_bool(0.2) {
                None
            } else {
                Some(remaining[self.rng.random_range(0..remaining.len())])
            };
            let len = self.params.scan_fixation.sample(&mut self.rng).max(1e-3);
            self.glance = Some(Glance { block, until: now + len });
        }
        self.glance.as_ref().and_then(|g| g.block)
    }

    /// Advances the human to `now` given what it can currently observe.
    pub fn step(&mut self, obs: &HumanObservation<'_>, now: Seconds) -> HumanStep {
        self.last_step = self.last_step.max(now);
        let ws = obs.workspace;
        let mut out = HumanStep::default();
        if !self.params.active {
            return out;
        }
        let mut gaze_on: Option<BlockId> = None;

        match self.phase {
            HumanPhase::Idle => {
                if !ws.remaining_blocks().is_empty() {
                    self.start_scanning(now);
                }
            }
            HumanPhase::Scanning { until } => {
                if ws.remaining_blocks().is_empty() {
                    self.phase = HumanPhase::Idle;
                } else if now + TIME_EPS >= until {
                    match choose_block(&self.params, obs, &mut self.rng) {
                        Some(target) => {
                            self.fixate(target, now);
                            gaze_on = self.noisy_target(target, ws);
                        }
                        None => {
                            // everything left is contested; look again shortly
                            self.phase = HumanPhase::Scanning { until: now + 0.5 };
                            gaze_on = self.scanning_gaze(now, ws);
                        }
                    }
                } else {
                    gaze_on = self.scanning_gaze(now, ws);
                }
            }
            HumanPhase::Fixating { target, since } => {
                if self.should_abort(target, obs) {
                    self.rechoose(obs, now);
                } else if now + TIME_EPS >= since + self.params.gaze_lead {
                    let reach = self.params.reach_time.sample(&mut self.rng);
                    self.phase = HumanPhase::Reaching { target, until: now + reach };
                }
                if let Some(t) = self.target() {
                    gaze_on = self.noisy_target(t, ws);
                }
            }
            HumanPhase::Reaching { target, until } => {
                if self.should_abort(target, obs) {
                    self.rechoose(obs, now);
                    if let Some(t) = self.target() {
                        gaze_on = self.noisy_target(t, ws);
                    }
                } else if now + TIME_EPS >= until {
                    out.actions.push(Event::new(
                        now,
                        Actor::Human,
                        EventKind::HumanPick { block: target, predicted: None },
                    ));
                    let confirm = self.params.confirm_time.sample(&mut self.rng);
                    self.phase = HumanPhase::Carrying { block: target, confirm_at: now + confirm };
                } else {
                    gaze_on = self.noisy_target(target, ws);
                }
            }
            HumanPhase::Carrying { block, confirm_at } => {
                if now + TIME_EPS >= confirm_at {
                    out.actions.push(Event::new(now, Actor::Human, EventKind::ConfirmPick { block }));
                    let zone = ws.block(block).map(|b| b.label.zone()).unwrap_or(ZoneId::Zone1);
                    let place = self.params.place_time.sample(&mut self.rng);
                    self.phase = HumanPhase::Placing { block, zone, until: now + place };
                    self.zone_aware = None;
                }
            }
            HumanPhase::Placing { block, zone, until } => {
                if now + TIME_EPS >= until {
                    let aware = match self.zone_aware {
                        Some(a) => a,
                        None => {
                            let a = self.draw_zone_awareness(obs);
                            self.zone_aware = Some(a);
                            a
                        }
                    };
                    let blocked = if obs.visible_highlight.is_some() {
                        obs.red_zone() == Some(zone) || obs.robot_placing_zone == Some(zone)
                    } else {
                        obs.robot_placing_zone == Some(zone)
                    };
                    if !(aware && blocked) {
                        out.actions.push(Event::new(now, Actor::Human, EventKind::HumanPlace { block, zone }));
                        let back = self.params.return_time.sample(&mut self.rng);
                        self.phase = HumanPhase::Returning { until: now + back };
                        self.zone_aware = None;
                    }
                }
            }
            HumanPhase::Returning { until } => {
                if now + TIME_EPS >= until {
                    self.start_scanning(now);
                }
            }
        }

        out.gaze = Some(GazeSample::new(now, gaze_on));
        out
    }

    fn should_abort(&mut self, target: BlockId, obs: &HumanObservation<'_>) -> bool {
        if !obs.workspace.is_at_start(target) {
            return true;
        }
        if obs.robot_motion_cue == Some(target) {
            return true;
        }
        obs.red_block() == Some(target) && self.complies_with_red(target)
    }
}
