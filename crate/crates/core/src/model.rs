//! Shared workspace model: blocks, zones, conditions and the event record.
//!
//! Everything here is plain data plus pure transition logic. The simulator
//! and the live session server both drive a [`WorkspaceState`] through
//! [`WorkspaceState::apply_event`], which is also how a persisted trace is
//! replayed offline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Simulated or server time, in seconds since the start of a run.
pub type Seconds = f64;

/// Tolerance used when comparing accumulated times against durations.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneId {
    Zone1,
    Zone2,
}

impl ZoneId {
    pub const ALL: [ZoneId; 2] = [ZoneId::Zone1, ZoneId::Zone2];
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ZoneId::Zone1 => f.write_str("zone1"),
            ZoneId::Zone2 => f.write_str("zone2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentId {
    Robot,
    Human,
}

/// The label printed on a block; the human must place it in the zone with
/// the same label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLabel {
    One,
    Two,
}

impl BlockLabel {
    pub fn zone(self) -> ZoneId {
        match self {
            BlockLabel::One => ZoneId::Zone1,
            BlockLabel::Two => ZoneId::Zone2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum BlockState {
    AtStart,
    HeldBy { agent: AgentId },
    Placed { zone: ZoneId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_cm: f64,
    pub y_cm: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x_cm - other.x_cm).hypot(self.y_cm - other.y_cm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub id: BlockId,
    pub label: BlockLabel,
    pub state: BlockState,
    pub start: Position,
}

/// The experimental condition: whether the human sees the robot's
/// yellow/red highlights, and whether the robot receives the gaze stream.
///
/// Serialized as its short name (`"both"`, `"ar"`, `"gaze"`, `"none"`);
/// the two-flag object form is also accepted on input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "ConditionRepr", try_from = "ConditionRepr")]
pub struct Condition {
    pub ar_enabled: bool,
    pub gaze_enabled: bool,
}

impl Default for Condition {
    fn default() -> Self {
        Condition::FULL
    }
}

impl Condition {
    pub const FULL: Condition = Condition { ar_enabled: true, gaze_enabled: true };
    pub const AR_ONLY: Condition = Condition { ar_enabled: true, gaze_enabled: false };
    pub const GAZE_ONLY: Condition = Condition { ar_enabled: false, gaze_enabled: true };
    pub const BASELINE: Condition = Condition { ar_enabled: false, gaze_enabled: false };

    /// The four study conditions, in reporting order.
    pub const ALL: [Condition; 4] = [
        Condition::FULL,
        Condition::AR_ONLY,
        Condition::GAZE_ONLY,
        Condition::BASELINE,
    ];

    /// Short name used on the command line and in CSV files.
    pub fn name(self) -> &'static str {
        match (self.ar_enabled, self.gaze_enabled) {
            (true, true) => "both",
            (true, false) => "ar",
            (false, true) => "gaze",
            (false, false) => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<Condition> {
        Condition::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Position of this condition in [`Condition::ALL`].
    pub fn index(self) -> usize {
        Condition::ALL.iter().position(|c| *c == self).expect("all four combinations listed")
    }

    pub fn title(self) -> &'static str {
        match self.name() {
            "both" => "AR and Gaze",
            "ar" => "AR only",
            "gaze" => "Gaze only",
            _ => "No AR No Gaze",
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ConditionRepr {
    Name(String),
    Flags { ar_enabled: bool, gaze_enabled: bool },
}

impl From<Condition> for ConditionRepr {
    fn from(c: Condition) -> Self {
        ConditionRepr::Name(c.name().to_string())
    }
}

impl TryFrom<ConditionRepr> for Condition {
    type Error = String;

    fn try_from(r: ConditionRepr) -> Result<Self, String> {
        match r {
            ConditionRepr::Name(n) => {
                Condition::from_name(&n).ok_or_else(|| format!("unknown condition {n:?}; expected both, ar, gaze or none"))
            }
            ConditionRepr::Flags { ar_enabled, gaze_enabled } => Ok(Condition { ar_enabled, gaze_enabled }),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighlightColor {
    Yellow,
    Red,
}

/// What the traffic-light display shows for the robot's current target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub color: HighlightColor,
    pub block: BlockId,
    pub zone: ZoneId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspOutcome {
    Grasped,
    BlockMissing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Human picked a block the robot had committed to.
    PickingError,
    /// Human placed into the zone the robot was placing into.
    PlacingError,
    /// Human entered a red (committed) zone before the robot started placing.
    ZoneIntrusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<BlockId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<ZoneId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Robot,
    Human,
    System,
}

impl From<AgentId> for Actor {
    fn from(agent: AgentId) -> Self {
        match agent {
            AgentId::Robot => Actor::Robot,
            AgentId::Human => Actor::Human,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventKind {
    Select { block: BlockId, zone: ZoneId },
    Announce(Highlight),
    Commit(Highlight),
    PickStart { block: BlockId },
    PickDone { block: BlockId },
    GraspCheck { block: BlockId, outcome: GraspOutcome },
    PlaceStart { block: BlockId, zone: ZoneId },
    PlaceDone { block: BlockId, zone: ZoneId },
    GazeIntent { block: BlockId },
    /// `predicted` is the robot's latched user intent at the moment of the pick.
    HumanPick { block: BlockId, predicted: Option<BlockId> },
    HumanPlace { block: BlockId, zone: ZoneId },
    ConfirmPick { block: BlockId },
    Violation(Violation),
    EStop {},
    Reset { returned: Vec<BlockId> },
    TaskComplete {},
    /// Raw gaze sample; only recorded when a run asks for it.
    Gaze { block: Option<BlockId> },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Select { .. } => "Select",
            EventKind::Announce(_) => "Announce",
            EventKind::Commit(_) => "Commit",
            EventKind::PickStart { .. } => "PickStart",
            EventKind::PickDone { .. } => "PickDone",
            EventKind::GraspCheck { .. } => "GraspCheck",
            EventKind::PlaceStart { .. } => "PlaceStart",
            EventKind::PlaceDone { .. } => "PlaceDone",
            EventKind::GazeIntent { .. } => "GazeIntent",
            EventKind::HumanPick { .. } => "HumanPick",
            EventKind::HumanPlace { .. } => "HumanPlace",
            EventKind::ConfirmPick { .. } => "ConfirmPick",
            EventKind::Violation(_) => "Violation",
            EventKind::EStop {} => "EStop",
            EventKind::Reset { .. } => "Reset",
            EventKind::TaskComplete {} => "TaskComplete",
            EventKind::Gaze { .. } => "Gaze",
        }
    }
}

/// One timestamped entry in a run trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: Seconds,
    pub agent: Actor,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn new(t: Seconds, agent: Actor, kind: EventKind) -> Self {
        Event { t, agent, kind }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("duplicate block id {0}")]
    DuplicateBlockId(BlockId),
    #[error("block id {id} out of range for {n_blocks} blocks")]
    BlockIdOutOfRange { id: BlockId, n_blocks: usize },
    #[error("{field} has {got} entries, expected {expected}")]
    LengthMismatch { field: &'static str, got: usize, expected: usize },
    #[error("a scenario needs exactly the two zones zone1 and zone2")]
    Zones,
}

#[derive(Debug, Error, PartialEq)]
pub enum TransitionError {
    #[error("unknown block {0}")]
    UnknownBlock(BlockId),
    #[error("single-carry: {agent:?} already holds {held}")]
    AlreadyHolding { agent: AgentId, held: BlockId },
    #[error("{block} is not at its start position ({state:?})")]
    NotAtStart { block: BlockId, state: BlockState },
    #[error("{agent:?} does not hold {block}")]
    NotHolding { agent: AgentId, block: BlockId },
    #[error("event at t={event_t} precedes workspace clock t={clock}")]
    TimeWentBackwards { clock: Seconds, event_t: Seconds },
}

/// Block layout and labels for one scenario. Serialized in the scenario
/// config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub n_blocks: usize,
    /// Explicit block ids; defaults to `0..n_blocks`.
    pub ids: Option<Vec<u32>>,
    /// Per-block labels; defaults to alternating One/Two.
    pub labels: Option<Vec<BlockLabel>>,
    /// Per-block start positions in cm; defaults to a 5-wide grid with 6 cm pitch.
    pub positions_cm: Option<Vec<[f64; 2]>>,
    pub zones: Vec<ZoneId>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_blocks: 15,
            ids: None,
            labels: None,
            positions_cm: None,
            zones: ZoneId::ALL.to_vec(),
        }
    }
}

pub const GRID_COLUMNS: usize = 5;
pub const GRID_PITCH_CM: f64 = 6.0;

fn grid_position(index: usize) -> Position {
    Position {
        x_cm: (index % GRID_COLUMNS) as f64 * GRID_PITCH_CM,
        y_cm: (index / GRID_COLUMNS) as f64 * GRID_PITCH_CM,
    }
}

impl ScenarioConfig {
    pub fn with_blocks(n_blocks: usize) -> Self {
        ScenarioConfig { n_blocks, ..Default::default() }
    }

    fn check_len<T>(field: &'static str, v: &Option<Vec<T>>, n: usize) -> Result<(), ConfigError> {
        match v {
            Some(v) if v.len() != n => {
                Err(ConfigError::LengthMismatch { field, got: v.len(), expected: n })
            }
            _ => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n_blocks;
        Self::check_len("ids", &self.ids, n)?;
        Self::check_len("labels", &self.labels, n)?;
        Self::check_len("positions_cm", &self.positions_cm, n)?;
        let zones: BTreeSet<_> = self.zones.iter().copied().collect();
        if self.zones.len() != 2 || zones.len() != 2 {
            return Err(ConfigError::Zones);
        }
        if let Some(ids) = &self.ids {
            let mut seen = BTreeSet::new();
            for &id in ids {
                if !seen.insert(id) {
                    return Err(ConfigError::DuplicateBlockId(BlockId(id)));
                }
                if id as usize >= n {
                    return Err(ConfigError::BlockIdOutOfRange { id: BlockId(id), n_blocks: n });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceState {
    pub blocks: BTreeMap<BlockId, Block>,
    /// Which agent, if any, is actively placing into each zone.
    pub zones: BTreeMap<ZoneId, Option<AgentId>>,
    pub clock: Seconds,
}

impl WorkspaceState {
    pub fn new(config: &ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let mut blocks = BTreeMap::new();
        for i in 0..config.n_blocks {
            let id = BlockId(config.ids.as_ref().map_or(i as u32, |ids| ids[i]));
            let label = config.labels.as_ref().map_or(
                if i % 2 == 0 { BlockLabel::One } else { BlockLabel::Two },
                |l| l[i],
            );
            let start = config
                .positions_cm
                .as_ref()
                .map_or_else(|| grid_position(i), |p| Position { x_cm: p[i][0], y_cm: p[i][1] });
            blocks.insert(id, Block { id, label, state: BlockState::AtStart, start });
        }
        Ok(WorkspaceState {
            blocks,
            zones: ZoneId::ALL.iter().map(|z| (*z, None)).collect(),
            clock: 0.0,
        })
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(&id)
    }

    pub fn is_at_start(&self, id: BlockId) -> bool {
        self.blocks.get(&id).is_some_and(|b| b.state == BlockState::AtStart)
    }

    /// Blocks still at their start positions.
    pub fn remaining_blocks(&self) -> BTreeSet<BlockId> {
        self.blocks
            .values()
            .filter(|b| b.state == BlockState::AtStart)
            .map(|b| b.id)
            .collect()
    }

    pub fn held_by(&self, agent: AgentId) -> Option<BlockId> {
        self.blocks
            .values()
            .find(|b| b.state == BlockState::HeldBy { agent })
            .map(|b| b.id)
    }

    pub fn all_placed(&self) -> bool {
        self.blocks.values().all(|b| matches!(b.state, BlockState::Placed { .. }))
    }

    pub fn zone_occupant(&self, zone: ZoneId) -> Option<AgentId> {
        self.zones.get(&zone).copied().flatten()
    }

    /// Counts of (at start, held, placed) blocks.
    pub fn census(&self) -> (usize, usize, usize) {
        self.blocks.values().fold((0, 0, 0), |(s, h, p), b| match b.state {
            BlockState::AtStart => (s + 1, h, p),
            BlockState::HeldBy { .. } => (s, h + 1, p),
            BlockState::Placed { .. } => (s, h, p + 1),
        })
    }

    /// Pure transition: returns the successor state or the violated invariant.
    pub fn apply_event(&self, event: &Event) -> Result<WorkspaceState, TransitionError> {
        let mut next = self.clone();
        next.apply_event_mut(event)?;
        Ok(next)
    }

    /// In-place variant of [`apply_event`](Self::apply_event). On error the
    /// state is left unchanged.
    pub fn apply_event_mut(&mut self, event: &Event) -> Result<(), TransitionError> {
        if event.t + TIME_EPS < self.clock {
            return Err(TransitionError::TimeWentBackwards { clock: self.clock, event_t: event.t });
        }
        match &event.kind {
            EventKind::PickDone { block } => self.pick(*block, AgentId::Robot)?,
            EventKind::HumanPick { block, .. } => self.pick(*block, AgentId::Human)?,
            EventKind::PlaceStart { block, zone } => {
                self.require_held(*block, AgentId::Robot)?;
                self.zones.insert(*zone, Some(AgentId::Robot));
            }
            EventKind::PlaceDone { block, zone } => {
                self.place(*block, AgentId::Robot, *zone)?;
                self.zones.insert(*zone, None);
            }
            EventKind::HumanPlace { block, zone } => self.place(*block, AgentId::Human, *zone)?,
            EventKind::Reset { .. } => {
                for b in self.blocks.values_mut() {
                    if matches!(b.state, BlockState::HeldBy { .. }) {
                        b.state = BlockState::AtStart;
                    }
                }
                for occupant in self.zones.values_mut() {
                    *occupant = None;
                }
            }
            _ => {}
        }
        self.clock = self.clock.max(event.t);
        Ok(())
    }

    fn pick(&mut self, block: BlockId, agent: AgentId) -> Result<(), TransitionError> {
        if let Some(held) = self.held_by(agent) {
            return Err(TransitionError::AlreadyHolding { agent, held });
        }
        let b = self.blocks.get_mut(&block).ok_or(TransitionError::UnknownBlock(block))?;
        if b.state != BlockState::AtStart {
            return Err(TransitionError::NotAtStart { block, state: b.state });
        }
        b.state = BlockState::HeldBy { agent };
        Ok(())
    }

    fn require_held(&self, block: BlockId, agent: AgentId) -> Result<(), TransitionError> {
        let b = self.blocks.get(&block).ok_or(TransitionError::UnknownBlock(block))?;
        if b.state != (BlockState::HeldBy { agent }) {
            return Err(TransitionError::NotHolding { agent, block });
        }
        Ok(())
    }

    fn place(&mut self, block: BlockId, agent: AgentId, zone: ZoneId) -> Result<(), TransitionError> {
        self.require_held(block, agent)?;
        if let Some(b) = self.blocks.get_mut(&block) {
            b.state = BlockState::Placed { zone };
        }
        Ok(())
    }
}
