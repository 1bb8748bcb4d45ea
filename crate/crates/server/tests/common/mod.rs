#![allow(dead_code)]

use std::collections::BTreeMap;

use jointaction::model::{Block, BlockId, BlockState, HighlightColor, ZoneId};
use jointaction_server::{ClientMessage, ServerMessage, Session, StateMessage};

pub const TICK: f64 = 1.0 / 30.0;

pub fn tick_time(k: u64) -> f64 {
    k as f64 / 30.0
}

/// The client's picture of the session, rebuilt from server messages only.
#[derive(Debug, Default)]
pub struct Board {
    pub blocks: BTreeMap<BlockId, Block>,
    pub last_state: Option<StateMessage>,
    pub log: Vec<ServerMessage>,
}

impl Board {
    pub fn absorb(&mut self, msgs: Vec<ServerMessage>) {
        for m in msgs {
            if let ServerMessage::State(s) = &m {
                if s.full {
                    self.blocks.clear();
                }
                for b in &s.blocks {
                    self.blocks.insert(b.id, b.clone());
                }
                self.last_state = Some(s.clone());
            }
            self.log.push(m);
        }
    }

    pub fn done(&self) -> bool {
        self.log.iter().any(|m| matches!(m, ServerMessage::Done { .. }))
    }

    pub fn phase(&self) -> &str {
        self.last_state.as_ref().map_or("", |s| s.robot_phase.as_str())
    }

    pub fn frozen(&self) -> bool {
        self.last_state.as_ref().is_some_and(|s| s.frozen)
    }

    fn highlight(&self) -> Option<(HighlightColor, BlockId, ZoneId)> {
        let h = self.last_state.as_ref()?.highlights.as_ref()?.first()?;
        Some((h.color, h.block, h.zone))
    }

    fn robot_target(&self) -> Option<BlockId> {
        self.highlight().map(|(_, b, _)| b)
    }

    fn robot_placing_zone(&self) -> Option<ZoneId> {
        match self.highlight() {
            Some((_, _, zone)) if self.phase() == "placing" => Some(zone),
            _ => None,
        }
    }

    pub fn human_holding(&self) -> Option<BlockId> {
        self.blocks.values().find(|b| b.state == BlockState::HeldBy { agent: jointaction::model::AgentId::Human }).map(|b| b.id)
    }
}

#[derive(Debug, Clone, Copy)]
enum Plan {
    Idle,
    Hovering { block: BlockId, since: f64 },
    Carrying { block: BlockId, since: f64 },
}

/// A cautious participant for AR sessions: never touches a highlighted block,
/// looks at its choice for a while, picks, confirms, and waits for the
/// robot to clear a zone before placing there.
#[derive(Debug)]
pub struct ScriptedHuman {
    plan: Plan,
    pub hover_for: f64,
    pub carry_for: f64,
}

impl Default for ScriptedHuman {
    fn default() -> Self {
        ScriptedHuman { plan: Plan::Idle, hover_for: 1.0, carry_for: 1.0 }
    }
}

impl ScriptedHuman {
    pub fn act(&mut self, t: f64, board: &Board) -> Vec<ClientMessage> {
        if board.frozen() {
            self.plan = match board.human_holding() {
                Some(block) => Plan::Carrying { block, since: t },
                None => Plan::Idle,
            };
            return Vec::new();
        }
        match self.plan {
            Plan::Idle => {
                if board.human_holding().is_some() {
                    return Vec::new();
                }
                let target = board.robot_target();
                let choice = board
                    .blocks
                    .values()
                    .find(|b| b.state == BlockState::AtStart && Some(b.id) != target)
                    .map(|b| b.id);
                match choice {
                    Some(block) => {
                        self.plan = Plan::Hovering { block, since: t };
                        vec![ClientMessage::Gaze { block: Some(block) }]
                    }
                    None => Vec::new(),
                }
            }
            Plan::Hovering { block, since } => {
                let available = board.blocks.get(&block).is_some_and(|b| b.state == BlockState::AtStart);
                if !available || board.robot_target() == Some(block) {
                    self.plan = Plan::Idle;
                    return vec![ClientMessage::Gaze { block: None }];
                }
                if t - since + 1e-9 < self.hover_for {
                    return Vec::new();
                }
                self.plan = Plan::Carrying { block, since: t };
                vec![ClientMessage::Gaze { block: None }, ClientMessage::Pick { block }, ClientMessage::ConfirmPick { block }]
            }
            Plan::Carrying { block, since } => {
                let zone = board.blocks[&block].label.zone();
                if t - since + 1e-9 < self.carry_for || board.robot_placing_zone() == Some(zone) {
                    return Vec::new();
                }
                self.plan = Plan::Idle;
                vec![ClientMessage::Place { block, zone }]
            }
        }
    }
}

/// Drives a session tick by tick until it finishes or `limit` seconds pass.
pub fn play(session: &mut Session, human: &mut ScriptedHuman, board: &mut Board, from_tick: u64, limit: f64) -> u64 {
    let mut k = from_tick;
    while !board.done() && tick_time(k) <= limit {
        let t = tick_time(k);
        for m in human.act(t, board) {
            board.absorb(session.handle_message(t, m));
        }
        board.absorb(session.tick(t));
        k += 1;
    }
    k
}

pub fn hello(session: &mut Session, condition: &str, seed: u64) -> Board {
    let mut board = Board::default();
    board.absorb(session.handle_message(0.0, ClientMessage::Hello { condition: condition.into(), seed: Some(seed) }));
    board
}
