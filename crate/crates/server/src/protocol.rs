//! JSON messages exchanged with a live client. Every message is an object
//! with a `"type"` field; see `docs/protocol.md` for the full schema.

use jointaction::model::{Block, BlockId, Highlight, Seconds, ViolationKind, ZoneId};
use jointaction::RunMetrics;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    /// Starts the session. `condition` is one of `both`, `ar`, `gaze`, `none`.
    Hello {
        condition: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// The block under the pointer, or `null` when it is over empty table.
    Gaze { block: Option<BlockId> },
    Pick { block: BlockId },
    Place { block: BlockId, zone: ZoneId },
    ConfirmPick { block: BlockId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    /// Server time in seconds since `hello`.
    pub t: Seconds,
    /// A full snapshot lists every block; a delta only the ones that changed
    /// since the previous broadcast.
    pub full: bool,
    pub blocks: Vec<Block>,
    /// Absent in sessions without AR.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlights: Option<Vec<Highlight>>,
    pub robot_phase: String,
    /// True while the e-stop recovery delay runs.
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(StateMessage),
    IntentAck {
        block: BlockId,
    },
    Violation {
        kind: ViolationKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block: Option<BlockId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zone: Option<ZoneId>,
    },
    Estop {},
    Reject {
        reason: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        detail: Option<String>,
    },
    Done {
        metrics: RunMetrics,
    },
}

impl ServerMessage {
    pub fn reject(reason: &str, detail: impl Into<String>) -> Self {
        ServerMessage::Reject { reason: reason.to_string(), detail: Some(detail.into()) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

/// Parses a client frame, turning anything unusable into the reject that
/// should be sent back.
pub fn parse_client(text: &str) -> Result<ClientMessage, ServerMessage> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ServerMessage::reject("malformed", e.to_string()))?;
    let Some(kind) = value.get("type").and_then(|t| t.as_str()) else {
        return Err(ServerMessage::reject("malformed", "missing string field \"type\""));
    };
    const KNOWN: [&str; 5] = ["hello", "gaze", "pick", "place", "confirm_pick"];
    if !KNOWN.contains(&kind) {
        return Err(ServerMessage::reject("unknown_type", format!("unknown message type {kind:?}")));
    }
    serde_json::from_value(value).map_err(|e| ServerMessage::reject("malformed", e.to_string()))
}
