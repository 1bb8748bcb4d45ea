//! Live sessions over websockets: a browser (or scripted) client stands in
//! for the simulated human while the server runs the robot, the gaze
//! predictor and the safety monitor on a wall-clock tick.
//!
//! [`Session`] holds all the protocol logic and can be driven directly with
//! explicit timestamps; [`Server`] hosts one session per websocket
//! connection at `/ws`.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{parse_client, ClientMessage, ServerMessage, StateMessage};
pub use server::{serve, Server, ServerConfig, ServerError, DEFAULT_PORT};
pub use session::{Session, SessionConfig};
