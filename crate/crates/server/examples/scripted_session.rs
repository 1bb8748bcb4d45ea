//! Drives a session with explicit timestamps, the same way the websocket
//! host does, and prints the messages a client would receive.

use jointaction_server::{ClientMessage, ServerMessage, Session, SessionConfig};

fn print(t: f64, msgs: &[ServerMessage]) {
    for m in msgs {
        match m {
            ServerMessage::State(s) if !s.full && s.blocks.is_empty() => {}
            _ => println!("t = {t:>5.2}  {}", m.to_json()),
        }
    }
}

fn main() {
    let mut session = Session::new(1, SessionConfig::default());
    let hello = ClientMessage::Hello { condition: "both".into(), seed: Some(3) };
    let snapshot = session.handle_message(0.0, hello);
    println!("hello -> full snapshot with {} blocks", match &snapshot[0] {
        ServerMessage::State(s) => s.blocks.len(),
        _ => 0,
    });

    let mut target = None;
    let mut grabbed = false;
    for k in 1..=240u64 {
        let t = k as f64 / 30.0;
        if k == 5 {
            // look at the block the robot has just announced
            target = session.robot_phase().and_then(|p| p.highlight()).map(|h| h.block);
            print(t, &session.handle_message(t, ClientMessage::Gaze { block: target }));
        }
        if k == 60 {
            print(t, &session.handle_message(t, ClientMessage::Gaze { block: None }));
            print(t, &session.handle_text(t, r#"{"type":"pick","block":99}"#));
        }
        if let (false, Some(red)) = (grabbed, session.robot_phase().and_then(|p| p.committed_target())) {
            // reach for the block the robot has committed to
            grabbed = true;
            print(t, &session.handle_message(t, ClientMessage::Pick { block: red }));
        }
        let msgs = session.tick(t);
        let changes: Vec<ServerMessage> = msgs
            .into_iter()
            .filter(|m| !matches!(m, ServerMessage::State(s) if !s.full && s.blocks.is_empty()) || k % 30 == 0)
            .collect();
        print(t, &changes);
    }
    println!("gazed at {target:?}; {} trace events so far", session.trace().unwrap().events.len());
}
