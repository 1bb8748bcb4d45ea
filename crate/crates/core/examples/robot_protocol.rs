//! Steps the robot's announce/commit state machine by hand: it announces a
//! target in yellow, reselects when the user's predicted intent lands on
//! that target, and turns red once the announce window has elapsed.

use std::collections::BTreeSet;

use jointaction::robot::Perception;
use jointaction::{BlockId, PredictedIntent, Robot, RobotConfig, ScenarioConfig, WorkspaceState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ws = WorkspaceState::new(&ScenarioConfig::with_blocks(6))?;
    let remaining: BTreeSet<BlockId> = ws.remaining_blocks();
    let mut robot = Robot::new(RobotConfig { rng_seed: 3, ..RobotConfig::brisk() });
    let see = |predicted| Perception { workspace: &ws, believed_remaining: &remaining, predicted };

    let show = |t: f64, robot: &Robot, events: Vec<jointaction::Event>| {
        for e in events {
            println!("t = {t:>5.2}  {:<12} {}", e.kind.name(), serde_json::to_string(&e.kind).unwrap());
        }
        println!("t = {t:>5.2}  phase {}", robot.phase().name());
    };

    let events = robot.step(0.0, &see(None));
    show(0.0, &robot, events);
    let target = robot.phase().committed_target().or_else(|| robot.phase().highlight().map(|h| h.block)).unwrap();

    // the user has been looking at the announced block
    let intent = PredictedIntent { block: target, t_fired: 1.0 };
    let events = robot.on_user_intent(&intent, &see(Some(target)));
    show(1.0, &robot, events);
    let events = robot.step(3.9, &see(Some(target)));
    show(3.9, &robot, events);
    let events = robot.step(4.0, &see(Some(target)));
    show(4.0, &robot, events);
    let events = robot.step(9.0, &see(Some(target)));
    show(9.0, &robot, events);
    Ok(())
}
