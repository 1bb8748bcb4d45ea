//! Drives the engine directly: the human grabs the block the robot has
//! committed to, and the safety monitor stops and resets everything.

use jointaction::engine::{ActionOutcome, EngineSettings};
use jointaction::sim::tick_time;
use jointaction::{Engine, HumanAction, Robot, RobotConfig, ScenarioConfig, Trace, WorkspaceState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ws = WorkspaceState::new(&ScenarioConfig::with_blocks(4))?;
    let robot = Robot::new(RobotConfig::brisk());
    let mut engine = Engine::new(EngineSettings::default(), ws, robot, Default::default(), Trace::new(0, String::new()));

    let mut k = 0;
    let mut t = 0.0;
    while engine.robot().phase().committed_target().is_none() {
        t = tick_time(k, 1.0 / 30.0);
        engine.robot_tick(t, &mut ())?;
        k += 1;
    }
    let target = engine.robot().phase().committed_target().unwrap();
    println!("t = {t:.2}: robot committed to block {target} ({})", engine.robot().phase().name());

    match engine.human_action(t, HumanAction::Pick { block: target })? {
        ActionOutcome::Violation(v) => println!("violation: {:?}", v.kind),
        other => println!("unexpected: {other:?}"),
    }
    println!("frozen until t = {:.2}; robot {}", engine.frozen_until(), engine.robot().phase().name());
    match engine.human_action(t + 1.0, HumanAction::Pick { block: target })? {
        ActionOutcome::Rejected(r) => println!("one second later: rejected, {}", r.describe()),
        other => println!("unexpected: {other:?}"),
    }
    for e in &engine.trace().events {
        println!("  {}", serde_json::to_string(e)?);
    }
    Ok(())
}
