//! One simulated trial in each condition with the same seed.
//!
//!     cargo run -p jointaction --example single_trial -- 7

use jointaction::{run, Condition, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7);
    println!("{:<14} {:>8} {:>5} {:>5} {:>6} {:>6} {:>6} {:>8}", "condition", "time_s", "pick", "place", "estop", "human", "robot", "accuracy");
    for condition in Condition::ALL {
        let scenario = Scenario { condition, master_seed: seed, ..Scenario::default() };
        let (m, trace) = run(&scenario)?;
        println!(
            "{:<14} {:>8.1} {:>5} {:>5} {:>6} {:>6} {:>6} {:>8.2}",
            condition.title(),
            m.completion_time,
            m.picking_errors,
            m.placing_errors,
            m.estop_count,
            m.human_picks,
            m.robot_picks,
            m.predictor_accuracy
        );
        assert_eq!(trace.seed, seed);
    }
    Ok(())
}
