//! Predictor accuracy as the simulated gaze gets noisier.

use jointaction::experiment::accuracy_sweep;
use jointaction::{HumanParams, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = Scenario { human: HumanParams::noisy_gaze(), ..Scenario::default() };
    let levels = [0.0, 0.04, 0.08, 0.12, 0.16, 0.2];
    for (noise, acc) in accuracy_sweep(&base, &levels, 60, 1)? {
        println!("gaze noise {noise:.2}: accuracy {acc:.3} {}", "#".repeat((acc * 50.0).round() as usize));
    }
    Ok(())
}
