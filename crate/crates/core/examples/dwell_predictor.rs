//! Feeds a hand-made 30 Hz gaze stream into the dwell predictor and prints
//! when it fires and how long the intent stays latched.

use jointaction::{BlockId, DwellConfig, DwellPredictor, GazeSample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = DwellConfig::default();
    let mut p = DwellPredictor::new(config);
    // glance at block 2, settle on block 5, then look away
    let script: &[(Option<u32>, usize)] = &[(Some(2), 12), (None, 3), (Some(5), 30), (None, 150), (None, 60)];
    let mut k = 0u64;
    for &(block, ticks) in script {
        for _ in 0..ticks {
            let t = k as f64 * config.sample_period;
            if let Some(intent) = p.ingest(GazeSample::new(t, block.map(BlockId)))? {
                println!("t = {t:.3} s: intent fired for block {}", intent.block);
            }
            k += 1;
        }
        let t = k as f64 * config.sample_period;
        let latched = p.current_intent(t, |_| true).map(|i| i.block.to_string());
        println!("t = {t:.3} s: latched intent {}", latched.as_deref().unwrap_or("none"));
    }
    Ok(())
}
