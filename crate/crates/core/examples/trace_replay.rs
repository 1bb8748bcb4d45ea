//! Writes a trial's trace as JSONL, reads it back, and replays it through
//! the workspace transition function.

use jointaction::sim::finalize_metrics;
use jointaction::{run, EventKind, Scenario, Trace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scenario = Scenario { master_seed: 11, ..Scenario::default() };
    let (metrics, trace) = run(&scenario)?;
    let text = trace.to_jsonl();
    println!("{} events, content hash {}", trace.events.len(), trace.content_hash());
    for line in text.lines().take(6) {
        println!("  {line}");
    }

    let back = Trace::read_jsonl(text.as_bytes())?;
    assert_eq!(back.content_hash(), trace.content_hash());
    assert_eq!(finalize_metrics(&back)?, metrics);
    let ws = back.replay(&scenario.workspace)?;
    let (at_start, held, placed) = ws.census();
    println!("after replay: {at_start} at start, {held} held, {placed} placed");
    let commits = back.count(|k| matches!(k, EventKind::Commit(_)));
    println!("robot commitments: {commits}, completion {:.1} s", metrics.completion_time);
    Ok(())
}
