//! A small within-subjects experiment: every participant runs all four
//! conditions in a counterbalanced order. Prints the CSV and a summary.
//!
//!     cargo run --release -p jointaction --example experiment -- 12

use jointaction::experiment::{run_experiment, summarize, ExperimentConfig, Metric};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let participants = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let config = ExperimentConfig { participants, seed: 2024, ..ExperimentConfig::default() };
    let table = run_experiment(&config)?;
    for line in table.to_csv_string().lines().take(10) {
        println!("{line}");
    }
    println!("...\n");
    for c in summarize(&table) {
        let cells: Vec<String> = Metric::ALL.iter().map(|m| format!("{}={}", m.name(), c.get(*m).display())).collect();
        println!("{:<5} {}", c.condition, cells.join("  "));
    }
    Ok(())
}
