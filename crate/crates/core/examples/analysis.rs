//! Runs an experiment and prints the statistical report: normality checks,
//! one-way ANOVA and Bonferroni-adjusted pairwise tests per metric.

use jointaction::experiment::{run_experiment, ExperimentConfig};
use jointaction::stats::{analyze, Dof, RankTest};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = ExperimentConfig { participants: 37, seed: 5, ..ExperimentConfig::default() };
    let table = run_experiment(&config)?;
    let report = analyze(&table, RankTest::SignedRank);
    println!("{}", report.note);
    for m in &report.metrics {
        print!("\n{}: ", m.metric.name());
        match (&m.anova.result, &m.anova.error) {
            (Some(r), _) => match r.dof {
                Some(Dof::Two(a, b)) => println!("F({a}, {b}) = {:.3}, p = {:.3e}", r.statistic, r.p_value),
                _ => println!("F = {:.3}, p = {:.3e}", r.statistic, r.p_value),
            },
            (None, Some(e)) => println!("no ANOVA ({e})"),
            _ => println!("no ANOVA"),
        }
        for c in &m.pairwise {
            let t = c.paired_t.result.as_ref();
            println!(
                "  {:>4} vs {:<4}  t = {:>8}  p_adj = {:>8}  rank p_adj = {:>8}",
                c.a,
                c.b,
                t.map_or("-".into(), |r| format!("{:.3}", r.statistic)),
                c.paired_t.p_adjusted.map_or("-".into(), |p| format!("{p:.2e}")),
                c.rank.p_adjusted.map_or("-".into(), |p| format!("{p:.2e}")),
            );
        }
    }
    Ok(())
}
