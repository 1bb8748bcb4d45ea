//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

mod common;

use std::time::{Duration, Instant};

use jointaction::experiment::{accuracy_sweep, balanced_latin_square, run_experiment, summarize, ExperimentConfig, Metric};
use jointaction::gaze::{DwellConfig, DwellPredictor};
use jointaction::model::Condition;
use jointaction::sim::{run, run_observed};
use jointaction::stats::{
    anova_oneway, bonferroni_adjust, f_sf, mann_whitney_u, signed_rank_sums, t_test_paired, t_two_sided,
    wilcoxon_signed_rank, Dof,
};
use jointaction::{HumanParams, Scenario};
use rayon::prelude::*;

use common::*;

const SAFETY_RUNS_PER_CONDITION: u64 = 250;
const SAFETY_TIME_BUDGET: Duration = Duration::from_secs(120);
const DWELL_STREAMS: u64 = 10_000;
const ORDERING_PARTICIPANTS: u32 = 200;
const ORDERING_SEED: u64 = 2024;
const ALPHA: f64 = 0.05;
const COMPLETION_RANGE: (f64, f64) = (150.0, 210.0);
const COMPLETION_SPREAD: f64 = 0.10;
const EXACT_P_TOL: f64 = 1e-9;
const TAIL_TOL: f64 = 1e-6;
const NOISE_SWEEP: [f64; 3] = [0.16, 0.12, 0.08];
const SWEEP_RUNS: u32 = 100;

type Outcome = Result<String, String>;

fn safety_suite() -> Outcome {
    let start = Instant::now();
    let jobs: Vec<(Condition, u64)> =
        Condition::ALL.iter().flat_map(|c| (0..SAFETY_RUNS_PER_CONDITION).map(move |s| (*c, s))).collect();
    let problems: Vec<String> = jobs
        .par_iter()
        .flat_map_iter(|&(condition, seed)| {
            let scenario = Scenario { condition, master_seed: seed, ..Default::default() };
            let mut log = CommitLog::default();
            let (_, trace) = match run_observed(&scenario, &mut log) {
                Ok(r) => r,
                Err(e) => return vec![format!("{} seed {seed}: {e}", condition.name())],
            };
            let mut p: Vec<String> = protocol_problems(&trace, &scenario.workspace, scenario.robot.announce_duration)
                .into_iter()
                .map(|s| format!("{} seed {seed}: {s}", condition.name()))
                .collect();
            if condition.gaze_enabled {
                for (t, block, latched) in &log.commits {
                    if *latched == Some(*block) {
                        p.push(format!("{} seed {seed}: commit at {t} on latched intent {block}", condition.name()));
                    }
                }
            }
            if !condition.ar_enabled && log.highlights_seen > 0 {
                p.push(format!("{} seed {seed}: human saw highlights without AR", condition.name()));
            }
            p
        })
        .collect();
    let elapsed = start.elapsed();
    if !problems.is_empty() {
        return Err(format!("{} problems, first: {}", problems.len(), problems[0]));
    }
    if elapsed > SAFETY_TIME_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} runs, 0 violations, {:.1?}", jobs.len(), elapsed))
}

fn dwell_oracle_equivalence() -> Outcome {
    let config = DwellConfig::default();
    let mismatches: Vec<u64> = (0..DWELL_STREAMS)
        .into_par_iter()
        .filter(|&i| {
            let mut r = rng(i);
            let stream = random_stream(&mut r);
            let mut p = DwellPredictor::new(config);
            let fired: Vec<_> = stream.iter().filter_map(|s| p.ingest(*s).expect("ordered stream")).collect();
            fired != dwell_oracle(&stream, config.dwell)
        })
        .collect();
    if mismatches.is_empty() {
        Ok(format!("{DWELL_STREAMS} streams match"))
    } else {
        Err(format!("{} streams differ, first seed {}", mismatches.len(), mismatches[0]))
    }
}

fn determinism() -> Outcome {
    for condition in Condition::ALL {
        for seed in [0u64, 7, 99] {
            let s = Scenario { condition, master_seed: seed, ..Default::default() };
            let (m1, t1) = run(&s).map_err(|e| e.to_string())?;
            let (m2, t2) = run(&s).map_err(|e| e.to_string())?;
            if t1.to_jsonl() != t2.to_jsonl() || m1 != m2 {
                return Err(format!("{} seed {seed} differs between runs", condition.name()));
            }
        }
    }
    let cfg = ExperimentConfig { participants: 37, seed: 5, ..Default::default() };
    let parallel = run_experiment(&ExperimentConfig { parallel: true, ..cfg.clone() }).map_err(|e| e.to_string())?;
    let serial = run_experiment(&ExperimentConfig { parallel: false, ..cfg }).map_err(|e| e.to_string())?;
    if parallel.to_csv_string() != serial.to_csv_string() {
        return Err("parallel and serial tables differ".into());
    }
    Ok("12 traces byte-identical; parallel table == serial table".into())
}

fn ordering_and_completion() -> (Outcome, Outcome) {
    let cfg = ExperimentConfig { participants: ORDERING_PARTICIPANTS, seed: ORDERING_SEED, ..Default::default() };
    let table = match run_experiment(&cfg) {
        Ok(t) => t,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let summary = summarize(&table);
    let mean_of = |c: Condition, m: Metric| {
        summary.iter().find(|s| s.condition == c.name()).map(|s| s.get(m).mean).unwrap_or(f64::NAN)
    };

    let placing: Vec<f64> = Condition::ALL.iter().map(|c| mean_of(*c, Metric::PlacingErrors)).collect();
    let ordered = placing.windows(2).all(|w| w[0] < w[1]);
    let t = t_test_paired(
        &table.metric(Condition::FULL, Metric::PlacingErrors),
        &table.metric(Condition::BASELINE, Metric::PlacingErrors),
    );
    let ordering = match t {
        Ok(t) if ordered && t.statistic < 0.0 && t.p_value < ALPHA => Ok(format!(
            "placing errors {:.2} < {:.2} < {:.2} < {:.2}; full vs baseline t({}) = {:.3}, p = {:.2e}",
            placing[0], placing[1], placing[2], placing[3], ORDERING_PARTICIPANTS - 1, t.statistic, t.p_value
        )),
        Ok(t) => Err(format!("placing errors {placing:.2?}; t = {:.3}, p = {:.3e}", t.statistic, t.p_value)),
        Err(e) => Err(e.to_string()),
    };

    let times: Vec<f64> = Condition::ALL.iter().map(|c| mean_of(*c, Metric::CompletionS)).collect();
    let grand = times.iter().sum::<f64>() / times.len() as f64;
    let spread = times.iter().cloned().fold(f64::MIN, f64::max) - times.iter().cloned().fold(f64::MAX, f64::min);
    let detail = format!(
        "means {:.1} / {:.1} / {:.1} / {:.1} s, grand {grand:.1} s, spread {spread:.1} s ({:.1}%)",
        times[0],
        times[1],
        times[2],
        times[3],
        100.0 * spread / grand
    );
    let in_range = times.iter().all(|t| (COMPLETION_RANGE.0..=COMPLETION_RANGE.1).contains(t));
    let completion = if in_range && spread < COMPLETION_SPREAD * grand { Ok(detail) } else { Err(detail) };
    (ordering, completion)
}

fn stats_oracles() -> Outcome {
    let f = anova_oneway(&[vec![1.0, 2.0], vec![3.0, 4.0]]).map_err(|e| e.to_string())?;
    if f.statistic != 8.0 || f.dof != Some(Dof::Two(1.0, 2.0)) {
        return Err(format!("ANOVA hand case gave {f:?}"));
    }
    let t = t_test_paired(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    if (t.statistic + 1.0).abs() > 1e-12 || t.dof != Some(Dof::One(2.0)) {
        return Err(format!("paired t hand case gave {t:?}"));
    }
    let u = mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    if u.statistic != 4.5 {
        return Err(format!("U tie case gave {}", u.statistic));
    }
    if signed_rank_sums(&[1.0, 0.0], &[0.0, 1.0]) != (1.5, 1.5) {
        return Err("W tie case".into());
    }

    let mut worst_exact = 0.0f64;
    let mut r = rng(31);
    for n in 1..=12 {
        for _ in 0..8 {
            let (a, b) = (tied_sample(&mut r, n), tied_sample(&mut r, n));
            if let Ok(w) = wilcoxon_signed_rank(&a, &b) {
                worst_exact = worst_exact.max((w.p_value - signed_rank_p_enumerated(&a, &b)).abs());
            }
        }
    }
    for (n1, n2) in [(1, 1), (2, 3), (4, 4), (5, 7), (6, 6), (3, 9), (8, 8)] {
        for _ in 0..3 {
            let (a, b) = (tied_sample(&mut r, n1), tied_sample(&mut r, n2));
            let u = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
            worst_exact = worst_exact.max((u.p_value - mann_whitney_p_enumerated(&a, &b)).abs());
        }
    }
    if worst_exact > EXACT_P_TOL {
        return Err(format!("exact rank p off by {worst_exact:.2e}"));
    }

    let mut worst_tail = 0.0f64;
    for dof in [1.0, 2.0, 5.0, 12.5, 36.0, 144.0] {
        for t in [0.0, 0.3, 1.0, 2.5, 6.8938] {
            worst_tail = worst_tail.max((t_two_sided(t, dof) - t_two_sided_oracle(t, dof)).abs());
        }
    }
    for (d1, d2) in [(1.0, 2.0), (3.0, 144.0), (2.0, 10.0), (5.0, 7.0)] {
        for x in [0.2, 1.0, 3.0, 8.0, 16.0] {
            worst_tail = worst_tail.max((f_sf(x, d1, d2) - f_sf_oracle(x, d1, d2)).abs());
        }
    }
    if worst_tail > TAIL_TOL {
        return Err(format!("t/F tail off by {worst_tail:.2e}"));
    }

    if bonferroni_adjust(&[0.3], 5).map_err(|e| e.to_string())? != vec![1.0] {
        return Err("Bonferroni does not clamp".into());
    }
    let groups: Vec<Vec<f64>> = (0..4).map(|g| (0..37).map(|i| ((i * 7 + g * 3) % 11) as f64).collect()).collect();
    let shape = anova_oneway(&groups).map_err(|e| e.to_string())?;
    if shape.dof != Some(Dof::Two(3.0, 144.0)) {
        return Err(format!("4 x 37 gave dof {:?}", shape.dof));
    }
    Ok(format!("hand cases exact; rank p max err {worst_exact:.1e}; t/F tail max err {worst_tail:.1e}; dof (3,144)"))
}

fn latin_squares() -> Outcome {
    let mut problems = Vec::new();
    for n in [2, 3, 4, 5, 6, 7, 8] {
        let square = balanced_latin_square(n).map_err(|e| e.to_string())?;
        problems.extend(latin_square_problems(&square, n));
    }
    if problems.is_empty() {
        Ok("n = 2,4,6,8 balanced; n = 3,5,7 give 2n balanced rows".into())
    } else {
        Err(problems.join("; "))
    }
}

fn accuracy_harness() -> Outcome {
    let base = Scenario { human: HumanParams::noisy_gaze(), ..Default::default() };
    let sweep = accuracy_sweep(&base, &NOISE_SWEEP, SWEEP_RUNS, 17).map_err(|e| e.to_string())?;
    let text: Vec<String> = sweep.iter().map(|(n, a)| format!("noise {n:.2} -> {a:.3}")).collect();
    let increasing = sweep.windows(2).all(|w| w[0].1 < w[1].1);
    let valid = sweep.iter().all(|(_, a)| (0.0..=1.0).contains(a));
    if increasing && valid {
        Ok(text.join(", "))
    } else {
        Err(text.join(", "))
    }
}

fn main() {
    let (ordering, completion) = ordering_and_completion();
    let results: Vec<(&str, Outcome)> = vec![
        ("protocol safety suite", safety_suite()),
        ("dwell predictor oracle equivalence", dwell_oracle_equivalence()),
        ("determinism", determinism()),
        ("placing-error ordering", ordering),
        ("completion-time calibration", completion),
        ("stats toolkit oracles", stats_oracles()),
        ("balanced Latin square", latin_squares()),
        ("predictor accuracy harness", accuracy_harness()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
