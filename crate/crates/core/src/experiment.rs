//! Within-subjects experiments: every simulated participant completes the
//! task once per condition, in an order counterbalanced by a balanced Latin
//! square.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::human::Jittered;
use crate::model::Condition;
use crate::sim::{run, sub_seed, RunMetrics, Scenario, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("a Latin square needs at least one condition")]
    EmptySquare,
    #[error("participant {participant}, condition {condition}: {source}")]
    Sim { participant: u32, condition: &'static str, source: SimError },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
}

/// Rows of a balanced Latin square over `n` conditions. Every condition
/// appears once per row and per column, and every ordered pair of
/// conditions is adjacent equally often. Odd `n` needs `2n` rows.
pub fn balanced_latin_square(n: usize) -> Result<Vec<Vec<usize>>, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::EmptySquare);
    }
    // 0, 1, n-1, 2, n-2, ...
    let mut first = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, n);
    for j in 0..n {
        if j % 2 == 1 || j == 0 {
            first.push(lo);
            lo += 1;
        } else {
            hi -= 1;
            first.push(hi);
        }
    }
    let mut rows: Vec<Vec<usize>> = (0..n).map(|r| first.iter().map(|c| (c + r) % n).collect()).collect();
    if n % 2 == 1 {
        let reversed: Vec<Vec<usize>> = rows.iter().map(|r| r.iter().rev().copied().collect()).collect();
        rows.extend(reversed);
    }
    Ok(rows)
}

/// How much simulated participants differ from each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticipantVariation {
    /// Human durations are scaled by a factor drawn from `1 ± speed_spread`.
    pub speed_spread: f64,
    /// Probability parameters are shifted by up to this much, then clamped.
    pub probability_spread: f64,
}

impl Default for ParticipantVariation {
    fn default() -> Self {
        ParticipantVariation { speed_spread: 0.15, probability_spread: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub participants: u32,
    pub seed: u64,
    pub scenario: Scenario,
    pub variation: ParticipantVariation,
    pub parallel: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            participants: 37,
            seed: 0,
            scenario: Scenario::default(),
            variation: ParticipantVariation::default(),
            parallel: true,
        }
    }
}

impl ExperimentConfig {
    /// Digest of everything that affects results. Execution mode is excluded,
    /// so parallel and serial runs produce identical tables.
    pub fn digest(&self) -> String {
        crate::trace::digest_json(&(self.participants, self.seed, &self.scenario, &self.variation))
    }
}

fn scale(j: Jittered, f: f64) -> Jittered {
    Jittered { mean: j.mean * f, jitter: j.jitter * f }
}

/// The scenario participant `pid` runs under `condition`. The participant's
/// traits and random streams are shared across conditions, so condition
/// contrasts are paired.
pub fn participant_scenario(config: &ExperimentConfig, pid: u32, condition: Condition) -> Scenario {
    let pseed = sub_seed(config.seed, 1000 + pid as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(pseed);
    let v = config.variation;
    let mut s = config.scenario.clone();
    let f = 1.0 + v.speed_spread * rng.random_range(-1.0..=1.0);
    let h = &mut s.human;
    h.scan_time = scale(h.scan_time, f);
    h.reach_time = scale(h.reach_time, f);
    h.confirm_time = scale(h.confirm_time, f);
    h.place_time = scale(h.place_time, f);
    h.return_time = scale(h.return_time, f);
    let mut shift = |p: f64| (p + v.probability_spread * rng.random_range(-1.0..=1.0)).clamp(0.0, 1.0);
    h.p_comply_red = shift(h.p_comply_red);
    h.p_notice_motion = shift(h.p_notice_motion);
    h.p_zone_check = shift(h.p_zone_check);
    h.p_heed_zone_highlight = shift(h.p_heed_zone_highlight);
    s.condition = condition;
    s.master_seed = pseed;
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub participant_id: u32,
    pub condition: String,
    pub order_index: u32,
    pub completion_s: f64,
    pub picking_errors: u32,
    pub placing_errors: u32,
    pub estops: u32,
    pub accuracy: f64,
}

impl ResultRow {
    pub fn condition(&self) -> Result<Condition, ExperimentError> {
        Condition::from_name(&self.condition).ok_or_else(|| ExperimentError::UnknownCondition(self.condition.clone()))
    }

    fn from_metrics(pid: u32, condition: Condition, order_index: u32, m: &RunMetrics) -> Self {
        ResultRow {
            participant_id: pid,
            condition: condition.name().to_string(),
            order_index,
            completion_s: m.completion_time,
            picking_errors: m.picking_errors,
            placing_errors: m.placing_errors,
            estops: m.estop_count,
            accuracy: m.predictor_accuracy,
        }
    }
}

/// One row per participant and condition, plus `# key: value` metadata
/// lines at the top of the CSV file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultsTable {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), ExperimentError> {
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}: {v}")?;
        }
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        if self.rows.is_empty() {
            out.write_record([
                "participant_id",
                "condition",
                "order_index",
                "completion_s",
                "picking_errors",
                "placing_errors",
                "estops",
                "accuracy",
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<ResultsTable, ExperimentError> {
        let mut text = String::new();
        let mut r = r;
        r.read_to_string(&mut text)?;
        let metadata = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .filter_map(|l| l.trim_start_matches('#').trim().split_once(": "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let rows = reader.deserialize().collect::<Result<Vec<ResultRow>, _>>()?;
        Ok(ResultsTable { metadata, rows })
    }

    /// Values of one metric for one condition, ordered by participant.
    pub fn metric(&self, condition: Condition, metric: Metric) -> Vec<f64> {
        let mut rows: Vec<&ResultRow> =
            self.rows.iter().filter(|r| r.condition == condition.name()).collect();
        rows.sort_by_key(|r| r.participant_id);
        rows.iter().map(|r| metric.of(r)).collect()
    }

    pub fn conditions(&self) -> Vec<Condition> {
        Condition::ALL.into_iter().filter(|c| self.rows.iter().any(|r| r.condition == c.name())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CompletionS,
    PickingErrors,
    PlacingErrors,
    Estops,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::CompletionS, Metric::PickingErrors, Metric::PlacingErrors, Metric::Estops, Metric::Accuracy];

    pub fn name(self) -> &'static str {
        match self {
            Metric::CompletionS => "completion_s",
            Metric::PickingErrors => "picking_errors",
            Metric::PlacingErrors => "placing_errors",
            Metric::Estops => "estops",
            Metric::Accuracy => "accuracy",
        }
    }

    pub fn of(self, row: &ResultRow) -> f64 {
        match self {
            Metric::CompletionS => row.completion_s,
            Metric::PickingErrors => row.picking_errors as f64,
            Metric::PlacingErrors => row.placing_errors as f64,
            Metric::Estops => row.estops as f64,
            Metric::Accuracy => row.accuracy,
        }
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsTable, ExperimentError> {
    config.scenario.validate().map_err(|source| ExperimentError::Sim { participant: 0, condition: "-", source })?;
    let square = balanced_latin_square(Condition::ALL.len())?;
    let jobs: Vec<(u32, u32, Condition)> = (0..config.participants)
        .flat_map(|pid| {
            let order = &square[pid as usize % square.len()];
            order
                .iter()
                .enumerate()
                .map(move |(pos, &c)| (pid, pos as u32, Condition::ALL[c]))
                .collect::<Vec<_>>()
        })
        .collect();
    let one = |&(pid, pos, condition): &(u32, u32, Condition)| {
        let scenario = participant_scenario(config, pid, condition);
        run(&scenario)
            .map(|(m, _)| ResultRow::from_metrics(pid, condition, pos, &m))
            .map_err(|source| ExperimentError::Sim { participant: pid, condition: condition.name(), source })
    };
    let rows = if config.parallel {
        jobs.par_iter().map(one).collect::<Result<Vec<_>, _>>()?
    } else {
        jobs.iter().map(one).collect::<Result<Vec<_>, _>>()?
    };
    let metadata = vec![
        ("generator".to_string(), format!("jointaction {}", env!("CARGO_PKG_VERSION"))),
        ("seed".to_string(), config.seed.to_string()),
        ("participants".to_string(), config.participants.to_string()),
        ("config_digest".to_string(), config.digest()),
    ];
    Ok(ResultsTable { metadata, rows })
}

/// Sample mean and standard deviation (n - 1 denominator).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: Metric,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MetricSummary {
    /// `mean±sd` with two decimals, e.g. `0.19±0.39`.
    pub fn display(&self) -> String {
        format!("{:.2}±{:.2}", self.mean, self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub metrics: Vec<MetricSummary>,
}

impl ConditionSummary {
    pub fn get(&self, metric: Metric) -> &MetricSummary {
        self.metrics.iter().find(|m| m.metric == metric).expect("every metric is summarized")
    }
}

pub fn summarize(table: &ResultsTable) -> Vec<ConditionSummary> {
    table
        .conditions()
        .into_iter()
        .map(|c| ConditionSummary {
            condition: c.name().to_string(),
            metrics: Metric::ALL
                .into_iter()
                .map(|metric| {
                    let xs = table.metric(c, metric);
                    let (mean, sd) = mean_sd(&xs);
                    MetricSummary { metric, mean, sd, n: xs.len() }
                })
                .collect(),
        })
        .collect()
}

/// Mean predictor accuracy under increasing gaze noise, in the full condition.
pub fn accuracy_sweep(
    base: &Scenario,
    noise_levels: &[f64],
    runs: u32,
    seed: u64,
) -> Result<Vec<(f64, f64)>, ExperimentError> {
    noise_levels
        .iter()
        .map(|&noise| {
            let accs = (0..runs)
                .into_par_iter()
                .map(|i| {
                    let mut s = base.clone();
                    s.condition = Condition::FULL;
                    s.human.gaze_noise = noise;
                    s.master_seed = sub_seed(seed, i as u64);
                    run(&s)
                        .map(|(m, _)| m.predictor_accuracy)
                        .map_err(|source| ExperimentError::Sim { participant: i, condition: "both", source })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok((noise, mean_sd(&accs).0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_of_four() {
        assert_eq!(
            balanced_latin_square(4).unwrap(),
            vec![vec![0, 1, 3, 2], vec![1, 2, 0, 3], vec![2, 3, 1, 0], vec![3, 0, 2, 1]]
        );
        assert!(balanced_latin_square(0).is_err());
        assert_eq!(balanced_latin_square(1).unwrap(), vec![vec![0], vec![0]]);
    }

    #[test]
    fn summary_format() {
        let s = MetricSummary { metric: Metric::PickingErrors, mean: 0.1892, sd: 0.3946, n: 37 };
        assert_eq!(s.display(), "0.19±0.39");
    }

    #[test]
    fn sample_sd() {
        let (m, sd) = mean_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((sd - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_keeps_metadata() {
        let table = ResultsTable {
            metadata: vec![("seed".into(), "3".into())],
            rows: vec![ResultRow {
                participant_id: 0,
                condition: "both".into(),
                order_index: 2,
                completion_s: 181.5,
                picking_errors: 0,
                placing_errors: 1,
                estops: 1,
                accuracy: 0.75,
            }],
        };
        let text = table.to_csv_string();
        assert!(text.starts_with("# seed: 3\nparticipant_id,condition,order_index,completion_s,"));
        assert_eq!(ResultsTable::read_csv(text.as_bytes()).unwrap(), table);
    }
}
