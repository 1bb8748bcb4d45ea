//! Hypothesis tests for the experiment analysis: one-way ANOVA, paired
//! t-test, Wilcoxon signed-rank, Mann-Whitney U, Anderson-Darling normality
//! and Bonferroni adjustment.
//!
//! Rank tests use mid-ranks for ties. Internally ranks are doubled so that
//! mid-ranks are integers and exact null distributions can be built by
//! counting.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use thiserror::Error;

use crate::experiment::{Metric, ResultsTable};
use crate::model::Condition;

/// Largest sample size for which the rank tests use exact null distributions.
pub const EXACT_LIMIT: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dof {
    One(f64),
    Two(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<Dof>,
    pub p_value: f64,
    pub method: String,
}

impl TestResult {
    fn new(statistic: f64, dof: Option<Dof>, p_value: f64, method: &str) -> Self {
        TestResult { statistic, dof, p_value: p_value.clamp(0.0, 1.0), method: method.to_string() }
    }
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::Input("non-finite value".into()))
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Upper tail of the F distribution.
pub fn f_sf(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    FisherSnedecor::new(d1, d2).expect("positive dof").sf(f)
}

/// Two-sided tail of Student's t distribution.
pub fn t_two_sided(t: f64, dof: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Upper tail of the standard normal distribution.
pub fn normal_sf(z: f64) -> f64 {
    Normal::standard().sf(z)
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::Input("need at least two groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(StatsError::Input("each group needs at least two values".into()));
    }
    for g in groups {
        check_finite(g)?;
    }
    let k = groups.len() as f64;
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let ssb: f64 = groups.iter().map(|g| g.len() as f64 * (mean(g) - grand).powi(2)).sum();
    let ssw: f64 = groups
        .iter()
        .map(|g| {
            let m = mean(g);
            g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        })
        .sum();
    if ssw == 0.0 {
        return Err(StatsError::Degenerate("zero within-group variance".into()));
    }
    let (d1, d2) = (k - 1.0, n as f64 - k);
    let f = (ssb / d1) / (ssw / d2);
    Ok(TestResult::new(f, Some(Dof::Two(d1, d2)), f_sf(f, d1, d2), "one-way ANOVA"))
}

pub fn t_test_paired(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Input(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(StatsError::Input("need at least two pairs".into()));
    }
    check_finite(a)?;
    check_finite(b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let var = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Err(StatsError::Degenerate("differences have zero variance".into()));
    }
    let t = m / (var / n).sqrt();
    let dof = n - 1.0;
    Ok(TestResult::new(t, Some(Dof::One(dof)), t_two_sided(t, dof), "paired t-test"))
}

/// Doubled mid-ranks of `xs` (1-based ranks times two), plus the tie group sizes.
pub fn doubled_ranks(xs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0u64; xs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j share ranks i+1..=j+1; doubled mid-rank = i + j + 2
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

/// Rank sums (W+, W-) of the nonzero differences `a - b`.
pub fn signed_rank_sums(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (r, _) = doubled_ranks(&abs);
    let plus: u64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let total: u64 = r.iter().sum();
    (plus as f64 / 2.0, (total - plus) as f64 / 2.0)
}

/// Number of subsets of `weights` with each possible sum.
fn subset_sum_counts(weights: &[u64]) -> Vec<f64> {
    let total: u64 = weights.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &w in weights {
        let w = w as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + w] += counts[s];
            }
        }
        reach += w;
    }
    counts
}

/// How a rank test computes its p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PMethod {
    /// Exact up to [`EXACT_LIMIT`] observations, normal approximation above.
    #[default]
    Auto,
    Exact,
    Normal,
}

/// Wilcoxon signed-rank test on paired samples. The statistic is
/// min(W+, W-); zero differences are dropped.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_with(a, b, PMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(a: &[f64], b: &[f64], method: PMethod) -> Result<TestResult, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::Input(format!("length mismatch: {} vs {}", a.len(), b.len())));
    }
    check_finite(a)?;
    check_finite(b)?;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::Degenerate("all differences are zero".into()));
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let (r, ties) = doubled_ranks(&abs);
    let total: u64 = r.iter().sum();
    let plus: u64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w = plus.min(total - plus) as f64 / 2.0;

    if method == PMethod::Exact || (method == PMethod::Auto && n <= EXACT_LIMIT) {
        // P(|2W+ - T| >= |observed|) under random signs, in doubled units
        let counts = subset_sum_counts(&r);
        let obs = (2 * plus as i64 - total as i64).abs();
        let extreme: f64 = counts
            .iter()
            .enumerate()
            .filter(|(s, _)| (2 * *s as i64 - total as i64).abs() >= obs)
            .map(|(_, c)| c)
            .sum();
        let p = extreme / 2f64.powi(n as i32);
        return Ok(TestResult::new(w, None, p, "Wilcoxon signed-rank (exact)"));
    }
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
    let p = normal_two_sided(plus as f64 / 2.0 - mu, var);
    Ok(TestResult::new(w, None, p, "Wilcoxon signed-rank (normal approximation)"))
}

/// Two-sided p for a centred statistic with continuity correction.
fn normal_two_sided(centred: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return 1.0;
    }
    let z = (centred.abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * normal_sf(z)).min(1.0)
}

/// Mann-Whitney U of `a` against `b`: pairs with a > b, ties counting half.
pub fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut u = 0.0;
    for x in a {
        for y in b {
            if x > y {
                u += 1.0;
            } else if x == y {
                u += 0.5;
            }
        }
    }
    u
}

/// Mann-Whitney U test on independent samples. The statistic is U for `a`.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    mann_whitney_u_with(a, b, PMethod::Auto)
}

pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: PMethod) -> Result<TestResult, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Input("both samples must be non-empty".into()));
    }
    check_finite(a)?;
    check_finite(b)?;
    let (n1, n2) = (a.len(), b.len());
    let u = u_statistic(a, b);
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (r, ties) = doubled_ranks(&pooled);
    let n = n1 + n2;

    if method == PMethod::Exact || (method == PMethod::Auto && n1.max(n2) <= EXACT_LIMIT) {
        // Distribution of the doubled rank sum of a random n1-subset.
        let total: u64 = r.iter().sum();
        let mut dp = vec![vec![0.0f64; total as usize + 1]; n1 + 1];
        dp[0][0] = 1.0;
        for &w in &r {
            for k in (0..n1).rev() {
                for s in (0..=(total - w) as usize).rev() {
                    let c = dp[k][s];
                    if c > 0.0 {
                        dp[k + 1][s + w as usize] += c;
                    }
                }
            }
        }
        let expected = (n1 * (n + 1)) as i64; // doubled mean rank sum
        let observed: u64 = r[..n1].iter().sum();
        let obs = (observed as i64 - expected).abs();
        let all: f64 = dp[n1].iter().sum();
        let extreme: f64 = dp[n1]
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as i64 - expected).abs() >= obs)
            .map(|(_, c)| c)
            .sum();
        return Ok(TestResult::new(u, None, extreme / all, "Mann-Whitney U (exact)"));
    }
    let (f1, f2, nf) = (n1 as f64, n2 as f64, n as f64);
    let var = f1 * f2 / 12.0 * ((nf + 1.0) - tie_term(&ties) / (nf * (nf - 1.0)));
    let p = normal_two_sided(u - f1 * f2 / 2.0, var);
    Ok(TestResult::new(u, None, p, "Mann-Whitney U (normal approximation)"))
}

/// Anderson-Darling test for normality with estimated mean and variance.
/// The statistic is the uncorrected A²; the p-value uses the small-sample
/// corrected A² with D'Agostino's piecewise approximation.
pub fn anderson_darling_normality(x: &[f64]) -> Result<TestResult, StatsError> {
    if x.len() < 5 {
        return Err(StatsError::Input(format!("need at least 5 values, got {}", x.len())));
    }
    check_finite(x)?;
    let n = x.len() as f64;
    let m = mean(x);
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(StatsError::Input("zero variance".into()));
    }
    let mut z: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let len = z.len();
    let s: f64 = (0..len)
        .map(|i| {
            let k = (2 * i + 1) as f64;
            k * (normal_cdf(z[i]).ln() + normal_sf(z[len - 1 - i]).ln())
        })
        .sum();
    let a2 = -n - s / n;
    let a = a2 * (1.0 + 0.75 / n + 2.25 / (n * n));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    Ok(TestResult::new(a2, None, p, "Anderson-Darling normality"))
}

pub fn bonferroni_adjust(p_values: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    if m < p_values.len() {
        return Err(StatsError::Input(format!("m = {m} is less than the {} p-values", p_values.len())));
    }
    p_values
        .iter()
        .map(|&p| {
            if (0.0..=1.0).contains(&p) {
                Ok((p * m as f64).min(1.0))
            } else {
                Err(StatsError::Input(format!("p-value {p} outside [0, 1]")))
            }
        })
        .collect()
}

/// Which rank test the post-hoc comparisons use alongside the paired t-test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankTest {
    /// Paired samples, matching the within-subjects design.
    #[default]
    SignedRank,
    /// Treats conditions as independent samples.
    RankSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    #[serde(flatten)]
    pub result: Option<TestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_adjusted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Outcome {
    fn from(r: Result<TestResult, StatsError>) -> Self {
        match r {
            Ok(t) => Outcome { result: Some(t), p_adjusted: None, error: None },
            Err(e) => Outcome { result: None, p_adjusted: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub paired_t: Outcome,
    pub rank: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAnalysis {
    pub metric: Metric,
    pub normality: Vec<(String, Outcome)>,
    pub anova: Outcome,
    pub pairwise: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub rank_test: RankTest,
    pub bonferroni_m: usize,
    pub note: String,
    pub metrics: Vec<MetricAnalysis>,
}

/// Per-metric one-way ANOVA across conditions, then every pairwise
/// comparison by paired t-test and the chosen rank test, Bonferroni-adjusted
/// over the number of pairs.
pub fn analyze(table: &ResultsTable, rank_test: RankTest) -> AnalysisReport {
    let conditions: Vec<Condition> = table.conditions();
    let pairs: Vec<(Condition, Condition)> = conditions
        .iter()
        .enumerate()
        .flat_map(|(i, a)| conditions[i + 1..].iter().map(move |b| (*a, *b)))
        .collect();
    let m = pairs.len();
    let metrics = Metric::ALL
        .into_iter()
        .map(|metric| {
            let groups: Vec<Vec<f64>> = conditions.iter().map(|c| table.metric(*c, metric)).collect();
            let normality = conditions
                .iter()
                .zip(&groups)
                .map(|(c, g)| (c.name().to_string(), Outcome::from(anderson_darling_normality(g))))
                .collect();
            let anova = Outcome::from(anova_oneway(&groups));
            let mut pairwise: Vec<Comparison> = pairs
                .iter()
                .map(|(a, b)| {
                    let (x, y) = (table.metric(*a, metric), table.metric(*b, metric));
                    let rank = match rank_test {
                        RankTest::SignedRank => wilcoxon_signed_rank(&x, &y),
                        RankTest::RankSum => mann_whitney_u(&x, &y),
                    };
                    Comparison {
                        a: a.name().to_string(),
                        b: b.name().to_string(),
                        paired_t: Outcome::from(t_test_paired(&x, &y)),
                        rank: Outcome::from(rank),
                    }
                })
                .collect();
            for c in &mut pairwise {
                for o in [&mut c.paired_t, &mut c.rank] {
                    if let Some(r) = &o.result {
                        o.p_adjusted = bonferroni_adjust(&[r.p_value], m).ok().map(|v| v[0]);
                    }
                }
            }
            MetricAnalysis { metric, normality, anova, pairwise }
        })
        .collect();
    let note = match rank_test {
        RankTest::SignedRank => "post-hoc rank test: Wilcoxon signed-rank (paired)",
        RankTest::RankSum => "post-hoc rank test: Mann-Whitney U (independent samples)",
    };
    AnalysisReport {
        rank_test,
        bonferroni_m: m,
        note: format!("{note}; ANOVA is one-way across conditions, treating them as independent groups"),
        metrics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anova_hand_case() {
        let r = anova_oneway(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(r.statistic, 8.0);
        assert_eq!(r.dof, Some(Dof::Two(1.0, 2.0)));
        let same = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(same.statistic, 0.0);
        assert_eq!(same.p_value, 1.0);
        assert!(matches!(anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]), Err(StatsError::Degenerate(_))));
    }

    #[test]
    fn paired_t_hand_case() {
        let r = t_test_paired(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r.statistic + 1.0).abs() < 1e-12);
        assert_eq!(r.dof, Some(Dof::One(2.0)));
        let zero = t_test_paired(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(zero.statistic, 0.0);
        assert!(t_test_paired(&[1.0, 2.0], &[1.0]).is_err());
        assert!(matches!(t_test_paired(&[2.0, 3.0], &[1.0, 2.0]), Err(StatsError::Degenerate(_))));
    }

    #[test]
    fn signed_rank_sums_hand_cases() {
        assert_eq!(signed_rank_sums(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]), (6.0, 0.0));
        assert_eq!(signed_rank_sums(&[1.0, 0.0], &[0.0, 1.0]), (1.5, 1.5));
        assert!(wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn u_hand_cases() {
        assert_eq!(mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap().statistic, 0.0);
        assert_eq!(mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().statistic, 4.5);
        assert_eq!(mann_whitney_u(&[7.0], &[7.0]).unwrap().statistic, 0.5);
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn doubled_ranks_with_ties() {
        let (r, ties) = doubled_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![7, 2, 7, 4]);
        assert_eq!(ties, vec![2]);
    }

    #[test]
    fn anderson_darling_preconditions() {
        assert!(anderson_darling_normality(&[1.0, 2.0, 3.0, 4.0]).is_err());
        assert!(anderson_darling_normality(&[2.0; 8]).is_err());
    }

    #[test]
    fn bonferroni_cases() {
        let v = bonferroni_adjust(&[0.01], 6).unwrap();
        assert!((v[0] - 0.06).abs() < 1e-15);
        assert_eq!(bonferroni_adjust(&[0.3], 5).unwrap(), vec![1.0]);
        assert_eq!(bonferroni_adjust(&[], 6).unwrap(), Vec::<f64>::new());
        assert!(bonferroni_adjust(&[1.2], 6).is_err());
        assert!(bonferroni_adjust(&[0.1, 0.2], 1).is_err());
    }
}
