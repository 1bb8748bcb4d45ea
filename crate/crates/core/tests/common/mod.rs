//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use jointaction::engine::EngineObserver;
use jointaction::gaze::{GazeSample, PredictedIntent};
use jointaction::model::{BlockId, BlockState, EventKind, GraspOutcome, Seconds};
use jointaction::sim::SimObserver;
use jointaction::Trace;
use jointaction::{ScenarioConfig, WorkspaceState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TICK: f64 = 1.0 / 30.0;

// ---- dwell ----

/// Brute-force sliding window: at each sample, walk back over the run of
/// identical targets; fire when the run first spans the threshold.
pub fn dwell_oracle(samples: &[GazeSample], dwell: f64) -> Vec<PredictedIntent> {
    let mut out = Vec::new();
    for i in 0..samples.len() {
        let Some(b) = samples[i].block else { continue };
        let mut s = i;
        while s > 0 && samples[s - 1].block == Some(b) {
            s -= 1;
        }
        let spans = |k: usize| samples[k].t - samples[s].t >= dwell - 1e-9;
        if spans(i) && (i == s || !spans(i - 1)) {
            out.push(PredictedIntent { block: b, t_fired: samples[i].t });
        }
    }
    out
}

/// Random gaze stream: runs of random length on a few blocks or off-target,
/// on the 30 Hz grid or with jittered (still increasing) timestamps.
pub fn random_stream(rng: &mut ChaCha8Rng) -> Vec<GazeSample> {
    let jitter = rng.random_bool(0.3);
    let n_blocks = rng.random_range(1..=4u32);
    let mut samples = Vec::new();
    let mut k = 0u64;
    let mut t = 0.0;
    let target_len = rng.random_range(1..400);
    while samples.len() < target_len {
        let block = if rng.random_bool(0.25) { None } else { Some(BlockId(rng.random_range(0..n_blocks))) };
        let run = rng.random_range(1..45);
        for _ in 0..run {
            t = if jitter { t + rng.random_range(0.02..0.05) } else { k as f64 / 30.0 };
            k += 1;
            samples.push(GazeSample::new(t, block));
        }
    }
    samples
}

// ---- distribution tails by quadrature ----

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    // split into panels so narrow peaks are not missed
    let panels = 64;
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let (x0, x1) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (f0, fm, f1) = (f(x0), f(0.5 * (x0 + x1)), f(x1));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson(f, x0, x1, f0, fm, f1, whole, 1e-14, 40)
        })
        .sum()
}

/// ∫_lo^∞ g, mapping [lo, ∞) onto [0, 1) with x = lo + s/(1-s).
fn tail_integral(g: &dyn Fn(f64) -> f64, lo: f64) -> f64 {
    let h = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let x = lo + s / (1.0 - s);
        g(x) / ((1.0 - s) * (1.0 - s))
    };
    integrate(&h, 0.0, 1.0)
}

/// Two-sided t tail as a ratio of integrals of the unnormalized density.
pub fn t_two_sided_oracle(t: f64, dof: f64) -> f64 {
    let g = |x: f64| (1.0 + x * x / dof).powf(-(dof + 1.0) / 2.0);
    tail_integral(&g, t.abs()) / tail_integral(&g, 0.0)
}

/// Upper F tail, integrating in u = sqrt(x) to remove the singularity at 0.
pub fn f_sf_oracle(f: f64, d1: f64, d2: f64) -> f64 {
    let g = |u: f64| {
        // dx = 2u du and x^(d1/2 - 1) = u^(d1 - 2)
        2.0 * u.powf(d1 - 1.0) * (d2 + d1 * u * u).powf(-(d1 + d2) / 2.0)
    };
    tail_integral(&g, f.sqrt()) / tail_integral(&g, 0.0)
}

// ---- rank tests by enumeration ----

fn mid_rank(xs: &[f64], i: usize) -> f64 {
    let less = xs.iter().filter(|x| **x < xs[i]).count() as f64;
    let equal = xs.iter().filter(|x| **x == xs[i]).count() as f64;
    less + (equal + 1.0) / 2.0
}

/// Exact two-sided signed-rank p over all 2^n sign assignments.
pub fn signed_rank_p_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks: Vec<f64> = (0..abs.len()).map(|i| mid_rank(&abs, i)).collect();
    let total: f64 = ranks.iter().sum();
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let dev = (observed - total / 2.0).abs();
    let n = d.len();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if (w - total / 2.0).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Exact two-sided Mann-Whitney p over every split of the pooled sample.
pub fn mann_whitney_p_enumerated(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (n1, n) = (a.len(), pooled.len());
    let u_of = |mask: u64| {
        let mut u = 0.0;
        for i in (0..n).filter(|i| mask >> i & 1 == 1) {
            for j in (0..n).filter(|j| mask >> j & 1 == 0) {
                u += if pooled[i] > pooled[j] { 1.0 } else if pooled[i] == pooled[j] { 0.5 } else { 0.0 };
            }
        }
        u
    };
    let centre = (a.len() * b.len()) as f64 / 2.0;
    let dev = (u_of((1u64 << n1) - 1) - centre).abs();
    let (mut extreme, mut all) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        all += 1;
        if (u_of(mask) - centre).abs() >= dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / all as f64
}

/// Small integer-valued samples so ties are common.
pub fn tied_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0..6) as f64).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---- Latin squares ----

/// Checks row/column permutations and adjacency balance. Returns problems.
pub fn latin_square_problems(square: &[Vec<usize>], n: usize) -> Vec<String> {
    let mut problems = Vec::new();
    let reps = if n.is_multiple_of(2) { 1 } else { 2 };
    if square.len() != n * reps {
        problems.push(format!("n={n}: {} rows, expected {}", square.len(), n * reps));
        return problems;
    }
    for (r, row) in square.iter().enumerate() {
        let mut seen = vec![0; n];
        for &c in row {
            if c < n {
                seen[c] += 1;
            }
        }
        if row.len() != n || seen.iter().any(|&s| s != 1) {
            problems.push(format!("n={n}: row {r} is not a permutation"));
        }
    }
    for col in 0..n {
        let mut seen = vec![0; n];
        for row in square {
            seen[row[col]] += 1;
        }
        if seen.iter().any(|&s| s != reps) {
            problems.push(format!("n={n}: column {col} unbalanced"));
        }
    }
    let mut adjacent = vec![vec![0; n]; n];
    for row in square {
        for w in row.windows(2) {
            adjacent[w[0]][w[1]] += 1;
        }
    }
    for a in 0..n {
        for b in 0..n {
            if a != b && adjacent[a][b] != reps {
                problems.push(format!("n={n}: pair ({a},{b}) adjacent {} times", adjacent[a][b]));
            }
        }
    }
    problems
}

// ---- protocol properties over a trace ----

#[derive(Default)]
pub struct CommitLog {
    pub commits: Vec<(Seconds, BlockId, Option<BlockId>)>,
    pub highlights_seen: usize,
}

impl EngineObserver for CommitLog {
    fn on_commit(&mut self, t: Seconds, block: BlockId, latched: Option<BlockId>) {
        self.commits.push((t, block, latched));
    }
}

impl SimObserver for CommitLog {
    fn on_observation(&mut self, _t: Seconds, obs: &jointaction::human::HumanObservation<'_>) {
        if obs.visible_highlight.is_some() {
            self.highlights_seen += 1;
        }
    }
}

/// (a) announce-to-commit timing, (c) commitment stability and (d) block
/// conservation, checked on the event stream alone.
pub fn protocol_problems(trace: &Trace, config: &ScenarioConfig, announce: f64) -> Vec<String> {
    let mut problems = Vec::new();
    let mut announced: Option<(BlockId, jointaction::ZoneId, f64)> = None;
    let mut committed: Option<BlockId> = None;
    let mut ws = WorkspaceState::new(config).expect("valid config");
    let n = ws.blocks.len();
    for (i, e) in trace.events.iter().enumerate() {
        match &e.kind {
            EventKind::Announce(h) => {
                if let Some(c) = committed {
                    problems.push(format!("event {i}: announce of {} while committed to {c}", h.block));
                }
                announced = Some((h.block, h.zone, e.t));
            }
            EventKind::Commit(h) => {
                match announced {
                    Some((b, z, t0)) if b == h.block && z == h.zone => {
                        let dt = e.t - t0;
                        if (dt - announce).abs() > TICK + 1e-9 {
                            problems.push(format!("event {i}: commit {dt:.4} s after announce"));
                        }
                    }
                    _ => problems.push(format!("event {i}: commit of {} without matching announce", h.block)),
                }
                if let Some(c) = committed {
                    problems.push(format!("event {i}: commit of {} while committed to {c}", h.block));
                }
                announced = None;
                committed = Some(h.block);
            }
            EventKind::PickStart { block } | EventKind::PickDone { block } => {
                if committed.is_some_and(|c| c != *block) {
                    problems.push(format!("event {i}: robot acted on {block} while committed to {committed:?}"));
                }
                if matches!(e.kind, EventKind::PickDone { .. }) {
                    committed = None;
                }
            }
            EventKind::GraspCheck { block, outcome } => {
                if committed != Some(*block) {
                    problems.push(format!("event {i}: grasp check on {block} while committed to {committed:?}"));
                }
                if *outcome == GraspOutcome::BlockMissing {
                    committed = None;
                }
            }
            EventKind::Reset { .. } => {
                announced = None;
                committed = None;
            }
            _ => {}
        }
        if let Err(err) = ws.apply_event_mut(e) {
            problems.push(format!("event {i}: replay failed: {err}"));
            break;
        }
        let (at_start, held, placed) = ws.census();
        if at_start + held + placed != n || held > 2 {
            problems.push(format!("event {i}: census {at_start}+{held}+{placed} != {n}"));
        }
        if let EventKind::Reset { returned } = &e.kind {
            if held != 0 || returned.iter().any(|b| !matches!(ws.block(*b).map(|b| b.state), Some(BlockState::AtStart))) {
                problems.push(format!("event {i}: reset left blocks held"));
            }
        }
    }
    problems
}
