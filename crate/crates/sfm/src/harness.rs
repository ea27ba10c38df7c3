//! Shared plumbing for experiments and the CLI: random instance families,
//! run summaries, trial amplification, and trace output.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::oracle::{
    make_concave_cardinality_instance, make_cut_instance, make_grid_instance, parse_instance,
    OracleError, SubmodularInstance,
};
use crate::sgd::{RoundedPoint, SolveResult, TraceRow};

/// One solver run in a machine-readable form. Sets and grid points are
/// reported 1-based to match the instance file format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: String,
    pub n: usize,
    pub k: u32,
    pub eps: f64,
    pub seed: u64,
    #[serde(rename = "T")]
    pub iterations: u64,
    pub oracle_calls: u64,
    pub trace_calls: u64,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub set: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    pub truncated: bool,
    pub wall_ms: u64,
}

impl RunSummary {
    pub fn from_solve(
        algorithm: &str,
        n: usize,
        k: u32,
        eps: f64,
        seed: u64,
        res: &SolveResult,
        wall_ms: u64,
    ) -> Self {
        let (set, levels, point) = match &res.rounded {
            RoundedPoint::Set(s) => (Some(s.iter().map(|&i| i + 1).collect()), None, None),
            RoundedPoint::Grid(l) => (None, Some(l.clone()), None),
            RoundedPoint::Point(p) => (None, None, Some(p.clone())),
        };
        RunSummary {
            algorithm: algorithm.to_string(),
            n,
            k,
            eps,
            seed,
            iterations: res.iterations,
            oracle_calls: res.oracle_calls,
            trace_calls: res.trace_calls,
            value: res.value,
            set,
            levels,
            point,
            truncated: res.truncated,
            wall_ms,
        }
    }
}

/// Random s–t-free cut function: each unordered pair gets an edge with
/// probability `density`, weights uniform in (0, 1], then all weights are
/// divided by the max cut degree bound so values stay within [−1, 1].
pub fn family_cut(n: usize, density: f64, seed: u64) -> SubmodularInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            if rng.gen_bool(density) {
                edges.push((i, j, rng.gen_range(0.0..1.0) + f64::EPSILON));
            }
        }
    }
    if edges.is_empty() {
        let j = if n > 1 { 1 } else { 0 };
        edges.push((0, j, 1.0));
    }
    let total: f64 = edges.iter().map(|e| e.2).sum();
    for e in &mut edges {
        e.2 /= total;
    }
    make_cut_instance(n, &edges).expect("generated cut instance is valid")
}

/// Cut function with small positive integer weights, returned together with
/// the exact bound M = max_S |f(S)| (at most the total weight). Useful where
/// an integer-valued oracle with known range is required.
pub fn family_cut_integer(n: usize, density: f64, max_w: u32, seed: u64) -> (SubmodularInstance, f64) {
    assert!(max_w >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for i in 0..n as u32 {
        for j in (i + 1)..n as u32 {
            if rng.gen_bool(density) {
                edges.push((i, j, rng.gen_range(1..=max_w) as f64));
            }
        }
    }
    if edges.is_empty() {
        let j = if n > 1 { 1 } else { 0 };
        edges.push((0, j, 1.0));
    }
    let m: f64 = edges.iter().map(|e| e.2).sum();
    let inst = make_cut_instance(n, &edges).expect("generated cut instance is valid");
    (inst, m)
}

/// Concave-of-cardinality family h(j) = a·sqrt(j) − b·j with a drawn in
/// [0.5, 1] and b tuned so the curve dips below zero, then normalized to
/// max |h| = 1.
pub fn family_ccard(n: usize, seed: u64) -> SubmodularInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: f64 = rng.gen_range(0.5..1.0);
    // Root at roughly 60–90% of n, so the minimum sits strictly inside.
    let root = rng.gen_range(0.6..0.9) * n as f64;
    let b = a / root.sqrt();
    let mut h: Vec<f64> = (0..=n).map(|j| a * (j as f64).sqrt() - b * j as f64).collect();
    let maxabs = h.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
    for v in &mut h {
        *v /= maxabs;
    }
    make_concave_cardinality_instance(n, &h).expect("generated curve is concave")
}

/// Coverage-minus-modular family, fully tabulated (k = 2): ground set items
/// each cover a random subset of `m` targets with unit gain, minus a random
/// per-item cost. Coverage is submodular and the modular part keeps the
/// minimizer nontrivial. Values are normalized to max |f| = 1.
pub fn family_coverage(n: usize, seed: u64) -> SubmodularInstance {
    assert!(n <= 20, "tabulated family needs 2^n values");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = (2 * n).max(4);
    let covers: Vec<u32> = (0..n)
        .map(|_| {
            let mut mask = 0u32;
            for t in 0..m {
                if rng.gen_bool(2.0_f64.min(m as f64 / 2.0) / m as f64) {
                    mask |= 1 << t;
                }
            }
            mask
        })
        .collect();
    let costs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut values = Vec::with_capacity(1usize << n);
    for mask in 0..(1u32 << n) {
        let mut covered = 0u32;
        let mut cost = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                covered |= covers[i];
                cost += costs[i];
            }
        }
        values.push(covered.count_ones() as f64 - cost);
    }
    let maxabs = values.iter().fold(0.0f64, |mx, v| mx.max(v.abs())).max(1e-9);
    for v in &mut values {
        *v /= maxabs;
    }
    make_grid_instance(n, 2, &values).expect("tabulated family is valid")
}

/// Planted sparse-minimizer family: f(S) = min(|S \ D|, cap) − |S ∩ D| for a
/// random hidden set D of the requested size. Integer-valued, |f| ≤ max(cap,
/// |D|), unique minimizer D with value −|D|. Returns (instance, D sorted,
/// M bound).
pub fn family_planted(n: usize, planted: usize, seed: u64) -> (SubmodularInstance, Vec<u32>, f64) {
    assert!(planted <= n && n <= 24);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items: Vec<u32> = (0..n as u32).collect();
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
    let mut d: Vec<u32> = items[..planted].to_vec();
    d.sort_unstable();
    let cap = 2u32.max(planted as u32);
    // Table index puts item 0 in the highest binary digit.
    let dmask: u32 = d.iter().map(|&i| 1u32 << (n as u32 - 1 - i)).sum();
    let mut values = Vec::with_capacity(1usize << n);
    for mask in 0..(1u32 << n) {
        let inside = (mask & dmask).count_ones();
        let outside = (mask & !dmask & ((1 << n) - 1)).count_ones().min(cap);
        values.push(outside as f64 - inside as f64);
    }
    let m = cap.max(planted as u32) as f64;
    let inst = make_grid_instance(n, 2, &values).expect("planted family is valid");
    (inst, d, m)
}

/// Random integer-valued lattice-submodular grid family: a separable
/// concave term per coordinate plus a concave function of the total level.
/// Tabulated, so n and k must stay small (k^n ≤ 2^20).
pub fn family_grid(n: usize, k: u32, seed: u64) -> SubmodularInstance {
    let points = (k as u64).checked_pow(n as u32).expect("k^n overflow");
    assert!(points <= 1 << 20, "tabulated grid family too large");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Per-coordinate concave tables: random nonincreasing integer increments.
    let mut coord_tables: Vec<Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut incr: Vec<i64> = (0..k as usize).map(|_| rng.gen_range(-2..=2)).collect();
        incr.sort_unstable_by(|a, b| b.cmp(a));
        let mut table = vec![0.0f64];
        for d in incr {
            table.push(table.last().unwrap() + d as f64);
        }
        coord_tables.push(table);
    }
    // Concave-of-sum term: nonincreasing increments over total level.
    let max_total = n as u64 * k as u64;
    let mut sum_incr: Vec<i64> = (0..max_total).map(|_| rng.gen_range(-1..=1)).collect();
    sum_incr.sort_unstable_by(|a, b| b.cmp(a));
    let mut sum_table = vec![0.0f64];
    for d in sum_incr {
        sum_table.push(sum_table.last().unwrap() + d as f64);
    }
    let mut values = Vec::with_capacity(points as usize);
    let mut levels = vec![1u32; n];
    loop {
        let mut v = 0.0;
        let mut total = 0u64;
        for (i, &l) in levels.iter().enumerate() {
            v += coord_tables[i][l as usize];
            total += l as u64;
        }
        v += sum_table[total as usize];
        values.push(v);
        // Odometer, last coordinate fastest (matches tabulated layout).
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            if levels[pos] < k {
                levels[pos] += 1;
                for l in &mut levels[pos + 1..] {
                    *l = 1;
                }
                break;
            }
        }
        if levels.iter().all(|&l| l == k) && values.len() == points as usize {
            break;
        }
    }
    make_grid_instance(n, k, &values).expect("generated grid family is valid")
}

/// Run `trials` independent solves (seeds base_seed, base_seed+1, …), keep
/// the best-value run, and report the summed oracle cost of the whole batch.
/// Median-of-means style amplification: each run lands within the target gap
/// with constant probability, so the best of Θ(log(1/δ)) runs succeeds with
/// probability 1 − δ.
pub struct Amplified {
    pub best: SolveResult,
    pub best_seed: u64,
    pub total_calls: u64,
    pub total_trace_calls: u64,
}

pub fn amplify(
    trials: u64,
    base_seed: u64,
    mut runner: impl FnMut(u64) -> Result<SolveResult, OracleError>,
) -> Result<Amplified, OracleError> {
    assert!(trials >= 1);
    let mut best: Option<(SolveResult, u64)> = None;
    let mut total_calls = 0;
    let mut total_trace = 0;
    for t in 0..trials {
        let seed = base_seed + t;
        let res = runner(seed)?;
        total_calls += res.oracle_calls + res.setup_calls;
        total_trace += res.trace_calls;
        let better = match &best {
            None => true,
            Some((b, _)) => res.value < b.value,
        };
        if better {
            best = Some((res, seed));
        }
    }
    let (best, best_seed) = best.unwrap();
    Ok(Amplified {
        best,
        best_seed,
        total_calls,
        total_trace_calls: total_trace,
    })
}

/// Write a solve trace as CSV (`iter,calls,value`).
pub fn write_trace_csv(path: &Path, rows: &[TraceRow]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iter,calls,value")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.iter, r.calls, r.value)?;
    }
    out.flush()
}

/// Read an instance description from a text file.
pub fn load_instance(path: &Path) -> Result<SubmodularInstance, OracleError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| OracleError::InvalidInstance(format!("cannot read {}: {e}", path.display())))?;
    parse_instance(&text)
}
