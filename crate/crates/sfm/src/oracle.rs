//! Evaluation oracles for submodular functions.
//!
//! Every algorithm in this crate talks to a submodular function exclusively
//! through an [`OracleHandle`], which meters each evaluation, optionally
//! enforces a call budget, and normalizes values so the lattice bottom
//! evaluates to exactly 0. Points of the domain `[k]^n` are passed as level
//! vectors (`levels[i]` in `1..=k`); for plain set functions `k = 2` and level
//! 2 means "in the set".

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use std::cell::Cell;
use thiserror::Error;

/// Hard cap on the number of lattice points that brute-force routines will
/// enumerate.
pub const BRUTE_FORCE_CAP: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle budget of {budget} calls exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("point has {got} coordinates, instance has n = {expected}")]
    WrongArity { expected: usize, got: usize },
    #[error("coordinate {index} has level {level}, valid levels are 1..={k}")]
    LevelOutOfRange { index: usize, level: u32, k: u32 },
    #[error("domain too large to enumerate ({points} points, cap {cap})")]
    DomainTooLarge { points: u64, cap: u64 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("parse error at token {token}: {msg}")]
    Parse { token: usize, msg: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// The function payload of an instance. All kinds are submodular by
/// construction (validated where construction alone does not guarantee it).
#[derive(Clone)]
pub enum InstanceKind {
    /// Directed cut: f(S) = total weight of edges leaving S. Edges are stored
    /// 0-based as (tail, head, weight).
    Cut { edges: Vec<(u32, u32, f64)> },
    /// f(S) = h(|S|) for a table h(0..n) with nonincreasing increments.
    ConcaveCardinality { h: Vec<f64> },
    /// f(S) = h(w(S) * n / W), piecewise-linear h with knots at 0..n,
    /// nonnegative weights, W = total weight. Concave-of-modular.
    ConcaveModular { weights: Vec<f64>, table: Vec<f64> },
    /// Dense table over [k]^n in row-major order, last coordinate fastest.
    GridTabular { values: Vec<f64> },
    /// A continuous callback sampled at x/k; used by the discretization path.
    /// The counter tracks raw callback invocations.
    Continuous {
        f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        calls: Arc<AtomicU64>,
        /// Divide values by this to bring the range into [-1, 1].
        scale: f64,
    },
}

/// An evaluable submodular function over `[k]^n` plus its metadata. Immutable
/// after construction and cheap to share; all evaluation goes through
/// [`OracleHandle`] so the raw [`SubmodularInstance::value`] is reserved for
/// audits that must not count as oracle calls.
#[derive(Clone)]
pub struct SubmodularInstance {
    pub n: usize,
    pub k: u32,
    pub kind: InstanceKind,
}

impl SubmodularInstance {
    /// Raw, unmetered, unnormalized value. Panics on malformed points; the
    /// metered path validates first.
    pub fn value(&self, levels: &[u32]) -> f64 {
        debug_assert_eq!(levels.len(), self.n);
        match &self.kind {
            InstanceKind::Cut { edges } => {
                let mut total = 0.0;
                for &(u, v, w) in edges {
                    if levels[u as usize] >= 2 && levels[v as usize] < 2 {
                        total += w;
                    }
                }
                total
            }
            InstanceKind::ConcaveCardinality { h } => {
                let c = levels.iter().filter(|&&l| l >= 2).count();
                h[c]
            }
            InstanceKind::ConcaveModular { weights, table } => {
                let total: f64 = weights.iter().sum();
                if total == 0.0 {
                    return table[0];
                }
                let ws: f64 = levels
                    .iter()
                    .zip(weights)
                    .filter(|(&l, _)| l >= 2)
                    .map(|(_, &w)| w)
                    .sum();
                let t = ws * self.n as f64 / total;
                piecewise_linear(table, t)
            }
            InstanceKind::GridTabular { values } => {
                let mut idx = 0usize;
                for &l in levels {
                    idx = idx * self.k as usize + (l as usize - 1);
                }
                values[idx]
            }
            InstanceKind::Continuous { f, calls, scale } => {
                let k = self.k as f64;
                let x: Vec<f64> = levels.iter().map(|&l| l as f64 / k).collect();
                calls.fetch_add(1, Ordering::Relaxed);
                f(&x) / scale
            }
        }
    }

    pub fn domain_size(&self) -> Option<u64> {
        let mut total: u64 = 1;
        for _ in 0..self.n {
            total = total.checked_mul(self.k as u64)?;
        }
        Some(total)
    }

    fn validate_point(&self, levels: &[u32]) -> Result<(), OracleError> {
        if levels.len() != self.n {
            return Err(OracleError::WrongArity {
                expected: self.n,
                got: levels.len(),
            });
        }
        for (i, &l) in levels.iter().enumerate() {
            if l < 1 || l > self.k {
                return Err(OracleError::LevelOutOfRange {
                    index: i,
                    level: l,
                    k: self.k,
                });
            }
        }
        Ok(())
    }
}

/// Evaluate a piecewise-linear table with knots at integers 0..len-1.
fn piecewise_linear(table: &[f64], t: f64) -> f64 {
    let hi = (table.len() - 1) as f64;
    let t = t.clamp(0.0, hi);
    let j = (t.floor() as usize).min(table.len() - 2);
    let frac = t - j as f64;
    table[j] + frac * (table[j + 1] - table[j])
}

pub fn make_cut_instance(
    n: usize,
    edges: &[(u32, u32, f64)],
) -> Result<SubmodularInstance, OracleError> {
    for &(u, v, w) in edges {
        if u as usize >= n || v as usize >= n {
            return Err(OracleError::InvalidInstance(format!(
                "edge ({u}, {v}) out of range for n = {n}"
            )));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return Err(OracleError::InvalidInstance(format!(
                "edge ({u}, {v}) has invalid weight {w}"
            )));
        }
    }
    Ok(SubmodularInstance {
        n,
        k: 2,
        kind: InstanceKind::Cut {
            edges: edges.to_vec(),
        },
    })
}

pub fn make_concave_cardinality_instance(
    n: usize,
    h: &[f64],
) -> Result<SubmodularInstance, OracleError> {
    if h.len() != n + 1 {
        return Err(OracleError::InvalidInstance(format!(
            "cardinality table has {} entries, expected n+1 = {}",
            h.len(),
            n + 1
        )));
    }
    if h[0] != 0.0 {
        return Err(OracleError::InvalidInstance(format!(
            "cardinality table must start at 0, got {}",
            h[0]
        )));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::InvalidInstance(
            "cardinality table has non-finite entries".into(),
        ));
    }
    for j in 1..n {
        let prev = h[j] - h[j - 1];
        let next = h[j + 1] - h[j];
        if next > prev + 1e-12 {
            return Err(OracleError::InvalidInstance(format!(
                "increment h({})−h({}) = {} exceeds h({})−h({}) = {}; increments must be nonincreasing",
                j + 1,
                j,
                next,
                j,
                j - 1,
                prev
            )));
        }
    }
    Ok(SubmodularInstance {
        n,
        k: 2,
        kind: InstanceKind::ConcaveCardinality { h: h.to_vec() },
    })
}

pub fn make_concave_modular_instance(
    n: usize,
    weights: &[f64],
    table: &[f64],
) -> Result<SubmodularInstance, OracleError> {
    if weights.len() != n {
        return Err(OracleError::InvalidInstance(format!(
            "weight vector has {} entries, expected {}",
            weights.len(),
            n
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(OracleError::InvalidInstance(
            "weights must be finite and nonnegative".into(),
        ));
    }
    // The same concavity contract as the cardinality kind; the weighted sum is
    // mapped affinely onto the knot range [0, n].
    let as_ccard = make_concave_cardinality_instance(n, table)?;
    drop(as_ccard);
    Ok(SubmodularInstance {
        n,
        k: 2,
        kind: InstanceKind::ConcaveModular {
            weights: weights.to_vec(),
            table: table.to_vec(),
        },
    })
}

pub fn make_grid_instance(
    n: usize,
    k: u32,
    values: &[f64],
) -> Result<SubmodularInstance, OracleError> {
    if k < 1 {
        return Err(OracleError::InvalidInstance("k must be at least 1".into()));
    }
    let inst = SubmodularInstance {
        n,
        k,
        kind: InstanceKind::GridTabular { values: values.to_vec() },
    };
    let expect = inst
        .domain_size()
        .ok_or_else(|| OracleError::InvalidInstance("k^n overflows".into()))?;
    if values.len() as u64 != expect {
        return Err(OracleError::InvalidInstance(format!(
            "grid table has {} entries, expected k^n = {}",
            values.len(),
            expect
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(OracleError::InvalidInstance(
            "grid table has non-finite entries".into(),
        ));
    }
    Ok(inst)
}

/// Metered access to an instance. Creation performs the single normalization
/// probe at the lattice bottom (reported as `setup_calls = 1`); afterwards
/// `call_count` counts exactly one per [`OracleHandle::evaluate`]. Evaluations
/// made purely for tracing/diagnostics go through
/// [`OracleHandle::evaluate_trace`] and are metered on a separate counter that
/// is exempt from the budget.
pub struct OracleHandle {
    instance: SubmodularInstance,
    offset: f64,
    calls: Cell<u64>,
    trace_calls: Cell<u64>,
    budget: Cell<Option<u64>>,
}

impl OracleHandle {
    pub fn new(instance: SubmodularInstance) -> Self {
        let bottom = vec![1u32; instance.n];
        let offset = instance.value(&bottom);
        OracleHandle {
            instance,
            offset,
            calls: Cell::new(0),
            trace_calls: Cell::new(0),
            budget: Cell::new(None),
        }
    }

    pub fn with_budget(instance: SubmodularInstance, budget: u64) -> Self {
        let h = Self::new(instance);
        h.budget.set(Some(budget));
        h
    }

    pub fn set_budget(&self, budget: Option<u64>) {
        self.budget.set(budget);
    }

    pub fn instance(&self) -> &SubmodularInstance {
        &self.instance
    }

    pub fn n(&self) -> usize {
        self.instance.n
    }

    pub fn k(&self) -> u32 {
        self.instance.k
    }

    /// Algorithm evaluations so far (excludes the normalization probe).
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    /// Evaluations made for traces/diagnostics only.
    pub fn trace_calls(&self) -> u64 {
        self.trace_calls.get()
    }

    /// The one-call cost of normalization at handle creation.
    pub fn setup_calls(&self) -> u64 {
        1
    }

    /// Normalized, metered evaluation.
    pub fn evaluate(&self, levels: &[u32]) -> Result<f64, OracleError> {
        self.instance.validate_point(levels)?;
        if let Some(b) = self.budget.get() {
            if self.calls.get() >= b {
                return Err(OracleError::BudgetExhausted { budget: b });
            }
        }
        self.calls.set(self.calls.get() + 1);
        Ok(self.instance.value(levels) - self.offset)
    }

    /// Normalized evaluation on the trace meter: not budgeted, not counted as
    /// an algorithm call.
    pub fn evaluate_trace(&self, levels: &[u32]) -> f64 {
        self.trace_calls.set(self.trace_calls.get() + 1);
        self.instance.value(levels) - self.offset
    }

    /// Set-function convenience: evaluate at the indicator of `members`.
    pub fn evaluate_set(&self, members: &[u32]) -> Result<f64, OracleError> {
        self.evaluate(&set_levels(self.instance.n, members))
    }
}

/// Level vector for a subset of a ground set of size `n`.
pub fn set_levels(n: usize, members: &[u32]) -> Vec<u32> {
    let mut levels = vec![1u32; n];
    for &m in members {
        levels[m as usize] = 2;
    }
    levels
}

/// Members (ascending) of the set encoded by a level vector.
pub fn levels_to_set(levels: &[u32]) -> Vec<u32> {
    levels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= 2)
        .map(|(i, _)| i as u32)
        .collect()
}

/// Exact minimizer by enumeration. Values are normalized against the lattice
/// bottom so they are comparable with handle output; ties go to the
/// lexicographically smallest level vector. Unmetered (audit oracle).
pub fn bruteforce_min(
    instance: &SubmodularInstance,
) -> Result<(Vec<u32>, f64), OracleError> {
    let points = instance
        .domain_size()
        .filter(|&p| p <= BRUTE_FORCE_CAP)
        .ok_or(OracleError::DomainTooLarge {
            points: u64::MAX,
            cap: BRUTE_FORCE_CAP,
        })?;
    let bottom = vec![1u32; instance.n];
    let base = instance.value(&bottom);
    let mut best_point = bottom.clone();
    let mut best = 0.0f64;
    let mut levels = bottom;
    // Odometer enumeration is exactly lexicographic order, so strict
    // improvement keeps the lexicographically smallest argmin.
    for _ in 1..points {
        let mut i = instance.n;
        loop {
            i -= 1;
            if levels[i] < instance.k {
                levels[i] += 1;
                for l in levels.iter_mut().skip(i + 1) {
                    *l = 1;
                }
                break;
            }
        }
        let v = instance.value(&levels) - base;
        if v < best {
            best = v;
            best_point = levels.clone();
        }
    }
    Ok((best_point, best))
}

/// Exhaustively check submodularity. Set functions (`k = 2`, `n <= max_n`) are
/// checked against the decreasing-marginal-returns definition over all pairs
/// S ⊆ T. Grid functions are checked with the two-coordinate exchange
/// condition f(x+e_i) + f(x+e_j) >= f(x+e_i+e_j) + f(x), which is equivalent
/// to the lattice inequality f(x)+f(y) >= f(max)+f(min) on products of chains.
/// Unmetered (audit oracle).
pub fn verify_submodular(
    instance: &SubmodularInstance,
    max_n: usize,
) -> Result<bool, OracleError> {
    if instance.k == 2 {
        if instance.n > max_n {
            return Err(OracleError::DomainTooLarge {
                points: 1u64 << instance.n.min(63),
                cap: 1u64 << max_n.min(63),
            });
        }
        return Ok(verify_set_submodular(instance));
    }
    let points = instance
        .domain_size()
        .filter(|&p| p <= BRUTE_FORCE_CAP)
        .ok_or(OracleError::DomainTooLarge {
            points: u64::MAX,
            cap: BRUTE_FORCE_CAP,
        })?;
    let n = instance.n;
    let mut levels = vec![1u32; n];
    let mut scratch = vec![1u32; n];
    for _ in 0..points {
        let fx = instance.value(&levels);
        for i in 0..n {
            if levels[i] >= instance.k {
                continue;
            }
            scratch.copy_from_slice(&levels);
            scratch[i] += 1;
            let fxi = instance.value(&scratch);
            for j in (i + 1)..n {
                if levels[j] >= instance.k {
                    continue;
                }
                scratch[i] = levels[i];
                scratch[j] += 1;
                let fxj = instance.value(&scratch);
                scratch[i] += 1;
                let fxij = instance.value(&scratch);
                scratch[i] = levels[i];
                scratch[j] = levels[j];
                if fxi + fxj < fxij + fx - 1e-9 {
                    return Ok(false);
                }
            }
        }
        // advance odometer
        let mut i = n;
        let mut done = true;
        while i > 0 {
            i -= 1;
            if levels[i] < instance.k {
                levels[i] += 1;
                for l in levels.iter_mut().skip(i + 1) {
                    *l = 1;
                }
                done = false;
                break;
            }
        }
        if done {
            break;
        }
    }
    Ok(true)
}

fn verify_set_submodular(instance: &SubmodularInstance) -> bool {
    let n = instance.n;
    let size = 1usize << n;
    let mut table = vec![0.0f64; size];
    let mut levels = vec![1u32; n];
    for (mask, slot) in table.iter_mut().enumerate() {
        for (i, l) in levels.iter_mut().enumerate() {
            *l = if mask >> i & 1 == 1 { 2 } else { 1 };
        }
        *slot = instance.value(&levels);
    }
    // All S ⊆ T via submask enumeration of each T.
    for t in 0..size {
        let mut s = t;
        loop {
            for i in 0..n {
                let bit = 1usize << i;
                if t & bit == 0 {
                    let lhs = table[s | bit] - table[s];
                    let rhs = table[t | bit] - table[t];
                    if lhs < rhs - 1e-9 {
                        return false;
                    }
                }
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & t;
        }
    }
    true
}

/// Parse the whitespace-delimited instance text format:
/// first `kind n k`, then the kind-specific payload (`cut`: edge count and
/// 1-based `u v w` triples; `ccard`: n+1 table values; `cmod`: n weights then
/// n+1 table values; `grid`: k^n values, last coordinate fastest).
pub fn parse_instance(text: &str) -> Result<SubmodularInstance, OracleError> {
    let mut toks = text.split_whitespace().enumerate();
    let mut next = |what: &str| -> Result<(usize, &str), OracleError> {
        toks.next().ok_or_else(|| OracleError::Parse {
            token: usize::MAX,
            msg: format!("missing {what}"),
        })
    };
    let (_, kind) = next("kind")?;
    let kind = kind.to_string();
    let parse_usize = |tok: (usize, &str), what: &str| -> Result<usize, OracleError> {
        tok.1.parse().map_err(|_| OracleError::Parse {
            token: tok.0,
            msg: format!("bad {what}: {}", tok.1),
        })
    };
    let parse_f64 = |tok: (usize, &str), what: &str| -> Result<f64, OracleError> {
        tok.1.parse().map_err(|_| OracleError::Parse {
            token: tok.0,
            msg: format!("bad {what}: {}", tok.1),
        })
    };
    let n = parse_usize(next("n")?, "n")?;
    let k = parse_usize(next("k")?, "k")? as u32;
    match kind.as_str() {
        "cut" => {
            if k != 2 {
                return Err(OracleError::InvalidInstance("cut requires k = 2".into()));
            }
            let m = parse_usize(next("edge count")?, "edge count")?;
            let mut edges = Vec::with_capacity(m);
            for _ in 0..m {
                let u = parse_usize(next("edge tail")?, "edge tail")?;
                let v = parse_usize(next("edge head")?, "edge head")?;
                let w = parse_f64(next("edge weight")?, "edge weight")?;
                if u == 0 || v == 0 {
                    return Err(OracleError::InvalidInstance(
                        "vertices are 1-based".into(),
                    ));
                }
                edges.push((u as u32 - 1, v as u32 - 1, w));
            }
            make_cut_instance(n, &edges)
        }
        "ccard" => {
            if k != 2 {
                return Err(OracleError::InvalidInstance("ccard requires k = 2".into()));
            }
            let mut h = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                h.push(parse_f64(next("table value")?, "table value")?);
            }
            make_concave_cardinality_instance(n, &h)
        }
        "cmod" => {
            if k != 2 {
                return Err(OracleError::InvalidInstance("cmod requires k = 2".into()));
            }
            let mut weights = Vec::with_capacity(n);
            for _ in 0..n {
                weights.push(parse_f64(next("weight")?, "weight")?);
            }
            let mut table = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                table.push(parse_f64(next("table value")?, "table value")?);
            }
            make_concave_modular_instance(n, &weights, &table)
        }
        "grid" => {
            let mut points: u64 = 1;
            for _ in 0..n {
                points = points
                    .checked_mul(k as u64)
                    .ok_or_else(|| OracleError::InvalidInstance("k^n overflows".into()))?;
            }
            let mut values = Vec::with_capacity(points as usize);
            for _ in 0..points {
                values.push(parse_f64(next("grid value")?, "grid value")?);
            }
            make_grid_instance(n, k, &values)
        }
        other => Err(OracleError::Parse {
            token: 0,
            msg: format!("unknown kind {other}"),
        }),
    }
}

/// Inverse of [`parse_instance`] for the serializable kinds.
pub fn format_instance(instance: &SubmodularInstance) -> Result<String, OracleError> {
    let mut out = String::new();
    match &instance.kind {
        InstanceKind::Cut { edges } => {
            out.push_str(&format!("cut {} 2\n{}\n", instance.n, edges.len()));
            for &(u, v, w) in edges {
                out.push_str(&format!("{} {} {}\n", u + 1, v + 1, w));
            }
        }
        InstanceKind::ConcaveCardinality { h } => {
            out.push_str(&format!("ccard {} 2\n", instance.n));
            out.push_str(&join(h));
            out.push('\n');
        }
        InstanceKind::ConcaveModular { weights, table } => {
            out.push_str(&format!("cmod {} 2\n", instance.n));
            out.push_str(&join(weights));
            out.push('\n');
            out.push_str(&join(table));
            out.push('\n');
        }
        InstanceKind::GridTabular { values } => {
            out.push_str(&format!("grid {} {}\n", instance.n, instance.k));
            for row in values.chunks(instance.k as usize) {
                out.push_str(&join(row));
                out.push('\n');
            }
        }
        InstanceKind::Continuous { .. } => {
            return Err(OracleError::InvalidInstance(
                "continuous instances have no text form".into(),
            ));
        }
    }
    Ok(out)
}

fn join(vals: &[f64]) -> String {
    vals.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
