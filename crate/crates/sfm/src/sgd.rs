//! Projected stochastic subgradient descent with amortized segment reuse.
//!
//! The driver keeps the iterate's subgradient estimate 1-sparse: a draw from
//! the dense starting subgradient plus one draw per live segment of a binary
//! counter schedule. Iteration i reuses the segments (k_{j+1}, k_j) obtained
//! by clearing the low bits of i−1 one at a time, so each estimate telescopes
//! back to the start while only O(log T) segments are ever alive, and each
//! segment is preprocessed once and sampled for its whole lifetime.

use std::collections::HashMap;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lovasz::{
    consistent_permutation, dense_subgradient, lovasz_eval_trace, round_to_set,
    round_to_set_trace,
};
use crate::oracle::{OracleError, OracleHandle};
use crate::sampler::{
    collapse, sample_dense, BoxPrefix, DenseSeed, PrefixEval, SegmentSampler,
};

/// Exponent of the largest power of two dividing i.
pub fn nu2(i: u64) -> u32 {
    assert!(i > 0, "nu2 is undefined at 0");
    i.trailing_zeros()
}

/// Endpoint chain for iteration i+1: start at i and repeatedly clear the
/// lowest set bit until reaching 0. Consecutive entries are exactly the live
/// segments whose samples telescope g(x_i) back to g(x_0).
pub fn segment_chain(i: u64) -> Vec<u64> {
    let mut chain = vec![i];
    let mut v = i;
    while v > 0 {
        v &= v - 1;
        chain.push(v);
    }
    chain
}

/// η = (R/B)·sqrt(2/T).
pub fn step_size(radius: f64, grad_bound: f64, t: u64) -> f64 {
    assert!(
        radius > 0.0 && grad_bound > 0.0 && t > 0,
        "step size needs positive R, B, T"
    );
    radius / grad_bound * (2.0 / t as f64).sqrt()
}

/// Euclidean projection onto [0,1]^n.
pub fn project_box(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v.clamp(0.0, 1.0)).collect()
}

/// Euclidean projection onto {z in [0,1]^n : Σz <= s}: clamp after shifting
/// every coordinate down by the smallest nonnegative λ that makes the sum
/// feasible. Returns (z, λ); λ is located exactly by sweeping the breakpoints
/// of the piecewise-linear sum φ(λ) = Σ clamp(y_i − λ).
pub fn project_sparse_polytope(y: &[f64], s: f64) -> (Vec<f64>, f64) {
    assert!(s >= 0.0, "sparsity budget must be nonnegative");
    let clamp_sum: f64 = y.iter().map(|v| v.clamp(0.0, 1.0)).sum();
    if clamp_sum <= s {
        return (project_box(y), 0.0);
    }

    // State at λ = 0.
    let mut ones = 0u64; // coordinates still saturated at 1
    let mut lin_count = 0u64; // coordinates in the open linear region
    let mut lin_sum = 0.0f64;
    // (λ, entering): entering events move a coordinate from saturated to
    // linear at λ = y_i − 1; exit events drop it to 0 at λ = y_i.
    let mut events: Vec<(f64, bool, f64)> = Vec::new();
    for &v in y {
        if v > 1.0 {
            ones += 1;
            events.push((v - 1.0, true, v));
        } else if v > 0.0 {
            lin_count += 1;
            lin_sum += v;
        } else {
            continue;
        }
        events.push((v, false, v));
    }
    events.retain(|&(lam, _, _)| lam > 0.0);
    events.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut lam_cur = 0.0f64;
    let mut idx = 0;
    loop {
        let lam_next = events.get(idx).map(|e| e.0).unwrap_or(f64::INFINITY);
        if lin_count > 0 {
            let lam_star = (ones as f64 + lin_sum - s) / lin_count as f64;
            if lam_star >= lam_cur - 1e-15 && lam_star <= lam_next {
                let lam_star = lam_star.max(0.0);
                let z: Vec<f64> = y.iter().map(|v| (v - lam_star).clamp(0.0, 1.0)).collect();
                return (z, lam_star);
            }
        }
        assert!(idx < events.len(), "projection sweep ran out of breakpoints");
        // Apply all events at lam_next.
        while idx < events.len() && events[idx].0 == lam_next {
            let (_, entering, v) = events[idx];
            if entering {
                ones -= 1;
                lin_count += 1;
                lin_sum += v;
            } else {
                lin_count -= 1;
                lin_sum -= v;
            }
            idx += 1;
        }
        lam_cur = lam_next;
    }
}

/// Isotonic regression onto nonincreasing sequences (pool adjacent
/// violators), then clamp into [0,1]. For a single value this reduces to the
/// plain box clamp.
pub fn pav_project(values: &[f64]) -> Vec<f64> {
    let mut pools: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        let mut sum = v;
        let mut count = 1usize;
        while let Some(&(ps, pc)) = pools.last() {
            if ps / (pc as f64) < sum / count as f64 {
                pools.pop();
                sum += ps;
                count += pc;
            } else {
                break;
            }
        }
        pools.push((sum, count));
    }
    let mut out = Vec::with_capacity(values.len());
    for (sum, count) in pools {
        let avg = (sum / count as f64).clamp(0.0, 1.0);
        out.extend(std::iter::repeat(avg).take(count));
    }
    out
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub seed: u64,
    /// Squared second-moment constant for the stochastic subgradients, in
    /// units of the domain's gradient scale. It plays two coupled roles:
    /// the default iteration count is `c_t`· (domain size)/ε², and the step
    /// size uses the matching bound B = sqrt(c_t) · grad_scale, so that the
    /// two-term descent bound lands at ε when `c_t` dominates the measured
    /// second moment of the estimates.
    pub c_t: f64,
    pub t_override: Option<u64>,
    pub eta_override: Option<f64>,
    /// Oracle budget applied to the handle for the duration of the solve.
    pub budget: Option<u64>,
    /// Emit a trace row every this many iterations (0 = no trace).
    pub trace_every: u64,
    /// Record every iterate (testing hook; memory grows with T).
    pub record_iterates: bool,
}

impl SolverConfig {
    pub fn new(epsilon: f64, seed: u64) -> Self {
        SolverConfig {
            epsilon,
            seed,
            c_t: 2.0,
            t_override: None,
            eta_override: None,
            budget: None,
            trace_every: 0,
            record_iterates: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: u64,
    pub calls: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RoundedPoint {
    Set(Vec<u32>),
    Grid(Vec<u32>),
    Point(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x_bar: Vec<f64>,
    pub rounded: RoundedPoint,
    pub value: f64,
    pub iterations: u64,
    pub oracle_calls: u64,
    pub setup_calls: u64,
    pub trace_calls: u64,
    pub truncated: bool,
    pub trace: Vec<TraceRow>,
    pub iterates: Option<Vec<Vec<f64>>>,
}

/// A stored iterate: the point and a permutation consistent with it.
#[derive(Clone)]
pub struct Snapshot {
    pub point: Rc<Vec<f64>>,
    pub order: Rc<Vec<u32>>,
}

/// Feasible region plumbing for the shared descent loop.
pub trait Domain: PrefixEval {
    fn default_r2(&self) -> f64;

    /// Magnitude unit for subgradients on this domain (how the ℓ₁ bound
    /// grows with the instance range and, on grids, the level count). The
    /// descent loop multiplies this by sqrt(c_t) to form the second-moment
    /// bound B fed to `step_size`; the 1-sparse estimates have second
    /// moments far above the squared ℓ₁ bound of the exact subgradients
    /// they average to, so B is declared via the configuration rather than
    /// derived from the exact-subgradient norm.
    fn grad_scale(&self) -> f64;

    fn default_t(&self, epsilon: f64, c_t: f64) -> u64;

    /// Add `delta` to coordinate `coord` and project back onto the region.
    fn apply_step(&self, x: &mut Vec<f64>, coord: usize, delta: f64);

    /// Permutation consistent with `x` after a step. `prev` is consistent
    /// with the pre-step point; `stepped` is the coordinate that moved.
    fn reorder(&self, x: &[f64], prev: &[u32], stepped: Option<u32>) -> Vec<u32> {
        let _ = (prev, stepped);
        consistent_permutation(x)
    }

    /// Preprocess the segment between two stored iterates. `moved` lists the
    /// coordinates stepped between them (with repeats removed).
    fn process_pair(
        &self,
        handle: &OracleHandle,
        lo: &Snapshot,
        hi: &Snapshot,
        moved: &[u32],
    ) -> Result<SegmentSampler, OracleError> {
        let _ = moved;
        SegmentSampler::from_points(
            handle,
            self.as_prefix(),
            &lo.point,
            &hi.point,
            lo.order.clone(),
            hi.order.clone(),
        )
    }

    /// Extension value on the trace meter, for trace rows.
    fn extension_value_trace(&self, handle: &OracleHandle, x: &[f64]) -> f64;

    fn as_prefix(&self) -> &dyn PrefixEval;
}

pub struct RawSolve {
    pub x_bar: Vec<f64>,
    pub iterations_run: u64,
    pub t_planned: u64,
    pub eta: f64,
    pub truncated: bool,
    pub trace: Vec<TraceRow>,
    pub iterates: Option<Vec<Vec<f64>>>,
}

/// The shared descent loop. `seed0` and `order0` come from the dense starting
/// subgradient (or its sparse replacement on the sparse path); the rng is
/// passed in so callers that consumed randomness during initialization keep a
/// single stream.
pub fn run_psgd<D: Domain + ?Sized>(
    handle: &OracleHandle,
    domain: &D,
    seed0: &DenseSeed,
    order0: Vec<u32>,
    cfg: &SolverConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RawSolve, OracleError> {
    let t_planned = cfg
        .t_override
        .unwrap_or_else(|| domain.default_t(cfg.epsilon, cfg.c_t));
    let eta = cfg.eta_override.unwrap_or_else(|| {
        step_size(
            domain.default_r2().sqrt(),
            cfg.c_t.sqrt() * domain.grad_scale(),
            t_planned.max(1),
        )
    });

    let mut x = vec![0.0f64; domain.items()];
    let mut order: Rc<Vec<u32>> = Rc::new(order0);
    let mut sum_x = x.clone();
    let mut averaged = 1u64;
    let mut iterates = cfg.record_iterates.then(|| vec![x.clone()]);
    let mut trace: Vec<TraceRow> = Vec::new();
    let mut truncated = false;
    let mut iterations_run = 0u64;

    // Endpoint snapshots (refcounted by live segments; index 0 pinned) and
    // live segment samplers keyed by their upper endpoint.
    let mut snapshots: HashMap<u64, (Snapshot, u32)> = HashMap::new();
    snapshots.insert(
        0,
        (
            Snapshot {
                point: Rc::new(x.clone()),
                order: order.clone(),
            },
            1,
        ),
    );
    let mut segments: HashMap<u64, SegmentSampler> = HashMap::new();
    // moved_log[i] = coordinate stepped at iteration i (u32::MAX for none).
    let mut moved_log: Vec<u32> = vec![u32::MAX];

    if cfg.trace_every > 0 {
        trace.push(TraceRow {
            iter: 0,
            calls: handle.calls(),
            value: domain.extension_value_trace(handle, &x),
        });
    }

    macro_rules! try_or_truncate {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(OracleError::BudgetExhausted { .. }) => {
                    truncated = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        };
    }

    for i in 1..=t_planned {
        // 1. Assemble this iteration's estimate: dense draw plus one draw per
        // chain segment, newest first.
        let mut g = sample_dense(seed0, rng);
        let chain = segment_chain(i - 1);
        let mut exhausted = false;
        for w in chain.windows(2) {
            let seg = segments
                .get_mut(&w[0])
                .expect("segment schedule invariant: chain entries are live");
            match seg.sample(handle, domain.as_prefix(), rng) {
                Ok(e) => g.accumulate(&e),
                Err(OracleError::BudgetExhausted { .. }) => {
                    exhausted = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if exhausted {
            truncated = true;
            break;
        }
        let g1 = collapse(&g, rng);

        // 2. Step and project.
        let stepped = match g1.entries.first() {
            Some(&(c, v)) => {
                domain.apply_step(&mut x, c as usize, -eta * v);
                let new_order = domain.reorder(&x, &order, Some(c));
                order = Rc::new(new_order);
                Some(c)
            }
            None => None,
        };
        moved_log.push(stepped.unwrap_or(u32::MAX));
        for (acc, &v) in sum_x.iter_mut().zip(&x) {
            *acc += v;
        }
        averaged += 1;
        iterations_run = i;
        if let Some(list) = iterates.as_mut() {
            list.push(x.clone());
        }

        // 3. Preprocess the new segment ending at i.
        let lo = i & (i - 1);
        let lo_snap = snapshots
            .get(&lo)
            .expect("segment schedule invariant: lower endpoint snapshot is live")
            .0
            .clone();
        let hi_snap = Snapshot {
            point: Rc::new(x.clone()),
            order: order.clone(),
        };
        let mut moved: Vec<u32> = moved_log[(lo + 1) as usize..=(i as usize)]
            .iter()
            .copied()
            .filter(|&c| c != u32::MAX)
            .collect();
        moved.sort_unstable();
        moved.dedup();
        let seg = try_or_truncate!(domain.process_pair(handle, &lo_snap, &hi_snap, &moved));
        segments.insert(i, seg);
        snapshots.get_mut(&lo).unwrap().1 += 1;
        snapshots.insert(i, (hi_snap, 1));

        // 4. Evict segments whose last consumer was this iteration: segment b
        // is read by iterations b+1 ..= b + 2^nu2(b).
        let mut t = 0u32;
        while (1u64 << t) <= i {
            let b = i - (1u64 << t);
            if b >= 1 && nu2(b) == t && segments.remove(&b).is_some() {
                for e in [b & (b - 1), b] {
                    let slot = snapshots.get_mut(&e).unwrap();
                    slot.1 -= 1;
                    if slot.1 == 0 && e != 0 {
                        snapshots.remove(&e);
                    }
                }
            }
            t += 1;
        }

        if cfg.trace_every > 0 && (i % cfg.trace_every == 0 || i == t_planned) {
            trace.push(TraceRow {
                iter: i,
                calls: handle.calls(),
                value: domain.extension_value_trace(handle, &x),
            });
        }
    }

    let x_bar: Vec<f64> = sum_x.iter().map(|v| v / averaged as f64).collect();
    Ok(RawSolve {
        x_bar,
        iterations_run,
        t_planned,
        eta,
        truncated,
        trace,
        iterates,
    })
}

/// The unit box domain for plain set functions.
pub struct BoxDomain {
    pub n: usize,
    prefix: BoxPrefix,
}

impl BoxDomain {
    pub fn new(n: usize) -> Self {
        BoxDomain {
            n,
            prefix: BoxPrefix { n },
        }
    }
}

impl PrefixEval for BoxDomain {
    fn items(&self) -> usize {
        self.n
    }

    fn eval_prefix(
        &self,
        handle: &OracleHandle,
        order: &[u32],
        len: usize,
    ) -> Result<f64, OracleError> {
        self.prefix.eval_prefix(handle, order, len)
    }
}

impl Domain for BoxDomain {
    fn default_r2(&self) -> f64 {
        self.n as f64 / 2.0
    }

    fn grad_scale(&self) -> f64 {
        1.0
    }

    fn default_t(&self, epsilon: f64, c_t: f64) -> u64 {
        assert!(epsilon > 0.0);
        (c_t * self.n as f64 / (epsilon * epsilon)).ceil() as u64
    }

    fn apply_step(&self, x: &mut Vec<f64>, coord: usize, delta: f64) {
        x[coord] = (x[coord] + delta).clamp(0.0, 1.0);
    }

    fn extension_value_trace(&self, handle: &OracleHandle, x: &[f64]) -> f64 {
        lovasz_eval_trace(handle, x)
    }

    fn as_prefix(&self) -> &dyn PrefixEval {
        &self.prefix
    }
}

/// Minimize a set function over subsets: descend on the extension over the
/// box and round the averaged iterate to the best prefix set of its chain.
pub fn sfm_solve(
    handle: &OracleHandle,
    cfg: &SolverConfig,
) -> Result<SolveResult, OracleError> {
    assert_eq!(handle.k(), 2, "sfm_solve expects a set instance (k = 2)");
    if cfg.budget.is_some() {
        handle.set_budget(cfg.budget);
    }
    let n = handle.n();
    let domain = BoxDomain::new(n);
    let order0: Vec<u32> = (0..n as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let raw = match dense_subgradient(handle, &order0) {
        Ok(g0) => {
            let seed = DenseSeed::from_dense(&g0.values);
            run_psgd(handle, &domain, &seed, order0, cfg, &mut rng)?
        }
        Err(OracleError::BudgetExhausted { .. }) => {
            // Budget too small even for the starting subgradient: fall back
            // to the starting point.
            RawSolve {
                x_bar: vec![0.0; n],
                iterations_run: 0,
                t_planned: 0,
                eta: 0.0,
                truncated: true,
                trace: Vec::new(),
                iterates: cfg.record_iterates.then(|| vec![vec![0.0; n]]),
            }
        }
        Err(e) => return Err(e),
    };

    let mut truncated = raw.truncated;
    let (set, value) = if truncated {
        round_to_set_trace(handle, &raw.x_bar)
    } else {
        match round_to_set(handle, &raw.x_bar) {
            Ok(r) => r,
            Err(OracleError::BudgetExhausted { .. }) => {
                truncated = true;
                round_to_set_trace(handle, &raw.x_bar)
            }
            Err(e) => return Err(e),
        }
    };

    Ok(SolveResult {
        x_bar: raw.x_bar,
        rounded: RoundedPoint::Set(set),
        value,
        iterations: raw.iterations_run,
        oracle_calls: handle.calls(),
        setup_calls: handle.setup_calls(),
        trace_calls: handle.trace_calls(),
        truncated,
        trace: raw.trace,
        iterates: raw.iterates,
    })
}
