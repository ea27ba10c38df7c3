//! Locating sparse minimizers with few oracle calls.
//!
//! When the minimizer has at most s elements and the function is integral
//! with |f| <= M, the starting subgradient has at most 3M nonzero entries.
//! Rather than paying n+1 calls for a dense walk, a randomized insertion
//! routine pins the positive entries to the front and the negative entries to
//! the back of a permutation, discovering each nonzero by binary search over
//! interval sums. The descent then runs projected onto the sparse polytope
//! {z in [0,1]^n : Σz <= s}, where each step moves a single coordinate and
//! segments can be preprocessed from the permutation moves alone.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lovasz::{
    dense_subgradient, interval_sum, lovasz_eval_trace, round_to_set, round_to_set_trace,
};
use crate::oracle::{OracleError, OracleHandle};
use crate::sampler::{BoxPrefix, DenseSeed, PrefixEval, SegmentSampler};
use crate::sgd::{
    project_sparse_polytope, run_psgd, Domain, RawSolve, RoundedPoint, Snapshot,
    SolveResult, SolverConfig,
};

/// Default round multiplier for [`find_perm`].
pub const FIND_PERM_C_ITER: f64 = 500.0;

/// Binary-search one coordinate whose subgradient entry has the requested
/// sign inside positions a..=b of `perm`. The interval's sum must already
/// have that sign (checked with 2 calls, reported as a precondition error
/// otherwise); each halving step checks only the left half, so the total cost
/// is at most 2⌈log2(b−a+1)⌉ + 2 calls.
pub fn find_index(
    handle: &OracleHandle,
    perm: &[u32],
    a: usize,
    b: usize,
    positive: bool,
) -> Result<u32, OracleError> {
    let total = interval_sum(handle, perm, a, b)?;
    let matches = |v: f64| if positive { v > 0.0 } else { v < 0.0 };
    if !matches(total) {
        return Err(OracleError::Precondition(format!(
            "interval {a}..={b} sums to {total}, expected a {} sum",
            if positive { "positive" } else { "negative" }
        )));
    }
    let (mut lo, mut hi) = (a, b);
    while lo < hi {
        let left_len = (hi - lo + 1) / 2;
        let mid = lo + left_len - 1;
        let left = interval_sum(handle, perm, lo, mid)?;
        if matches(left) {
            hi = mid;
        } else {
            // The halves sum to the interval's value, so the right half
            // keeps the sign whenever the left does not.
            lo = mid + 1;
        }
    }
    Ok(perm[lo])
}

#[derive(Clone, Debug)]
pub struct FindPermResult {
    /// Permutation with pinned-positive coordinates first and
    /// pinned-negative coordinates last.
    pub perm: Vec<u32>,
    /// Pinned (coordinate, subgradient value) pairs; values are exact for
    /// `perm` and stay fixed because later pins never change a pinned
    /// coordinate's prefix set.
    pub nonzeros: Vec<(u32, f64)>,
    /// Coordinates never pinned (their entries are zero with high
    /// probability).
    pub middle: Vec<u32>,
    pub rounds_used: u64,
}

impl FindPermResult {
    /// Dense audit (n+1 calls, test use): recompute the subgradient at
    /// `perm` and confirm the pinned values and the zero middle.
    pub fn audit(&self, handle: &OracleHandle) -> Result<bool, OracleError> {
        let g = dense_subgradient(handle, &self.perm)?;
        for &c in &self.middle {
            if g.values[c as usize].abs() > 1e-9 {
                return Ok(false);
            }
        }
        for &(c, v) in &self.nonzeros {
            if (g.values[c as usize] - v).abs() > 1e-9 {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Randomized search for a permutation whose subgradient is explicitly
/// sparse: every unpinned entry is zero w.h.p. after
/// ⌈c_iter · M² · ln(n+1)⌉ rounds. Each round isolates a random subset of the
/// undecided middle next to the pinned prefix (then next to the pinned
/// suffix), tests its interval sum, and pins one discovered coordinate per
/// hit. Rounds that sample an empty subset cost no calls.
pub fn find_perm(
    handle: &OracleHandle,
    m_bound: f64,
    c_iter: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FindPermResult, OracleError> {
    assert!(m_bound >= 1.0, "integer range bound must be at least 1");
    let n = handle.n();
    let p = 1.0 / (10.0 * m_bound);
    let rounds = (c_iter * m_bound * m_bound * ((n as f64) + 1.0).ln()).ceil() as u64;

    let mut left: Vec<u32> = Vec::new();
    let mut right: Vec<u32> = Vec::new();
    let mut middle: Vec<u32> = (0..n as u32).collect();
    let mut nonzeros: Vec<(u32, f64)> = Vec::new();
    let mut rounds_used = 0u64;

    let concat = |parts: [&[u32]; 4]| -> Vec<u32> {
        let mut q = Vec::with_capacity(n);
        for p in parts {
            q.extend_from_slice(p);
        }
        q
    };

    for _ in 0..rounds {
        if middle.is_empty() {
            break;
        }
        rounds_used += 1;
        let picked: Vec<bool> = middle.iter().map(|_| rng.gen_bool(p)).collect();
        if !picked.iter().any(|&b| b) {
            continue;
        }
        let sel: Vec<u32> = middle
            .iter()
            .zip(&picked)
            .filter(|(_, &p)| p)
            .map(|(&c, _)| c)
            .collect();
        let rest: Vec<u32> = middle
            .iter()
            .zip(&picked)
            .filter(|(_, &p)| !p)
            .map(|(&c, _)| c)
            .collect();

        // Selected coordinates right after the pinned prefix: a positive sum
        // certifies a positive entry inside.
        let q = concat([&left, &sel, &rest, &right]);
        let a = left.len();
        let b = a + sel.len() - 1;
        if interval_sum(handle, &q, a, b)? > 0.0 {
            let c = find_index(handle, &q, a, b, true)?;
            let reordered: Vec<u32> =
                std::iter::once(c).chain(middle.iter().copied().filter(|&x| x != c)).collect();
            let q2 = concat([&left, &reordered, &[], &right]);
            let v = interval_sum(handle, &q2, a, a)?;
            assert!(v > 0.0, "pinned-positive entry must stay positive");
            left.push(c);
            middle.retain(|&x| x != c);
            nonzeros.push((c, v));
            continue;
        }

        // Selected coordinates right before the pinned suffix: a negative
        // sum certifies a negative entry inside.
        let q = concat([&left, &rest, &sel, &right]);
        let b = left.len() + middle.len() - 1;
        let a = b + 1 - sel.len();
        if interval_sum(handle, &q, a, b)? < 0.0 {
            let c = find_index(handle, &q, a, b, false)?;
            let reordered: Vec<u32> = middle
                .iter()
                .copied()
                .filter(|&x| x != c)
                .chain(std::iter::once(c))
                .collect();
            let q2 = concat([&left, &reordered, &[], &right]);
            let pos = left.len() + middle.len() - 1;
            let v = interval_sum(handle, &q2, pos, pos)?;
            assert!(v < 0.0, "pinned-negative entry must stay negative");
            right.insert(0, c);
            middle.retain(|&x| x != c);
            nonzeros.push((c, v));
        }
    }

    let perm = concat([&left, &middle, &right, &[]]);
    Ok(FindPermResult {
        perm,
        nonzeros,
        middle,
        rounds_used,
    })
}

/// Feasible region {z in [0,1]^n : Σz <= s}. Steps re-project the whole
/// vector (a uniform downward shift plus clamp), which moves every coordinate
/// by the same λ and therefore reorders at most the stepped coordinate; the
/// iterate's permutation is maintained incrementally instead of re-sorted so
/// that ties at 0 do not shuffle it.
pub struct SparseDomain {
    pub n: usize,
    pub s: u32,
    pub m_bound: f64,
    prefix: BoxPrefix,
}

impl SparseDomain {
    pub fn new(n: usize, s: u32, m_bound: f64) -> Self {
        SparseDomain {
            n,
            s,
            m_bound,
            prefix: BoxPrefix { n },
        }
    }
}

impl PrefixEval for SparseDomain {
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

impl Domain for SparseDomain {
    fn default_r2(&self) -> f64 {
        self.s as f64 / 2.0
    }

    fn grad_scale(&self) -> f64 {
        self.m_bound
    }

    /// The sparse path fixes its internal accuracy at 1/2 (integer-valued
    /// functions make the rounded output exact w.h.p. regardless), so the
    /// count does not depend on the configured epsilon.
    fn default_t(&self, _epsilon: f64, c_t: f64) -> u64 {
        (c_t * self.s as f64 * self.m_bound * self.m_bound).ceil() as u64
    }

    fn apply_step(&self, x: &mut Vec<f64>, coord: usize, delta: f64) {
        x[coord] += delta;
        let (z, _) = project_sparse_polytope(x, self.s as f64);
        *x = z;
    }

    fn reorder(&self, x: &[f64], prev: &[u32], stepped: Option<u32>) -> Vec<u32> {
        let c = match stepped {
            Some(c) => c,
            None => return prev.to_vec(),
        };
        let xc = x[c as usize];
        let mut out = Vec::with_capacity(prev.len());
        let mut placed = false;
        for &it in prev {
            if it == c {
                continue;
            }
            if !placed && x[it as usize] < xc {
                out.push(c);
                placed = true;
            }
            out.push(it);
        }
        if !placed {
            out.push(c);
        }
        out
    }

    fn process_pair(
        &self,
        handle: &OracleHandle,
        lo: &Snapshot,
        hi: &Snapshot,
        moved: &[u32],
    ) -> Result<SegmentSampler, OracleError> {
        SegmentSampler::from_permutation_move(
            handle,
            &self.prefix,
            lo.order.clone(),
            hi.order.clone(),
            moved,
        )
    }

    fn extension_value_trace(&self, handle: &OracleHandle, x: &[f64]) -> f64 {
        lovasz_eval_trace(handle, x)
    }

    fn as_prefix(&self) -> &dyn PrefixEval {
        &self.prefix
    }
}

/// Minimize an integer-valued set function with |f| <= M whose minimizer has
/// at most s elements: discover the sparse starting subgradient with
/// [`find_perm`], then descend over the sparse polytope. The iteration count
/// scales with s·M² rather than n.
pub fn sparse_sfm(
    handle: &OracleHandle,
    s: u32,
    m_bound: f64,
    cfg: &SolverConfig,
) -> Result<SolveResult, OracleError> {
    assert_eq!(handle.k(), 2, "sparse_sfm expects a set instance (k = 2)");
    if cfg.budget.is_some() {
        handle.set_budget(cfg.budget);
    }
    let n = handle.n();
    if s == 0 {
        // The only feasible point is the origin, whose normalized value is 0.
        return Ok(SolveResult {
            x_bar: vec![0.0; n],
            rounded: RoundedPoint::Set(Vec::new()),
            value: 0.0,
            iterations: 0,
            oracle_calls: handle.calls(),
            setup_calls: handle.setup_calls(),
            trace_calls: handle.trace_calls(),
            truncated: false,
            trace: Vec::new(),
            iterates: cfg.record_iterates.then(|| vec![vec![0.0; n]]),
        });
    }
    let domain = SparseDomain::new(n, s, m_bound);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let raw = match find_perm(handle, m_bound, FIND_PERM_C_ITER, &mut rng) {
        Ok(fp) => {
            let seed = DenseSeed::from_entries(&fp.nonzeros);
            run_psgd(handle, &domain, &seed, fp.perm, cfg, &mut rng)?
        }
        Err(OracleError::BudgetExhausted { .. }) => RawSolve {
            x_bar: vec![0.0; n],
            iterations_run: 0,
            t_planned: 0,
            eta: 0.0,
            truncated: true,
            trace: Vec::new(),
            iterates: cfg.record_iterates.then(|| vec![vec![0.0; n]]),
        },
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
