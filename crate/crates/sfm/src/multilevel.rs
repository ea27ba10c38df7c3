//! Minimization over products of chains [k]^n.
//!
//! A point of [k]^n with levels s_i embeds into a block box: block i is a
//! nonincreasing run of k−1 values in [0,1] (s_i − 1 ones for lattice
//! points). Items are linearized block-major as item = block·(k−1) + (level−1)
//! and the continuous extension walks the items in descending value order,
//! raising one level per step, so the whole box machinery (dense walks,
//! interval sums, segment samplers) applies unchanged with n(k−1) items.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::lovasz::consistent_permutation;
use crate::oracle::{OracleError, OracleHandle};
use crate::sampler::{DenseSeed, PrefixEval, SegmentSampler, SparseEstimate};
use crate::sgd::{
    pav_project, run_psgd, Domain, RawSolve, RoundedPoint, SolveResult, SolverConfig,
};

pub fn grid_items(n: usize, k: u32) -> usize {
    n * (k as usize - 1)
}

/// Embed a lattice point (levels in 1..=k) into the block box: block i
/// carries s_i − 1 ones followed by zeros.
pub fn embed_grid_point(levels: &[u32], k: u32) -> Vec<f64> {
    let kk = (k - 1) as usize;
    let mut x = vec![0.0; levels.len() * kk];
    for (i, &l) in levels.iter().enumerate() {
        debug_assert!((1..=k).contains(&l));
        for slot in x.iter_mut().skip(i * kk).take(l as usize - 1) {
            *slot = 1.0;
        }
    }
    x
}

/// Lattice point reached after raising the first `len` items of `order`:
/// level of block i is 1 plus the number of its items in the prefix.
fn prefix_point(n: usize, k: u32, order: &[u32], len: usize) -> Vec<u32> {
    let kk = (k - 1) as usize;
    let mut levels = vec![1u32; n];
    for &it in &order[..len] {
        levels[it as usize / kk] += 1;
    }
    levels
}

pub struct GridPrefix {
    pub n: usize,
    pub k: u32,
}

impl PrefixEval for GridPrefix {
    fn items(&self) -> usize {
        grid_items(self.n, self.k)
    }

    fn eval_prefix(
        &self,
        handle: &OracleHandle,
        order: &[u32],
        len: usize,
    ) -> Result<f64, OracleError> {
        handle.evaluate(&prefix_point(self.n, self.k, order, len))
    }
}

/// Items of a block-box point sorted by descending value (ties by ascending
/// item index). Panics if a block is not nonincreasing or x has the wrong
/// length.
pub fn k_consistent_permutation(n: usize, k: u32, x: &[f64]) -> Vec<u32> {
    let kk = (k - 1) as usize;
    assert_eq!(x.len(), n * kk, "expected {} items", n * kk);
    for b in 0..n {
        let block = &x[b * kk..(b + 1) * kk];
        for w in block.windows(2) {
            assert!(
                w[0] >= w[1],
                "block {b} is not nonincreasing: {block:?}"
            );
        }
    }
    consistent_permutation(x)
}

enum Meter {
    Algorithm,
    Trace,
}

fn eval(
    handle: &OracleHandle,
    levels: &[u32],
    meter: &Meter,
) -> Result<f64, OracleError> {
    match meter {
        Meter::Algorithm => handle.evaluate(levels),
        Meter::Trace => Ok(handle.evaluate_trace(levels)),
    }
}

fn k_extension_walk(
    handle: &OracleHandle,
    x: &[f64],
    meter: Meter,
) -> Result<f64, OracleError> {
    let n = handle.n();
    let k = handle.k();
    let kk = (k - 1) as usize;
    let perm = k_consistent_permutation(n, k, x);
    let mut levels = vec![1u32; n];
    let mut prev = eval(handle, &levels, &meter)?;
    let mut total = 0.0;
    for &it in &perm {
        levels[it as usize / kk] += 1;
        let cur = eval(handle, &levels, &meter)?;
        total += (cur - prev) * x[it as usize];
        prev = cur;
    }
    Ok(total)
}

/// Continuous extension value at a block-box point: (k−1)n + 1 metered
/// evaluations along the level-raising chain of x's permutation.
pub fn k_extension_eval(handle: &OracleHandle, x: &[f64]) -> Result<f64, OracleError> {
    k_extension_walk(handle, x, Meter::Algorithm)
}

pub fn k_extension_trace(handle: &OracleHandle, x: &[f64]) -> f64 {
    k_extension_walk(handle, x, Meter::Trace).expect("trace walk cannot hit the budget")
}

/// Dense extension subgradient for an item permutation: (k−1)n + 1 metered
/// evaluations; `values[item]` is the function increment when that item's
/// level step is taken.
pub fn k_dense_subgradient(
    handle: &OracleHandle,
    perm: &[u32],
) -> Result<Vec<f64>, OracleError> {
    let n = handle.n();
    let k = handle.k();
    let kk = (k - 1) as usize;
    assert_eq!(perm.len(), n * kk);
    let mut levels = vec![1u32; n];
    let mut prev = handle.evaluate(&levels)?;
    let mut values = vec![0.0; perm.len()];
    for &it in perm {
        levels[it as usize / kk] += 1;
        let cur = handle.evaluate(&levels)?;
        values[it as usize] = cur - prev;
        prev = cur;
    }
    Ok(values)
}

/// Sum of subgradient entries over positions a..=b of `perm`: 2 metered
/// evaluations.
pub fn k_interval_sum(
    handle: &OracleHandle,
    perm: &[u32],
    a: usize,
    b: usize,
) -> Result<f64, OracleError> {
    let n = handle.n();
    let k = handle.k();
    assert!(a <= b && b < perm.len(), "interval {a}..={b} out of range");
    let hi = handle.evaluate(&prefix_point(n, k, perm, b + 1))?;
    let lo = handle.evaluate(&prefix_point(n, k, perm, a))?;
    Ok(hi - lo)
}

/// Preprocess the segment between two block-box points under their canonical
/// item permutations.
pub fn k_process(
    handle: &OracleHandle,
    x: &[f64],
    y: &[f64],
) -> Result<SegmentSampler, OracleError> {
    let n = handle.n();
    let k = handle.k();
    let ev = GridPrefix { n, k };
    let ox = Rc::new(k_consistent_permutation(n, k, x));
    let oy = Rc::new(k_consistent_permutation(n, k, y));
    SegmentSampler::from_points(handle, &ev, x, y, ox, oy)
}

/// Draw one 1-sparse estimate of the grid subgradient difference from a
/// sampler built by [`k_process`].
pub fn k_sample(
    handle: &OracleHandle,
    sampler: &mut SegmentSampler,
    rng: &mut impl rand::Rng,
) -> Result<SparseEstimate, OracleError> {
    let ev = GridPrefix { n: handle.n(), k: handle.k() };
    sampler.sample(handle, &ev, rng)
}

/// Round a block-box point to the best lattice point on its permutation
/// chain: (k−1)n + 1 metered evaluations, ties to the earliest chain point.
pub fn k_round(handle: &OracleHandle, x: &[f64]) -> Result<(Vec<u32>, f64), OracleError> {
    k_round_walk(handle, x, Meter::Algorithm)
}

pub fn k_round_trace(handle: &OracleHandle, x: &[f64]) -> (Vec<u32>, f64) {
    k_round_walk(handle, x, Meter::Trace).expect("trace walk cannot hit the budget")
}

fn k_round_walk(
    handle: &OracleHandle,
    x: &[f64],
    meter: Meter,
) -> Result<(Vec<u32>, f64), OracleError> {
    let n = handle.n();
    let k = handle.k();
    let kk = (k - 1) as usize;
    let perm = k_consistent_permutation(n, k, x);
    let mut levels = vec![1u32; n];
    let mut best = eval(handle, &levels, &meter)?;
    let mut best_levels = levels.clone();
    for &it in &perm {
        levels[it as usize / kk] += 1;
        let cur = eval(handle, &levels, &meter)?;
        if cur < best {
            best = cur;
            best_levels = levels.clone();
        }
    }
    Ok((best_levels, best))
}

pub struct GridDomain {
    pub n: usize,
    pub k: u32,
    prefix: GridPrefix,
}

impl GridDomain {
    pub fn new(n: usize, k: u32) -> Self {
        assert!(k >= 2, "grid domains need at least two levels");
        GridDomain {
            n,
            k,
            prefix: GridPrefix { n, k },
        }
    }
}

impl PrefixEval for GridDomain {
    fn items(&self) -> usize {
        grid_items(self.n, self.k)
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

impl Domain for GridDomain {
    fn default_r2(&self) -> f64 {
        self.n as f64 * (self.k - 1) as f64 / 2.0
    }

    /// (k−1) levels per item scale the subgradient magnitudes linearly; at
    /// k = 2 this degenerates to the box scale so the two solvers match.
    fn grad_scale(&self) -> f64 {
        (self.k - 1) as f64
    }

    fn default_t(&self, epsilon: f64, c_t: f64) -> u64 {
        assert!(epsilon > 0.0);
        let k = self.k as f64;
        (c_t * self.n as f64 * k * k * k / (epsilon * epsilon)).ceil() as u64
    }

    /// Step one item, then re-project only its block (the other blocks are
    /// untouched and already feasible).
    fn apply_step(&self, x: &mut Vec<f64>, coord: usize, delta: f64) {
        let kk = (self.k - 1) as usize;
        let b = coord / kk;
        x[coord] += delta;
        let fixed = pav_project(&x[b * kk..(b + 1) * kk]);
        x[b * kk..(b + 1) * kk].copy_from_slice(&fixed);
    }

    fn extension_value_trace(&self, handle: &OracleHandle, x: &[f64]) -> f64 {
        k_extension_trace(handle, x)
    }

    fn as_prefix(&self) -> &dyn PrefixEval {
        &self.prefix
    }
}

/// Minimize over [k]^n: descend on the continuous extension over the block
/// box, then round the averaged iterate along its chain.
pub fn kgrid_solve(
    handle: &OracleHandle,
    cfg: &SolverConfig,
) -> Result<SolveResult, OracleError> {
    if cfg.budget.is_some() {
        handle.set_budget(cfg.budget);
    }
    let n = handle.n();
    let k = handle.k();
    let domain = GridDomain::new(n, k);
    let m = grid_items(n, k);
    let order0: Vec<u32> = (0..m as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let raw = match k_dense_subgradient(handle, &order0) {
        Ok(g0) => {
            let seed = DenseSeed::from_dense(&g0);
            run_psgd(handle, &domain, &seed, order0, cfg, &mut rng)?
        }
        Err(OracleError::BudgetExhausted { .. }) => RawSolve {
            x_bar: vec![0.0; m],
            iterations_run: 0,
            t_planned: 0,
            eta: 0.0,
            truncated: true,
            trace: Vec::new(),
            iterates: cfg.record_iterates.then(|| vec![vec![0.0; m]]),
        },
        Err(e) => return Err(e),
    };

    let mut truncated = raw.truncated;
    let (levels, value) = if truncated {
        k_round_trace(handle, &raw.x_bar)
    } else {
        match k_round(handle, &raw.x_bar) {
            Ok(r) => r,
            Err(OracleError::BudgetExhausted { .. }) => {
                truncated = true;
                k_round_trace(handle, &raw.x_bar)
            }
            Err(e) => return Err(e),
        }
    };

    Ok(SolveResult {
        x_bar: raw.x_bar,
        rounded: RoundedPoint::Grid(levels),
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
