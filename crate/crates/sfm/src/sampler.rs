//! Sparse unbiased estimators for subgradient differences.
//!
//! A segment between two iterates x <= y (coordinatewise, after splitting at
//! the midpoint w = max(x, y)) has a subgradient difference g(y) − g(x) whose
//! entries can be summed over any run that is contiguous in both endpoint
//! permutations with just two evaluations per endpoint. Preprocessing splits
//! the positions into such runs ("tiles"), with every moved coordinate forced
//! into its own singleton tile; within a tile all entries of the difference
//! share one sign, so tile masses add up with no cancellation and a
//! importance-sampled bisection can locate a single coordinate with O(log)
//! evaluations. The returned estimates are 1-sparse and unbiased for the
//! difference, with norm exactly twice the chosen half's total mass.

use std::rc::Rc;

use rand::Rng;

use crate::lovasz::consistent_permutation;
use crate::oracle::{OracleError, OracleHandle};

/// A sparse vector with distinct coordinates and nonzero values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseEstimate {
    pub entries: Vec<(u32, f64)>,
}

impl SparseEstimate {
    pub fn zero() -> Self {
        SparseEstimate { entries: Vec::new() }
    }

    pub fn singleton(coord: u32, value: f64) -> Self {
        if value == 0.0 {
            return Self::zero();
        }
        SparseEstimate {
            entries: vec![(coord, value)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn l1(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.abs()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.entries
            .iter()
            .map(|(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Add `other` into `self`, combining equal coordinates and dropping
    /// entries that cancel exactly.
    pub fn accumulate(&mut self, other: &SparseEstimate) {
        for &(c, v) in &other.entries {
            match self.entries.iter_mut().find(|(e, _)| *e == c) {
                Some((_, slot)) => *slot += v,
                None => self.entries.push((c, v)),
            }
        }
        self.entries.retain(|(_, v)| *v != 0.0);
    }

    pub fn to_dense(&self, m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for &(c, v) in &self.entries {
            out[c as usize] += v;
        }
        out
    }
}

/// Evaluate the lattice point induced by a prefix of an item order. Boxes use
/// items = coordinates; grids linearize (block, level) pairs. Implementations
/// must accept any prefix of any permutation of the items.
pub trait PrefixEval {
    fn items(&self) -> usize;
    fn eval_prefix(
        &self,
        handle: &OracleHandle,
        order: &[u32],
        len: usize,
    ) -> Result<f64, OracleError>;
}

/// Prefix evaluation for the unit box: level 2 for items in the prefix.
pub struct BoxPrefix {
    pub n: usize,
}

impl PrefixEval for BoxPrefix {
    fn items(&self) -> usize {
        self.n
    }

    fn eval_prefix(
        &self,
        handle: &OracleHandle,
        order: &[u32],
        len: usize,
    ) -> Result<f64, OracleError> {
        let mut levels = vec![1u32; self.n];
        for &c in &order[..len] {
            levels[c as usize] = 2;
        }
        handle.evaluate(&levels)
    }
}

/// A run of positions contiguous in both endpoint orders, holding the same
/// items in the same sequence; `mass` is the sum of the subgradient
/// difference over its items.
#[derive(Clone, Debug)]
struct Tile {
    lo_start: u32,
    hi_start: u32,
    len: u32,
    mass: f64,
}

struct Half {
    order_lo: Rc<Vec<u32>>,
    order_hi: Rc<Vec<u32>>,
    tiles: Vec<Tile>,
    /// Cumulative |mass| over tiles, for the proportional draw.
    cum_abs: Vec<f64>,
    total_abs: f64,
    /// Cached prefix values of f along each endpoint order, indexed by prefix
    /// length. Seeded with tile boundaries, extended lazily by bisection.
    pf_lo: Vec<Option<f64>>,
    pf_hi: Vec<Option<f64>>,
}

impl Half {
    fn empty(order: Rc<Vec<u32>>) -> Self {
        Half {
            order_lo: order.clone(),
            order_hi: order,
            tiles: Vec::new(),
            cum_abs: Vec::new(),
            total_abs: 0.0,
            pf_lo: Vec::new(),
            pf_hi: Vec::new(),
        }
    }
}

/// Preprocessed segment between two iterates, ready to emit 1-sparse
/// estimates of g(upper order) − g(lower order).
pub struct SegmentSampler {
    halves: [Half; 2],
    items: usize,
    /// Metered evaluations spent by preprocessing.
    pub process_calls: u64,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn build_half(
    handle: &OracleHandle,
    ev: &dyn PrefixEval,
    order_a: Rc<Vec<u32>>,
    order_b: Rc<Vec<u32>>,
    mover: &[bool],
) -> Result<(Half, u64), OracleError> {
    let m = order_a.len();
    if !mover.iter().any(|&b| b) {
        debug_assert_eq!(*order_a, *order_b);
        return Ok((Half::empty(order_a), 0));
    }
    let mut pos_b = vec![0u32; m];
    for (p, &item) in order_b.iter().enumerate() {
        pos_b[item as usize] = p as u32;
    }

    let mut tiles: Vec<Tile> = Vec::new();
    for (p, &item) in order_a.iter().enumerate() {
        let start_new = match tiles.last() {
            None => true,
            Some(t) => {
                let prev = order_a[p - 1] as usize;
                mover[item as usize]
                    || mover[prev]
                    || pos_b[item as usize] != t.hi_start + (p as u32 - t.lo_start)
            }
        };
        if start_new {
            tiles.push(Tile {
                lo_start: p as u32,
                hi_start: pos_b[item as usize],
                len: 1,
                mass: 0.0,
            });
        } else {
            tiles.last_mut().unwrap().len += 1;
        }
    }

    // Prefix values at every tile boundary: tiles are contiguous in both
    // orders, so each side needs exactly tiles+1 evaluations.
    let mut pf_lo: Vec<Option<f64>> = vec![None; m + 1];
    let mut pf_hi: Vec<Option<f64>> = vec![None; m + 1];
    let mut evals: u64 = 0;
    {
        let mut need_lo: Vec<usize> = tiles.iter().map(|t| t.lo_start as usize).collect();
        need_lo.push(m);
        for len in need_lo {
            if pf_lo[len].is_none() {
                pf_lo[len] = Some(ev.eval_prefix(handle, &order_a, len)?);
                evals += 1;
            }
        }
        let mut need_hi: Vec<usize> = tiles
            .iter()
            .flat_map(|t| [t.hi_start as usize, (t.hi_start + t.len) as usize])
            .collect();
        need_hi.sort_unstable();
        need_hi.dedup();
        for len in need_hi {
            if pf_hi[len].is_none() {
                pf_hi[len] = Some(ev.eval_prefix(handle, &order_b, len)?);
                evals += 1;
            }
        }
    }

    let mut total_abs = 0.0;
    let mut cum_abs = Vec::with_capacity(tiles.len());
    for t in &mut tiles {
        let la = t.lo_start as usize;
        let lb = (t.lo_start + t.len) as usize;
        let ha = t.hi_start as usize;
        let hb = (t.hi_start + t.len) as usize;
        t.mass = (pf_hi[hb].unwrap() - pf_hi[ha].unwrap())
            - (pf_lo[lb].unwrap() - pf_lo[la].unwrap());
        total_abs += t.mass.abs();
        cum_abs.push(total_abs);
    }

    Ok((
        Half {
            order_lo: order_a,
            order_hi: order_b,
            tiles,
            cum_abs,
            total_abs,
            pf_lo,
            pf_hi,
        },
        evals,
    ))
}

impl SegmentSampler {
    /// Preprocess the segment between points x and y whose consistent orders
    /// are already known. Splits at w = max(x, y): the first half carries the
    /// coordinates that increase, the second the ones that decrease, so each
    /// half's difference is sign-constant off its own movers. Costs at most
    /// 4k + 8 evaluations for a difference with k nonzero coordinates.
    pub fn from_points(
        handle: &OracleHandle,
        ev: &dyn PrefixEval,
        x: &[f64],
        y: &[f64],
        order_x: Rc<Vec<u32>>,
        order_y: Rc<Vec<u32>>,
    ) -> Result<Self, OracleError> {
        let m = x.len();
        assert_eq!(y.len(), m);
        let mut up = vec![false; m];
        let mut down = vec![false; m];
        let mut moved = 0u64;
        for i in 0..m {
            if y[i] > x[i] {
                up[i] = true;
                moved += 1;
            } else if y[i] < x[i] {
                down[i] = true;
                moved += 1;
            }
        }
        let order_w: Rc<Vec<u32>> = if up.iter().any(|&b| b) {
            let w: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| a.max(b)).collect();
            Rc::new(consistent_permutation(&w))
        } else {
            order_x.clone()
        };
        let (h1, c1) = build_half(handle, ev, order_x, order_w.clone(), &up)?;
        let (h2, c2) = build_half(handle, ev, order_w, order_y, &down)?;
        let calls = c1 + c2;
        assert!(
            calls <= 16 * moved + 8,
            "segment preprocessing used {calls} evaluations for {moved} moved coordinates"
        );
        Ok(SegmentSampler {
            halves: [h1, h2],
            items: m,
            process_calls: calls,
        })
    }

    /// Preprocess a segment specified only by its endpoint permutations and
    /// the set of items that may have moved between them (all other items
    /// keep their relative order). Synthesizes a pair of points with distinct
    /// coordinate values realizing exactly these permutations and defers to
    /// [`SegmentSampler::from_points`].
    pub fn from_permutation_move(
        handle: &OracleHandle,
        ev: &dyn PrefixEval,
        order_x: Rc<Vec<u32>>,
        order_y: Rc<Vec<u32>>,
        moved: &[u32],
    ) -> Result<Self, OracleError> {
        let m = order_x.len();
        let mut mover = vec![false; m];
        for &c in moved {
            mover[c as usize] = true;
        }
        let (xp, yp) = synthesize_pair_points(&order_x, &order_y, &mover);
        Self::from_points(handle, ev, &xp, &yp, order_x, order_y)
    }

    pub fn half_abs_totals(&self) -> [f64; 2] {
        [self.halves[0].total_abs, self.halves[1].total_abs]
    }

    /// Draw one 1-sparse unbiased estimate of the segment's subgradient
    /// difference. Uses at most 4⌈log2 items⌉ + 4 metered evaluations (fewer
    /// once the bisection caches warm up).
    pub fn sample(
        &mut self,
        handle: &OracleHandle,
        ev: &dyn PrefixEval,
        rng: &mut impl Rng,
    ) -> Result<SparseEstimate, OracleError> {
        let calls_before = handle.calls();
        let half = &mut self.halves[rng.gen_range(0..2usize)];
        if half.total_abs == 0.0 {
            return Ok(SparseEstimate::zero());
        }
        let u = rng.gen::<f64>() * half.total_abs;
        let ti = half.cum_abs.partition_point(|&c| c <= u).min(half.tiles.len() - 1);
        let tile = half.tiles[ti].clone();

        let mut off = 0u32;
        let mut len = tile.len;
        let mut mass = tile.mass;
        while len > 1 {
            let left = len / 2;
            let dl = {
                let la = (tile.lo_start + off) as usize;
                let ha = (tile.hi_start + off) as usize;
                let lb = la + left as usize;
                let hb = ha + left as usize;
                if half.pf_lo[lb].is_none() {
                    half.pf_lo[lb] = Some(ev.eval_prefix(handle, &half.order_lo, lb)?);
                }
                if half.pf_hi[hb].is_none() {
                    half.pf_hi[hb] = Some(ev.eval_prefix(handle, &half.order_hi, hb)?);
                }
                (half.pf_hi[hb].unwrap() - half.pf_hi[ha].unwrap())
                    - (half.pf_lo[lb].unwrap() - half.pf_lo[la].unwrap())
            };
            let dr = mass - dl;
            let weight = dl.abs() + dr.abs();
            let go_left = if weight > 0.0 {
                rng.gen::<f64>() * weight < dl.abs()
            } else {
                rng.gen_bool(0.5)
            };
            if go_left {
                len = left;
                mass = dl;
            } else {
                off += left;
                len -= left;
                mass = dr;
            }
        }

        let used = handle.calls() - calls_before;
        let bound = 4 * ceil_log2(self.items as u64) + 4;
        assert!(
            used <= bound,
            "segment sample used {used} evaluations, bound is {bound}"
        );
        let item = half.order_lo[(tile.lo_start + off) as usize];
        Ok(SparseEstimate::singleton(
            item,
            2.0 * half.total_abs * sign(mass),
        ))
    }
}

/// Preprocess the segment between two box points under their consistent
/// permutations.
pub fn process(
    handle: &OracleHandle,
    x: &[f64],
    y: &[f64],
) -> Result<SegmentSampler, OracleError> {
    let ev = BoxPrefix { n: handle.n() };
    let ox = Rc::new(consistent_permutation(x));
    let oy = Rc::new(consistent_permutation(y));
    SegmentSampler::from_points(handle, &ev, x, y, ox, oy)
}

/// Realize a pair of permutations as points with all-distinct coordinate
/// values: the lower point ranks items by `order_x`; in the upper point every
/// non-mover keeps its value and each mover is assigned the midpoint between
/// its already-placed upper neighbor and the next non-mover below it in
/// `order_y`, which keeps the values strictly decreasing along `order_y`.
pub fn synthesize_pair_points(
    order_x: &[u32],
    order_y: &[u32],
    mover: &[bool],
) -> (Vec<f64>, Vec<f64>) {
    let m = order_x.len();
    let mut x = vec![0.0f64; m];
    for (j, &item) in order_x.iter().enumerate() {
        x[item as usize] = (m - j) as f64;
    }
    // next_below[j] = x-value of the first non-mover at position >= j in
    // order_y, or 0 past the end.
    let mut next_below = vec![0.0f64; m + 1];
    for j in (0..m).rev() {
        let item = order_y[j] as usize;
        next_below[j] = if mover[item] {
            next_below[j + 1]
        } else {
            x[item]
        };
    }
    let mut y = x.clone();
    let mut prev = (m + 1) as f64;
    for (j, &item) in order_y.iter().enumerate() {
        let item = item as usize;
        if mover[item] {
            y[item] = 0.5 * (prev + next_below[j + 1]);
        }
        prev = y[item];
    }
    (x, y)
}

/// Cumulative-weight table for the dense-at-start subgradient, drawn by
/// absolute value.
pub struct DenseSeed {
    entries: Vec<(u32, f64)>,
    cum: Vec<f64>,
    pub l1: f64,
}

impl DenseSeed {
    pub fn from_entries(entries: &[(u32, f64)]) -> Self {
        let entries: Vec<(u32, f64)> =
            entries.iter().copied().filter(|(_, v)| *v != 0.0).collect();
        let mut cum = Vec::with_capacity(entries.len());
        let mut total = 0.0;
        for &(_, v) in &entries {
            total += v.abs();
            cum.push(total);
        }
        DenseSeed {
            entries,
            cum,
            l1: total,
        }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        let entries: Vec<(u32, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u32, v))
            .collect();
        Self::from_entries(&entries)
    }
}

/// 1-sparse unbiased estimate of the seed vector: coordinate c with
/// probability |g_c| / ‖g‖₁, value ‖g‖₁·sign(g_c). Zero seeds return the zero
/// estimate without consuming randomness. No oracle calls.
pub fn sample_dense(seed: &DenseSeed, rng: &mut impl Rng) -> SparseEstimate {
    if seed.l1 == 0.0 {
        return SparseEstimate::zero();
    }
    let u = rng.gen::<f64>() * seed.l1;
    let i = seed.cum.partition_point(|&c| c <= u).min(seed.entries.len() - 1);
    let (coord, v) = seed.entries[i];
    SparseEstimate::singleton(coord, seed.l1 * sign(v))
}

/// Collapse a sparse estimate to a 1-sparse one preserving expectation: pick
/// one of the s nonzero entries uniformly and scale it by s. Estimates that
/// are already 0- or 1-sparse are returned unchanged without consuming
/// randomness.
pub fn collapse(g: &SparseEstimate, rng: &mut impl Rng) -> SparseEstimate {
    match g.nnz() {
        0 => SparseEstimate::zero(),
        1 => g.clone(),
        s => {
            let (coord, v) = g.entries[rng.gen_range(0..s)];
            SparseEstimate::singleton(coord, s as f64 * v)
        }
    }
}

pub(crate) fn ceil_log2(v: u64) -> u64 {
    debug_assert!(v > 0);
    64 - (v - 1).leading_zeros() as u64
}
