//! The Lovász extension of a set function and its combinatorial subgradients.
//!
//! A point x in [0,1]^n induces a permutation (coordinates sorted by
//! descending value, ties by ascending index) and a chain of prefix sets; the
//! extension value, the subgradient, and the rounding step below are all
//! prefix walks along that chain. The subgradient depends on x only through
//! the permutation, which is what makes interval queries and the segment
//! samplers possible: any contiguous run of the permutation can be summed
//! with two evaluations.

use crate::oracle::{OracleError, OracleHandle};

pub type Permutation = Vec<u32>;

/// Dense subgradient of the extension together with the permutation that
/// produced it: `values[c]` is the marginal gain of coordinate `c` along the
/// prefix chain of `perm`.
#[derive(Clone, Debug)]
pub struct DenseSubgradient {
    pub values: Vec<f64>,
    pub perm: Permutation,
}

impl DenseSubgradient {
    pub fn l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }
}

/// Coordinates of `x` sorted by descending value, ties broken by ascending
/// index. This is the tie rule used everywhere in the crate; two points with
/// equal coordinate values always produce the same permutation.
pub fn consistent_permutation(x: &[f64]) -> Permutation {
    let mut idx: Vec<u32> = (0..x.len() as u32).collect();
    idx.sort_unstable_by(|&a, &b| {
        x[b as usize]
            .partial_cmp(&x[a as usize])
            .expect("coordinate values must not be NaN")
            .then(a.cmp(&b))
    });
    idx
}

fn prefix_levels(n: usize, perm: &[u32], len: usize) -> Vec<u32> {
    let mut levels = vec![1u32; n];
    for &c in &perm[..len] {
        levels[c as usize] = 2;
    }
    levels
}

enum Meter {
    Algorithm,
    Trace,
}

fn eval(handle: &OracleHandle, levels: &[u32], meter: &Meter) -> Result<f64, OracleError> {
    match meter {
        Meter::Algorithm => handle.evaluate(levels),
        Meter::Trace => Ok(handle.evaluate_trace(levels)),
    }
}

fn extension_walk(
    handle: &OracleHandle,
    x: &[f64],
    meter: Meter,
) -> Result<f64, OracleError> {
    let n = x.len();
    let perm = consistent_permutation(x);
    let mut levels = vec![1u32; n];
    let mut prev = eval(handle, &levels, &meter)?;
    let mut total = 0.0;
    for &c in &perm {
        levels[c as usize] = 2;
        let cur = eval(handle, &levels, &meter)?;
        total += (cur - prev) * x[c as usize];
        prev = cur;
    }
    Ok(total)
}

/// Extension value at x: n+1 metered evaluations along the prefix chain.
pub fn lovasz_eval(handle: &OracleHandle, x: &[f64]) -> Result<f64, OracleError> {
    extension_walk(handle, x, Meter::Algorithm)
}

/// Same walk on the trace meter, for diagnostics that must not count as
/// algorithm calls.
pub fn lovasz_eval_trace(handle: &OracleHandle, x: &[f64]) -> f64 {
    extension_walk(handle, x, Meter::Trace).expect("trace walk cannot hit the budget")
}

/// Dense subgradient for a permutation: n+1 metered evaluations.
pub fn dense_subgradient(
    handle: &OracleHandle,
    perm: &[u32],
) -> Result<DenseSubgradient, OracleError> {
    let n = handle.n();
    assert_eq!(perm.len(), n, "permutation length must equal n");
    let mut levels = vec![1u32; n];
    let mut prev = handle.evaluate(&levels)?;
    let mut values = vec![0.0; n];
    for &c in perm {
        levels[c as usize] = 2;
        let cur = handle.evaluate(&levels)?;
        values[c as usize] = cur - prev;
        prev = cur;
    }
    Ok(DenseSubgradient {
        values,
        perm: perm.to_vec(),
    })
}

/// Sum of subgradient entries over positions `a..=b` (0-based) of `perm`,
/// computed as a difference of two prefix evaluations: exactly 2 metered
/// calls regardless of the interval length.
pub fn interval_sum(
    handle: &OracleHandle,
    perm: &[u32],
    a: usize,
    b: usize,
) -> Result<f64, OracleError> {
    let n = handle.n();
    assert!(a <= b && b < perm.len(), "interval {a}..={b} out of range");
    let hi = handle.evaluate(&prefix_levels(n, perm, b + 1))?;
    let lo = handle.evaluate(&prefix_levels(n, perm, a))?;
    Ok(hi - lo)
}

/// Round a fractional point to the best prefix set of its permutation chain:
/// n+1 metered evaluations, ties to the smallest prefix. The returned value
/// is the metered evaluation of the returned set, and it never exceeds the
/// extension value at `x`.
pub fn round_to_set(
    handle: &OracleHandle,
    x: &[f64],
) -> Result<(Vec<u32>, f64), OracleError> {
    round_walk(handle, x, Meter::Algorithm)
}

/// [`round_to_set`] on the trace meter, used when the algorithm budget is
/// already exhausted but an output must still be produced.
pub fn round_to_set_trace(handle: &OracleHandle, x: &[f64]) -> (Vec<u32>, f64) {
    round_walk(handle, x, Meter::Trace).expect("trace walk cannot hit the budget")
}

fn round_walk(
    handle: &OracleHandle,
    x: &[f64],
    meter: Meter,
) -> Result<(Vec<u32>, f64), OracleError> {
    let n = x.len();
    let perm = consistent_permutation(x);
    let mut levels = vec![1u32; n];
    let mut best = eval(handle, &levels, &meter)?;
    let mut best_len = 0usize;
    for (j, &c) in perm.iter().enumerate() {
        levels[c as usize] = 2;
        let cur = eval(handle, &levels, &meter)?;
        if cur < best {
            best = cur;
            best_len = j + 1;
        }
    }
    let mut members: Vec<u32> = perm[..best_len].to_vec();
    members.sort_unstable();
    Ok((members, best))
}
