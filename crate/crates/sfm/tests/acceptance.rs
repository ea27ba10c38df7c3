//! Acceptance gate: one integration test per shipped guarantee. Each test
//! prints a single `ACCEPTANCE <n>: … PASS` line when it holds (visible with
//! `--nocapture`); tolerances are pinned as constants next to each check.
//! Audit values (dense subgradients, extension values, exact minima) are
//! recomputed from raw oracle tables by independent code in this file, never
//! through the library routines they are checking.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sfm::continuous::{continuous_solve, neg_quadratic, separable_quadratic};
use sfm::harness::{
    amplify, family_ccard, family_coverage, family_cut, family_cut_integer, family_grid,
    family_planted,
};
use sfm::lovasz::{dense_subgradient, interval_sum, lovasz_eval};
use sfm::multilevel::{
    embed_grid_point, grid_items, k_consistent_permutation, k_dense_subgradient,
    k_extension_eval, k_interval_sum, kgrid_solve,
};
use sfm::oracle::{
    bruteforce_min, levels_to_set, make_grid_instance, set_levels, OracleHandle,
    SubmodularInstance,
};
use sfm::sampler::{process, BoxPrefix};
use sfm::sgd::{
    nu2, pav_project, project_sparse_polytope, segment_chain, sfm_solve, RoundedPoint,
    SolverConfig,
};
use sfm::sparse::{find_perm, sparse_sfm, FIND_PERM_C_ITER};

/// Tolerance for checks that are exact up to float rounding.
const EXACT_TOL: f64 = 1e-12;
/// Slack for inequalities between exactly-computed float quantities.
const FLOAT_SLACK: f64 = 1e-9;
/// Statistical acceptance band in standard errors.
const SE_MULT: f64 = 4.0;

// ---------------------------------------------------------------------------
// Independent audit helpers (raw oracle values only).

fn audit_order(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).unwrap().then(a.cmp(&b)));
    order
}

/// Dense extension subgradient at x from raw (unnormalized) oracle values;
/// the normalization offset cancels in the differences.
fn audit_dense(inst: &SubmodularInstance, x: &[f64]) -> Vec<f64> {
    let n = inst.n;
    let mut g = vec![0.0; n];
    let mut levels = vec![1u32; n];
    let mut prev = inst.value(&levels);
    for &j in &audit_order(x) {
        levels[j] = 2;
        let cur = inst.value(&levels);
        g[j] = cur - prev;
        prev = cur;
    }
    g
}

/// Extension value at x in telescoping (difference) form from raw oracle
/// values; equals the extension of the normalized function.
fn audit_extension(inst: &SubmodularInstance, x: &[f64]) -> f64 {
    let n = inst.n;
    let mut levels = vec![1u32; n];
    let mut prev = inst.value(&levels);
    let mut total = 0.0;
    for &j in &audit_order(x) {
        levels[j] = 2;
        let cur = inst.value(&levels);
        total += (cur - prev) * x[j];
        prev = cur;
    }
    total
}

/// Advance a level vector through the k^n lattice (all-ones first); returns
/// false after the last point.
fn next_levels(levels: &mut [u32], k: u32) -> bool {
    for pos in (0..levels.len()).rev() {
        if levels[pos] < k {
            levels[pos] += 1;
            for l in &mut levels[pos + 1..] {
                *l = 1;
            }
            return true;
        }
    }
    false
}

fn ceil_log2(v: u64) -> u64 {
    if v <= 1 {
        0
    } else {
        64 - (v - 1).leading_zeros() as u64
    }
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_worked_example_grid_extension() {
    let start = Instant::now();
    // 2 coordinates, 3 levels, values tabulated with the last coordinate
    // fastest; the extension at blocks (0.6, 0.3), (0.5, 0.1) is 0.7.
    let inst =
        make_grid_instance(2, 3, &[0.0, 1.0, 2.0, 1.0, 2.0, 2.0, 0.0, 1.0, 0.0]).unwrap();
    let handle = OracleHandle::new(inst);
    let x = [0.6, 0.3, 0.5, 0.1];
    let value = k_extension_eval(&handle, &x).unwrap();
    assert!(
        (value - 0.7).abs() <= EXACT_TOL,
        "extension value {value}, expected 0.7"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 1: worked-example grid extension = 0.7 within 1e-12 ({elapsed:?}) PASS");
}

#[test]
fn acceptance_02_segment_chain_matches_binary_counter() {
    assert_eq!(segment_chain(11), vec![11, 10, 8, 0]);
    println!("ACCEPTANCE 2: segment_chain(11) = [11, 10, 8, 0] PASS");
}

#[test]
fn acceptance_03_interval_sums_and_extension_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);

    // 5000 box triples: two-call interval sums vs dense partial sums, on
    // arbitrary (not necessarily submodular) tables — the identity is pure
    // telescoping.
    for _ in 0..5000 {
        let n = rng.gen_range(4..=8);
        let values: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let inst = make_grid_instance(n, 2, &values).unwrap();
        let handle = OracleHandle::new(inst);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let g = dense_subgradient(&handle, &perm).unwrap();
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(a..n);
        let direct: f64 = (a..=b).map(|i| g.values[perm[i] as usize]).sum();
        let fast = interval_sum(&handle, &perm, a, b).unwrap();
        assert!(
            (direct - fast).abs() <= EXACT_TOL,
            "box interval [{a},{b}] n={n}: dense {direct} vs interval {fast}"
        );
    }

    // 5000 grid triples.
    for _ in 0..5000 {
        let n = rng.gen_range(2..=3);
        let k = rng.gen_range(3..=5) as u32;
        let points = (k as usize).pow(n as u32);
        let values: Vec<f64> = (0..points).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let inst = make_grid_instance(n, k, &values).unwrap();
        let handle = OracleHandle::new(inst);
        let m = grid_items(n, k);
        let mut perm: Vec<u32> = (0..m as u32).collect();
        for i in (1..m).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let g = k_dense_subgradient(&handle, &perm).unwrap();
        let a = rng.gen_range(0..m);
        let b = rng.gen_range(a..m);
        let direct: f64 = (a..=b).map(|i| g[perm[i] as usize]).sum();
        let fast = k_interval_sum(&handle, &perm, a, b).unwrap();
        assert!(
            (direct - fast).abs() <= EXACT_TOL,
            "grid interval [{a},{b}] n={n} k={k}: dense {direct} vs interval {fast}"
        );
    }

    // Extension property on the box: agrees with f at every indicator
    // vector, exhaustively at n = 10.
    let n = 10;
    let values: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let inst = make_grid_instance(n, 2, &values).unwrap();
    let handle = OracleHandle::new(inst.clone());
    let bottom = inst.value(&vec![1u32; n]);
    for mask in 0..(1u32 << n) {
        let members: Vec<u32> = (0..n as u32).filter(|i| mask >> i & 1 == 1).collect();
        let x: Vec<f64> = (0..n as u32)
            .map(|i| if members.contains(&i) { 1.0 } else { 0.0 })
            .collect();
        let ext = lovasz_eval(&handle, &x).unwrap();
        let f = inst.value(&set_levels(n, &members)) - bottom;
        assert!(
            (ext - f).abs() <= EXACT_TOL,
            "indicator mask {mask}: extension {ext} vs f {f}"
        );
    }

    // Extension property on the grid: agrees with f at every embedded
    // lattice point, exhaustively over 3^8 = 6561 points.
    let (n, k) = (8usize, 3u32);
    let points = (k as usize).pow(n as u32);
    let values: Vec<f64> = (0..points).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let inst = make_grid_instance(n, k, &values).unwrap();
    let handle = OracleHandle::new(inst.clone());
    let bottom = inst.value(&vec![1u32; n]);
    let mut levels = vec![1u32; n];
    loop {
        let x = embed_grid_point(&levels, k);
        let ext = k_extension_eval(&handle, &x).unwrap();
        let f = inst.value(&levels) - bottom;
        assert!(
            (ext - f).abs() <= EXACT_TOL,
            "levels {levels:?}: extension {ext} vs f {f}"
        );
        if !next_levels(&mut levels, k) {
            break;
        }
    }

    println!(
        "ACCEPTANCE 3: 10^4 interval-sum identities and exhaustive extension property \
         within 1e-12 PASS"
    );
}

#[test]
fn acceptance_04_subgradient_l1_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(4004);

    // 500 integer-weight cut instances (set case): ‖g‖₁ ≤ 3M for any chain,
    // with M = max |f| measured by scanning all raw values.
    for trial in 0..500u64 {
        let n = rng.gen_range(4..=9);
        let (inst, _) = family_cut_integer(n, 0.5, 3, 40_000 + trial);
        let bottom = inst.value(&vec![1u32; n]);
        let mut m = 0.0f64;
        for mask in 0..(1u32 << n) {
            let members: Vec<u32> = (0..n as u32).filter(|i| mask >> i & 1 == 1).collect();
            m = m.max((inst.value(&set_levels(n, &members)) - bottom).abs());
        }
        let handle = OracleHandle::new(inst);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let g = dense_subgradient(&handle, &perm).unwrap();
        assert!(
            g.l1() <= 3.0 * m + FLOAT_SLACK,
            "cut trial {trial}: l1 {} exceeds 3M = {}",
            g.l1(),
            3.0 * m
        );
    }

    // 500 integer grid instances: ‖g‖₁ ≤ 4M(k−1) for the consistent
    // permutation of a block-monotone point.
    for trial in 0..500u64 {
        let k = rng.gen_range(3..=4) as u32;
        let n = 3usize;
        let kk = (k - 1) as usize;
        let inst = family_grid(n, k, 41_000 + trial);
        let bottom = inst.value(&vec![1u32; n]);
        let mut m = 0.0f64;
        let mut levels = vec![1u32; n];
        loop {
            m = m.max((inst.value(&levels) - bottom).abs());
            if !next_levels(&mut levels, k) {
                break;
            }
        }
        let handle = OracleHandle::new(inst);
        let mut x = vec![0.0f64; n * kk];
        for block in x.chunks_mut(kk) {
            for v in block.iter_mut() {
                *v = rng.gen::<f64>();
            }
            block.sort_by(|a, b| b.partial_cmp(a).unwrap());
        }
        let perm = k_consistent_permutation(n, k, &x);
        let g = k_dense_subgradient(&handle, &perm).unwrap();
        let l1: f64 = g.iter().map(|v| v.abs()).sum();
        assert!(
            l1 <= 4.0 * m * (k - 1) as f64 + FLOAT_SLACK,
            "grid trial {trial}: l1 {l1} exceeds 4M(k-1) = {}",
            4.0 * m * (k - 1) as f64
        );
    }

    println!("ACCEPTANCE 4: l1 bounds 3M (set) and 4M(k-1) (grid) over 10^3 instances PASS");
}

#[test]
fn acceptance_05_sampler_unbiased_sparse_and_metered() {
    const PAIRS: usize = 200;
    const SAMPLES: usize = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5005);

    for pair in 0..PAIRS {
        let n = [6, 8, 10][pair % 3];
        let inst = if pair % 2 == 0 {
            family_coverage(n, 50_000 + pair as u64)
        } else {
            family_cut_integer(n, 0.5, 2, 51_000 + pair as u64).0
        };
        let handle = OracleHandle::new(inst.clone());

        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut y = x.clone();
        let moves = rng.gen_range(1..=4usize);
        let mut moved: Vec<usize> = Vec::new();
        while moved.len() < moves {
            let c = rng.gen_range(0..n);
            if !moved.contains(&c) {
                moved.push(c);
                y[c] = rng.gen::<f64>();
            }
        }

        let exact: Vec<f64> = audit_dense(&inst, &y)
            .iter()
            .zip(audit_dense(&inst, &x))
            .map(|(a, b)| a - b)
            .collect();
        let l1_diff: f64 = exact.iter().map(|v| v.abs()).sum();

        let before = handle.calls();
        let mut sampler = process(&handle, &x, &y).unwrap();
        let process_calls = handle.calls() - before;
        assert!(
            process_calls <= 16 * moves as u64 + 8,
            "pair {pair}: process used {process_calls} calls for {moves} moves"
        );

        let ev = BoxPrefix { n };
        let sample_cap = 4 * ceil_log2(n as u64) + 4;
        let mut sums = vec![0.0f64; n];
        let mut sumsq = vec![0.0f64; n];
        for _ in 0..SAMPLES {
            let before = handle.calls();
            let est = sampler.sample(&handle, &ev, &mut rng).unwrap();
            let used = handle.calls() - before;
            assert!(used <= sample_cap, "pair {pair}: sample used {used} calls");
            assert!(est.nnz() <= 1, "estimate not 1-sparse");
            if let Some(&(c, v)) = est.entries.first() {
                assert!(
                    v.abs() <= 2.0 * l1_diff + FLOAT_SLACK,
                    "pair {pair}: |z| = {} exceeds 2*l1 = {}",
                    v.abs(),
                    2.0 * l1_diff
                );
                sums[c as usize] += v;
                sumsq[c as usize] += v * v;
            }
        }
        // Empirical-Bernstein band: 4 standard errors plus an absolute term
        // covering coordinates whose sampling mass is so small that 10^5
        // draws may never hit them (estimator range is 2·l1_diff).
        let bernstein = 8.0 * 2.0 * l1_diff / SAMPLES as f64;
        for j in 0..n {
            let mean = sums[j] / SAMPLES as f64;
            let var = (sumsq[j] / SAMPLES as f64 - mean * mean).max(0.0);
            let se = (var / SAMPLES as f64).sqrt();
            assert!(
                (mean - exact[j]).abs() <= SE_MULT * se + bernstein + EXACT_TOL,
                "pair {pair} coord {j}: mean {mean} vs exact {} (se {se})",
                exact[j]
            );
        }
    }

    println!(
        "ACCEPTANCE 5: {PAIRS} pairs x {SAMPLES} samples unbiased within 4 SE, 1-sparse, \
         norm-capped, metered PASS"
    );
}

/// Iteration-count multiplier for the convergence-quality runs. `c_t` is
/// the declared squared second-moment constant of the 1-sparse estimates:
/// the solver runs T = c_t·n/ε² iterations at the matching step size, and
/// the two-term descent bound then puts the expected gap at
/// ε·(1/4 + V/(2·c_t)) for the true second moment V. Collapsed sums of
/// segment estimates carry an extra ~log T factor over the squared ℓ₁
/// norm of the exact subgradients they average to; measured worst-case
/// gaps across these families shrink below ε once c_t clears ~150
/// (concave-of-cardinality at n = 10 is the binding case), so the gate
/// runs at 250 for margin.
const QUALITY_C_T: f64 = 250.0;

#[test]
fn acceptance_06_convergence_quality_three_families() {
    const SEEDS: u64 = 50;
    let mut worst_margin = f64::NEG_INFINITY;

    for family in ["cut", "ccard", "coverage"] {
        for idx in 0..10u64 {
            let n = 4 + (idx as usize) % 7; // cycles through 4..=10
            let inst = match family {
                "cut" => family_cut(n, 0.5, 60_000 + idx),
                "ccard" => family_ccard(n, 61_000 + idx),
                _ => family_coverage(n, 62_000 + idx),
            };
            let (_, fmin) = bruteforce_min(&inst).unwrap();
            for eps in [0.1, 0.2] {
                let mut audits = Vec::with_capacity(SEEDS as usize);
                for seed in 0..SEEDS {
                    let handle = OracleHandle::new(inst.clone());
                    let mut cfg = SolverConfig::new(eps, 600_000 + seed);
                    cfg.c_t = QUALITY_C_T;
                    let res = sfm_solve(&handle, &cfg).unwrap();
                    assert!(!res.truncated);
                    let ext = audit_extension(&inst, &res.x_bar);
                    // Rounding along the chain can only improve on the
                    // extension value.
                    assert!(
                        res.value <= ext + FLOAT_SLACK,
                        "{family} idx {idx} eps {eps} seed {seed}: rounded {} above \
                         extension {ext}",
                        res.value
                    );
                    audits.push(ext);
                }
                let (mean, se) = mean_and_se(&audits);
                let margin = mean - (fmin + eps + SE_MULT * se);
                worst_margin = worst_margin.max(margin);
                assert!(
                    margin <= 0.0,
                    "{family} idx {idx} n {n} eps {eps}: mean {mean} vs min {fmin} + {eps} \
                     (se {se})"
                );
            }
        }
    }

    println!(
        "ACCEPTANCE 6: mean extension value within eps of brute-force min across 3 families \
         (worst margin {worst_margin:.4}) PASS"
    );
}

#[test]
fn acceptance_07_oracle_call_scaling() {
    // Fit calls = a · n^p on concave-of-cardinality instances at eps = 0.2.
    //
    // Known failure, kept faithful rather than tuned around: the measured
    // per-iteration oracle cost is ≈ 2.6 + 3.5·log₂ n (amortized
    // tile-boundary processing plus cold bisections, both of which need the
    // log₂ n factor for unbiased mass-proportional sampling), and with
    // T ∝ n the totals grow as n·log n. A pure n·log n curve regressed as
    // a·n^p over exactly {8, 16, 32, 64} lands at p ≈ 1.33 no matter the
    // coefficients, so the p ≤ 1.25 gate below fails at ≈ 1.34. Hitting the
    // gate would take an n-independent additive cost ≥ 1.4× the log
    // coefficient — i.e. deliberately inflated calls — or fit sizes large
    // enough that the log factor flattens.
    let sizes = [8usize, 16, 32, 64];
    let mut log_n = Vec::new();
    let mut log_calls = Vec::new();
    let mut measured = Vec::new();
    for &n in &sizes {
        let mut total = 0u64;
        const RUNS: u64 = 3;
        for r in 0..RUNS {
            let inst = family_ccard(n, 70_000 + r);
            let handle = OracleHandle::new(inst);
            let cfg = SolverConfig::new(0.2, 700_000 + r);
            let res = sfm_solve(&handle, &cfg).unwrap();
            total += res.oracle_calls + res.setup_calls;
        }
        measured.push((n, total / RUNS));
        log_n.push((n as f64).ln());
        log_calls.push((total as f64 / RUNS as f64).ln());
    }
    let xm = log_n.iter().sum::<f64>() / log_n.len() as f64;
    let ym = log_calls.iter().sum::<f64>() / log_calls.len() as f64;
    let p = log_n
        .iter()
        .zip(&log_calls)
        .map(|(x, y)| (x - xm) * (y - ym))
        .sum::<f64>()
        / log_n.iter().map(|x| (x - xm) * (x - xm)).sum::<f64>();
    assert!(
        p <= 1.25,
        "fitted call-scaling exponent {p} (mean calls per size: {measured:?}; \
         consistent with n·log n — see the comment at the top of this test)"
    );

    // Exact schedule identity: the total prepared-segment span up to T stays
    // within T (⌊log₂ T⌋ + 1), checked at every T up to 2^20.
    let mut sum: u64 = 0;
    for i in 1u64..=(1 << 20) {
        sum += 1 << nu2(i);
        let bound = i * ((63 - i.leading_zeros() as u64) + 1);
        assert!(sum <= bound, "counter identity fails at T = {i}: {sum} > {bound}");
    }

    println!(
        "ACCEPTANCE 7: call scaling exponent p = {p:.3} <= 1.25; counter identity to 2^20 PASS"
    );
}

#[test]
fn acceptance_08_sparse_exactness_on_planted_instances() {
    const TRIALS: u64 = 20;
    let cases: Vec<(usize, usize)> = vec![
        (8, 1),
        (8, 2),
        (10, 1),
        (10, 2),
        (12, 1),
        (12, 2),
        (13, 1),
        (13, 2),
        (14, 1),
        (14, 2),
        (16, 1),
        (16, 2),
    ];
    let mut exact_hits = 0usize;
    for (case, &(n, s)) in cases.iter().enumerate() {
        let (inst, planted, m) = family_planted(n, s, 80_000 + case as u64);
        assert!(m <= 3.0);
        let (argmin, fmin) = bruteforce_min(&inst).unwrap();
        assert_eq!(levels_to_set(&argmin), planted);
        let amp = amplify(TRIALS, 800_000 + 1000 * case as u64, |seed| {
            let handle = OracleHandle::new(inst.clone());
            let cfg = SolverConfig::new(0.5, seed);
            sparse_sfm(&handle, s as u32, m, &cfg)
        })
        .unwrap();
        if amp.best.value == fmin {
            exact_hits += 1;
        }

        // Audited discovery rounds: the sparse starting subgradient must
        // match a dense recomputation exactly.
        for audit_seed in 0..2u64 {
            let handle = OracleHandle::new(inst.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(880_000 + 10 * case as u64 + audit_seed);
            let fp = find_perm(&handle, m, FIND_PERM_C_ITER, &mut rng).unwrap();
            assert!(fp.audit(&handle).unwrap(), "case {case} audit {audit_seed}");
        }
    }
    let needed = (cases.len() as f64 * 0.9).ceil() as usize;
    assert!(
        exact_hits >= needed,
        "only {exact_hits}/{} instances recovered exactly (need {needed})",
        cases.len()
    );
    println!(
        "ACCEPTANCE 8: {exact_hits}/{} planted instances solved exactly; audited discovery \
         rounds match dense recomputation PASS",
        cases.len()
    );
}

#[test]
fn acceptance_09_projections_match_grid_search() {
    const ARG_TOL: f64 = 1e-3;
    const OBJ_TOL: f64 = 1e-6;
    const STEP: f64 = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(9009);

    // Closed-form example: mass 2.2 shrinks by λ = 0.4 onto the simplex face.
    let (z, _) = project_sparse_polytope(&[0.5, 0.9, 0.8], 1.0);
    for (got, want) in z.iter().zip([0.1, 0.5, 0.4]) {
        assert!((got - want).abs() <= FLOAT_SLACK, "projection {z:?}");
    }

    let steps = (1.0 / STEP) as usize;
    for case in 0..12 {
        let y = [rng.gen_range(-0.5..2.0), rng.gen_range(-0.5..2.0)];

        // Sparse-polytope projection vs exhaustive grid search at s = 1.
        let (mine, _) = project_sparse_polytope(&y, 1.0);
        let mut best = (f64::INFINITY, [0.0f64; 2]);
        for i in 0..=steps {
            let a = i as f64 * STEP;
            for j in 0..=steps {
                let b = j as f64 * STEP;
                if a + b > 1.0 + 1e-15 {
                    break;
                }
                let obj = (a - y[0]).powi(2) + (b - y[1]).powi(2);
                if obj < best.0 {
                    best = (obj, [a, b]);
                }
            }
        }
        let my_obj = (mine[0] - y[0]).powi(2) + (mine[1] - y[1]).powi(2);
        assert!(
            my_obj <= best.0 + OBJ_TOL,
            "case {case}: obj {my_obj} vs grid {}",
            best.0
        );
        for d in 0..2 {
            assert!(
                (mine[d] - best.1[d]).abs() <= ARG_TOL + FLOAT_SLACK,
                "case {case}: arg {mine:?} vs grid {:?}",
                best.1
            );
        }

        // Nonincreasing-block projection vs exhaustive grid search over
        // 1 ≥ a ≥ b ≥ 0.
        let mine = pav_project(&y);
        let mut best = (f64::INFINITY, [0.0f64; 2]);
        for i in 0..=steps {
            let a = i as f64 * STEP;
            for j in 0..=i {
                let b = j as f64 * STEP;
                let obj = (a - y[0]).powi(2) + (b - y[1]).powi(2);
                if obj < best.0 {
                    best = (obj, [a, b]);
                }
            }
        }
        let my_obj = (mine[0] - y[0]).powi(2) + (mine[1] - y[1]).powi(2);
        assert!(
            my_obj <= best.0 + OBJ_TOL,
            "case {case}: pav obj {my_obj} vs grid {}",
            best.0
        );
        for d in 0..2 {
            assert!(
                (mine[d] - best.1[d]).abs() <= ARG_TOL + FLOAT_SLACK,
                "case {case}: pav arg {mine:?} vs grid {:?}",
                best.1
            );
        }
    }

    println!(
        "ACCEPTANCE 9: projections match 1e-3 grid search within 1e-3 (argument) and \
         1e-6 (objective) PASS"
    );
}

/// Fixed iteration budget for the continuous checks: the default count at
/// the discretized accuracy is tens of millions (built for the worst case),
/// far past desk scale, so the gate pins the budget and verifies the quality
/// thresholds directly.
const CONTINUOUS_T: u64 = 50_000;

#[test]
fn acceptance_10_continuous_minimization_quality() {
    // f(x) = −(x₁+x₂)²/4 on [0,1]²: L = 2, minimum −1 at (1,1).
    const SEEDS: u64 = 50;
    let mut values = Vec::with_capacity(SEEDS as usize);
    for seed in 0..SEEDS {
        let obj = neg_quadratic(2);
        let mut cfg = SolverConfig::new(0.25, 100_000 + seed);
        cfg.t_override = Some(CONTINUOUS_T);
        let res = continuous_solve(&obj, &cfg).unwrap();
        assert!(!res.grid.truncated);
        values.push(res.value);
    }
    let (mean, se) = mean_and_se(&values);
    assert!(
        mean <= -1.0 + 0.25 + SE_MULT * se,
        "neg-quadratic mean {mean} (se {se})"
    );

    // Separable quadratic, L = 1: the discretized optimum is 0 (the center
    // is a grid point), so the returned value must be within the target gap
    // plus one grid cell of slack.
    for seed in 0..5u64 {
        let obj = separable_quadratic(2);
        let mut cfg = SolverConfig::new(0.25, 101_000 + seed);
        cfg.t_override = Some(20_000);
        let res = continuous_solve(&obj, &cfg).unwrap();
        let bound = 1.0 / res.k as f64 + 0.25;
        assert!(
            res.value <= bound,
            "separable value {} vs bound {bound}",
            res.value
        );
    }

    println!(
        "ACCEPTANCE 10: continuous neg-quadratic mean {mean:.4} <= -0.75 + 4 SE; separable \
         within one cell + eps PASS"
    );
}

#[test]
fn acceptance_11_k2_grid_solver_degenerates_to_set_solver() {
    for seed in 0..3u64 {
        let inst = family_coverage(7, 110_000 + seed);
        let mut cfg = SolverConfig::new(0.2, 1_100_000 + seed);
        cfg.t_override = Some(600);
        cfg.record_iterates = true;

        let h_box = OracleHandle::new(inst.clone());
        let box_res = sfm_solve(&h_box, &cfg).unwrap();
        let h_grid = OracleHandle::new(inst);
        let grid_res = kgrid_solve(&h_grid, &cfg).unwrap();

        // Bitwise-identical iterate traces, averaged points, and call counts.
        assert_eq!(box_res.iterates, grid_res.iterates, "seed {seed}");
        assert_eq!(box_res.x_bar, grid_res.x_bar, "seed {seed}");
        assert_eq!(box_res.value, grid_res.value, "seed {seed}");
        assert_eq!(box_res.oracle_calls, grid_res.oracle_calls, "seed {seed}");
        match (&box_res.rounded, &grid_res.rounded) {
            (RoundedPoint::Set(set), RoundedPoint::Grid(levels)) => {
                assert_eq!(set, &levels_to_set(levels), "seed {seed}");
            }
            other => panic!("unexpected rounded kinds {other:?}"),
        }
    }
    println!("ACCEPTANCE 11: k = 2 grid solve bitwise-matches the set solve PASS");
}
