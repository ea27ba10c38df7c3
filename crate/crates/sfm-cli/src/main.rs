//! Command-line front end: solve instances from files or generated families,
//! amplify over repeated trials, and emit machine-readable run summaries.
//!
//! Exit codes: 0 on success, 1 when `verify` rejects an instance, 2 on usage
//! or input errors, 3 when an oracle budget cut a solve short.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sfm::continuous::builtin_objective;
use sfm::harness::{
    amplify, family_ccard, family_coverage, family_cut, family_grid, family_planted,
    load_instance, write_trace_csv, RunSummary,
};
use sfm::multilevel::kgrid_solve;
use sfm::oracle::{bruteforce_min, levels_to_set, verify_submodular, SubmodularInstance};
use sfm::sgd::{sfm_solve, SolverConfig};
use sfm::sparse::sparse_sfm;
use sfm::continuous::continuous_solve;

#[derive(Parser)]
#[command(name = "sfm", version, about = "Approximate submodular minimization toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Minimize a set function over all subsets.
    Solve(SolveCmd),
    /// Minimize assuming a sparse minimizer and an integer-valued oracle.
    SparseSolve(SparseCmd),
    /// Minimize a lattice function over {1,…,k}^n.
    KgridSolve(SolveCmd),
    /// Minimize a built-in continuous objective on [0,1]^n.
    ContinuousSolve(ContinuousCmd),
    /// Solve a family across several sizes and report mean cost and value.
    Bench(BenchCmd),
    /// Check submodularity and report the exact minimum (small instances).
    Verify(VerifyCmd),
}

#[derive(Args)]
struct InstanceArgs {
    /// Instance description file (see README for the format).
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,
    /// Generated family: cut, ccard, coverage, planted, grid.
    #[arg(long)]
    family: Option<String>,
    /// Ground-set size for generated families.
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Levels per coordinate (grid family only).
    #[arg(long, default_value_t = 3)]
    k: u32,
    /// Edge density for the cut family.
    #[arg(long, default_value_t = 0.4)]
    density: f64,
    /// Hidden-set size for the planted family.
    #[arg(long, default_value_t = 1)]
    planted: usize,
    /// Seed for the family generator (independent of the solver seed).
    #[arg(long, default_value_t = 0)]
    instance_seed: u64,
}

/// Generated instance plus the planted-set metadata when it exists.
struct LoadedInstance {
    inst: SubmodularInstance,
    m_bound: Option<f64>,
}

impl InstanceArgs {
    fn load(&self) -> Result<LoadedInstance> {
        if let Some(path) = &self.instance {
            let inst = load_instance(path).with_context(|| format!("loading {}", path.display()))?;
            return Ok(LoadedInstance { inst, m_bound: None });
        }
        let family = self.family.as_deref().unwrap_or("cut");
        let inst = match family {
            "cut" => LoadedInstance {
                inst: family_cut(self.n, self.density, self.instance_seed),
                m_bound: None,
            },
            "ccard" => LoadedInstance {
                inst: family_ccard(self.n, self.instance_seed),
                m_bound: None,
            },
            "coverage" => {
                if self.n > 20 {
                    bail!("coverage family is tabulated; n must be at most 20");
                }
                LoadedInstance {
                    inst: family_coverage(self.n, self.instance_seed),
                    m_bound: None,
                }
            }
            "planted" => {
                if self.n > 20 {
                    bail!("planted family is tabulated; n must be at most 20");
                }
                let (inst, _, m) = family_planted(self.n, self.planted, self.instance_seed);
                LoadedInstance { inst, m_bound: Some(m) }
            }
            "grid" => {
                let points = (self.k as u64)
                    .checked_pow(self.n as u32)
                    .filter(|&p| p <= 1 << 20);
                if points.is_none() {
                    bail!("grid family is tabulated; need k^n <= 2^20");
                }
                LoadedInstance {
                    inst: family_grid(self.n, self.k, self.instance_seed),
                    m_bound: None,
                }
            }
            other => bail!("unknown family '{other}' (expected cut, ccard, coverage, planted, grid)"),
        };
        Ok(inst)
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Target additive accuracy.
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    /// Solver seed; trial t uses seed + t.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent trials; the best value wins.
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// Oracle-call budget per trial (exit code 3 when exceeded).
    #[arg(long)]
    budget: Option<u64>,
    /// Override the planned iteration count.
    #[arg(long = "T")]
    t: Option<u64>,
    /// Override the step size.
    #[arg(long)]
    eta: Option<f64>,
    /// Multiplier on the default iteration count.
    #[arg(long = "cT", default_value_t = 2.0)]
    c_t: f64,
    /// Write a CSV convergence trace of the winning trial here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Trace stride in iterations (default 100 when --trace is set).
    #[arg(long, default_value_t = 0)]
    trace_every: u64,
    /// Write the JSON summary here instead of stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl SolverArgs {
    fn config(&self, seed: u64) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.eps, seed);
        cfg.c_t = self.c_t;
        cfg.t_override = self.t;
        cfg.eta_override = self.eta;
        cfg.budget = self.budget;
        cfg.trace_every = if self.trace.is_some() && self.trace_every == 0 {
            100
        } else {
            self.trace_every
        };
        cfg
    }

    fn emit(&self, summary: &RunSummary, extra: &[(&str, serde_json::Value)]) -> Result<()> {
        let mut value = serde_json::to_value(summary)?;
        for (key, v) in extra {
            value[key] = v.clone();
        }
        let text = serde_json::to_string_pretty(&value)?;
        match &self.json {
            Some(path) => std::fs::write(path, text + "\n")
                .with_context(|| format!("writing {}", path.display()))?,
            None => println!("{text}"),
        }
        Ok(())
    }
}

#[derive(Args)]
struct SolveCmd {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SparseCmd {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Sparsity bound on the minimizer (defaults to the planted-set size).
    #[arg(long)]
    s: Option<u32>,
    /// Bound on |f| (the oracle must be integer-valued; defaults to the
    /// planted family's exact bound).
    #[arg(long = "M")]
    m_bound: Option<f64>,
}

#[derive(Args)]
struct ContinuousCmd {
    /// Built-in objective: neg-quadratic, separable-quadratic, concave-of-sum.
    #[arg(long)]
    function: String,
    /// Dimension.
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Weights for concave-of-sum (comma separated).
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct BenchCmd {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Ground-set sizes to sweep (comma separated); overrides --n.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    sizes: Vec<usize>,
    /// Instances per size.
    #[arg(long, default_value_t = 3)]
    reps: u64,
}

#[derive(Args)]
struct VerifyCmd {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Largest ground-set size to verify exhaustively.
    #[arg(long, default_value_t = 14)]
    max_n: usize,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.cmd {
        Cmd::Solve(cmd) => run_box(cmd, false),
        Cmd::KgridSolve(cmd) => run_box(cmd, true),
        Cmd::SparseSolve(cmd) => run_sparse(cmd),
        Cmd::ContinuousSolve(cmd) => run_continuous(cmd),
        Cmd::Bench(cmd) => run_bench(cmd),
        Cmd::Verify(cmd) => run_verify(cmd),
    }
}

fn run_box(cmd: SolveCmd, grid: bool) -> Result<i32> {
    let loaded = cmd.instance.load()?;
    let inst = loaded.inst;
    if !grid && inst.k != 2 {
        bail!("solve expects a set instance (k = 2); use kgrid-solve for k = {}", inst.k);
    }
    let n = inst.n;
    let k = inst.k;
    let start = Instant::now();
    let amp = amplify(cmd.solver.trials, cmd.solver.seed, |seed| {
        let handle = sfm::oracle::OracleHandle::new(inst.clone());
        let cfg = cmd.solver.config(seed);
        if grid {
            kgrid_solve(&handle, &cfg)
        } else {
            sfm_solve(&handle, &cfg)
        }
    })?;
    let wall_ms = start.elapsed().as_millis() as u64;
    if let Some(path) = &cmd.solver.trace {
        write_trace_csv(path, &amp.best.trace)?;
    }
    let algorithm = if grid { "kgrid-solve" } else { "solve" };
    let summary = RunSummary::from_solve(
        algorithm,
        n,
        k,
        cmd.solver.eps,
        amp.best_seed,
        &amp.best,
        wall_ms,
    );
    let mut extra = Vec::new();
    if cmd.solver.trials > 1 {
        extra.push(("trials", serde_json::json!(cmd.solver.trials)));
        extra.push(("total_oracle_calls", serde_json::json!(amp.total_calls)));
    }
    cmd.solver.emit(&summary, &extra)?;
    Ok(if amp.best.truncated { 3 } else { 0 })
}

fn run_sparse(cmd: SparseCmd) -> Result<i32> {
    let loaded = cmd.instance.load()?;
    let inst = loaded.inst;
    if inst.k != 2 {
        bail!("sparse-solve expects a set instance (k = 2)");
    }
    let s = match cmd.s {
        Some(s) => s,
        None if cmd.instance.family.as_deref() == Some("planted") => cmd.instance.planted as u32,
        None => bail!("--s is required unless the planted family supplies it"),
    };
    let m_bound = match cmd.m_bound.or(loaded.m_bound) {
        Some(m) if m >= 1.0 => m,
        Some(m) => bail!("--M must be at least 1, got {m}"),
        None => bail!("--M is required unless the planted family supplies it"),
    };
    let n = inst.n;
    let start = Instant::now();
    let amp = amplify(cmd.solver.trials, cmd.solver.seed, |seed| {
        let handle = sfm::oracle::OracleHandle::new(inst.clone());
        let cfg = cmd.solver.config(seed);
        sparse_sfm(&handle, s, m_bound, &cfg)
    })?;
    let wall_ms = start.elapsed().as_millis() as u64;
    if let Some(path) = &cmd.solver.trace {
        write_trace_csv(path, &amp.best.trace)?;
    }
    let summary = RunSummary::from_solve(
        "sparse-solve",
        n,
        2,
        cmd.solver.eps,
        amp.best_seed,
        &amp.best,
        wall_ms,
    );
    let mut extra = vec![
        ("s", serde_json::json!(s)),
        ("M", serde_json::json!(m_bound)),
    ];
    if cmd.solver.trials > 1 {
        extra.push(("trials", serde_json::json!(cmd.solver.trials)));
        extra.push(("total_oracle_calls", serde_json::json!(amp.total_calls)));
    }
    cmd.solver.emit(&summary, &extra)?;
    Ok(if amp.best.truncated { 3 } else { 0 })
}

fn run_continuous(cmd: ContinuousCmd) -> Result<i32> {
    let obj = builtin_objective(&cmd.function, cmd.n, cmd.weights.as_deref())
        .with_context(|| format!("unknown objective '{}'", cmd.function))?;
    let start = Instant::now();
    let cfg = cmd.solver.config(cmd.solver.seed);
    let res = continuous_solve(&obj, &cfg)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    if let Some(path) = &cmd.solver.trace {
        write_trace_csv(path, &res.grid.trace)?;
    }
    let mut summary = RunSummary::from_solve(
        "continuous-solve",
        cmd.n,
        res.k,
        cmd.solver.eps,
        cmd.solver.seed,
        &res.grid,
        wall_ms,
    );
    summary.value = res.value;
    summary.levels = None;
    summary.point = Some(res.point.clone());
    let extra = vec![("callback_evals", serde_json::json!(res.callback_evals))];
    cmd.solver.emit(&summary, &extra)?;
    Ok(if res.grid.truncated { 3 } else { 0 })
}

fn run_bench(cmd: BenchCmd) -> Result<i32> {
    let mut rows = Vec::new();
    let mut truncated_any = false;
    for &n in &cmd.sizes {
        let mut calls = 0u64;
        let mut value = 0.0;
        let mut wall = 0u64;
        for rep in 0..cmd.reps {
            let mut inst_args = InstanceArgs {
                instance: cmd.instance.instance.clone(),
                family: cmd.instance.family.clone(),
                n,
                k: cmd.instance.k,
                density: cmd.instance.density,
                planted: cmd.instance.planted,
                instance_seed: cmd.instance.instance_seed + rep,
            };
            if inst_args.instance.is_some() && cmd.sizes.len() > 1 {
                bail!("--sizes only applies to generated families");
            }
            let loaded = inst_args.load()?;
            inst_args.instance = None;
            let handle = sfm::oracle::OracleHandle::new(loaded.inst);
            let cfg = cmd.solver.config(cmd.solver.seed + rep);
            let start = Instant::now();
            let res = if handle.k() == 2 {
                sfm_solve(&handle, &cfg)?
            } else {
                kgrid_solve(&handle, &cfg)?
            };
            truncated_any |= res.truncated;
            calls += res.oracle_calls + res.setup_calls;
            value += res.value;
            wall += start.elapsed().as_millis() as u64;
        }
        rows.push(serde_json::json!({
            "n": n,
            "mean_calls": calls as f64 / cmd.reps as f64,
            "mean_value": value / cmd.reps as f64,
            "mean_wall_ms": wall as f64 / cmd.reps as f64,
        }));
    }
    let text = serde_json::to_string_pretty(&serde_json::Value::Array(rows))?;
    match &cmd.solver.json {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(if truncated_any { 3 } else { 0 })
}

fn run_verify(cmd: VerifyCmd) -> Result<i32> {
    let loaded = cmd.instance.load()?;
    let inst = loaded.inst;
    let submodular = verify_submodular(&inst, cmd.max_n)
        .context("instance too large for exhaustive verification")?;
    let (argmin, min_value) = bruteforce_min(&inst).context("instance too large to minimize exactly")?;
    let report = if inst.k == 2 {
        let set: Vec<u32> = levels_to_set(&argmin).iter().map(|&i| i + 1).collect();
        serde_json::json!({
            "submodular": submodular,
            "n": inst.n,
            "k": inst.k,
            "min_value": min_value,
            "argmin_set": set,
        })
    } else {
        serde_json::json!({
            "submodular": submodular,
            "n": inst.n,
            "k": inst.k,
            "min_value": min_value,
            "argmin_levels": argmin,
        })
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if submodular { 0 } else { 1 })
}
