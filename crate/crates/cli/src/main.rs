//! `aab`: run, sweep, verify and bound assured-accuracy bandit experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad arguments or config,
//! 3 infeasible pool or undefined exploration bound, 4 mechanism violation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod plot;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aab_core::config::RunConfig;
use aab_core::engine::{exploration_bounds, lower_bound, BoundError, EngineKind};
use aab_core::error_model::{compute_delta_separation, ErrorModel, BRUTE_FORCE_CAP};
use aab_core::harness::{
    check_pool_feasible, generate_pool_paper, run_experiment, spec_for, sweep, write_experiment,
    HarnessError, MetricSeries,
};
use aab_core::mechanism::{
    verify_expost_monotone, verify_ic_ir, BidGrid, MechanismError, PaymentRule, ReportRow,
};
use aab_core::model::{draw_realization, WorkerPool};
use aab_core::optimizer::SolverKind;
use aab_core::seeding::SeedStream;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "aab", version, about = "Assured-accuracy bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicate one engine and write per-round and aggregate CSVs.
    Run {
        #[arg(long)]
        engine: EngineKind,
        #[command(flatten)]
        common: Common,
    },
    /// Total cost against pool size.
    Sweep {
        #[arg(long)]
        engine: EngineKind,
        /// Comma-separated pool sizes.
        #[arg(long, value_delimiter = ',', default_value = "11,22,55,110")]
        sizes: Vec<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Check ex-post monotonicity and IC/IR of critical payments.
    Verify {
        #[arg(long)]
        engine: EngineKind,
        #[arg(long, value_delimiter = ',', default_value = "monotone,ic")]
        checks: Vec<Check>,
        /// Number of bid grid points, zero and `cost_max` included.
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Print the regret lower bound and the exploration upper bounds.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Run every learner on one pool and write regret and cost curves.
    Repro {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Check {
    Monotone,
    Ic,
}

#[derive(Args)]
struct Common {
    /// `key=value` config file; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory. Falls back to `$OUT_DIR`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of replications.
    #[arg(long)]
    seeds: Option<usize>,
    /// Also render SVG line charts from the aggregate CSVs.
    #[arg(long)]
    plot: bool,
    /// Pool of `11 × scale` workers in the 6:5 dominated:varied layout;
    /// overrides `n`.
    #[arg(long)]
    scale: Option<usize>,
    /// CSV with columns `quality,cost` and optionally `reported_cost`;
    /// replaces the generated pool.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long, default_value = "hoeffding")]
    model: ErrorModel,
    #[arg(long, value_enum, default_value = "greedy")]
    solver: SolverArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SolverArg {
    Exact,
    Greedy,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Exact => SolverKind::Exact,
            SolverArg::Greedy => SolverKind::Greedy,
        }
    }
}

#[derive(Debug, Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("INFEASIBLE: {0}")]
    Infeasible(String),
    #[error("VIOLATION: {0}")]
    Violation(String),
    #[error("{0}")]
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Infeasible(_) => 3,
            Failure::Violation(_) => 4,
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InfeasiblePool { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

#[derive(Deserialize)]
struct PoolRow {
    quality: f64,
    cost: f64,
    reported_cost: Option<f64>,
}

struct Setup {
    config: RunConfig,
    pool: WorkerPool,
    out: PathBuf,
    model: ErrorModel,
    solver: SolverKind,
}

fn load_pool(path: &Path) -> Result<WorkerPool, Failure> {
    let bad = |e: &dyn std::fmt::Display| Failure::Usage(format!("pool {}: {e}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(&e))?;
    let (mut q, mut c, mut r) = (Vec::new(), Vec::new(), Vec::new());
    for row in reader.deserialize() {
        let row: PoolRow = row.map_err(|e| bad(&e))?;
        q.push(row.quality);
        c.push(row.cost);
        r.push(row.reported_cost.unwrap_or(row.cost));
    }
    WorkerPool::new(q, c, r).map_err(|e| bad(&e))
}

impl Common {
    fn setup(&self) -> Result<Setup, Failure> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?,
            None => RunConfig::default(),
        };
        if let Some(scale) = self.scale {
            config.n = 11 * scale;
        }
        let pool = match &self.pool {
            Some(path) => {
                let pool = load_pool(path)?;
                config.n = pool.len();
                pool
            }
            None => generate_pool_paper(config.n, config.seed),
        };
        config
            .validate()
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let solver = SolverKind::from(self.solver);
        solver
            .check(&self.model, pool.len())
            .map_err(|e| Failure::Usage(e.to_string()))?;
        let out = self
            .out
            .clone()
            .or_else(|| std::env::var_os("OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Setup {
            config,
            pool,
            out,
            model: self.model,
            solver,
        })
    }

    fn seeds(&self, default: usize) -> Result<usize, Failure> {
        match self.seeds {
            Some(0) => Err(Failure::Usage("--seeds must be positive".into())),
            Some(k) => Ok(k),
            None => Ok(default),
        }
    }
}

fn run_one(s: &Setup, engine: EngineKind, reps: usize) -> Result<MetricSeries, Failure> {
    let spec = spec_for(&s.config, engine, s.model, s.solver);
    spec.validate(s.pool.len())
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(run_experiment(&s.config, spec, &s.pool, reps)?)
}

fn summary(series: &MetricSeries) -> String {
    let r = series.final_regret();
    let c = series.final_cost();
    format!(
        "{:<10} regret {:>12.1} ± {:<9.1} cost {:>12.1} ± {:<9.1} violations {}",
        series.engine.name(),
        r.mean,
        r.stderr,
        c.mean,
        c.stderr,
        series.total_violations()
    )
}

fn cmd_run(engine: EngineKind, common: &Common) -> Result<(), Failure> {
    let s = common.setup()?;
    let series = run_one(&s, engine, common.seeds(100)?)?;
    let paths = write_experiment(&s.out, "run", &series)?;
    println!(
        "reference {} cost {:.3} ({})",
        series.reference.set,
        series.reference.cost,
        series.reference.kind.name()
    );
    println!("{}", summary(&series));
    for p in &paths {
        println!("wrote {}", p.display());
    }
    if common.plot {
        for (k, label) in [(1, "cumulative regret"), (2, "cumulative cost")] {
            let svg = paths[k].with_extension("svg");
            plot::render(&[paths[k].clone()], &svg, label).map_err(runtime)?;
            println!("wrote {}", svg.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepCsvRow {
    n: usize,
    engine: &'static str,
    feasible: bool,
    total_cost_mean: Option<f64>,
    total_cost_stderr: Option<f64>,
    reference_cost: Option<f64>,
}

fn cmd_sweep(engine: EngineKind, sizes: &[usize], common: &Common) -> Result<(), Failure> {
    if common.pool.is_some() {
        return Err(Failure::Usage(
            "sweep generates its own pools; drop --pool".into(),
        ));
    }
    let s = common.setup()?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Failure::Usage("--sizes needs positive pool sizes".into()));
    }
    if s.solver == SolverKind::Exact && sizes.iter().any(|&n| n > BRUTE_FORCE_CAP) {
        return Err(Failure::Usage(format!(
            "exact solver is limited to {BRUTE_FORCE_CAP} workers"
        )));
    }
    let spec = spec_for(&s.config, engine, s.model, s.solver);
    let rows = sweep(&s.config, spec, sizes, common.seeds(20)?)?;
    std::fs::create_dir_all(&s.out).map_err(runtime)?;
    let path = s.out.join(format!("sweep_{}.csv", engine.name()));
    let mut w = csv::Writer::from_path(&path).map_err(runtime)?;
    for r in &rows {
        w.serialize(SweepCsvRow {
            n: r.n,
            engine: engine.name(),
            feasible: r.total_cost.is_some(),
            total_cost_mean: r.total_cost.map(|c| c.mean),
            total_cost_stderr: r.total_cost.map(|c| c.stderr),
            reference_cost: r.reference_cost,
        })
        .map_err(runtime)?;
        match (r.total_cost, r.reference_cost) {
            (Some(c), Some(opt)) => println!(
                "n={:<6} total cost {:.1} ± {:.1}  reference per round {opt:.3}",
                r.n, c.mean, c.stderr
            ),
            _ => println!("n={:<6} infeasible at alpha={}", r.n, s.config.alpha),
        }
    }
    w.flush().map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct VerifyRow {
    seed: u64,
    worker_id: usize,
    bid: f64,
    allocation_count: u64,
    payment: f64,
    utility: f64,
    violation_flag: bool,
}

impl VerifyRow {
    fn new(seed: u64, r: ReportRow) -> Self {
        Self {
            seed,
            worker_id: r.worker_id,
            bid: r.bid,
            allocation_count: r.allocation_count,
            payment: r.payment,
            utility: r.utility,
            violation_flag: r.violation_flag,
        }
    }
}

fn cmd_verify(
    engine: EngineKind,
    checks: &[Check],
    grid_points: usize,
    common: &Common,
) -> Result<(), Failure> {
    let s = common.setup()?;
    check_pool_feasible(&s.pool, &s.model, s.config.alpha)?;
    let spec = spec_for(&s.config, engine, s.model, s.solver);
    spec.validate(s.pool.len())
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let grid = BidGrid::uniform(s.config.cost_max, grid_points)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let seeds = common.seeds(50)? as u64;
    std::fs::create_dir_all(&s.out).map_err(runtime)?;
    let report_path = s.out.join(format!("verify_{}.csv", engine.name()));
    let cex_path = s.out.join(format!("counterexample_{}.txt", engine.name()));
    let mut report = csv::Writer::from_path(&report_path).map_err(runtime)?;
    let mut cex = String::new();
    let (mut mono_bad, mut ic_bad, mut ir_bad) = (0, 0, 0);
    let stream = SeedStream::new(s.config.seed);
    for seed in 0..seeds {
        let rho = draw_realization(
            &s.pool,
            s.config.horizon,
            s.config.prior_positive,
            &stream,
            seed,
        );
        let mut monotone = true;
        if checks.contains(&Check::Monotone) {
            match verify_expost_monotone(spec, &s.pool, &rho, &grid) {
                Ok(()) => {}
                Err(MechanismError::NonMonotoneAllocation(v)) => {
                    monotone = false;
                    mono_bad += 1;
                    writeln!(cex, "seed {seed}: {v}").unwrap();
                }
                Err(e) => return Err(runtime(e)),
            }
        }
        if checks.contains(&Check::Ic) && monotone {
            match verify_ic_ir(spec, &s.pool, &rho, &grid, PaymentRule::Critical) {
                Ok(r) => {
                    ic_bad += r.ic_violations;
                    ir_bad += r.ir_violations;
                    if !r.passed() {
                        writeln!(
                            cex,
                            "seed {seed}: max IC gain {:.4} (tolerance {:.4}), min truthful utility {:.4}",
                            r.max_ic_gain, r.ic_tolerance, r.min_truthful_utility
                        )
                        .unwrap();
                    }
                    for row in r.rows {
                        report
                            .serialize(VerifyRow::new(seed, row))
                            .map_err(runtime)?;
                    }
                }
                // Payments need a monotone curve; count it as a monotonicity failure.
                Err(MechanismError::NonMonotoneAllocation(v)) => {
                    mono_bad += 1;
                    writeln!(cex, "seed {seed}: {v}").unwrap();
                }
                Err(e) => return Err(runtime(e)),
            }
        }
    }
    report.flush().map_err(runtime)?;
    println!(
        "{} over {seeds} seeds: {mono_bad} non-monotone, {ic_bad} IC and {ir_bad} IR violations",
        engine.name()
    );
    println!("wrote {}", report_path.display());
    if cex.is_empty() {
        return Ok(());
    }
    std::fs::write(&cex_path, &cex).map_err(runtime)?;
    println!("wrote {}", cex_path.display());
    Err(Failure::Violation(format!(
        "{} counterexample(s), first: {}",
        cex.lines().count(),
        cex.lines().next().unwrap_or_default()
    )))
}

fn cmd_bounds(common: &Common) -> Result<(), Failure> {
    let s = common.setup()?;
    let n = s.pool.len();
    let delta = if n <= BRUTE_FORCE_CAP {
        let d = compute_delta_separation(&s.model, &s.pool.qualities, s.config.alpha)
            .map_err(runtime)?;
        println!("delta {:.6} (closest set {})", d.delta, d.closest);
        d.delta
    } else {
        println!("delta not computed for {n} workers");
        0.0
    };
    let bounds = match exploration_bounds(n, s.config.mu, &s.model, delta, s.config.xi) {
        Ok(b) => b,
        Err(BoundError::NonPositiveDelta) => {
            return Err(Failure::Infeasible(
                "delta is zero and xi is zero; exploration need not end".into(),
            ))
        }
        Err(e) => return Err(runtime(e)),
    };
    match lower_bound(s.config.horizon, n, &s.model, delta) {
        Ok(lb) => println!("lower bound      {lb:.3}"),
        Err(_) => println!("lower bound      undefined"),
    }
    println!("ccb-ns bound     {:.3}", bounds.ccb_ns);
    println!("ccb-s bound      {:.3}", bounds.ccb_s);
    println!("xi-range bound   {:.3}", bounds.range);
    Ok(())
}

fn cmd_repro(common: &Common) -> Result<(), Failure> {
    let s = common.setup()?;
    check_pool_feasible(&s.pool, &s.model, s.config.alpha)?;
    let reps = common.seeds(100)?;
    let mut written: Vec<(EngineKind, Vec<PathBuf>)> = Vec::new();
    for engine in EngineKind::LEARNERS {
        let series = run_one(&s, engine, reps)?;
        println!("{}", summary(&series));
        written.push((engine, write_experiment(&s.out, "repro", &series)?));
    }
    if common.plot {
        let pick = |k: usize, engines: &[EngineKind]| -> Vec<PathBuf> {
            written
                .iter()
                .filter(|(e, _)| engines.contains(e))
                .map(|(_, p)| p[k].clone())
                .collect()
        };
        let figures = [
            (
                "repro_regret.svg",
                1,
                "cumulative regret",
                EngineKind::LEARNERS.to_vec(),
            ),
            (
                "repro_cost.svg",
                2,
                "cumulative cost",
                vec![EngineKind::CcbS, EngineKind::CcbSe],
            ),
        ];
        for (name, k, label, engines) in figures {
            let svg = s.out.join(name);
            plot::render(&pick(k, &engines), &svg, label).map_err(runtime)?;
            println!("wrote {}", svg.display());
        }
    }
    println!("wrote CSVs under {}", s.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run { engine, common } => cmd_run(*engine, common),
        Command::Sweep {
            engine,
            sizes,
            common,
        } => cmd_sweep(*engine, sizes, common),
        Command::Verify {
            engine,
            checks,
            grid,
            common,
        } => cmd_verify(*engine, checks, *grid, common),
        Command::Bounds { common } => cmd_bounds(common),
        Command::Repro { common } => cmd_repro(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
