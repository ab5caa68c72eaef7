//! Experiment orchestration: pool generation, seeded replications, regret
//! and cost metrics, and CSV output.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::engine::{simulate, EngineError, EngineKind, EngineSpec};
use crate::error_model::{ErrorModel, BRUTE_FORCE_CAP};
use crate::model::{draw_realization, WorkerPool, WorkerSet};
use crate::optimizer::SolverKind;
use crate::seeding::{Purpose, SeedStream};

pub const DOMINATED_COST: f64 = 20.0;
pub const DOMINATED_QUALITY: f64 = 2.0 / 3.0;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no reference solution: {0}")]
    OracleUnavailable(String),
    #[error("pool is infeasible: even the full pool misses alpha={alpha} (f={error:.4})")]
    InfeasiblePool { alpha: f64, error: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Number of dominated workers in a pool of `n_total`, at the 6:5 split.
pub fn dominated_count(n_total: usize) -> usize {
    (6 * n_total + 5) / 11
}

/// Pool with a dominated block (cost 20, quality 2/3) followed by a varied
/// block (cost uniform on [10, 20], quality uniform on [2/3, 1]).
pub fn generate_pool_paper(n_total: usize, seed: u64) -> WorkerPool {
    let dominated = dominated_count(n_total);
    let mut rng = SeedStream::new(seed).rng(Purpose::Pool, 0);
    let mut qualities = vec![DOMINATED_QUALITY; dominated];
    let mut costs = vec![DOMINATED_COST; dominated];
    for _ in dominated..n_total {
        costs.push(rng.random_range(10.0..=20.0));
        qualities.push(rng.random_range(DOMINATED_QUALITY..=1.0));
    }
    WorkerPool::truthful(qualities, costs).expect("generated pool is valid")
}

/// Errors unless selecting every worker meets the constraint on true `q`.
pub fn check_pool_feasible(
    pool: &WorkerPool,
    model: &ErrorModel,
    alpha: f64,
) -> Result<(), HarnessError> {
    let all = pool.all();
    if model.satisfies(&all, &pool.qualities, alpha) {
        Ok(())
    } else {
        Err(HarnessError::InfeasiblePool {
            alpha,
            error: model.evaluate_iter(pool.qualities.iter().copied()),
        })
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ReferenceKind {
    Exact,
    Greedy,
}

impl ReferenceKind {
    pub fn name(&self) -> &'static str {
        match self {
            ReferenceKind::Exact => "exact",
            ReferenceKind::Greedy => "greedy",
        }
    }
}

/// The set regret is measured against.
#[derive(Clone, Debug, PartialEq)]
pub struct Reference {
    pub set: WorkerSet,
    pub cost: f64,
    pub kind: ReferenceKind,
}

/// Optimum on the true qualities: exact up to 20 workers, greedy beyond.
pub fn reference_solution(
    pool: &WorkerPool,
    model: &ErrorModel,
    alpha: f64,
) -> Result<Reference, HarnessError> {
    let (solver, kind) = if pool.len() <= BRUTE_FORCE_CAP {
        (SolverKind::Exact, ReferenceKind::Exact)
    } else {
        (SolverKind::Greedy, ReferenceKind::Greedy)
    };
    let set = solver
        .solve(
            model,
            &pool.qualities,
            &pool.reported_costs,
            alpha,
            &pool.all(),
        )
        .map_err(|e| HarnessError::OracleUnavailable(e.to_string()))?
        .ok_or_else(|| {
            HarnessError::OracleUnavailable("no subset meets the constraint".to_string())
        })?;
    Ok(Reference {
        cost: set.cost(&pool.reported_costs),
        set,
        kind,
    })
}

/// Engine spec matching a run configuration.
pub fn spec_for(
    config: &RunConfig,
    kind: EngineKind,
    model: ErrorModel,
    solver: SolverKind,
) -> EngineSpec {
    EngineSpec::new(kind, model, solver).with_thresholds(config.alpha, config.xi, config.mu)
}

/// Per-round data of one seeded replication.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSeries {
    pub replication: u64,
    pub costs: Vec<f64>,
    pub violated: Vec<bool>,
    pub commit_round: Option<usize>,
    pub eliminated: WorkerSet,
}

impl SeedSeries {
    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn violations(&self) -> usize {
        self.violated.iter().filter(|v| **v).count()
    }

    pub fn cumulative_cost(&self) -> Vec<f64> {
        self.costs
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }

    pub fn cumulative_regret(&self, reference_cost: f64) -> Vec<f64> {
        self.costs
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c - reference_cost;
                Some(*acc)
            })
            .collect()
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

/// Mean and standard error, summed in slice order.
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let k = values.len();
    if k == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k == 1 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    MeanStderr {
        mean,
        stderr: (var / k as f64).sqrt(),
    }
}

/// Metrics of one engine over several replications.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricSeries {
    pub engine: EngineKind,
    pub reference: Reference,
    pub seeds: Vec<SeedSeries>,
    /// Mean ± stderr of the cumulative regret, per round.
    pub regret: Vec<MeanStderr>,
    /// Mean ± stderr of the cumulative cost, per round.
    pub cost: Vec<MeanStderr>,
}

impl MetricSeries {
    fn from_seeds(engine: EngineKind, reference: Reference, seeds: Vec<SeedSeries>) -> Self {
        let horizon = seeds.first().map_or(0, |s| s.costs.len());
        let regrets: Vec<Vec<f64>> = seeds
            .iter()
            .map(|s| s.cumulative_regret(reference.cost))
            .collect();
        let costs: Vec<Vec<f64>> = seeds.iter().map(|s| s.cumulative_cost()).collect();
        let column = |rows: &[Vec<f64>], t: usize| -> MeanStderr {
            let col: Vec<f64> = rows.iter().map(|r| r[t]).collect();
            mean_stderr(&col)
        };
        Self {
            engine,
            regret: (0..horizon).map(|t| column(&regrets, t)).collect(),
            cost: (0..horizon).map(|t| column(&costs, t)).collect(),
            reference,
            seeds,
        }
    }

    pub fn horizon(&self) -> usize {
        self.regret.len()
    }

    pub fn total_violations(&self) -> usize {
        self.seeds.iter().map(|s| s.violations()).sum()
    }

    pub fn final_regret(&self) -> MeanStderr {
        *self.regret.last().expect("non-empty horizon")
    }

    pub fn final_cost(&self) -> MeanStderr {
        *self.cost.last().expect("non-empty horizon")
    }
}

/// Runs `replications` seeded traces of one engine on `pool`.
///
/// Replication `r` uses realization stream `r` of `config.seed`, so every
/// engine faces the same outcomes for the same replication.
pub fn run_experiment(
    config: &RunConfig,
    spec: EngineSpec,
    pool: &WorkerPool,
    replications: usize,
) -> Result<MetricSeries, HarnessError> {
    check_pool_feasible(pool, &spec.model, config.alpha)?;
    let reference = reference_solution(pool, &spec.model, config.alpha)?;
    spec.validate(pool.len())?;
    let seeds = SeedStream::new(config.seed);
    let runs: Result<Vec<SeedSeries>, EngineError> = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let rho = draw_realization(pool, config.horizon, config.prior_positive, &seeds, rep);
            let trace = simulate(spec, pool, &rho)?;
            Ok(SeedSeries {
                replication: rep,
                costs: trace.records.iter().map(|r| r.round_cost).collect(),
                violated: trace
                    .records
                    .iter()
                    .map(|r| !r.constraint_ok_true_q)
                    .collect(),
                commit_round: trace.commit_round,
                eliminated: trace.eliminated,
            })
        })
        .collect();
    Ok(MetricSeries::from_seeds(spec.kind, reference, runs?))
}

/// `(1 - μ)·raw + μ·L·T`.
pub fn expected_regret_penalized(raw_regret: f64, mu: f64, penalty_l: f64, horizon: usize) -> f64 {
    (1.0 - mu) * raw_regret + mu * penalty_l * horizon as f64
}

/// Penalized final regret with the `μ = 1/T` substitution.
pub fn penalized_final_regret(series: &MetricSeries, penalty_l: f64) -> f64 {
    let t = series.horizon();
    expected_regret_penalized(series.final_regret().mean, 1.0 / t as f64, penalty_l, t)
}

#[derive(Serialize)]
struct PerRoundRow<'a> {
    round: usize,
    engine: &'a str,
    seed: u64,
    cost: f64,
    regret: f64,
    violated: bool,
}

#[derive(Serialize)]
struct AggregateRow<'a> {
    round: usize,
    engine: &'a str,
    mean: f64,
    stderr: f64,
}

/// `{experiment}_{engine}.csv` inside `dir`.
pub fn csv_path(dir: &Path, experiment: &str, engine: EngineKind) -> PathBuf {
    dir.join(format!("{experiment}_{}.csv", engine.name()))
}

/// Per-round rows `round, engine, seed, cost, regret, violated`, where
/// `cost` and `regret` are the round's own values.
pub fn write_per_round_csv(path: &Path, series: &MetricSeries) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for s in &series.seeds {
        for (t, (&cost, &violated)) in s.costs.iter().zip(&s.violated).enumerate() {
            w.serialize(PerRoundRow {
                round: t + 1,
                engine: series.engine.name(),
                seed: s.replication,
                cost,
                regret: cost - series.reference.cost,
                violated,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Aggregate rows `round, engine, mean, stderr`.
pub fn write_aggregate_csv(
    path: &Path,
    engine: EngineKind,
    values: &[MeanStderr],
) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    for (t, v) in values.iter().enumerate() {
        w.serialize(AggregateRow {
            round: t + 1,
            engine: engine.name(),
            mean: v.mean,
            stderr: v.stderr,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the three CSV files of one engine run and returns their paths.
pub fn write_experiment(
    dir: &Path,
    experiment: &str,
    series: &MetricSeries,
) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let rounds = csv_path(dir, &format!("{experiment}-rounds"), series.engine);
    let regret = csv_path(dir, &format!("{experiment}-regret"), series.engine);
    let cost = csv_path(dir, &format!("{experiment}-cost"), series.engine);
    write_per_round_csv(&rounds, series)?;
    write_aggregate_csv(&regret, series.engine, &series.regret)?;
    write_aggregate_csv(&cost, series.engine, &series.cost)?;
    Ok(vec![rounds, regret, cost])
}

/// One pool size of a cost-versus-n sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    /// `None` when the full pool of this size misses the constraint.
    pub total_cost: Option<MeanStderr>,
    pub reference_cost: Option<f64>,
}

/// Runs one engine over 6:5 dominated:varied pools of several sizes.
pub fn sweep(
    config: &RunConfig,
    spec: EngineSpec,
    sizes: &[usize],
    replications: usize,
) -> Result<Vec<SweepRow>, HarnessError> {
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let pool = generate_pool_paper(n, config.seed);
        match run_experiment(config, spec, &pool, replications) {
            Ok(series) => rows.push(SweepRow {
                n,
                total_cost: Some(series.final_cost()),
                reference_cost: Some(series.reference.cost),
            }),
            Err(HarnessError::InfeasiblePool { .. }) => rows.push(SweepRow {
                n,
                total_cost: None,
                reference_cost: None,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(rows)
}
