//! Strategic layer: allocation curves on frozen realizations, ex-post
//! monotonicity checks, critical-value payments and IC/IR verification.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::engine::{allocation_count, EngineError, EngineSpec, RunTrace};
use crate::model::{SuccessRealization, WorkerId, WorkerPool};

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("allocation is not monotone: {0}")]
    NonMonotoneAllocation(MonotonicityViolation),
    #[error("invalid bid grid: {0}")]
    BadGrid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ascending bids from 0 to `c_max` inclusive.
#[derive(Clone, Debug, PartialEq)]
pub struct BidGrid {
    points: Vec<f64>,
}

impl BidGrid {
    /// `points` evenly spaced bids, both ends included.
    pub fn uniform(c_max: f64, points: usize) -> Result<Self, MechanismError> {
        if points < 2 || !(c_max > 0.0 && c_max.is_finite()) {
            return Err(MechanismError::BadGrid(format!(
                "{points} points up to {c_max}"
            )));
        }
        let step = c_max / (points - 1) as f64;
        let mut pts: Vec<f64> = (0..points).map(|k| k as f64 * step).collect();
        pts[points - 1] = c_max;
        Ok(Self { points: pts })
    }

    /// Bids `0, r, 2r, ..., c_max`.
    pub fn with_resolution(c_max: f64, resolution: f64) -> Result<Self, MechanismError> {
        if !(resolution > 0.0 && resolution <= c_max) {
            return Err(MechanismError::BadGrid(format!(
                "resolution {resolution} for c_max {c_max}"
            )));
        }
        Self::uniform(c_max, (c_max / resolution).round() as usize + 1)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn c_max(&self) -> f64 {
        *self.points.last().expect("grid has at least two points")
    }

    /// Largest gap between neighbouring bids.
    pub fn resolution(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

/// A worker's task count as a function of their own bid.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationCurve {
    pub worker: WorkerId,
    /// Ascending, without duplicates.
    pub bids: Vec<f64>,
    pub counts: Vec<u64>,
}

impl AllocationCurve {
    pub fn count_at(&self, bid: f64) -> Option<u64> {
        self.bids
            .iter()
            .position(|&b| b == bid)
            .map(|k| self.counts[k])
    }

    /// First adjacent pair where the count goes up with the bid.
    pub fn first_increase(&self) -> Option<MonotonicityViolation> {
        (1..self.bids.len())
            .find(|&k| self.counts[k] > self.counts[k - 1])
            .map(|k| MonotonicityViolation {
                worker: self.worker,
                low_bid: self.bids[k - 1],
                high_bid: self.bids[k],
                low_count: self.counts[k - 1],
                high_count: self.counts[k],
            })
    }
}

/// `A_i(low_bid) < A_i(high_bid)` with `low_bid < high_bid`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub worker: WorkerId,
    pub low_bid: f64,
    pub high_bid: f64,
    pub low_count: u64,
    pub high_count: u64,
}

impl std::fmt::Display for MonotonicityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "worker {} gets {} tasks at bid {} but {} at bid {}",
            self.worker, self.low_count, self.low_bid, self.high_count, self.high_bid
        )
    }
}

fn with_bid(pool: &WorkerPool, worker: WorkerId, bid: f64) -> WorkerPool {
    let mut p = pool.clone();
    p.reported_costs[worker.index()] = bid;
    p
}

/// Replays the realization once per bid, others bidding as in `pool`.
pub fn allocation_curve(
    spec: EngineSpec,
    pool: &WorkerPool,
    realization: &SuccessRealization,
    worker: WorkerId,
    bids: &[f64],
) -> Result<AllocationCurve, MechanismError> {
    let mut bids = bids.to_vec();
    bids.sort_by(f64::total_cmp);
    bids.dedup();
    let counts = bids
        .iter()
        .map(|&b| {
            allocation_count(spec, &with_bid(pool, worker, b), realization)
                .map(|c| c[worker.index()])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AllocationCurve {
        worker,
        bids,
        counts,
    })
}

/// Checks every worker's curve over the grid, others bidding truthfully.
pub fn verify_expost_monotone(
    spec: EngineSpec,
    pool: &WorkerPool,
    realization: &SuccessRealization,
    grid: &BidGrid,
) -> Result<(), MechanismError> {
    let truthful = WorkerPool {
        reported_costs: pool.true_costs.clone(),
        ..pool.clone()
    };
    for i in 0..pool.len() {
        let curve = allocation_curve(spec, &truthful, realization, WorkerId(i), grid.points())?;
        if let Some(v) = curve.first_increase() {
            return Err(MechanismError::NonMonotoneAllocation(v));
        }
    }
    Ok(())
}

/// Critical-value payment at `bid` from counts on `grid ∪ {bid}`.
///
/// `P(b) = A(c_max)·c_max + Σ (A(e_j) - A(e_{j+1}))·e_{j+1}` over consecutive
/// evaluation points with `e_j ≥ b`: every task lost above `b` is paid at the
/// bid where it is lost.
pub fn payment_from_curve(curve: &AllocationCurve, bid: f64) -> Result<f64, MechanismError> {
    if let Some(v) = curve.first_increase() {
        return Err(MechanismError::NonMonotoneAllocation(v));
    }
    let start = curve
        .bids
        .iter()
        .position(|&b| b >= bid)
        .expect("bid lies within the evaluated range");
    let last = curve.bids.len() - 1;
    let mut pay = curve.counts[last] as f64 * curve.bids[last];
    for j in start..last {
        pay += (curve.counts[j] - curve.counts[j + 1]) as f64 * curve.bids[j + 1];
    }
    Ok(pay)
}

/// Critical payment for `worker` bidding `pool.reported_costs[worker]`.
pub fn critical_payment(
    spec: EngineSpec,
    pool: &WorkerPool,
    realization: &SuccessRealization,
    worker: WorkerId,
    grid: &BidGrid,
) -> Result<f64, MechanismError> {
    let bid = pool.reported_costs[worker.index()];
    let mut bids = grid.points().to_vec();
    bids.push(bid);
    let curve = allocation_curve(spec, pool, realization, worker, &bids)?;
    payment_from_curve(&curve, bid)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PaymentRule {
    Critical,
    /// Pays nothing; a negative control for IR.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub worker_id: usize,
    pub bid: f64,
    pub allocation_count: u64,
    pub payment: f64,
    pub utility: f64,
    pub violation_flag: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcIrReport {
    /// Truthful row first for each worker, then one row per grid bid.
    pub rows: Vec<ReportRow>,
    /// Largest `u(b) - u(truth)` over workers and grid bids.
    pub max_ic_gain: f64,
    pub min_truthful_utility: f64,
    pub ic_tolerance: f64,
    pub ic_violations: usize,
    pub ir_violations: usize,
}

impl IcIrReport {
    pub fn passed(&self) -> bool {
        self.ic_violations == 0 && self.ir_violations == 0
    }
}

/// Slack for rounding in `P - c·A`.
const IR_EPS: f64 = 1e-9;

/// Utilities under `rule` at the truthful bid and at every grid bid.
///
/// Misreporting may gain at most `grid.resolution() × T`; the truthful
/// utility must be non-negative.
pub fn verify_ic_ir(
    spec: EngineSpec,
    pool: &WorkerPool,
    realization: &SuccessRealization,
    grid: &BidGrid,
    rule: PaymentRule,
) -> Result<IcIrReport, MechanismError> {
    let tolerance = grid.resolution() * realization.horizon() as f64;
    let truthful = WorkerPool {
        reported_costs: pool.true_costs.clone(),
        ..pool.clone()
    };
    let mut report = IcIrReport {
        rows: Vec::new(),
        max_ic_gain: f64::NEG_INFINITY,
        min_truthful_utility: f64::INFINITY,
        ic_tolerance: tolerance,
        ic_violations: 0,
        ir_violations: 0,
    };
    for i in 0..pool.len() {
        let worker = WorkerId(i);
        let cost = pool.true_costs[i];
        let with_truth = allocation_curve(
            spec,
            &truthful,
            realization,
            worker,
            &[grid.points(), &[cost]].concat(),
        )?;
        // On-grid bids see only the grid; their evaluation set excludes the truth.
        let on_grid = AllocationCurve {
            worker,
            bids: grid.points().to_vec(),
            counts: grid
                .points()
                .iter()
                .map(|&b| with_truth.count_at(b).expect("grid bid was evaluated"))
                .collect(),
        };
        let pay = |curve: &AllocationCurve, b: f64| -> Result<f64, MechanismError> {
            match rule {
                PaymentRule::Critical => payment_from_curve(curve, b),
                PaymentRule::Zero => Ok(0.0),
            }
        };
        let a_truth = with_truth.count_at(cost).expect("truth was evaluated");
        let p_truth = pay(&with_truth, cost)?;
        let u_truth = p_truth - cost * a_truth as f64;
        let ir_bad = u_truth < -IR_EPS * (1.0 + p_truth.abs());
        report.ir_violations += ir_bad as usize;
        report.min_truthful_utility = report.min_truthful_utility.min(u_truth);
        report.rows.push(ReportRow {
            worker_id: i,
            bid: cost,
            allocation_count: a_truth,
            payment: p_truth,
            utility: u_truth,
            violation_flag: ir_bad,
        });
        for (k, &b) in on_grid.bids.iter().enumerate() {
            let a = on_grid.counts[k];
            let p = pay(&on_grid, b)?;
            let u = p - cost * a as f64;
            let gain = u - u_truth;
            let ic_bad = gain > tolerance;
            report.ic_violations += ic_bad as usize;
            report.max_ic_gain = report.max_ic_gain.max(gain);
            report.rows.push(ReportRow {
                worker_id: i,
                bid: b,
                allocation_count: a,
                payment: p,
                utility: u,
                violation_flag: ic_bad,
            });
        }
    }
    Ok(report)
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<(), MechanismError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct WelfareRecord {
    pub round: usize,
    /// `R` if the constraint held on true qualities, `-L` otherwise.
    pub requester_value: f64,
    /// Requester value minus the true costs of the selected workers.
    pub welfare: f64,
}

pub fn welfare(trace: &RunTrace, pool: &WorkerPool, config: &RunConfig) -> Vec<WelfareRecord> {
    trace
        .records
        .iter()
        .map(|r| {
            let v0 = if r.constraint_ok_true_q {
                config.reward_r
            } else {
                -config.penalty_l
            };
            WelfareRecord {
                round: r.round,
                requester_value: v0,
                welfare: v0 - r.selected.cost(&pool.true_costs),
            }
        })
        .collect()
}
