//! Domain types shared by the solvers, engines, mechanism and harness.
//!
//! A [`WorkerPool`] is the hidden environment: true qualities, true costs and
//! the costs the workers report. A [`SuccessRealization`] freezes every random
//! outcome of a run so that replays with different bids see exactly the same
//! world.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{Purpose, SeedStream};

/// Index of a worker in `[0, n)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WorkerId(pub usize);

impl WorkerId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for WorkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

/// A set of workers, kept sorted by index with no duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkerSet(Vec<WorkerId>);

impl WorkerSet {
    pub fn new() -> Self {
        Self(Vec::new())
    }

    /// The full pool `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        Self((0..n).map(WorkerId).collect())
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices.into_iter().map(WorkerId).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, id: WorkerId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    pub fn insert(&mut self, id: WorkerId) -> bool {
        match self.0.binary_search(&id) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, id);
                true
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = WorkerId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[WorkerId] {
        &self.0
    }

    pub fn union(&self, other: &WorkerSet) -> WorkerSet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn difference(&self, other: &WorkerSet) -> WorkerSet {
        self.iter().filter(|id| !other.contains(*id)).collect()
    }

    pub fn is_disjoint(&self, other: &WorkerSet) -> bool {
        self.iter().all(|id| !other.contains(id))
    }

    /// `Σ costs[i]` over members, summed in index order.
    pub fn cost(&self, costs: &[f64]) -> f64 {
        self.iter().map(|id| costs[id.index()]).sum()
    }
}

impl FromIterator<WorkerId> for WorkerSet {
    fn from_iter<I: IntoIterator<Item = WorkerId>>(iter: I) -> Self {
        let mut ids: Vec<WorkerId> = iter.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }
}

impl fmt::Display for WorkerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, id) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", id.0)?;
        }
        f.write_str("}")
    }
}

/// A binary label. Vote sums use the `±1` encoding.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> i64 {
        match self {
            Label::Positive => 1,
            Label::Negative => -1,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Positive => Label::Negative,
            Label::Negative => Label::Positive,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoolError {
    #[error("quality {quality} of worker {worker} is outside [0.5, 1]")]
    QualityOutOfRange { worker: usize, quality: f64 },
    #[error("cost {cost} of worker {worker} is negative or not finite")]
    NegativeCost { worker: usize, cost: f64 },
    #[error("length mismatch: {qualities} qualities, {true_costs} true costs, {reported_costs} reported costs")]
    LengthMismatch {
        qualities: usize,
        true_costs: usize,
        reported_costs: usize,
    },
}

/// The hidden environment: what each worker is really like and what it reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkerPool {
    pub qualities: Vec<f64>,
    pub true_costs: Vec<f64>,
    pub reported_costs: Vec<f64>,
}

impl WorkerPool {
    /// Builds and validates a pool.
    pub fn new(
        qualities: Vec<f64>,
        true_costs: Vec<f64>,
        reported_costs: Vec<f64>,
    ) -> Result<Self, PoolError> {
        let pool = Self {
            qualities,
            true_costs,
            reported_costs,
        };
        validate_pool(&pool)?;
        Ok(pool)
    }

    /// A pool whose workers report their true costs.
    pub fn truthful(qualities: Vec<f64>, costs: Vec<f64>) -> Result<Self, PoolError> {
        let reported = costs.clone();
        Self::new(qualities, costs, reported)
    }

    pub fn len(&self) -> usize {
        self.qualities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qualities.is_empty()
    }

    pub fn all(&self) -> WorkerSet {
        WorkerSet::full(self.len())
    }
}

/// Checks the pool invariants: equal non-zero lengths, qualities in
/// `[0.5, 1]`, finite non-negative costs.
pub fn validate_pool(pool: &WorkerPool) -> Result<(), PoolError> {
    let n = pool.qualities.len();
    if n == 0 || pool.true_costs.len() != n || pool.reported_costs.len() != n {
        return Err(PoolError::LengthMismatch {
            qualities: n,
            true_costs: pool.true_costs.len(),
            reported_costs: pool.reported_costs.len(),
        });
    }
    for (worker, &quality) in pool.qualities.iter().enumerate() {
        if !(0.5..=1.0).contains(&quality) {
            return Err(PoolError::QualityOutOfRange { worker, quality });
        }
    }
    for costs in [&pool.true_costs, &pool.reported_costs] {
        for (worker, &cost) in costs.iter().enumerate() {
            if !(cost >= 0.0 && cost.is_finite()) {
                return Err(PoolError::NegativeCost { worker, cost });
            }
        }
    }
    Ok(())
}

/// Confidence bounds for one worker, clamped into `[0.5, 1]`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ConfidenceBounds {
    /// `k/n`, absent before the first pull.
    pub mean: Option<f64>,
    pub upper: f64,
    pub lower: f64,
}

/// The learner's belief state: pull and success counters per worker.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityEstimate {
    pulls: Vec<u64>,
    successes: Vec<u64>,
    confidence_mu: f64,
    /// `ln(2n/μ)`, fixed for the lifetime of the estimate.
    log_term: f64,
}

impl QualityEstimate {
    pub fn new(pool_size: usize, confidence_mu: f64) -> Self {
        assert!(pool_size > 0, "empty pool");
        assert!(
            confidence_mu > 0.0 && confidence_mu < 1.0,
            "confidence mu must lie in (0,1)"
        );
        Self {
            pulls: vec![0; pool_size],
            successes: vec![0; pool_size],
            confidence_mu,
            log_term: (2.0 * pool_size as f64 / confidence_mu).ln(),
        }
    }

    /// Rebuilds an estimate from raw counters.
    pub fn from_counts(pulls: Vec<u64>, successes: Vec<u64>, confidence_mu: f64) -> Self {
        assert_eq!(pulls.len(), successes.len());
        assert!(pulls.iter().zip(&successes).all(|(n, k)| k <= n));
        let mut est = Self::new(pulls.len(), confidence_mu);
        est.pulls = pulls;
        est.successes = successes;
        est
    }

    pub fn pool_size(&self) -> usize {
        self.pulls.len()
    }

    pub fn confidence_mu(&self) -> f64 {
        self.confidence_mu
    }

    pub fn pulls(&self, id: WorkerId) -> u64 {
        self.pulls[id.index()]
    }

    pub fn successes(&self, id: WorkerId) -> u64 {
        self.successes[id.index()]
    }

    pub fn record(&mut self, id: WorkerId, correct: bool) {
        self.pulls[id.index()] += 1;
        if correct {
            self.successes[id.index()] += 1;
        }
    }

    /// Hoeffding radius `sqrt(ln(2n/μ) / (2 n_i))`; infinite before the first pull.
    pub fn radius(&self, id: WorkerId) -> f64 {
        let pulls = self.pulls[id.index()];
        if pulls == 0 {
            f64::INFINITY
        } else {
            (self.log_term / (2.0 * pulls as f64)).sqrt()
        }
    }

    pub fn bounds(&self, id: WorkerId) -> ConfidenceBounds {
        let pulls = self.pulls[id.index()];
        if pulls == 0 {
            return ConfidenceBounds {
                mean: None,
                upper: 1.0,
                lower: 0.5,
            };
        }
        let mean = self.successes[id.index()] as f64 / pulls as f64;
        let radius = self.radius(id);
        ConfidenceBounds {
            mean: Some(mean),
            upper: (mean + radius).clamp(0.5, 1.0),
            lower: (mean - radius).clamp(0.5, 1.0),
        }
    }

    pub fn upper_profile(&self) -> Vec<f64> {
        (0..self.pool_size())
            .map(|i| self.bounds(WorkerId(i)).upper)
            .collect()
    }

    pub fn lower_profile(&self) -> Vec<f64> {
        (0..self.pool_size())
            .map(|i| self.bounds(WorkerId(i)).lower)
            .collect()
    }

    /// Empirical means clamped into `[0.5, 1]`; unpulled workers read as 0.5.
    pub fn mean_profile(&self) -> Vec<f64> {
        (0..self.pool_size())
            .map(|i| {
                self.bounds(WorkerId(i))
                    .mean
                    .map_or(0.5, |m| m.clamp(0.5, 1.0))
            })
            .collect()
    }
}

/// What the learner saw for one `(worker, round)` cell.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Correct,
    Wrong,
    Unselected,
}

/// Frozen randomness for one replication.
///
/// Every worker's correct/wrong outcome is pre-drawn for every round, together
/// with the ground-truth label and the per-round exploration coin. Outcomes are
/// only handed out through [`SuccessRealization::reveal`] for workers that were
/// actually selected, so an allocation can never depend on an unrevealed cell.
#[derive(Clone, Debug)]
pub struct SuccessRealization {
    workers: usize,
    horizon: usize,
    /// Row-major `workers × horizon`.
    correct: Vec<bool>,
    truth: Vec<Label>,
    coins: Vec<f64>,
}

impl SuccessRealization {
    /// Builds a realization from explicit rows; truth labels are all positive
    /// and every coin is 1.0 unless set separately.
    pub fn from_rows(rows: Vec<Vec<bool>>) -> Self {
        let workers = rows.len();
        assert!(workers > 0);
        let horizon = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == horizon), "ragged rows");
        Self {
            workers,
            horizon,
            correct: rows.into_iter().flatten().collect(),
            truth: vec![Label::Positive; horizon],
            coins: vec![1.0; horizon],
        }
    }

    pub fn with_coins(mut self, coins: Vec<f64>) -> Self {
        assert_eq!(coins.len(), self.horizon);
        self.coins = coins;
        self
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Reveals outcomes for `selected` at 1-based `round`, in set order.
    pub fn reveal(&self, selected: &WorkerSet, round: usize) -> Vec<bool> {
        let t = round - 1;
        selected
            .iter()
            .map(|id| self.correct[id.index() * self.horizon + t])
            .collect()
    }

    /// Label reported by `worker` at 1-based `round`.
    pub fn label(&self, worker: WorkerId, round: usize) -> Label {
        let truth = self.truth(round);
        if self.correct[worker.index() * self.horizon + round - 1] {
            truth
        } else {
            truth.flipped()
        }
    }

    pub fn truth(&self, round: usize) -> Label {
        self.truth[round - 1]
    }

    /// Uniform `[0,1)` draw used by randomized engines at 1-based `round`.
    pub fn coin(&self, round: usize) -> f64 {
        self.coins[round - 1]
    }

    /// Fraction of pre-drawn correct outcomes in a worker's row.
    pub fn row_mean(&self, worker: WorkerId) -> f64 {
        let row = &self.correct[worker.index() * self.horizon..(worker.index() + 1) * self.horizon];
        row.iter().filter(|&&c| c).count() as f64 / self.horizon as f64
    }

    /// The observed matrix ρ for a given sequence of selections:
    /// revealed cells plus [`Outcome::Unselected`] everywhere else.
    pub fn observed<'a, I>(&self, selections: I) -> Vec<Vec<Outcome>>
    where
        I: IntoIterator<Item = &'a WorkerSet>,
    {
        let mut rho = vec![vec![Outcome::Unselected; self.horizon]; self.workers];
        for (t, set) in selections.into_iter().enumerate() {
            for (id, ok) in set.iter().zip(self.reveal(set, t + 1)) {
                rho[id.index()][t] = if ok { Outcome::Correct } else { Outcome::Wrong };
            }
        }
        rho
    }
}

/// Draws a realization: cell `(i, t)` is correct with probability `q_i`,
/// independently. Truth labels are positive with probability `prior_positive`.
pub fn draw_realization(
    pool: &WorkerPool,
    horizon: usize,
    prior_positive: f64,
    seeds: &SeedStream,
    replication: u64,
) -> SuccessRealization {
    assert!(horizon > 0);
    let workers = pool.len();
    // Drawn round by round so that a longer horizon extends a shorter one.
    let mut correct = vec![false; workers * horizon];
    let mut rng = seeds.rng(Purpose::Outcomes, replication);
    for t in 0..horizon {
        for (i, &q) in pool.qualities.iter().enumerate() {
            correct[i * horizon + t] = rng.random::<f64>() < q;
        }
    }
    let mut rng = seeds.rng(Purpose::Truth, replication);
    let truth = (0..horizon)
        .map(|_| {
            if rng.random::<f64>() < prior_positive {
                Label::Positive
            } else {
                Label::Negative
            }
        })
        .collect();
    let mut rng = seeds.rng(Purpose::Coins, replication);
    let coins = (0..horizon).map(|_| rng.random::<f64>()).collect();
    SuccessRealization {
        workers,
        horizon,
        correct,
        truth,
        coins,
    }
}
