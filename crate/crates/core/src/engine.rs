//! Learning loops: CCB-NS, CCB-S, CCB-SE, the ε_t-greedy baseline and a
//! full-information oracle, plus the diagnostic exploration bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_model::{aggregate_majority, ErrorModel, ModelError};
use crate::model::{Label, QualityEstimate, SuccessRealization, WorkerPool, WorkerSet};
use crate::optimizer::{minimal_augment, safe_eliminate, SolverError, SolverKind};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EngineKind {
    CcbNs,
    CcbS,
    CcbSe,
    EpsGreedy,
    /// Knows the true qualities and always selects their optimum.
    Oracle,
}

impl EngineKind {
    pub const LEARNERS: [EngineKind; 4] = [
        EngineKind::CcbNs,
        EngineKind::CcbS,
        EngineKind::CcbSe,
        EngineKind::EpsGreedy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EngineKind::CcbNs => "ccb-ns",
            EngineKind::CcbS => "ccb-s",
            EngineKind::CcbSe => "ccb-se",
            EngineKind::EpsGreedy => "eps-greedy",
            EngineKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown engine {0:?} (expected ccb-ns, ccb-s, ccb-se, eps-greedy or oracle)")]
pub struct UnknownEngine(pub String);

impl FromStr for EngineKind {
    type Err = UnknownEngine;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ccb-ns" => Ok(EngineKind::CcbNs),
            "ccb-s" => Ok(EngineKind::CcbS),
            "ccb-se" => Ok(EngineKind::CcbSe),
            "eps-greedy" => Ok(EngineKind::EpsGreedy),
            "oracle" => Ok(EngineKind::Oracle),
            other => Err(UnknownEngine(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("ccb-se needs the greedy solver with a Hoeffding model")]
    EliminationNeedsKnapsack,
    #[error("thresholds invalid: alpha={alpha}, xi={xi}, mu={mu}")]
    BadThresholds { alpha: f64, xi: f64, mu: f64 },
    #[error("no subset meets the constraint under the true qualities")]
    OracleInfeasible,
}

/// Everything that parametrizes one learner.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineSpec {
    pub kind: EngineKind,
    pub model: ErrorModel,
    pub solver: SolverKind,
    /// Threshold certified on lower confidence bounds.
    pub alpha: f64,
    /// Slack: the optimistic problem is solved at `alpha - xi`.
    pub xi: f64,
    pub mu: f64,
}

impl EngineSpec {
    pub fn new(kind: EngineKind, model: ErrorModel, solver: SolverKind) -> Self {
        Self {
            kind,
            model,
            solver,
            alpha: 0.1,
            xi: 0.0,
            mu: 0.05,
        }
    }

    pub fn with_thresholds(mut self, alpha: f64, xi: f64, mu: f64) -> Self {
        self.alpha = alpha;
        self.xi = xi;
        self.mu = mu;
        self
    }

    pub fn ucb_alpha(&self) -> f64 {
        self.alpha - self.xi
    }

    pub fn validate(&self, pool_size: usize) -> Result<(), EngineError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0 && self.xi >= 0.0 && self.xi < self.alpha)
            || !(self.mu > 0.0 && self.mu < 1.0)
        {
            return Err(EngineError::BadThresholds {
                alpha: self.alpha,
                xi: self.xi,
                mu: self.mu,
            });
        }
        if self.kind == EngineKind::CcbSe
            && (self.solver != SolverKind::Greedy || self.model.knapsack_demand(0.5).is_none())
        {
            return Err(EngineError::EliminationNeedsKnapsack);
        }
        self.solver.check(&self.model, pool_size)?;
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Exploring,
    Exploiting,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineState {
    pub estimates: QualityEstimate,
    pub phase: Phase,
    pub committed_set: Option<WorkerSet>,
    /// Round at which the engine committed, 1-based.
    pub commit_round: Option<usize>,
    /// Last round played, 0 before the first.
    pub round: usize,
    pub eliminated: WorkerSet,
    pub ucb_alpha: f64,
    pub lcb_alpha: f64,
}

/// What an engine did in one round.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub selected: WorkerSet,
    /// Whether the revealed outcomes were used to update the estimates.
    pub learned: bool,
}

/// A learner bound to a pool of reported costs.
#[derive(Clone, Debug)]
pub struct Engine {
    spec: EngineSpec,
    costs: Vec<f64>,
    all: WorkerSet,
    state: EngineState,
    /// Fixed selection of the oracle engine.
    fixed: Option<WorkerSet>,
}

impl Engine {
    /// Engine facing `pool.reported_costs`. The true qualities are read only
    /// by the oracle engine.
    pub fn new(spec: EngineSpec, pool: &WorkerPool) -> Result<Self, EngineError> {
        let n = pool.len();
        spec.validate(n)?;
        let all = WorkerSet::full(n);
        let fixed = if spec.kind == EngineKind::Oracle {
            let set = spec
                .solver
                .solve(
                    &spec.model,
                    &pool.qualities,
                    &pool.reported_costs,
                    spec.alpha,
                    &all,
                )?
                .ok_or(EngineError::OracleInfeasible)?;
            Some(set)
        } else {
            None
        };
        Ok(Self {
            state: EngineState {
                estimates: QualityEstimate::new(n, spec.mu),
                phase: Phase::Exploring,
                committed_set: None,
                commit_round: None,
                round: 0,
                eliminated: WorkerSet::new(),
                ucb_alpha: spec.ucb_alpha(),
                lcb_alpha: spec.alpha,
            },
            spec,
            costs: pool.reported_costs.clone(),
            all,
            fixed,
        })
    }

    pub fn spec(&self) -> &EngineSpec {
        &self.spec
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    fn active(&self) -> WorkerSet {
        self.all.difference(&self.state.eliminated)
    }

    /// Plays the next round against `realization`.
    pub fn step(&mut self, realization: &SuccessRealization) -> Step {
        let t = self.state.round + 1;
        self.state.round = t;
        if let Some(set) = &self.fixed {
            return Step {
                selected: set.clone(),
                learned: false,
            };
        }
        if let Some(set) = &self.state.committed_set {
            return Step {
                selected: set.clone(),
                learned: false,
            };
        }
        let selected = match self.spec.kind {
            EngineKind::EpsGreedy => self.eps_greedy_choice(t, realization.coin(t)),
            _ if t == 1 => self.all.clone(),
            _ => match self.explore_choice() {
                Ok(committed) => {
                    self.state.phase = Phase::Exploiting;
                    self.state.commit_round = Some(t);
                    self.state.committed_set = Some(committed.clone());
                    return Step {
                        selected: committed,
                        learned: false,
                    };
                }
                Err(explore) => explore,
            },
        };
        for (id, ok) in selected.iter().zip(realization.reveal(&selected, t)) {
            self.state.estimates.record(id, ok);
        }
        if self.spec.kind == EngineKind::CcbSe {
            let demand = self
                .spec
                .model
                .knapsack_demand(self.spec.alpha)
                .expect("validated at construction");
            let est = &self.state.estimates;
            let gone = safe_eliminate(
                &est.lower_profile(),
                &est.upper_profile(),
                &self.costs,
                &self.active(),
                demand,
            );
            self.state.eliminated = self.state.eliminated.union(&gone);
        }
        Step {
            selected,
            learned: true,
        }
    }

    /// `Ok(S)` to commit to `S`, `Err(S)` to explore with `S`.
    fn explore_choice(&self) -> Result<WorkerSet, WorkerSet> {
        let est = &self.state.estimates;
        let active = self.active();
        let upper = est.upper_profile();
        let lower = est.lower_profile();
        let candidate = self
            .spec
            .solver
            .solve(
                &self.spec.model,
                &upper,
                &self.costs,
                self.state.ucb_alpha,
                &active,
            )
            .expect("validated at construction")
            .unwrap_or_default();
        if self
            .spec
            .model
            .satisfies(&candidate, &lower, self.state.lcb_alpha)
        {
            return Ok(candidate);
        }
        Err(match self.spec.kind {
            EngineKind::CcbNs => {
                let rest = active.difference(&candidate);
                let extra = minimal_augment(
                    &candidate,
                    &rest,
                    &lower,
                    &self.costs,
                    &self.spec.model,
                    self.state.lcb_alpha,
                );
                candidate.union(&extra)
            }
            _ => active,
        })
    }

    fn eps_greedy_choice(&self, t: usize, coin: f64) -> WorkerSet {
        if coin < epsilon_schedule(t) {
            return self.all.clone();
        }
        let means = self.state.estimates.mean_profile();
        self.spec
            .solver
            .solve(
                &self.spec.model,
                &means,
                &self.costs,
                self.spec.alpha,
                &self.all,
            )
            .expect("validated at construction")
            .unwrap_or_else(|| self.all.clone())
    }
}

/// Exploration probability `min(1, 100/t)` of the ε_t-greedy baseline.
pub fn epsilon_schedule(t: usize) -> f64 {
    (100.0 / t as f64).min(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: WorkerSet,
    pub predicted: Label,
    pub truth: Label,
    /// Sum of reported costs of the selected workers.
    pub round_cost: f64,
    /// `f_S(q_true) < alpha` for the selected set.
    pub constraint_ok_true_q: bool,
    pub learned: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub engine: EngineKind,
    pub spec: EngineSpec,
    pub records: Vec<RoundRecord>,
    pub commit_round: Option<usize>,
    pub eliminated: WorkerSet,
}

impl RunTrace {
    pub fn cumulative_cost(&self) -> f64 {
        self.records.iter().map(|r| r.round_cost).sum()
    }

    pub fn violations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| !r.constraint_ok_true_q)
            .count()
    }
}

/// Plays the whole horizon of `realization`.
pub fn simulate(
    spec: EngineSpec,
    pool: &WorkerPool,
    realization: &SuccessRealization,
) -> Result<RunTrace, EngineError> {
    let mut engine = Engine::new(spec, pool)?;
    let horizon = realization.horizon();
    let mut records = Vec::with_capacity(horizon);
    let mut last: Option<(WorkerSet, f64, bool)> = None;
    for t in 1..=horizon {
        let step = engine.step(realization);
        let (cost, ok) = match &last {
            Some((set, cost, ok)) if *set == step.selected => (*cost, *ok),
            _ => {
                let cost = step.selected.cost(&pool.reported_costs);
                let ok = spec
                    .model
                    .satisfies(&step.selected, &pool.qualities, spec.alpha);
                last = Some((step.selected.clone(), cost, ok));
                (cost, ok)
            }
        };
        let labels: Vec<Label> = step
            .selected
            .iter()
            .map(|id| realization.label(id, t))
            .collect();
        records.push(RoundRecord {
            round: t,
            predicted: aggregate_majority(&labels).expect("engines select at least one worker"),
            truth: realization.truth(t),
            round_cost: cost,
            constraint_ok_true_q: ok,
            learned: step.learned,
            selected: step.selected,
        });
    }
    Ok(RunTrace {
        engine: spec.kind,
        spec,
        commit_round: engine.state.commit_round,
        eliminated: engine.state.eliminated,
        records,
    })
}

/// Tasks allocated to each worker over the horizon, given `pool`'s reported
/// costs. Once the engine commits, the remaining rounds are credited in one
/// go since the selection can no longer change.
pub fn allocation_count(
    spec: EngineSpec,
    pool: &WorkerPool,
    realization: &SuccessRealization,
) -> Result<Vec<u64>, EngineError> {
    let mut engine = Engine::new(spec, pool)?;
    let horizon = realization.horizon();
    let mut counts = vec![0u64; pool.len()];
    for t in 1..=horizon {
        let step = engine.step(realization);
        let fixed = !step.learned;
        let weight = if fixed { (horizon - t + 1) as u64 } else { 1 };
        for id in step.selected.iter() {
            counts[id.index()] += weight;
        }
        if fixed {
            break;
        }
    }
    Ok(counts)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("separation is zero and no accuracy slack is set; exploration need not end")]
    NonPositiveDelta,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Upper bounds on the number of exploration rounds. Entries that depend on
/// a zero quantity are `+∞`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ExplorationBounds {
    /// `2n ln(2n/μ) / h⁻¹(Δ)²`.
    pub ccb_ns: f64,
    /// `2 ln(2n/μ) / h⁻¹(Δ)²`.
    pub ccb_s: f64,
    /// `min(ln(2n/μ) / (16 h⁻¹(ξ)²), ccb_s)`.
    pub range: f64,
}

pub fn exploration_bounds(
    n: usize,
    mu: f64,
    model: &ErrorModel,
    delta: f64,
    xi: f64,
) -> Result<ExplorationBounds, BoundError> {
    if !(delta > 0.0) && !(xi > 0.0) {
        return Err(BoundError::NonPositiveDelta);
    }
    let log_term = (2.0 * n as f64 / mu).ln();
    let (ccb_ns, ccb_s) = if delta > 0.0 {
        let g = model.smoothness_h_inv(delta, n)?;
        (
            2.0 * n as f64 * log_term / (g * g),
            2.0 * log_term / (g * g),
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let range = if xi > 0.0 {
        let g = model.smoothness_h_inv(xi, n)?;
        (log_term / (16.0 * g * g)).min(ccb_s)
    } else {
        ccb_s
    };
    Ok(ExplorationBounds {
        ccb_ns,
        ccb_s,
        range,
    })
}

/// Order of the regret lower bound, `ln T / h⁻¹(Δ)²`.
pub fn lower_bound(
    horizon: usize,
    n: usize,
    model: &ErrorModel,
    delta: f64,
) -> Result<f64, BoundError> {
    if !(delta > 0.0) {
        return Err(BoundError::NonPositiveDelta);
    }
    let g = model.smoothness_h_inv(delta, n)?;
    Ok((horizon as f64).ln() / (g * g))
}
