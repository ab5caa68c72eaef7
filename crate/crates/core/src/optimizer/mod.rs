//! Min-cost subset selection under an error-probability constraint.

mod augment;
mod exact;
mod knapsack;
mod monotone;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error_model::ErrorModel;
use crate::model::WorkerSet;

pub use augment::minimal_augment;
pub use exact::{solve_exact, solve_exact_among};
pub use knapsack::{
    greedy_min_knapsack, knapsack_weight, safe_eliminate, Candidate, GreedyTrace, KnapsackInstance,
};
pub use monotone::{certify_monotone, CostParametrized, MonotonicityCounterexample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("pool of {size} workers exceeds the brute-force cap of {cap}")]
    PoolTooLarge { size: usize, cap: usize },
    #[error("knapsack instance is infeasible: total weight {total} < demand {demand}")]
    InfeasibleInstance { total: f64, demand: f64 },
    #[error("invalid knapsack instance: {0}")]
    InvalidInstance(String),
    #[error("the greedy knapsack solver needs a Hoeffding-type model, got {0}")]
    NotKnapsackModel(ErrorModel),
}

/// Which optimizer an engine calls every exploration round.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    /// Enumeration over all subsets (pools of at most 20 workers).
    Exact,
    /// Ratio-greedy min-knapsack, 2-approximate, Hoeffding model only.
    Greedy,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Exact => "exact",
            SolverKind::Greedy => "greedy",
        }
    }

    /// Checks that this solver can run with `model` on a pool of `n` workers.
    pub fn check(&self, model: &ErrorModel, n: usize) -> Result<(), SolverError> {
        match self {
            SolverKind::Exact if n > crate::error_model::BRUTE_FORCE_CAP => {
                Err(SolverError::PoolTooLarge {
                    size: n,
                    cap: crate::error_model::BRUTE_FORCE_CAP,
                })
            }
            SolverKind::Greedy if model.knapsack_demand(0.5).is_none() => {
                Err(SolverError::NotKnapsackModel(*model))
            }
            _ => Ok(()),
        }
    }

    /// Cheapest subset of `candidates` with `f_S(qualities) < alpha`
    /// (exact) or `Σ (2q_i - 1) ≥ M(alpha)` (greedy). `None` if no subset
    /// of the candidates qualifies.
    pub fn solve(
        &self,
        model: &ErrorModel,
        qualities: &[f64],
        costs: &[f64],
        alpha: f64,
        candidates: &WorkerSet,
    ) -> Result<Option<WorkerSet>, SolverError> {
        match self {
            SolverKind::Exact => solve_exact_among(model, qualities, costs, alpha, candidates),
            SolverKind::Greedy => {
                let demand = model
                    .knapsack_demand(alpha)
                    .ok_or(SolverError::NotKnapsackModel(*model))?;
                let weights: Vec<f64> = qualities.iter().map(|&q| knapsack_weight(q)).collect();
                Ok(knapsack::greedy_among(costs, &weights, demand, candidates)
                    .map(|trace| trace.chosen_set()))
            }
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SolverKind::Exact),
            "greedy" => Ok(SolverKind::Greedy),
            other => Err(format!("unknown solver {other:?}")),
        }
    }
}
