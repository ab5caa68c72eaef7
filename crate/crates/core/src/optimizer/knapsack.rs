//! Minimum-knapsack view of the Hoeffding constraint and the ratio-greedy
//! solver with its safe-elimination companion.

use std::cmp::Ordering;

use crate::error_model::ErrorModel;
use crate::model::{WorkerId, WorkerSet};

use super::SolverError;

/// Knapsack weight `2q - 1` of a worker with quality `q`, floored at 0.
pub fn knapsack_weight(quality: f64) -> f64 {
    (2.0 * quality - 1.0).max(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnapsackInstance {
    costs: Vec<f64>,
    weights: Vec<f64>,
    demand: f64,
}

impl KnapsackInstance {
    /// Weights may exceed 1 so that arbitrary instances can be stated;
    /// quality-derived weights always lie in `[0, 1]`.
    pub fn new(costs: Vec<f64>, weights: Vec<f64>, demand: f64) -> Result<Self, SolverError> {
        if costs.len() != weights.len() {
            return Err(SolverError::InvalidInstance(format!(
                "{} costs but {} weights",
                costs.len(),
                weights.len()
            )));
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(SolverError::InvalidInstance(format!("cost {c}")));
        }
        if let Some(a) = weights.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(SolverError::InvalidInstance(format!("weight {a}")));
        }
        if !(demand.is_finite() && demand >= 0.0) {
            return Err(SolverError::InvalidInstance(format!("demand {demand}")));
        }
        Ok(Self {
            costs,
            weights,
            demand,
        })
    }

    /// Instance equivalent to `f_S(q) ≤ alpha` under a Hoeffding model.
    pub fn from_qualities(
        qualities: &[f64],
        costs: &[f64],
        model: &ErrorModel,
        alpha: f64,
    ) -> Result<Self, SolverError> {
        let demand = model
            .knapsack_demand(alpha)
            .ok_or(SolverError::NotKnapsackModel(*model))?;
        Self::new(
            costs.to_vec(),
            qualities.iter().map(|&q| knapsack_weight(q)).collect(),
            demand,
        )
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn weight_of(&self, set: &WorkerSet) -> f64 {
        set.iter().map(|id| self.weights[id.index()]).sum()
    }

    /// `Σ a_i ≥ M` for the given set.
    pub fn covers(&self, set: &WorkerSet) -> bool {
        self.weight_of(set) >= self.demand
    }

    pub fn is_feasible(&self) -> bool {
        self.total_weight() >= self.demand
    }

    pub fn with_cost(&self, worker: WorkerId, cost: f64) -> Self {
        let mut next = self.clone();
        next.costs[worker.index()] = cost;
        next
    }

    /// Cheapest covering set by enumeration. Ties as in the exact solver.
    pub fn brute_force(&self) -> Result<Option<WorkerSet>, SolverError> {
        let n = self.len();
        if n > crate::error_model::BRUTE_FORCE_CAP {
            return Err(SolverError::PoolTooLarge {
                size: n,
                cap: crate::error_model::BRUTE_FORCE_CAP,
            });
        }
        let mut best: Option<(f64, u32)> = None;
        for mask in 1u32..(1u32 << n) {
            let members = crate::error_model::members(mask, n);
            let (mut cost, mut weight) = (0.0, 0.0);
            for i in members {
                cost += self.costs[i];
                weight += self.weights[i];
            }
            if weight < self.demand {
                continue;
            }
            let better = match best {
                None => true,
                Some((bc, bm)) => {
                    cost < bc
                        || (cost == bc
                            && (mask.count_ones() < bm.count_ones()
                                || (mask.count_ones() == bm.count_ones()
                                    && (mask ^ bm) & (mask ^ bm).wrapping_neg() & mask != 0)))
                }
            };
            if better {
                best = Some((cost, mask));
            }
        }
        Ok(best.map(|(_, m)| WorkerSet::from_indices(crate::error_model::members(m, n))))
    }
}

/// One GA candidate: the first `smalls` small elements plus one big one.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Candidate {
    pub smalls: usize,
    pub big: WorkerId,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyTrace {
    /// Workers by ascending `c/a`, ties by index.
    pub ordering: Vec<WorkerId>,
    /// `S_0, S_1, ...`; `S_0` may be empty.
    pub small_sets: Vec<WorkerSet>,
    /// `B_0, B_1, ...`, paired with `small_sets`; the last may be empty.
    pub big_sets: Vec<WorkerSet>,
    pub candidates: Vec<Candidate>,
    pub chosen: usize,
    smalls: Vec<WorkerId>,
}

impl GreedyTrace {
    pub fn candidate_set(&self, k: usize) -> WorkerSet {
        let c = &self.candidates[k];
        let mut set: WorkerSet = self.smalls[..c.smalls].iter().copied().collect();
        set.insert(c.big);
        set
    }

    pub fn chosen_set(&self) -> WorkerSet {
        self.candidate_set(self.chosen)
    }

    pub fn chosen_cost(&self) -> f64 {
        self.candidates[self.chosen].cost
    }
}

fn ratio(cost: f64, weight: f64) -> f64 {
    if weight > 0.0 {
        cost / weight
    } else {
        f64::INFINITY
    }
}

fn ratio_order(costs: &[f64], weights: &[f64], ids: &mut [WorkerId]) {
    ids.sort_by(|a, b| {
        let (i, j) = (a.index(), b.index());
        ratio(costs[i], weights[i])
            .total_cmp(&ratio(costs[j], weights[j]))
            .then(i.cmp(&j))
    });
}

/// The greedy GA on the ratio-sorted list.
///
/// Walking the list with `acc` = weight of the small elements seen so far,
/// element `j` is big when `acc + a_j ≥ M` (and yields the candidate
/// `smalls ∪ {j}`), otherwise it is small and joins `acc`.
pub(crate) fn greedy_among(
    costs: &[f64],
    weights: &[f64],
    demand: f64,
    candidates: &WorkerSet,
) -> Option<GreedyTrace> {
    let total: f64 = candidates.iter().map(|id| weights[id.index()]).sum();
    if candidates.is_empty() || total < demand {
        return None;
    }
    let mut ordering: Vec<WorkerId> = candidates.iter().collect();
    ratio_order(costs, weights, &mut ordering);

    let mut small_sets = vec![WorkerSet::new()];
    let mut big_sets = vec![WorkerSet::new()];
    let mut smalls = Vec::new();
    let mut cands: Vec<Candidate> = Vec::new();
    let (mut acc_weight, mut acc_cost) = (0.0, 0.0);
    let mut chosen = 0usize;
    for &id in &ordering {
        let (c, a) = (costs[id.index()], weights[id.index()]);
        if acc_weight + a >= demand {
            big_sets.last_mut().unwrap().insert(id);
            let cost = acc_cost + c;
            if cands.is_empty() || cost < cands[chosen].cost {
                chosen = cands.len();
            }
            cands.push(Candidate {
                smalls: smalls.len(),
                big: id,
                cost,
            });
        } else {
            if !big_sets.last().unwrap().is_empty() {
                small_sets.push(WorkerSet::new());
                big_sets.push(WorkerSet::new());
            }
            small_sets.last_mut().unwrap().insert(id);
            smalls.push(id);
            acc_weight += a;
            acc_cost += c;
        }
    }
    // Feasibility guarantees the last element is big at the latest.
    debug_assert!(!cands.is_empty());
    Some(GreedyTrace {
        ordering,
        small_sets,
        big_sets,
        candidates: cands,
        chosen,
        smalls,
    })
}

/// GA on the whole instance; costs at most twice the optimum.
pub fn greedy_min_knapsack(
    instance: &KnapsackInstance,
) -> Result<(WorkerSet, GreedyTrace), SolverError> {
    let all = WorkerSet::full(instance.len());
    greedy_among(&instance.costs, &instance.weights, instance.demand, &all)
        .map(|trace| (trace.chosen_set(), trace))
        .ok_or(SolverError::InfeasibleInstance {
            total: instance.total_weight(),
            demand: instance.demand,
        })
}

/// Workers in `active` that can be discarded given LCB/UCB quality
/// profiles.
///
/// Active workers are sorted by `c/â⁻` with `â⁻ = 2q⁻ - 1`; `k` is the
/// shortest prefix whose LCB weight reaches `demand`. A later worker `r` is
/// eliminated when `c_k/â⁻_k ≤ c_r/â⁺_r` and `c_r` is at least every prefix
/// cost. Nothing is eliminated when no prefix reaches the demand.
pub fn safe_eliminate(
    lower: &[f64],
    upper: &[f64],
    costs: &[f64],
    active: &WorkerSet,
    demand: f64,
) -> WorkerSet {
    let lcb_w: Vec<f64> = lower.iter().map(|&q| knapsack_weight(q)).collect();
    let mut order: Vec<WorkerId> = active.iter().collect();
    ratio_order(costs, &lcb_w, &mut order);

    let mut acc = 0.0;
    let mut max_cost = f64::NEG_INFINITY;
    let mut k = None;
    for (pos, id) in order.iter().enumerate() {
        acc += lcb_w[id.index()];
        max_cost = max_cost.max(costs[id.index()]);
        if acc >= demand {
            k = Some(pos);
            break;
        }
    }
    let Some(k) = k else {
        return WorkerSet::new();
    };
    let kid = order[k].index();
    let threshold = ratio(costs[kid], lcb_w[kid]);
    order[k + 1..]
        .iter()
        .copied()
        .filter(|r| {
            let i = r.index();
            let ucb_ratio = ratio(costs[i], knapsack_weight(upper[i]));
            threshold.partial_cmp(&ucb_ratio) != Some(Ordering::Greater) && costs[i] >= max_cost
        })
        .collect()
}
