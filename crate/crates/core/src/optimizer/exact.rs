use crate::error_model::{members, ErrorModel, BRUTE_FORCE_CAP};
use crate::model::{WorkerId, WorkerSet};

use super::SolverError;

/// Exact minimum-cost subset with `f_S(q) < alpha` over the whole pool.
///
/// Ties are broken by fewer workers, then by the lexicographically smallest
/// index list. Returns `Ok(None)` when no subset qualifies.
pub fn solve_exact(
    model: &ErrorModel,
    qualities: &[f64],
    costs: &[f64],
    alpha: f64,
) -> Result<Option<WorkerSet>, SolverError> {
    solve_exact_among(
        model,
        qualities,
        costs,
        alpha,
        &WorkerSet::full(qualities.len()),
    )
}

/// [`solve_exact`] restricted to subsets of `candidates`.
pub fn solve_exact_among(
    model: &ErrorModel,
    qualities: &[f64],
    costs: &[f64],
    alpha: f64,
    candidates: &WorkerSet,
) -> Result<Option<WorkerSet>, SolverError> {
    let m = candidates.len();
    if m > BRUTE_FORCE_CAP {
        return Err(SolverError::PoolTooLarge {
            size: m,
            cap: BRUTE_FORCE_CAP,
        });
    }
    let ids: Vec<WorkerId> = candidates.iter().collect();
    let c: Vec<f64> = ids.iter().map(|id| costs[id.index()]).collect();
    let q: Vec<f64> = ids.iter().map(|id| qualities[id.index()]).collect();

    // (cost, size, mask) of the incumbent.
    let mut best: Option<(f64, u32, u32)> = None;
    for mask in 1u32..(1u32 << m) {
        let cost: f64 = members(mask, m).map(|i| c[i]).sum();
        let size = mask.count_ones();
        let improves = match best {
            None => true,
            Some((bc, bs, bm)) => {
                cost < bc || (cost == bc && (size < bs || (size == bs && lex_less(mask, bm))))
            }
        };
        if improves && model.evaluate_iter(members(mask, m).map(|i| q[i])) < alpha {
            best = Some((cost, size, mask));
        }
    }
    Ok(best.map(|(_, _, mask)| members(mask, m).map(|i| ids[i]).collect()))
}

/// For equal-size masks, whether `a`'s sorted member list precedes `b`'s.
/// The lowest differing bit belongs to the lexicographically smaller list.
fn lex_less(a: u32, b: u32) -> bool {
    let diff = a ^ b;
    diff != 0 && a & (diff & diff.wrapping_neg()) != 0
}
