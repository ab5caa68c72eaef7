use crate::error_model::ErrorModel;
use crate::model::{WorkerId, WorkerSet};

/// Workers from `others`, added in ascending (cost, index) order, until
/// `current ∪ S'` satisfies `f < alpha` under `qualities`.
///
/// Returns the empty set if `current` already satisfies the constraint and
/// all of `others` if no prefix does.
pub fn minimal_augment(
    current: &WorkerSet,
    others: &WorkerSet,
    qualities: &[f64],
    costs: &[f64],
    model: &ErrorModel,
    alpha: f64,
) -> WorkerSet {
    if model.satisfies(current, qualities, alpha) {
        return WorkerSet::new();
    }
    let mut queue: Vec<WorkerId> = others.difference(current).iter().collect();
    queue.sort_by(|a, b| {
        costs[a.index()]
            .total_cmp(&costs[b.index()])
            .then(a.index().cmp(&b.index()))
    });
    let mut combined = current.clone();
    let mut added = WorkerSet::new();
    for id in queue {
        combined.insert(id);
        added.insert(id);
        if model.satisfies(&combined, qualities, alpha) {
            return added;
        }
    }
    others.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nothing_needed_when_current_satisfies() {
        let q = [0.95, 0.6];
        let s = minimal_augment(
            &WorkerSet::from_indices([0]),
            &WorkerSet::from_indices([1]),
            &q,
            &[1.0, 1.0],
            &ErrorModel::WorstCase,
            0.1,
        );
        assert!(s.is_empty());
    }

    #[test]
    fn adds_the_single_good_worker() {
        let s = minimal_augment(
            &WorkerSet::new(),
            &WorkerSet::from_indices([0]),
            &[0.9],
            &[1.0],
            &ErrorModel::WorstCase,
            0.15,
        );
        assert_eq!(s, WorkerSet::from_indices([0]));
    }

    #[test]
    fn cheapest_first() {
        // Either of w1 / w2 fixes the constraint; w2 is cheaper.
        let q = [0.6, 0.95, 0.95];
        let s = minimal_augment(
            &WorkerSet::from_indices([0]),
            &WorkerSet::from_indices([1, 2]),
            &q,
            &[1.0, 4.0, 3.0],
            &ErrorModel::hoeffding(),
            0.9,
        );
        assert_eq!(s, WorkerSet::from_indices([2]));
    }

    #[test]
    fn falls_back_to_all_others() {
        let others = WorkerSet::from_indices([1, 2]);
        let s = minimal_augment(
            &WorkerSet::from_indices([0]),
            &others,
            &[0.6, 0.6, 0.6],
            &[1.0, 1.0, 1.0],
            &ErrorModel::WorstCase,
            1e-6,
        );
        assert_eq!(s, others);
    }
}
