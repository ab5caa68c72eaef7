use rand::Rng;

use crate::model::{WorkerId, WorkerSet};

/// A deterministic selection rule parametrized by reported costs.
pub trait CostParametrized {
    fn select(&self, qualities: &[f64], costs: &[f64]) -> WorkerSet;
}

impl<F> CostParametrized for F
where
    F: Fn(&[f64], &[f64]) -> WorkerSet,
{
    fn select(&self, qualities: &[f64], costs: &[f64]) -> WorkerSet {
        self(qualities, costs)
    }
}

/// Worker selected at `high_cost` but dropped after lowering to `low_cost`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityCounterexample {
    pub trial: usize,
    pub worker: WorkerId,
    pub qualities: Vec<f64>,
    pub costs: Vec<f64>,
    pub high_cost: f64,
    pub low_cost: f64,
}

/// Samples `trials` instances, lowers one worker's cost in each and checks
/// that a worker selected at the higher cost stays selected.
///
/// `sample` draws `(qualities, costs)`; the lowered cost is uniform in
/// `[0, c_i)`.
pub fn certify_monotone<S, G, R>(
    solver: &S,
    mut sample: G,
    trials: usize,
    rng: &mut R,
) -> Result<(), MonotonicityCounterexample>
where
    S: CostParametrized + ?Sized,
    G: FnMut(&mut R) -> (Vec<f64>, Vec<f64>),
    R: Rng,
{
    for trial in 0..trials {
        let (qualities, costs) = sample(rng);
        if costs.is_empty() {
            continue;
        }
        let high = solver.select(&qualities, &costs);
        let i = rng.random_range(0..costs.len());
        let worker = WorkerId(i);
        if !high.contains(worker) {
            continue;
        }
        let mut lowered = costs.clone();
        lowered[i] = costs[i] * rng.random::<f64>();
        if !solver.select(&qualities, &lowered).contains(worker) {
            return Err(MonotonicityCounterexample {
                trial,
                worker,
                qualities,
                high_cost: costs[i],
                low_cost: lowered[i],
                costs,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn anti_monotone_toy_is_caught() {
        let parity = |_: &[f64], c: &[f64]| -> WorkerSet {
            WorkerSet::from_indices((0..c.len()).filter(|&i| (c[i].floor() as i64) % 2 == 0))
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = |r: &mut ChaCha8Rng| {
            let c: Vec<f64> = (0..4).map(|_| r.random_range(0.0..10.0)).collect();
            (vec![0.8; 4], c)
        };
        let cx = certify_monotone(&parity, sample, 1000, &mut rng).unwrap_err();
        assert!(cx.low_cost < cx.high_cost);
    }
}
