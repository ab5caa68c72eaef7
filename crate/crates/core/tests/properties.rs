use aab_core::error_model::{aggregate_majority, majority_error_probability, ErrorModel};
use aab_core::model::{draw_realization, Label, WorkerPool, WorkerSet};
use aab_core::optimizer::{
    certify_monotone, greedy_min_knapsack, solve_exact, KnapsackInstance, SolverKind,
};
use aab_core::seeding::SeedStream;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn qualities(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..=1.0, 1..=max)
}

fn model() -> impl Strategy<Value = ErrorModel> {
    prop_oneof![Just(ErrorModel::WorstCase), Just(ErrorModel::hoeffding())]
}

/// Knapsack instance on a 1/16 weight grid with integer costs, so sums are
/// exact.
fn knapsack() -> impl Strategy<Value = KnapsackInstance> {
    (1usize..=12)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(1u32..=50, n),
                prop::collection::vec(0u32..=16, n),
                1u32..=16,
            )
        })
        .prop_map(|(c, w, frac)| {
            let total: u32 = w.iter().sum();
            let demand = (total * frac / 16).max(1) as f64 / 16.0;
            KnapsackInstance::new(
                c.into_iter().map(f64::from).collect(),
                w.into_iter().map(|x| f64::from(x) / 16.0).collect(),
                demand,
            )
            .unwrap()
        })
        .prop_filter("feasible", |k| k.is_feasible())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn raising_a_quality_never_raises_error(
        m in model(),
        q in qualities(10),
        pick in any::<u64>(),
        bump in 0.0f64..=1.0,
    ) {
        let n = q.len();
        let set = WorkerSet::from_indices((0..n).filter(|i| pick >> i & 1 == 1 || *i == 0));
        let i = (pick as usize / 7) % n;
        let mut up = q.clone();
        up[i] = q[i] + bump * (1.0 - q[i]);
        prop_assert!(m.evaluate(&set, &up).unwrap() <= m.evaluate(&set, &q).unwrap() + 1e-12);
    }

    #[test]
    fn error_gap_is_bounded_by_h(
        m in model(),
        q in qualities(10),
        delta in 1e-4f64..0.5,
        shifts in prop::collection::vec(-1.0f64..=1.0, 10),
    ) {
        let n = q.len();
        let qp: Vec<f64> = q
            .iter()
            .zip(&shifts)
            .map(|(x, s)| (x + s * delta).clamp(0.5, 1.0))
            .collect();
        let all = WorkerSet::full(n);
        let gap = (m.evaluate(&all, &q).unwrap() - m.evaluate(&all, &qp).unwrap()).abs();
        prop_assert!(gap <= m.smoothness_h(delta, n).unwrap() + 1e-12);
    }

    #[test]
    fn h_inverse_round_trips(m in model(), delta in 1e-6f64..1.0, n in 1usize..200) {
        let back = m.smoothness_h_inv(m.smoothness_h(delta, n).unwrap(), n).unwrap();
        prop_assert!((back - delta).abs() <= 1e-9);
    }

    #[test]
    fn greedy_is_within_twice_the_optimum(k in knapsack()) {
        let (set, _) = greedy_min_knapsack(&k).unwrap();
        let opt = k.brute_force().unwrap().unwrap();
        let (ga, best) = (set.cost(k.costs()), opt.cost(k.costs()));
        prop_assert!(k.covers(&set));
        prop_assert!(best <= ga && ga <= 2.0 * best);
    }

    #[test]
    fn exact_solution_is_feasible_and_no_feasible_set_is_cheaper(
        m in model(),
        q in qualities(8),
        costs in prop::collection::vec(1.0f64..10.0, 8),
        alpha in 0.01f64..0.6,
    ) {
        let n = q.len();
        let costs = &costs[..n];
        match solve_exact(&m, &q, costs, alpha).unwrap() {
            Some(s) => {
                prop_assert!(m.satisfies(&s, &q, alpha));
                let c = s.cost(costs);
                for mask in 1u32..(1 << n) {
                    let t = WorkerSet::from_indices((0..n).filter(|i| mask >> i & 1 == 1));
                    if m.satisfies(&t, &q, alpha) {
                        prop_assert!(t.cost(costs) >= c);
                    }
                }
            }
            None => prop_assert!(!m.satisfies(&WorkerSet::full(n), &q, alpha)),
        }
    }

    #[test]
    fn majority_vote_ignores_order(labels in prop::collection::vec(any::<bool>(), 1..15), rot in 0usize..15) {
        let mut ls: Vec<Label> = labels
            .iter()
            .map(|&b| if b { Label::Positive } else { Label::Negative })
            .collect();
        let before = aggregate_majority(&ls).unwrap();
        let k = rot % ls.len();
        ls.rotate_left(k);
        ls.reverse();
        prop_assert_eq!(aggregate_majority(&ls).unwrap(), before);
    }

    #[test]
    fn hoeffding_bounds_exact_majority_error_for_odd_sets(q in prop::collection::vec(0.5f64..=1.0, 1..=9)) {
        // Odd sets have no ties, so the exact error is prior independent.
        let q = if q.len() % 2 == 0 { &q[1..] } else { &q[..] };
        let all = WorkerSet::full(q.len());
        let exact = majority_error_probability(q.iter().copied(), 0.5);
        let hoeff = ErrorModel::hoeffding().evaluate(&all, q).unwrap();
        prop_assert!(exact <= hoeff.min(1.0) + 1e-12);
    }

    #[test]
    fn realizations_are_reproducible(seed in any::<u64>(), rep in 0u64..50) {
        let pool = WorkerPool::truthful(vec![0.7, 0.8, 0.9], vec![1.0, 2.0, 3.0]).unwrap();
        let a = draw_realization(&pool, 40, 0.5, &SeedStream::new(seed), rep);
        let b = draw_realization(&pool, 40, 0.5, &SeedStream::new(seed), rep);
        let all = pool.all();
        for t in 1..=40 {
            prop_assert_eq!(a.reveal(&all, t), b.reveal(&all, t));
            prop_assert_eq!(a.truth(t), b.truth(t));
        }
    }
}

fn sample(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = rng.random_range(1..=8);
    let q = (0..n).map(|_| rng.random_range(0.55..1.0)).collect();
    let c = (0..n).map(|_| rng.random_range(0.5..10.0)).collect();
    (q, c)
}

#[test]
fn exact_selection_is_monotone_in_cost() {
    for model in [ErrorModel::WorstCase, ErrorModel::hoeffding()] {
        let solver =
            move |q: &[f64], c: &[f64]| solve_exact(&model, q, c, 0.2).unwrap().unwrap_or_default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(certify_monotone(&solver, sample, 3000, &mut rng), Ok(()));
    }
}

#[test]
fn greedy_selection_is_monotone_in_cost() {
    let model = ErrorModel::hoeffding();
    let solver = move |q: &[f64], c: &[f64]| {
        SolverKind::Greedy
            .solve(&model, q, c, 0.6, &WorkerSet::full(q.len()))
            .unwrap()
            .unwrap_or_default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    assert_eq!(certify_monotone(&solver, sample, 3000, &mut rng), Ok(()));
}
