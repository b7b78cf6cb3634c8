use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::IndexPolicy;

/// Order of the equations in cycle `cycle`.
///
/// The randomized order is a Fisher-Yates shuffle driven by a generator
/// keyed on `(seed, cycle)`, so every cycle can be reproduced on its own.
pub fn cycle_permutation(policy: IndexPolicy, cycle: usize, n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if policy == IndexPolicy::Randomized && n > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(cycle as u64);
        order.shuffle(&mut rng);
    }
    order
}

/// `[k]`: the equation used by global step `k`.
pub fn select_index(policy: IndexPolicy, k: usize, n: usize, seed: u64) -> usize {
    assert!(n >= 1, "need at least one equation");
    match policy {
        IndexPolicy::Cyclic => k % n,
        IndexPolicy::Randomized => cycle_permutation(policy, k / n, n, seed)[k % n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_is_k_mod_n() {
        assert_eq!(select_index(IndexPolicy::Cyclic, 5, 3, 0), 2);
        assert_eq!(select_index(IndexPolicy::Cyclic, 12, 12, 0), 0);
    }

    #[test]
    fn single_equation_always_zero() {
        for k in 0..10 {
            assert_eq!(select_index(IndexPolicy::Cyclic, k, 1, 3), 0);
            assert_eq!(select_index(IndexPolicy::Randomized, k, 1, 3), 0);
        }
    }

    #[test]
    fn randomized_cycles_are_permutations() {
        let n = 12;
        let mut distinct = std::collections::HashSet::new();
        for cycle in 0..50 {
            let mut seen: Vec<usize> = (0..n)
                .map(|j| select_index(IndexPolicy::Randomized, cycle * n + j, n, 99))
                .collect();
            distinct.insert(seen.clone());
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
        assert!(distinct.len() > 40, "cycles should differ");
    }

    #[test]
    fn randomized_order_depends_on_seed_only() {
        let a = cycle_permutation(IndexPolicy::Randomized, 4, 12, 1);
        let b = cycle_permutation(IndexPolicy::Randomized, 4, 12, 1);
        let c = cycle_permutation(IndexPolicy::Randomized, 4, 12, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest::proptest! {
        #[test]
        fn every_cycle_visits_each_equation_once(n in 1usize..40, cycle in 0usize..10_000, seed in proptest::prelude::any::<u64>()) {
            let mut order = cycle_permutation(IndexPolicy::Randomized, cycle, n, seed);
            order.sort_unstable();
            proptest::prop_assert_eq!(order, (0..n).collect::<Vec<_>>());
        }
    }
}
