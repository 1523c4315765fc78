use cq_core::quotient::QuotientOperator;
use cq_core::symfun::{sigma, sigma_minor_ext};
use proptest::prelude::*;

/// Positive spectrum with entries log-uniform over roughly [1e-2, 1e2].
fn spectrum(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    n.prop_flat_map(|n| prop::collection::vec((-4.6f64..4.6).prop_map(f64::exp), n))
}

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Sum over k-subsets by bitmask enumeration.
fn sigma_by_subsets(k: usize, lambda: &[f64]) -> f64 {
    (0u32..1 << lambda.len())
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| {
            (0..lambda.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| lambda[i])
                .product::<f64>()
        })
        .sum()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn sigma_matches_subset_sum(lambda in spectrum(1..=7), k in 0usize..8) {
        let k = k.min(lambda.len());
        prop_assert!(close(sigma(k, &lambda).unwrap(), sigma_by_subsets(k, &lambda), 1e-12));
    }

    #[test]
    fn sigma_is_permutation_invariant(lambda in spectrum(2..=7), shift in 0usize..7, k in 1usize..8) {
        let k = k.min(lambda.len());
        let mut p = lambda.clone();
        p.rotate_left(shift % lambda.len());
        p.reverse();
        prop_assert!(close(sigma(k, &lambda).unwrap(), sigma(k, &p).unwrap(), 1e-13));
    }

    #[test]
    fn deletion_identity(lambda in spectrum(2..=7), k in 1usize..8, i in 0usize..7) {
        let k = k.min(lambda.len());
        let i = i % lambda.len();
        let lhs = sigma(k, &lambda).unwrap();
        let k = k as i64;
        let rhs = sigma_minor_ext(k, &lambda, i) + lambda[i] * sigma_minor_ext(k - 1, &lambda, i);
        prop_assert!(close(lhs, rhs, 1e-13));
        let mut removed = lambda.clone();
        removed.remove(i);
        let direct = sigma_by_subsets(k as usize, &removed);
        prop_assert!(close(sigma_minor_ext(k, &lambda, i), direct, 1e-12));
    }

    #[test]
    fn sigma_is_homogeneous(lambda in spectrum(1..=6), k in 0usize..7, t in 0.1f64..10.0) {
        let k = k.min(lambda.len());
        let scaled: Vec<f64> = lambda.iter().map(|x| t * x).collect();
        prop_assert!(close(sigma(k, &scaled).unwrap(), t.powi(k as i32) * sigma(k, &lambda).unwrap(), 1e-13));
    }

    #[test]
    fn quotient_homogeneity_and_euler(lambda in spectrum(3..=6), dk in 1usize..3, t in 0.1f64..10.0) {
        let n = lambda.len();
        let op = QuotientOperator::new(n, n - dk).unwrap();
        let d = dk as f64;
        let f = op.value(&lambda).unwrap();
        let scaled: Vec<f64> = lambda.iter().map(|x| t * x).collect();
        prop_assert!(close(op.value(&scaled).unwrap(), t.powf(d) * f, 1e-12));
        let jet = op.jet(&lambda).unwrap();
        let euler: f64 = jet.grad.iter().zip(&lambda).map(|(g, l)| g * l).sum();
        prop_assert!(close(euler, d * f, 1e-11));
    }

    #[test]
    fn quotient_is_elliptic_with_ordered_gradient(lambda in spectrum(3..=6).prop_map(descending)) {
        let n = lambda.len();
        let op = QuotientOperator::standard(n).unwrap();
        let jet = op.jet(&lambda).unwrap();
        prop_assert!(jet.grad.iter().all(|&g| g > 0.0), "{:?}", jet.grad);
        for w in jet.grad.windows(2) {
            prop_assert!(w[0] <= w[1] * (1.0 + 1e-12), "{:?}", jet.grad);
        }
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    prop_assert!(jet.off(p, q) < 0.0);
                }
            }
        }
    }
}
