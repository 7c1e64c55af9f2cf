//! Property tests for the algebraic invariants that hold on every valid
//! input, not just on frozen examples.

use otfs::exact::{wasserstein_1d, wasserstein_lp, CostSpec};
use otfs::measures::{kl_divergence, DiscreteMeasure};
use otfs::sinkhorn::{dual_value, KernelMatrix};
use proptest::prelude::*;

fn weights_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 1..max_len)
        .prop_filter("needs positive total mass", |w| {
            w.iter().sum::<f64>() > 1e-3
        })
}

fn coords_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, len..=len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn measure_invariants(weights in weights_strategy(40)) {
        let n = weights.len();
        let coords: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let m = DiscreteMeasure::new(1, coords, weights).unwrap();
        // weights sum to one within 1e-12 and none is zero
        let total: f64 = m.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(m.weights().iter().all(|&w| w > 0.0));
        // entropy between 0 and log n, equality only for uniform
        let h = m.entropy();
        prop_assert!(h >= -1e-15);
        prop_assert!(h <= (m.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn kl_nonnegative_on_probability_vectors(
        raw_p in weights_strategy(20),
        raw_q in weights_strategy(20),
    ) {
        let len = raw_p.len().min(raw_q.len());
        let norm = |v: &[f64]| {
            let s: f64 = v[..len].iter().map(|x| x + 1e-6).sum();
            v[..len].iter().map(|x| (x + 1e-6) / s).collect::<Vec<_>>()
        };
        let p = norm(&raw_p);
        let q = norm(&raw_q);
        let d = kl_divergence(&p, &q).unwrap();
        prop_assert!(d >= -1e-12, "KL = {d}");
        // KL(p | p) = 0
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn product_entropy_is_additive(
        wa in weights_strategy(15),
        wb in weights_strategy(15),
    ) {
        let a = DiscreteMeasure::new(1, (0..wa.len()).map(|i| i as f64).collect(), wa).unwrap();
        let b = DiscreteMeasure::new(1, (0..wb.len()).map(|i| i as f64).collect(), wb).unwrap();
        let mut product = Vec::new();
        for &x in a.weights() {
            for &y in b.weights() {
                product.push(x * y);
            }
        }
        let h: f64 = product.iter().map(|&w| -w * w.ln()).sum();
        prop_assert!((h - (a.entropy() + b.entropy())).abs() <= 1e-10);
    }

    #[test]
    fn one_dimensional_distance_is_symmetric_and_zero_on_self(
        xs in coords_strategy(12),
        ys in coords_strategy(9),
    ) {
        let a = DiscreteMeasure::empirical(1, xs).unwrap();
        let b = DiscreteMeasure::empirical(1, ys).unwrap();
        let dab = wasserstein_1d(&a, &b, 2.0).unwrap();
        let dba = wasserstein_1d(&b, &a, 2.0).unwrap();
        prop_assert!((dab - dba).abs() <= 1e-10 * (1.0 + dab));
        prop_assert!(wasserstein_1d(&a, &a, 2.0).unwrap() <= 1e-10);
        prop_assert!(dab >= 0.0);
    }

    #[test]
    fn dual_value_invariant_under_joint_rescale(
        wa in weights_strategy(10),
        wb in weights_strategy(10),
        c in 0.01f64..100.0,
    ) {
        let a = DiscreteMeasure::new(1, (0..wa.len()).map(|i| i as f64 * 0.1).collect(), wa).unwrap();
        let b = DiscreteMeasure::new(1, (0..wb.len()).map(|i| i as f64 * 0.1).collect(), wb).unwrap();
        let kernel = KernelMatrix::build(&a, &b, 2.0, 2.0, 1 << 16).unwrap();
        let alpha = vec![1.3; a.len()];
        let alpha_tilde = vec![0.7; b.len()];
        let base = dual_value(&alpha, &alpha_tilde, &kernel, a.weights(), b.weights());
        let scaled_a: Vec<f64> = alpha.iter().map(|&x| x * c).collect();
        let scaled_b: Vec<f64> = alpha_tilde.iter().map(|&x| x / c).collect();
        let scaled = dual_value(&scaled_a, &scaled_b, &kernel, a.weights(), b.weights());
        prop_assert!((base - scaled).abs() <= 1e-10 * (1.0 + base.abs()));
    }
}

/// Non-proptest cross-check: the LP and the CDF coupling agree on random
/// 1-D instances of mixed weights (oracle equivalence at 1e-9 relative).
#[test]
fn lp_equals_cdf_coupling_on_the_line() {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    for trial in 0..20 {
        let n = rng.gen_range(2..=40);
        let m = rng.gen_range(2..=40);
        let a = DiscreteMeasure::new(
            1,
            (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            (0..n).map(|_| rng.gen_range(0.05..1.0)).collect(),
        )
        .unwrap();
        let b = DiscreteMeasure::new(
            1,
            (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            (0..m).map(|_| rng.gen_range(0.05..1.0)).collect(),
        )
        .unwrap();
        let r: f64 = if trial % 2 == 0 { 2.0 } else { 1.5 };
        let spec = CostSpec::new(r).unwrap();
        let (d_lp, _) = wasserstein_lp(&a, &b, &spec).unwrap();
        let d_1d = wasserstein_1d(&a, &b, r).unwrap();
        assert!(
            (d_lp - d_1d).abs() <= 1e-9 * (1.0 + d_lp),
            "trial {trial}: {d_lp} vs {d_1d}"
        );
    }
}
