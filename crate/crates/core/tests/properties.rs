use proptest::prelude::*;
use selfnorm::cluster::ClusterModel;
use selfnorm::diagnostics::coupling_decay;
use selfnorm::harness::ks_two_sample;
use selfnorm::limit::hybrid_cf;
use selfnorm::process::{NoiseSpec, ProcessModel};
use selfnorm::stats::{compute_stats_values, greenwood_values, ratio_max, studentized};

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![-1e6..-1e-6f64, 1e-6..1e6f64], 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn greenwood_is_bounded(xs in prop::collection::vec(1e-6..1e6f64, 1..60), p in 1.0..4.0f64) {
        let g = greenwood_values(&xs, p).unwrap();
        let lo = (xs.len() as f64).powf(1.0 - p);
        prop_assert!(g >= lo * (1.0 - 1e-9) && g <= 1.0 + 1e-12, "{g} not in [{lo}, 1]");
    }

    #[test]
    fn self_normalized_ratios_are_bounded(xs in values()) {
        let s = compute_stats_values(&xs, &[1.0], 0.0).unwrap();
        prop_assert!(studentized(&s, 1.0).unwrap().abs() <= 1.0 + 1e-12);
        prop_assert!(ratio_max(&s).unwrap().abs() <= xs.len() as f64 * (1.0 + 1e-12));
    }

    #[test]
    fn ks_is_symmetric_and_bounded(a in values(), b in values()) {
        let d = ks_two_sample(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_two_sample(&b, &a));
        prop_assert_eq!(ks_two_sample(&a, &a), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn hybrid_at_zero_is_a_cdf(alpha in 0.2..1.8f64, qp in 0.0..1.0f64, x in 0.05..5.0f64, dx in 0.01..3.0f64) {
        let c = ClusterModel::iid(alpha, qp).unwrap();
        let lo = hybrid_cf(0.0, x, &c).unwrap().value;
        let hi = hybrid_cf(0.0, x + dx, &c).unwrap().value;
        prop_assert!(lo.im.abs() < 1e-9);
        prop_assert!(lo.re >= -1e-9 && hi.re <= 1.0 + 1e-9);
        prop_assert!(hi.re >= lo.re - 1e-9, "{} > {}", lo.re, hi.re);
    }

    #[test]
    fn coupling_decay_is_nonnegative(phi in -0.9..0.9f64, alpha in 0.3..1.8f64, seed in any::<u64>()) {
        let m = ProcessModel::ar1(phi, NoiseSpec::pareto(alpha, 0.5).unwrap()).unwrap().with_burn_in(50);
        let s = coupling_decay(&m, 0.5 * alpha.min(1.0), 8, 20, seed).unwrap();
        prop_assert_eq!(s.values.len(), 9);
        prop_assert!(s.values.iter().all(|v| *v >= 0.0 && v.is_finite()));
        prop_assert!(s.stderr.iter().all(|v| *v >= 0.0));
    }
}
