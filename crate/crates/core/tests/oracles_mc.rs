//! Oracle values against path Monte Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selfnorm::cluster::ClusterModel;
use selfnorm::diagnostics::{anticluster_stat, default_rn};
use selfnorm::oracles::{expected_greenwood, expected_kurtosis_limit, expected_ratio_max, expected_ratio_student};
use selfnorm::process::{NoiseSpec, ProcessModel};
use selfnorm::stats::{kurtosis_ratio, run_batch, BatchSpec};

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn spec(n: usize, reps: usize, seed: u64) -> BatchSpec {
    BatchSpec { n, reps, seed, ps: vec![2.0], greenwood_ps: vec![2.0], kurtosis: false, centering: Default::default() }
}

#[test]
fn studentized_iid_mean() {
    // Gamma(1/4) / (Gamma(1/2) Gamma(3/4)), from tabulated Gamma values.
    let want = 3.625_609_908_221_908 / (1.772_453_850_905_516 * 1.225_416_702_465_177_6);
    let oracle = expected_ratio_student(&ClusterModel::iid(0.5, 1.0).unwrap(), 2.0).unwrap();
    assert!((oracle.value - want).abs() < 1e-12);
    let m = ProcessModel::iid(NoiseSpec::pareto(0.5, 1.0).unwrap()).unwrap();
    let recs = run_batch(&m, &spec(20_000, 4_000, 5)).unwrap();
    let xs: Vec<f64> = recs.iter().map(|r| r.sum / r.moduli[0]).collect();
    let (mc, se) = mean_se(&xs);
    assert!((mc - want).abs() < 3.0 * se, "{mc} +- {se} vs {want}");
}

#[test]
fn greenwood_ar1_mean() {
    let (alpha, phi) = (0.5, 0.5);
    // Positive geometric cluster: atoms J even / odd carry the same
    // normalized profile, so E[w ||Q||_2^2 / ||Q||_1^2] is the single value
    // (1 - phi)^2 / (1 - phi^2) after the w-weights cancel.
    let factor = (1.0 - phi) * (1.0 - phi) / (1.0 - phi * phi);
    let want = (1.0 - alpha) * factor;
    let oracle = expected_greenwood(&ClusterModel::ar1(alpha, phi, 1.0).unwrap(), 2.0).unwrap();
    assert!((oracle.value - want).abs() < 1e-12, "{} vs {want}", oracle.value);
    let m = ProcessModel::ar1(phi, NoiseSpec::pareto(alpha, 1.0).unwrap()).unwrap();
    let recs = run_batch(&m, &spec(20_000, 4_000, 6)).unwrap();
    let xs: Vec<f64> = recs.iter().map(|r| r.greenwood[0]).collect();
    let (mc, se) = mean_se(&xs);
    assert!((mc - want).abs() < 3.0 * se, "{mc} +- {se} vs {want}");
}

#[test]
fn kurtosis_iid_alpha_one() {
    // alpha = 1 is outside the noise domain, so the Pareto(1) data is drawn here.
    let want = 0.5;
    let oracle = expected_kurtosis_limit(&ClusterModel::iid(1.0, 1.0).unwrap()).unwrap();
    assert!((oracle.value - want).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let n = 100_000;
    let mut buf = vec![0.0; n];
    let xs: Vec<f64> = (0..1_500)
        .map(|_| {
            for v in buf.iter_mut() {
                let u: f64 = rng.random();
                *v = 1.0 / (1.0 - u);
            }
            kurtosis_ratio(&buf).unwrap()
        })
        .collect();
    let (mc, se) = mean_se(&xs);
    assert!((mc - want).abs() < 3.0 * se, "{mc} +- {se} vs {want}");
}

#[test]
fn symmetric_iid_ratio_is_zero() {
    let o = expected_ratio_max(&ClusterModel::iid(0.5, 0.5).unwrap()).unwrap();
    assert_eq!(o.value, 0.0);
    let s = expected_ratio_student(&ClusterModel::iid(0.5, 0.5).unwrap(), 2.0).unwrap();
    assert_eq!(s.value, 0.0);
}

#[test]
fn iid_anticluster_matches_closed_form() {
    // alpha > 1 keeps the products' relative variance manageable.
    let alpha = 1.5;
    let m = ProcessModel::iid(NoiseSpec::pareto(alpha, 1.0).unwrap()).unwrap();
    let n = 20_000;
    let r = default_rn(n);
    let a = m.normalizing_an(n).unwrap();
    // E[min(X/a, 1)] for a Pareto(alpha) variable on [1, inf).
    let m1 = 1.0 / a + (a.powf(-alpha) - 1.0 / a) / (1.0 - alpha);
    let s = anticluster_stat(&m, n, None, &[1, r / 2, r], 1.0, 200, 3).unwrap();
    for (k, v, se) in s.index.iter().zip(&s.values).zip(&s.stderr).map(|((k, v), se)| (k, v, se)) {
        let want = n as f64 * (r + 1 - k) as f64 * m1 * m1;
        assert!((v - want).abs() < 4.0 * se, "k = {k}: {v} +- {se} vs {want}");
    }
}

#[test]
fn ar1_anticluster_decreases() {
    let m = ProcessModel::ar1(0.5, NoiseSpec::pareto(0.5, 1.0).unwrap()).unwrap();
    let grid = [1, 3, 6];
    let small = anticluster_stat(&m, 10_000, None, &grid, 1.0, 100, 1).unwrap();
    let large = anticluster_stat(&m, 100_000, None, &grid, 1.0, 30, 1).unwrap();
    for s in [&small, &large] {
        assert!(s.values.windows(2).all(|w| w[0] > w[1]));
        // Geometric cluster: the tail from k = 6 is a small share of the whole.
        assert!(s.values[2] < 0.25 * s.values[0], "{:?}", s.values);
    }
    // At fixed k the statistic settles to a finite value as n grows.
    let ratio = large.values[0] / small.values[0];
    assert!((0.67..1.5).contains(&ratio), "{ratio}");
}
