//! Closed-form limits of the expected self-normalized statistics.
//!
//! Each oracle is a Gamma-function prefactor times a weighted cluster
//! expectation. Exact for the analytic cluster models, Monte Carlo with a
//! standard error for the empirical one.

use crate::cluster::{ClusterDraw, ClusterEnsemble, ClusterModel};
use crate::error::{config, Error, Result};
use crate::estimate::{Estimate, Method};
use crate::limit::{TransformEngine, DEFAULT_MC_CLUSTERS};
use crate::quadrature::{integrate_real_to_inf, Tolerance};
use crate::special::{gamma, mean_stderr};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub value: f64,
    /// Monte Carlo error of the cluster expectation (0 when exact).
    pub stderr: f64,
    pub method: Method,
    pub components: BTreeMap<String, f64>,
    /// Formula used outside the range where it has been established.
    pub experimental: bool,
}

/// An oracle next to a Monte Carlo estimate of the same quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub name: String,
    pub analytic: f64,
    pub components: BTreeMap<String, f64>,
    pub mc: f64,
    pub stderr: f64,
    pub z: f64,
}

impl MomentReport {
    /// `z` uses the combined standard error of the oracle and the sample mean.
    pub fn compare(name: impl Into<String>, oracle: &OracleValue, samples: &[f64]) -> Self {
        let (mc, se) = mean_stderr(samples);
        let comb = (se * se + oracle.stderr * oracle.stderr).sqrt();
        let d = (mc - oracle.value).abs();
        let z = if comb > 0.0 { d / comb } else if d == 0.0 { 0.0 } else { f64::INFINITY };
        Self { name: name.into(), analytic: oracle.value, components: oracle.components.clone(), mc, stderr: se, z }
    }
}

fn ensemble(model: &ClusterModel) -> Result<ClusterEnsemble> {
    model.ensemble(DEFAULT_MC_CLUSTERS, 0)
}

fn oracle(prefactor: f64, expectation: Estimate, mut components: BTreeMap<String, f64>, experimental: bool) -> OracleValue {
    components.insert("prefactor".into(), prefactor);
    components.insert("cluster_expectation".into(), expectation.estimate);
    OracleValue {
        value: prefactor * expectation.estimate,
        stderr: prefactor.abs() * expectation.stderr,
        method: if expectation.method == Method::MonteCarlo { Method::MonteCarlo } else { Method::ClosedForm },
        components,
        experimental,
    }
}

/// `lim E[S_n / M_n] = E[sum Q~] / (1 - alpha)`.
pub fn expected_ratio_max(model: &ClusterModel) -> Result<OracleValue> {
    let alpha = model.alpha();
    if (alpha - 1.0).abs() < 1e-12 {
        return Err(Error::Unsupported("alpha = 1".into()));
    }
    let ens = ensemble(model)?;
    let e = ens.expect_tilted(|q| q.iter().sum());
    let mut c = BTreeMap::new();
    c.insert("extremal_index".into(), ens.extremal_index().estimate);
    Ok(oracle(1.0 / (1.0 - alpha), e, c, false))
}

/// `lim E[S_n / gamma_{n,p}]`.
///
/// The prefactor is `Gamma((1-alpha)/p) / (Gamma(1/p) Gamma(1-alpha/p))`;
/// for `alpha > 1` the value is flagged experimental.
pub fn expected_ratio_student(model: &ClusterModel, p: f64) -> Result<OracleValue> {
    let alpha = model.alpha();
    if !(p > alpha) {
        return config(format!("studentized oracle needs p > alpha, got p = {p}"));
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return Err(Error::Unsupported("alpha = 1".into()));
    }
    let pre = gamma((1.0 - alpha) / p)? / (gamma(1.0 / p)? * gamma(1.0 - alpha / p)?);
    let ens = ensemble(model)?;
    let e = ens.expect_weighted(|q| q.norm(p).powf(alpha), |q| q.sum() / q.norm(p));
    let mut c = BTreeMap::new();
    c.insert("cluster_moment".into(), ens.expect(|q| q.norm(p).powf(alpha)).estimate);
    Ok(oracle(pre, e, c, alpha > 1.0))
}

/// `Q^ = Q / ||Q||_p` under the measure tilted by `||Q||_p^alpha`, as an
/// explicit reweighted ensemble.
pub fn q_hat_ensemble(model: &ClusterModel, p: f64) -> Result<ClusterEnsemble> {
    let ens = ensemble(model)?;
    let a = ens.alpha;
    let raw: Vec<f64> = ens.draws.iter().zip(&ens.weights).map(|(q, w)| w * q.norm(p).powf(a)).collect();
    let total: f64 = raw.iter().sum();
    let draws = ens
        .draws
        .iter()
        .map(|q| {
            let n = q.norm(p);
            ClusterDraw { t_min: q.t_min, values: q.values.iter().map(|v| v / n).collect(), alpha: a, truncation_error: q.truncation_error }
        })
        .collect();
    Ok(ClusterEnsemble { alpha: a, draws, weights: raw.iter().map(|r| r / total).collect(), method: Method::ExactAtoms })
}

/// `lim E[T_{n,p}]` for the Greenwood statistic of a positive series,
/// `alpha < min(p, 1)`.
pub fn expected_greenwood(model: &ClusterModel, p: f64) -> Result<OracleValue> {
    let alpha = model.alpha();
    if !(alpha < 1.0 && alpha < p) {
        return config(format!("greenwood oracle needs alpha < min(p, 1); alpha = {alpha}, p = {p}"));
    }
    let ens = ensemble(model)?;
    if ens.draws.iter().any(|q| q.values.iter().any(|v| *v < 0.0)) {
        return config("greenwood oracle needs a nonnegative cluster");
    }
    greenwood_from_ensemble(&ens, alpha, p)
}

fn greenwood_from_ensemble(ens: &ClusterEnsemble, alpha: f64, p: f64) -> Result<OracleValue> {
    let pre = gamma(p - alpha)? / (gamma(p)? * gamma(1.0 - alpha)?);
    let e = ens.expect_weighted(|q| q.norm(1.0).powf(alpha), |q| q.power_sum(p) / q.norm(1.0).powf(p));
    Ok(oracle(pre, e, BTreeMap::new(), false))
}

/// `lim E[||X||_4^4 / ||X||_2^4] = (1 - alpha/2) E[(||Q||_2^alpha / E||Q||_2^alpha) ||Q||_4^4 / ||Q||_2^4]`.
///
/// Computed as the Greenwood limit of the squared series, whose cluster is
/// `Q^2` with index `alpha / 2`.
pub fn expected_kurtosis_limit(model: &ClusterModel) -> Result<OracleValue> {
    let ens = ensemble(model)?;
    let a2 = ens.alpha / 2.0;
    let squared = ClusterEnsemble {
        alpha: a2,
        draws: ens
            .draws
            .iter()
            .map(|q| ClusterDraw {
                t_min: q.t_min,
                values: q.values.iter().map(|v| v * v).collect(),
                alpha: a2,
                truncation_error: q.truncation_error,
            })
            .collect(),
        weights: ens.weights.clone(),
        method: ens.method,
    };
    greenwood_from_ensemble(&squared, a2, 2.0)
}

/// `E R` from a central difference of the ratio characteristic function.
pub fn ratio_mean_from_cf(engine: &TransformEngine, h: f64) -> Result<f64> {
    let up = engine.ratio_cf(h)?.value;
    let dn = engine.ratio_cf(-h)?.value;
    Ok(((up - dn) / (2.0 * h)).im)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaIdentityRow {
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub rel_error: f64,
}

/// `x^{-1/p} = (p / Gamma(1/p)) int_0^inf exp(-lambda^p x) d lambda` by quadrature.
pub fn gamma_identity_check(p: f64, xs: &[f64]) -> Result<Vec<GammaIdentityRow>> {
    if !(p > 0.0) {
        return config("gamma identity needs p > 0");
    }
    let c = p / gamma(1.0 / p)?;
    xs.iter()
        .map(|&x| {
            if !(x > 0.0) {
                return config("gamma identity needs x > 0");
            }
            let tol = Tolerance { abs: 1e-15, rel: 1e-12, max_intervals: 4000 };
            let (v, _) = integrate_real_to_inf(|l| (-(l.powf(p)) * x).exp(), 0.0, tol);
            let rhs = c * v;
            let lhs = x.powf(-1.0 / p);
            Ok(GammaIdentityRow { x, lhs, rhs, rel_error: ((rhs - lhs) / lhs).abs() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ratio_max_values() {
        let iid = ClusterModel::iid(0.5, 1.0).unwrap();
        assert_relative_eq!(expected_ratio_max(&iid).unwrap().value, 2.0, epsilon = 1e-12);
        let ar = ClusterModel::ar1(0.5, 0.5, 1.0).unwrap();
        assert_relative_eq!(expected_ratio_max(&ar).unwrap().value, 4.0, epsilon = 1e-9);
        let sym = ClusterModel::iid(0.5, 0.5).unwrap();
        assert_relative_eq!(expected_ratio_max(&sym).unwrap().value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ratio_max_matches_cf_derivative() {
        for m in [
            ClusterModel::iid(0.5, 1.0).unwrap(),
            ClusterModel::ar1(0.5, 0.5, 1.0).unwrap(),
            ClusterModel::ar1(0.7, -0.4, 0.8).unwrap(),
            ClusterModel::iid(1.5, 0.7).unwrap(),
        ] {
            let e = TransformEngine::new(&m, 0, 0).unwrap();
            let fd = ratio_mean_from_cf(&e, 1e-3).unwrap();
            let or = expected_ratio_max(&m).unwrap().value;
            assert!((fd - or).abs() < 1e-3, "{m:?}: {fd} vs {or}");
        }
    }

    #[test]
    fn student_iid_value() {
        let m = ClusterModel::iid(0.5, 1.0).unwrap();
        let expect = gamma(0.25).unwrap() / (gamma(0.5).unwrap() * gamma(0.75).unwrap());
        assert_relative_eq!(expected_ratio_student(&m, 2.0).unwrap().value, expect, max_relative = 1e-12);
    }

    #[test]
    fn student_q_hat_route_agrees() {
        for &phi in &[0.5, 0.8] {
            let m = ClusterModel::ar1(0.5, phi, 1.0).unwrap();
            let o = expected_ratio_student(&m, 2.0).unwrap();
            let qh = q_hat_ensemble(&m, 2.0).unwrap();
            let e_sum = qh.expect(|q| q.sum()).estimate;
            assert_relative_eq!(o.components["cluster_expectation"], e_sum, max_relative = 1e-12);
            assert_relative_eq!(e_sum, ((1.0 + phi) / (1.0 - phi)).sqrt(), max_relative = 1e-9);
        }
    }

    #[test]
    fn greenwood_values() {
        let m = ClusterModel::iid(0.5, 1.0).unwrap();
        assert_relative_eq!(expected_greenwood(&m, 2.0).unwrap().value, 0.5, epsilon = 1e-12);
        assert_relative_eq!(expected_greenwood(&m, 3.0).unwrap().value, 0.375, epsilon = 1e-12);
        let ar = ClusterModel::ar1(0.5, 0.5, 1.0).unwrap();
        assert_relative_eq!(expected_greenwood(&ar, 2.0).unwrap().value, 0.5 / 3.0, max_relative = 1e-9);
        assert!(expected_greenwood(&ClusterModel::iid(0.5, 0.5).unwrap(), 2.0).is_err());
        assert!(expected_greenwood(&ClusterModel::iid(1.5, 1.0).unwrap(), 2.0).is_err());
    }

    #[test]
    fn greenwood_decreases_in_alpha() {
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let a = k as f64 / 10.0;
            let v = expected_greenwood(&ClusterModel::iid(a, 1.0).unwrap(), 2.0).unwrap().value;
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn kurtosis_iid() {
        for &a in &[0.5, 1.5] {
            let m = ClusterModel::iid(a, 0.5).unwrap();
            assert_relative_eq!(expected_kurtosis_limit(&m).unwrap().value, 1.0 - a / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_identity() {
        for &p in &[0.5, 1.0, 2.0, 3.5] {
            for row in gamma_identity_check(p, &[0.1, 1.0, 7.0]).unwrap() {
                assert!(row.rel_error < 1e-8, "p {p}: {row:?}");
            }
        }
    }
}
