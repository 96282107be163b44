//! Finite-sample decay diagnostics for the coupling and anti-clustering
//! hypotheses.
//!
//! These are evidence, not proofs: a decaying series is consistent with the
//! asymptotic condition, but no fixed `n` can establish it.

use crate::error::{config, Error, Result};
use crate::process::ProcessModel;
use crate::rng::{mix_seed, rng_from_seed};
use crate::special::{linear_fit, mean_stderr};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Default constant in `l_n = [C log n]`.
pub const DEFAULT_ELL_C: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub name: String,
    pub index: Vec<usize>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Least-squares slope of `log value` against the index, over the
    /// strictly positive entries with index >= 1.
    pub fitted_log_slope: Option<f64>,
    pub r2: Option<f64>,
    pub reps: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    reps: usize,
    points: usize,
    fitted_log_slope: Option<f64>,
    r2: Option<f64>,
    note: &'static str,
}

impl DecaySeries {
    fn build(name: &str, index: Vec<usize>, per_rep: &[Vec<f64>]) -> Self {
        let reps = per_rep.len();
        let mut values = Vec::with_capacity(index.len());
        let mut stderr = Vec::with_capacity(index.len());
        let mut col = vec![0.0; reps];
        for i in 0..index.len() {
            for (c, row) in col.iter_mut().zip(per_rep) {
                *c = row[i];
            }
            let (m, se) = mean_stderr(&col);
            values.push(m.max(0.0));
            stderr.push(se);
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = index
            .iter()
            .zip(&values)
            .filter(|(t, v)| **t >= 1 && **v > 0.0 && v.is_finite())
            .map(|(t, v)| (*t as f64, v.ln()))
            .unzip();
        let fit = linear_fit(&xs, &ys);
        Self {
            name: name.into(),
            index,
            values,
            stderr,
            fitted_log_slope: fit.map(|f| f.0),
            r2: fit.map(|f| f.2),
            reps,
        }
    }

    pub fn value_at(&self, index: usize) -> Option<f64> {
        self.index.iter().position(|&i| i == index).map(|k| self.values[k])
    }

    /// CSV with header `index, value, stderr`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index", "value", "stderr"])?;
        for ((i, v), s) in self.index.iter().zip(&self.values).zip(&self.stderr) {
            out.write_record([i.to_string(), v.to_string(), s.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let s = Summary {
            name: &self.name,
            reps: self.reps,
            points: self.index.len(),
            fitted_log_slope: self.fitted_log_slope,
            r2: self.r2,
            note: "decay consistent with the condition does not prove it",
        };
        Ok(serde_json::to_string_pretty(&s)?)
    }
}

fn check_q(model: &ProcessModel, q: f64) -> Result<()> {
    let bound = model.alpha().min(1.0);
    if !(q > 0.0 && q < bound) {
        return config(format!("q must lie in (0, min(alpha, 1)) = (0, {bound}), got {q}"));
    }
    Ok(())
}

fn require_markov(model: &ProcessModel) -> Result<()> {
    if let ProcessModel::Iid { .. } = model {
        return Err(Error::Unsupported("coupling diagnostics need a Markov model (ar1 or sre)".into()));
    }
    Ok(())
}

/// `E|X_t - X*_t|^q` for `t = 0..=t_max`, where `X*` has an independent
/// start and shares all later innovations with `X`.
pub fn coupling_decay(model: &ProcessModel, q: f64, t_max: usize, reps: usize, seed: u64) -> Result<DecaySeries> {
    require_markov(model)?;
    check_q(model, q)?;
    if reps == 0 {
        return config("coupling_decay needs reps > 0");
    }
    let rows = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let (x, y) = model.sample_coupled_paths(t_max + 1, mix_seed(seed, r))?;
            Ok(x.values.iter().zip(&y.values).map(|(a, b)| (a - b).abs().powf(q)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(DecaySeries::build("coupling_decay", (0..=t_max).collect(), &rows))
}

/// `floor(n^0.4)`.
pub fn default_rn(n: usize) -> usize {
    ((n as f64).powf(0.4).floor() as usize).max(1)
}

/// `l_n = [C log n]`, at least 1.
pub fn default_ell_n(n: usize, c: f64) -> usize {
    ((c * (n as f64).ln()).floor() as usize).max(1)
}

fn check_grid(n: usize, r_n: usize, k_grid: &[usize]) -> Result<()> {
    let mut errs = Vec::new();
    if r_n == 0 {
        errs.push("r_n must be >= 1".to_string());
    }
    if r_n >= n {
        errs.push(format!("r_n = {r_n} must be smaller than n = {n}"));
    }
    if k_grid.is_empty() {
        errs.push("k_grid is empty".to_string());
    }
    for &k in k_grid {
        if k == 0 || k > r_n + 1 {
            errs.push(format!("k = {k} outside [1, r_n + 1]"));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errs))
    }
}

// `out[k-1] = n * sum_{j=k}^{r_n} c[j-1]`, plus a trailing 0 for k = r_n + 1.
fn suffix_sums(n: usize, lags: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; lags.len() + 1];
    let mut acc = 0.0;
    for j in (0..lags.len()).rev() {
        acc += lags[j];
        out[j] = n as f64 * acc;
    }
    out
}

fn pick(grid: &[usize], full: &[f64]) -> Vec<f64> {
    grid.iter().map(|&k| full[k - 1]).collect()
}

/// `n sum_{j=k}^{r_n} E[(|X_j / a_n| ^ x)(|X_0 / a_n| ^ x)]` for each `k`
/// in `k_grid`, where `^` is the minimum.
///
/// Each replicate is a path of length `n`; the lag-`j` expectation is the
/// average over all origins `s` with `s + r_n < n`. The same sample feeds
/// every cutoff, so the series is non-increasing in `k`.
pub fn anticluster_stat(
    model: &ProcessModel,
    n: usize,
    r_n: Option<usize>,
    k_grid: &[usize],
    x: f64,
    reps: usize,
    seed: u64,
) -> Result<DecaySeries> {
    let r_n = r_n.unwrap_or_else(|| default_rn(n));
    check_grid(n, r_n, k_grid)?;
    if !(x > 0.0) || reps == 0 {
        return config("anticluster_stat needs x > 0 and reps > 0");
    }
    let a_n = model.normalizing_an(n)?;
    model.validate()?;
    let origins = n - r_n;
    let rows = (0..reps as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            |buf, r| {
                model.fill_path(buf, n, &mut rng_from_seed(mix_seed(seed, r)));
                let t: Vec<f64> = buf.iter().map(|v| (v.abs() / a_n).min(x)).collect();
                let mut lags = vec![0.0; r_n];
                for s in 0..origins {
                    let t0 = t[s];
                    if t0 == 0.0 {
                        continue;
                    }
                    for (j, l) in lags.iter_mut().enumerate() {
                        *l += t0 * t[s + j + 1];
                    }
                }
                for l in &mut lags {
                    *l /= origins as f64;
                }
                pick(k_grid, &suffix_sums(n, &lags))
            },
        )
        .collect::<Vec<_>>();
    Ok(DecaySeries::build("anticluster", k_grid.to_vec(), &rows))
}

/// `n sum_{t=k}^{r_n} E[(|(X_t - X*_t)/a_n|^q ^ 1)(|X_0/a_n|^q ^ 1)]` over a
/// coupled pair started at time 0.
pub fn coupled_anticluster_stat(
    model: &ProcessModel,
    n: usize,
    r_n: Option<usize>,
    k_grid: &[usize],
    q: f64,
    reps: usize,
    seed: u64,
) -> Result<DecaySeries> {
    require_markov(model)?;
    check_q(model, q)?;
    let r_n = r_n.unwrap_or_else(|| default_rn(n));
    check_grid(n, r_n, k_grid)?;
    if reps == 0 {
        return config("coupled_anticluster_stat needs reps > 0");
    }
    let a_n = model.normalizing_an(n)?;
    let rows = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let (x, y) = model.sample_coupled_paths(r_n + 1, mix_seed(seed, r))?;
            let w0 = (x.values[0].abs() / a_n).powf(q).min(1.0);
            let lags: Vec<f64> = (1..=r_n)
                .map(|t| w0 * ((x.values[t] - y.values[t]).abs() / a_n).powf(q).min(1.0))
                .collect();
            Ok(pick(k_grid, &suffix_sums(n, &lags)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecaySeries::build("coupled_anticluster", k_grid.to_vec(), &rows))
}

/// `k_n a_n^{-q} sum_{t=l_n}^{r_n} (E|X_t - X*_t|^q)^{max(1/p, 1)}` with
/// `k_n = n / r_n`.
pub fn coupling_mixing_stat(
    model: &ProcessModel,
    n: usize,
    r_n: Option<usize>,
    ell_n: Option<usize>,
    q: f64,
    p: f64,
    reps: usize,
    seed: u64,
) -> Result<f64> {
    let r_n = r_n.unwrap_or_else(|| default_rn(n));
    let ell_n = ell_n.unwrap_or_else(|| default_ell_n(n, DEFAULT_ELL_C));
    if !(p > model.alpha()) {
        return config(format!("p must exceed alpha, got p = {p}"));
    }
    if ell_n > r_n || r_n >= n {
        return config(format!("need l_n <= r_n < n; got l_n = {ell_n}, r_n = {r_n}, n = {n}"));
    }
    let series = coupling_decay(model, q, r_n, reps, seed)?;
    let e = (1.0 / p).max(1.0);
    let a_n = model.normalizing_an(n)?;
    let tail: f64 = series.values[ell_n..=r_n].iter().map(|v| v.powf(e)).sum();
    Ok(n as f64 / r_n as f64 * a_n.powf(-q) * tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{Innovation, Multiplier, NoiseSpec, SreLaw};

    fn ar1() -> ProcessModel {
        ProcessModel::ar1(0.5, NoiseSpec::pareto(0.5, 1.0).unwrap()).unwrap().with_burn_in(200)
    }

    fn sre_zero() -> ProcessModel {
        let law = SreLaw {
            a: Multiplier::Constant { value: 0.0 },
            b: Innovation::Heavy { noise: NoiseSpec::pareto(0.5, 1.0).unwrap() },
        };
        ProcessModel::sre(0.5, law).unwrap().with_an_presample(200_000)
    }

    #[test]
    fn coupling_slope_ar1() {
        let s = coupling_decay(&ar1(), 0.4, 20, 200, 3).unwrap();
        assert!(s.values[0] > 0.0);
        let want = 0.4 * 0.5f64.ln();
        assert!((s.fitted_log_slope.unwrap() - want).abs() < 1e-6 * want.abs());
    }

    #[test]
    fn coupling_sre_zero_is_exact() {
        let s = coupling_decay(&sre_zero(), 0.3, 10, 50, 1).unwrap();
        assert!(s.values[0] > 0.0);
        assert!(s.values[1..].iter().all(|v| *v == 0.0));
        assert!(s.fitted_log_slope.is_none());
    }

    #[test]
    fn coupling_rejects_iid_and_large_q() {
        let iid = ProcessModel::iid(NoiseSpec::pareto(0.5, 1.0).unwrap()).unwrap();
        assert!(matches!(coupling_decay(&iid, 0.2, 5, 5, 0), Err(Error::Unsupported(_))));
        assert!(coupling_decay(&ar1(), 0.6, 5, 5, 0).is_err());
    }

    #[test]
    fn anticluster_grid_and_monotone() {
        let m = ar1();
        let r = default_rn(2000);
        let grid: Vec<usize> = (1..=r + 1).collect();
        let s = anticluster_stat(&m, 2000, None, &grid, 1.0, 8, 5).unwrap();
        assert_eq!(*s.values.last().unwrap(), 0.0);
        assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        assert!(anticluster_stat(&m, 100, Some(100), &[1], 1.0, 2, 0).is_err());
        match anticluster_stat(&m, 100, Some(10), &[0, 12], 1.0, 2, 0) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coupled_anticluster_sre_zero() {
        let s = coupled_anticluster_stat(&sre_zero(), 10_000, None, &[1, 2, 5], 0.3, 100, 2).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coupled_anticluster_beyond_horizon_vanishes() {
        let s = coupled_anticluster_stat(&ar1(), 10_000, Some(2000), &[1, 1500], 0.4, 50, 2).unwrap();
        assert!(s.values[0] > 0.0);
        assert_eq!(s.values[1], 0.0);
    }

    #[test]
    fn ell_defaults() {
        assert_eq!(default_ell_n(10_000, 2.0), 18);
        assert_eq!(default_rn(100_000), 100);
        let v = coupling_mixing_stat(&ar1(), 10_000, None, None, 0.4, 2.0, 50, 1).unwrap();
        assert!(v >= 0.0 && v.is_finite());
    }

    #[test]
    fn csv_and_summary() {
        let s = coupling_decay(&ar1(), 0.4, 3, 10, 3).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,value,stderr\n"));
        assert_eq!(text.lines().count(), 5);
        assert!(s.summary_json().unwrap().contains("fitted_log_slope"));
    }
}
