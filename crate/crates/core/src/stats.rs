//! Partial sums, maxima, `l^p` moduli and the self-normalized ratios built
//! from them.
//!
//! Everything is computed after dividing by the running maximum `M_n`, so a
//! path whose values span hundreds of orders of magnitude does not overflow
//! `sum |X|^p`. Sums use compensated summation.

use crate::error::{config, Error, Result};
use crate::process::{Path, ProcessModel};
use crate::rng::{mix_seed, rng_from_seed};
use crate::special::{KahanSum, Power};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// No centering below alpha = 1, the analytic mean above it.
    #[default]
    Auto,
    None,
    Analytic,
    Empirical,
}

impl Centering {
    /// Centering constant for `values` generated by `model`.
    pub fn constant(&self, model: &ProcessModel, values: &[f64]) -> Result<f64> {
        let alpha = model.alpha();
        Ok(match self {
            Centering::None => 0.0,
            Centering::Auto | Centering::Analytic => {
                if alpha < 1.0 {
                    0.0
                } else {
                    model.stationary_mean()?
                }
            }
            Centering::Empirical => {
                let mut s = KahanSum::new();
                for v in values {
                    s.add(*v);
                }
                if values.is_empty() {
                    0.0
                } else {
                    s.value() / values.len() as f64
                }
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    pub n: usize,
    pub center: f64,
    /// `S_n` of the centered values.
    pub sum: f64,
    /// `M_n = max |X_t - c|`.
    pub max_abs: f64,
    /// `(p, gamma_{n,p})` pairs.
    pub moduli: Vec<(f64, f64)>,
    /// All centered values are zero.
    pub degenerate: bool,
}

impl PathStats {
    pub fn modulus(&self, p: f64) -> Option<f64> {
        self.moduli.iter().find(|(q, _)| (*q - p).abs() < 1e-12).map(|(_, g)| *g)
    }
}

/// Statistics of a path under a centering policy.
pub fn compute_stats(path: &Path, ps: &[f64], centering: Centering) -> Result<PathStats> {
    let c = centering.constant(&path.model, &path.values)?;
    compute_stats_values(&path.values, ps, c)
}

/// Statistics of `values - center`.
pub fn compute_stats_values(values: &[f64], ps: &[f64], center: f64) -> Result<PathStats> {
    for &p in ps {
        if !(p > 0.0 && p.is_finite()) {
            return config(format!("moduli need finite p > 0, got {p}"));
        }
    }
    let n = values.len();
    let mut m = 0.0f64;
    let mut s = KahanSum::new();
    for &v in values {
        let x = v - center;
        s.add(x);
        m = m.max(x.abs());
    }
    if !m.is_finite() {
        return Err(Error::Numerical("non-finite path value".into()));
    }
    if m == 0.0 {
        return Ok(PathStats {
            n,
            center,
            sum: 0.0,
            max_abs: 0.0,
            moduli: ps.iter().map(|p| (*p, 0.0)).collect(),
            degenerate: true,
        });
    }
    let inv = 1.0 / m;
    let moduli = ps
        .iter()
        .map(|&p| {
            let pw = Power::new(p);
            let mut acc = KahanSum::new();
            for &v in values {
                let r = ((v - center) * inv).abs();
                if r > 0.0 {
                    acc.add(pw.apply(r));
                }
            }
            (p, m * acc.value().powf(1.0 / p))
        })
        .collect();
    Ok(PathStats { n, center, sum: s.value(), max_abs: m, moduli, degenerate: false })
}

fn not_degenerate(stats: &PathStats) -> Result<()> {
    if stats.degenerate {
        return Err(Error::Degenerate("path is identically zero after centering".into()));
    }
    Ok(())
}

/// `S_n / M_n`.
pub fn ratio_max(stats: &PathStats) -> Result<f64> {
    not_degenerate(stats)?;
    Ok(stats.sum / stats.max_abs)
}

/// `S_n / gamma_{n,p}`.
pub fn studentized(stats: &PathStats, p: f64) -> Result<f64> {
    not_degenerate(stats)?;
    let g = stats
        .modulus(p)
        .ok_or_else(|| Error::Config(format!("modulus for p = {p} was not computed")))?;
    Ok(stats.sum / g)
}

/// Greenwood statistic `sum X^p / (sum X)^p` of a positive sample.
pub fn greenwood_values(values: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return config("greenwood needs p > 0");
    }
    if values.is_empty() {
        return Err(Error::Degenerate("empty sample".into()));
    }
    let mut m = 0.0f64;
    for &v in values {
        if !(v > 0.0) {
            return Err(Error::Degenerate("greenwood needs strictly positive data".into()));
        }
        m = m.max(v);
    }
    let inv = 1.0 / m;
    let pw = Power::new(p);
    let mut num = KahanSum::new();
    let mut den = KahanSum::new();
    for &v in values {
        let r = v * inv;
        num.add(pw.apply(r));
        den.add(r);
    }
    Ok(num.value() / den.value().powf(p))
}

/// Greenwood statistic of a path; needs `alpha < min(p, 1)`.
pub fn greenwood(path: &Path, p: f64) -> Result<f64> {
    let alpha = path.model.alpha();
    if alpha >= 1.0 || p <= alpha {
        return config(format!("greenwood needs alpha < min(p, 1); got alpha = {alpha}, p = {p}"));
    }
    greenwood_values(&path.values, p)
}

/// `gamma_{n,q} / gamma_{n,r}`.
pub fn norm_ratio(values: &[f64], q: f64, r: f64) -> Result<f64> {
    let s = compute_stats_values(values, &[q, r], 0.0)?;
    not_degenerate(&s)?;
    Ok(s.moduli[0].1 / s.moduli[1].1)
}

/// `||X||_4^4 / ||X||_2^4`.
pub fn kurtosis_ratio(values: &[f64]) -> Result<f64> {
    let m = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return Err(Error::Degenerate("path is identically zero".into()));
    }
    let inv = 1.0 / m;
    let mut s2 = KahanSum::new();
    let mut s4 = KahanSum::new();
    for &v in values {
        let r = v * inv;
        let r2 = r * r;
        s2.add(r2);
        s4.add(r2 * r2);
    }
    Ok(s4.value() / (s2.value() * s2.value()))
}

/// What to compute for every replicate path of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSpec {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub ps: Vec<f64>,
    #[serde(default)]
    pub greenwood_ps: Vec<f64>,
    #[serde(default)]
    pub kurtosis: bool,
    #[serde(default)]
    pub centering: Centering,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: u64,
    pub seed: u64,
    pub sum: f64,
    pub max_abs: f64,
    /// `gamma_{n,p}` for each `BatchSpec::ps`.
    pub moduli: Vec<f64>,
    /// Greenwood statistic for each `BatchSpec::greenwood_ps`.
    pub greenwood: Vec<f64>,
    pub kurtosis: Option<f64>,
}

impl ReplicaRecord {
    pub fn ratio_max(&self) -> f64 {
        self.sum / self.max_abs
    }
}

/// Seed of replicate `r` in a batch seeded with `seed`.
pub fn replica_seed(seed: u64, r: u64) -> u64 {
    mix_seed(seed, r)
}

/// Simulate `spec.reps` independent paths and summarise each. Output order
/// and values do not depend on the number of worker threads.
pub fn run_batch(model: &ProcessModel, spec: &BatchSpec) -> Result<Vec<ReplicaRecord>> {
    if spec.n == 0 || spec.reps == 0 {
        return config("batch needs n > 0 and reps > 0");
    }
    if !spec.greenwood_ps.is_empty() && model.alpha() >= 1.0 {
        return config("greenwood needs alpha < 1");
    }
    // Validate once up front; fill_path assumes a valid model.
    model.sample_path(1, spec.seed)?;
    let center = match spec.centering {
        Centering::Empirical => None,
        c => Some(c.constant(model, &[])?),
    };
    (0..spec.reps as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(spec.n),
            |buf, r| {
                let seed = replica_seed(spec.seed, r);
                let mut rng = rng_from_seed(seed);
                model.fill_path(buf, spec.n, &mut rng);
                let c = match center {
                    Some(c) => c,
                    None => Centering::Empirical.constant(model, buf)?,
                };
                let st = compute_stats_values(buf, &spec.ps, c)?;
                let greenwood = spec
                    .greenwood_ps
                    .iter()
                    .map(|&p| greenwood_values(buf, p))
                    .collect::<Result<Vec<_>>>()?;
                let kurtosis = if spec.kurtosis { Some(kurtosis_ratio(buf)?) } else { None };
                Ok(ReplicaRecord {
                    replica: r,
                    seed,
                    sum: st.sum,
                    max_abs: st.max_abs,
                    moduli: st.moduli.iter().map(|m| m.1).collect(),
                    greenwood,
                    kurtosis,
                })
            },
        )
        .collect()
}

/// Long-format CSV: `seed, n, statistic, p, value`.
pub fn write_batch_csv<W: Write>(records: &[ReplicaRecord], spec: &BatchSpec, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["seed", "n", "statistic", "p", "value"])?;
    let n = spec.n.to_string();
    for r in records {
        let seed = r.seed.to_string();
        let mut row = |stat: &str, p: Option<f64>, v: f64| {
            let p = p.map(|p| format!("{p}")).unwrap_or_default();
            out.write_record([seed.as_str(), n.as_str(), stat, p.as_str(), format!("{v:e}").as_str()])
        };
        row("sum", None, r.sum)?;
        row("max", None, r.max_abs)?;
        row("ratio_max", None, r.ratio_max())?;
        for (p, g) in spec.ps.iter().zip(&r.moduli) {
            row("modulus", Some(*p), *g)?;
            row("studentized", Some(*p), r.sum / g)?;
        }
        for (p, g) in spec.greenwood_ps.iter().zip(&r.greenwood) {
            row("greenwood", Some(*p), *g)?;
        }
        if let Some(k) = r.kurtosis {
            row("kurtosis", None, k)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::NoiseSpec;
    use approx::assert_relative_eq;

    #[test]
    fn three_four_example() {
        let s = compute_stats_values(&[3.0, 4.0], &[2.0], 0.0).unwrap();
        assert_eq!(s.sum, 7.0);
        assert_eq!(s.max_abs, 4.0);
        assert_relative_eq!(s.modulus(2.0).unwrap(), 5.0, epsilon = 1e-14);
        assert_relative_eq!(ratio_max(&s).unwrap(), 1.75, epsilon = 1e-15);
        assert_relative_eq!(studentized(&s, 2.0).unwrap(), 1.4, epsilon = 1e-14);
    }

    #[test]
    fn norm_and_kurtosis_examples() {
        assert_relative_eq!(norm_ratio(&[1.0, 1.0], 2.0, 1.0).unwrap(), 2f64.sqrt() / 2.0, epsilon = 1e-15);
        assert_relative_eq!(kurtosis_ratio(&[1.0, 1.0]).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn zero_path_is_degenerate() {
        let s = compute_stats_values(&[0.0; 5], &[2.0], 0.0).unwrap();
        assert!(s.degenerate);
        assert!(matches!(ratio_max(&s), Err(Error::Degenerate(_))));
    }

    #[test]
    fn huge_values_do_not_overflow() {
        let xs = [1e200, 3e200, -2e199];
        let s = compute_stats_values(&xs, &[2.0, 4.0], 0.0).unwrap();
        let g2 = s.modulus(2.0).unwrap();
        assert!(g2.is_finite());
        assert_relative_eq!(g2, (1f64 + 9.0 + 0.04).sqrt() * 1e200, max_relative = 1e-14);
    }

    #[test]
    fn greenwood_requires_positive_and_small_alpha() {
        assert!(greenwood_values(&[1.0, -1.0], 2.0).is_err());
        let m = ProcessModel::iid(NoiseSpec::pareto(1.5, 1.0).unwrap()).unwrap();
        let p = m.sample_path(10, 1).unwrap();
        assert!(greenwood(&p, 2.0).is_err());
    }

    #[test]
    fn centering_policies() {
        let m = ProcessModel::iid(NoiseSpec::pareto(1.5, 1.0).unwrap()).unwrap();
        assert_relative_eq!(Centering::Auto.constant(&m, &[]).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(Centering::Empirical.constant(&m, &[1.0, 2.0, 6.0]).unwrap(), 3.0);
        let small = ProcessModel::iid(NoiseSpec::pareto(0.5, 1.0).unwrap()).unwrap();
        assert_eq!(Centering::Analytic.constant(&small, &[]).unwrap(), 0.0);
    }

    #[test]
    fn batch_matches_single_paths() {
        let m = ProcessModel::ar1(0.5, NoiseSpec::pareto(0.7, 0.6).unwrap()).unwrap();
        let spec = BatchSpec { n: 300, reps: 4, seed: 9, ps: vec![2.0], greenwood_ps: vec![], kurtosis: true, centering: Centering::Auto };
        let recs = run_batch(&m, &spec).unwrap();
        for r in &recs {
            let p = m.sample_path(300, r.seed).unwrap();
            let s = compute_stats(&p, &[2.0], Centering::Auto).unwrap();
            assert_eq!(s.sum, r.sum);
            assert_eq!(s.moduli[0].1, r.moduli[0]);
            assert_eq!(kurtosis_ratio(&p.values).unwrap(), r.kurtosis.unwrap());
        }
    }
}
