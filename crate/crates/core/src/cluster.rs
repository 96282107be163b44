//! Spectral tail processes, clusters and tilted clusters.
//!
//! For a spectral tail process `Theta` the cluster is `Q = Theta / ||Theta||_alpha`
//! and the tilted cluster is `Q~ = Q / max|Q|`, obtained by accepting `Q`
//! with probability `max|Q|^alpha`. The acceptance probability averages to
//! the extremal index.
//!
//! Three kinds are provided: iid noise, AR(1) in closed form, and an
//! empirical kind that cuts blocks around high exceedances of a simulated
//! path of any [`ProcessModel`].

use crate::error::{config, Error, Result};
use crate::estimate::{Estimate, Method};
use crate::process::{Innovation, Multiplier, NoiseKind, ProcessModel};
use crate::rng::{mix_seed, open_unit, rng_from_seed, stream_rng, SimRng};
use crate::special::{compensated_sum, mean_stderr};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Forward horizon rule for AR(1): smallest h with `|phi|^{alpha h} / (1 - |phi|^alpha) < 1e-10`.
pub const AR1_HORIZON_EPS: f64 = 1e-10;

/// A window `[t_min, t_min + len)` of a sequence indexed by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProcessDraw {
    pub t_min: i64,
    pub values: Vec<f64>,
}

impl TailProcessDraw {
    pub fn t_max(&self) -> i64 {
        self.t_min + self.values.len() as i64 - 1
    }

    /// Value at time `t`, zero outside the stored window.
    pub fn at(&self, t: i64) -> f64 {
        let i = t - self.t_min;
        if i < 0 || i >= self.values.len() as i64 {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// `(values[t-h], ..., values[t+h])`.
    pub fn window(&self, centre: i64, h: usize) -> Vec<f64> {
        let h = h as i64;
        (centre - h..=centre + h).map(|t| self.at(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDraw {
    pub t_min: i64,
    pub values: Vec<f64>,
    pub alpha: f64,
    /// l^alpha mass lost to the finite window, when known.
    pub truncation_error: f64,
}

impl ClusterDraw {
    pub fn sum(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    /// Time index of the largest `|Q_t|`; ties go to the earliest index.
    pub fn argmax(&self) -> i64 {
        let mut best = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        self.t_min + best as i64
    }

    /// `sum |Q_t|^p`.
    pub fn power_sum(&self, p: f64) -> f64 {
        power_sum(&self.values, p)
    }

    pub fn norm(&self, p: f64) -> f64 {
        self.power_sum(p).powf(1.0 / p)
    }

    pub fn tilted(&self) -> TiltedClusterDraw {
        let m = self.max_abs();
        TiltedClusterDraw {
            t_min: self.t_min,
            values: self.values.iter().map(|v| v / m).collect(),
            alpha: self.alpha,
            truncation_error: self.truncation_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltedClusterDraw {
    pub t_min: i64,
    pub values: Vec<f64>,
    pub alpha: f64,
    pub truncation_error: f64,
}

impl TiltedClusterDraw {
    pub fn sum(&self) -> f64 {
        compensated_sum(self.values.iter().copied())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

pub(crate) fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn power_sum(xs: &[f64], p: f64) -> f64 {
    compensated_sum(xs.iter().filter(|v| **v != 0.0).map(|v| v.abs().powf(p)))
}

fn default_threshold() -> f64 {
    0.999
}
fn default_half_width() -> usize {
    200
}
fn default_path_len() -> usize {
    1_000_000
}

/// Blocks of a simulated path around exceedances of a high quantile of `|X|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalSpec {
    pub source: ProcessModel,
    #[serde(default = "default_threshold")]
    pub threshold_quantile: f64,
    #[serde(default = "default_half_width")]
    pub half_width: usize,
    #[serde(default = "default_path_len")]
    pub path_len: usize,
    /// Block values with `|X_{t+k}| < small_cut * |X_t|` are set to zero.
    /// Zero keeps every value.
    #[serde(default)]
    pub small_cut: f64,
    #[serde(default)]
    pub seed: u64,
}

impl EmpiricalSpec {
    pub fn new(source: ProcessModel) -> Self {
        Self {
            source,
            threshold_quantile: default_threshold(),
            half_width: default_half_width(),
            path_len: default_path_len(),
            small_cut: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterModel {
    Iid { alpha: f64, q_plus: f64 },
    Ar1 { alpha: f64, phi: f64, q_plus: f64 },
    Empirical(EmpiricalSpec),
}

impl ClusterModel {
    pub fn iid(alpha: f64, q_plus: f64) -> Result<Self> {
        let m = ClusterModel::Iid { alpha, q_plus };
        m.validate()?;
        Ok(m)
    }

    pub fn ar1(alpha: f64, phi: f64, q_plus: f64) -> Result<Self> {
        let m = ClusterModel::Ar1 { alpha, phi, q_plus };
        m.validate()?;
        Ok(m)
    }

    pub fn empirical(spec: EmpiricalSpec) -> Result<Self> {
        let m = ClusterModel::Empirical(spec);
        m.validate()?;
        Ok(m)
    }

    /// Closed-form kind where one exists, empirical otherwise.
    pub fn for_process(model: &ProcessModel) -> Result<Self> {
        match model {
            ProcessModel::Iid { noise } => Self::iid(noise.alpha, noise.q_plus),
            ProcessModel::Ar1 { phi, noise, .. } => Self::ar1(noise.alpha, *phi, noise.q_plus),
            ProcessModel::Sre { .. } => Self::empirical(EmpiricalSpec::new(model.clone())),
        }
    }

    pub fn alpha(&self) -> f64 {
        match self {
            ClusterModel::Iid { alpha, .. } | ClusterModel::Ar1 { alpha, .. } => *alpha,
            ClusterModel::Empirical(s) => s.source.alpha(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClusterModel::Iid { alpha, q_plus } => {
                validate_alpha(*alpha)?;
                check_q(*q_plus)
            }
            ClusterModel::Ar1 { alpha, phi, q_plus } => {
                validate_alpha(*alpha)?;
                check_q(*q_plus)?;
                if !(phi.abs() < 1.0) || *phi == 0.0 {
                    return config(format!("ar1 cluster needs 0 < |phi| < 1, got {phi}"));
                }
                Ok(())
            }
            ClusterModel::Empirical(s) => {
                if !(s.threshold_quantile > 0.0 && s.threshold_quantile < 1.0) {
                    return config("threshold_quantile must lie in (0, 1)");
                }
                if s.half_width == 0 {
                    return config("half_width must be positive");
                }
                if !(0.0..1.0).contains(&s.small_cut) {
                    return config("small_cut must lie in [0, 1)");
                }
                if s.path_len < 2 * s.half_width + 2 {
                    return config("path_len must exceed the block length");
                }
                Ok(())
            }
        }
    }

    /// Sign probabilities `(p+, p-)` of `Theta_0`.
    pub fn sign_probabilities(&self) -> Option<(f64, f64)> {
        match *self {
            ClusterModel::Iid { q_plus, .. } => Some((q_plus, 1.0 - q_plus)),
            ClusterModel::Ar1 { alpha, phi, q_plus } => {
                let q_minus = 1.0 - q_plus;
                if phi > 0.0 {
                    Some((q_plus, q_minus))
                } else {
                    let r = phi.abs().powf(alpha);
                    Some(((q_plus + q_minus * r) / (1.0 + r), (q_minus + q_plus * r) / (1.0 + r)))
                }
            }
            ClusterModel::Empirical(_) => None,
        }
    }

    pub fn default_horizon(&self) -> usize {
        match *self {
            ClusterModel::Iid { .. } => 0,
            ClusterModel::Ar1 { alpha, phi, .. } => {
                let r = phi.abs().powf(alpha);
                let mut h = 0usize;
                while r.powi(h as i32) / (1.0 - r) >= AR1_HORIZON_EPS {
                    h += 1;
                }
                h
            }
            ClusterModel::Empirical(ref s) => s.half_width,
        }
    }

    /// Build a sampler; for the empirical kind this simulates the path and
    /// extracts the block pool once.
    pub fn sampler(&self, horizon: usize, seed: u64) -> Result<ClusterSampler> {
        self.validate()?;
        let pool = match self {
            ClusterModel::Empirical(s) => {
                if horizon > s.half_width {
                    return config(format!(
                        "horizon {horizon} exceeds the empirical half-width {}",
                        s.half_width
                    ));
                }
                Some(Arc::new(EmpiricalPool::build(s, horizon)?))
            }
            _ => None,
        };
        Ok(ClusterSampler { model: self.clone(), horizon, pool, seed })
    }

    /// Extremal index as an estimate (closed form when available).
    pub fn extremal_index(&self) -> Result<Estimate> {
        match *self {
            ClusterModel::Iid { .. } => Ok(Estimate::exact(1.0)),
            ClusterModel::Ar1 { alpha, phi, .. } => Ok(Estimate::exact(1.0 - phi.abs().powf(alpha))),
            ClusterModel::Empirical(ref s) => match &s.source {
                ProcessModel::Sre { alpha, law, .. } => Ok(sre_extremal_index(*alpha, &law.a, &law.b, 100_000, s.seed)),
                _ => {
                    let pool = EmpiricalPool::build(s, s.half_width)?;
                    let vals: Vec<f64> = pool
                        .blocks
                        .iter()
                        .map(|b| {
                            let q = normalize(&b.values, self.alpha());
                            max_abs(&q).powf(self.alpha())
                        })
                        .collect();
                    let (m, se) = mean_stderr(&vals);
                    Ok(Estimate::mc(m, se, vals.len()))
                }
            },
        }
    }

    /// `E ||Q||_p^alpha`.
    pub fn cluster_moment(&self, p: f64) -> Result<Estimate> {
        if !(p > 0.0) {
            return config("cluster moment needs p > 0");
        }
        match *self {
            ClusterModel::Iid { .. } => Ok(Estimate::exact(1.0)),
            ClusterModel::Ar1 { alpha, phi, .. } => {
                let r = phi.abs().powf(alpha);
                Ok(Estimate::exact((1.0 - r) / (1.0 - phi.abs().powf(p)).powf(alpha / p)))
            }
            ClusterModel::Empirical(ref s) => {
                let ens = self.ensemble(0, s.seed)?;
                Ok(ens.expect(|q| q.norm(p).powf(ens.alpha)))
            }
        }
    }

    /// The cluster law as weighted draws. Analytic kinds give a handful of
    /// exact atoms; the empirical kind gives `size` equally weighted draws
    /// (or the whole block pool when `size` is 0).
    pub fn ensemble(&self, size: usize, seed: u64) -> Result<ClusterEnsemble> {
        self.validate()?;
        let alpha = self.alpha();
        match *self {
            ClusterModel::Iid { q_plus, .. } => {
                let mut draws = Vec::new();
                let mut weights = Vec::new();
                for (sign, w) in [(1.0, q_plus), (-1.0, 1.0 - q_plus)] {
                    if w > 0.0 {
                        draws.push(ClusterDraw { t_min: 0, values: vec![sign], alpha, truncation_error: 0.0 });
                        weights.push(w);
                    }
                }
                Ok(ClusterEnsemble { alpha, draws, weights, method: Method::ExactAtoms })
            }
            ClusterModel::Ar1 { phi, .. } => {
                // Sum, maximum and norms depend on J only through its parity.
                let (pp, pm) = self.sign_probabilities().unwrap();
                let r = phi.abs().powf(alpha);
                let even = 1.0 / (1.0 + r);
                let h = self.default_horizon();
                let mut draws = Vec::new();
                let mut weights = Vec::new();
                for (sign, ps) in [(1.0, pp), (-1.0, pm)] {
                    for (j, pj) in [(0i64, even), (1i64, 1.0 - even)] {
                        if ps * pj > 0.0 {
                            draws.push(ar1_cluster(alpha, phi, sign, j, h));
                            weights.push(ps * pj);
                        }
                    }
                }
                Ok(ClusterEnsemble { alpha, draws, weights, method: Method::ExactAtoms })
            }
            ClusterModel::Empirical(ref s) => {
                let pool = EmpiricalPool::build(s, s.half_width)?;
                let to_cluster = |b: &TailProcessDraw| ClusterDraw {
                    t_min: b.t_min,
                    values: normalize(&b.values, alpha),
                    alpha,
                    truncation_error: edge_mass(&normalize(&b.values, alpha), alpha),
                };
                let draws: Vec<ClusterDraw> = if size == 0 {
                    pool.blocks.iter().map(to_cluster).collect()
                } else {
                    let mut rng = rng_from_seed(mix_seed(seed, 0xE5));
                    (0..size).map(|_| to_cluster(pool.pick(&mut rng))).collect()
                };
                let w = 1.0 / draws.len() as f64;
                let weights = vec![w; draws.len()];
                Ok(ClusterEnsemble { alpha, draws, weights, method: Method::MonteCarlo })
            }
        }
    }
}

// Clusters make sense at alpha = 1 as well; only the sum limit laws exclude it.
fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return config(format!("cluster alpha must lie in (0, 2), got {alpha}"));
    }
    Ok(())
}

fn check_q(q: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&q) {
        return config(format!("q_plus must lie in [0, 1], got {q}"));
    }
    Ok(())
}

fn normalize(theta: &[f64], alpha: f64) -> Vec<f64> {
    let m = max_abs(theta);
    // Rescale by the max first so the alpha-norm cannot overflow.
    let s = power_sum(&theta.iter().map(|v| v / m).collect::<Vec<_>>(), alpha).powf(1.0 / alpha) * m;
    theta.iter().map(|v| v / s).collect()
}

// l^alpha mass in the outer tenth of the window on either side. Used as the
// truncation figure for empirical clusters, where the true loss is unknown.
fn edge_mass(q: &[f64], alpha: f64) -> f64 {
    let edge = (q.len() / 10).max(1);
    if q.len() <= 2 * edge {
        return 0.0;
    }
    power_sum(&q[..edge], alpha) + power_sum(&q[q.len() - edge..], alpha)
}

fn ar1_theta(phi: f64, sign: f64, j: i64, horizon: usize) -> TailProcessDraw {
    let values = (-j..=horizon as i64).map(|t| sign * phi.powi(t as i32)).collect();
    TailProcessDraw { t_min: -j, values }
}

fn ar1_cluster(alpha: f64, phi: f64, sign: f64, j: i64, horizon: usize) -> ClusterDraw {
    let r = phi.abs().powf(alpha);
    let theta = ar1_theta(phi, sign, j, horizon);
    // ||Theta||_alpha^alpha = |phi|^{-alpha J} / (1 - r), summed exactly.
    let scale = phi.abs().powi(j as i32) * (1.0 - r).powf(1.0 / alpha);
    ClusterDraw {
        t_min: theta.t_min,
        values: theta.values.iter().map(|v| v * scale).collect(),
        alpha,
        truncation_error: r.powi((j + horizon as i64 + 1) as i32),
    }
}

fn sre_extremal_index(alpha: f64, a: &Multiplier, _b: &Innovation, walks: usize, seed: u64) -> Estimate {
    if let Multiplier::Constant { value } = *a {
        return Estimate::exact((1.0 - value.abs().powf(alpha)).max(0.0));
    }
    let mut rng = rng_from_seed(mix_seed(seed, 0x51E));
    let vals: Vec<f64> = (0..walks)
        .map(|_| {
            // sup_{t>=1} alpha * log|A_1...A_t|, stopped once it cannot matter.
            let mut s = 0.0f64;
            let mut best = f64::NEG_INFINITY;
            for _ in 0..100_000 {
                let x = match *a {
                    Multiplier::LogNormal { mu, sigma } => {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mu + sigma * z
                    }
                    Multiplier::Constant { value } => value.abs().ln(),
                };
                s += alpha * x;
                best = best.max(s);
                if best >= 0.0 || s < -40.0 {
                    break;
                }
            }
            (1.0 - best.exp()).max(0.0)
        })
        .collect();
    let (m, se) = mean_stderr(&vals);
    Estimate::mc(m, se, walks)
}

struct EmpiricalPool {
    blocks: Vec<TailProcessDraw>,
}

impl EmpiricalPool {
    fn build(s: &EmpiricalSpec, horizon: usize) -> Result<Self> {
        let path = s.source.sample_path(s.path_len, mix_seed(s.seed, 0xB10C))?;
        let x = &path.values;
        let mut abs: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let k = ((abs.len() as f64) * s.threshold_quantile).floor() as usize;
        let k = k.min(abs.len() - 1);
        let (_, u, _) = abs.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
        let u = *u;
        let hw = s.half_width;
        let mut blocks = Vec::new();
        for t in hw..x.len() - hw {
            let xt = x[t].abs();
            if xt > u {
                let values = (t - horizon..=t + horizon)
                    .map(|i| {
                        let v = x[i];
                        if v.abs() < s.small_cut * xt {
                            0.0
                        } else {
                            v / xt
                        }
                    })
                    .collect();
                blocks.push(TailProcessDraw { t_min: -(horizon as i64), values });
            }
        }
        if blocks.is_empty() {
            return Err(Error::Sampling(format!(
                "no exceedances of the {} quantile in a path of length {}",
                s.threshold_quantile, s.path_len
            )));
        }
        Ok(Self { blocks })
    }

    fn pick<R: RngCore + ?Sized>(&self, rng: &mut R) -> &TailProcessDraw {
        let i = (open_unit(rng) * self.blocks.len() as f64) as usize;
        &self.blocks[i.min(self.blocks.len() - 1)]
    }
}

/// Draws spectral tail processes, clusters and tilted clusters.
#[derive(Clone)]
pub struct ClusterSampler {
    model: ClusterModel,
    horizon: usize,
    pool: Option<Arc<EmpiricalPool>>,
    seed: u64,
}

impl ClusterSampler {
    pub fn model(&self) -> &ClusterModel {
        &self.model
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Random stream `i` of this sampler's seed.
    pub fn rng(&self, i: u64) -> SimRng {
        stream_rng(self.seed, i)
    }

    pub fn spectral_tail<R: RngCore + ?Sized>(&self, rng: &mut R) -> TailProcessDraw {
        match self.model {
            ClusterModel::Iid { q_plus, .. } => {
                let s = sign_draw(rng, q_plus);
                TailProcessDraw { t_min: 0, values: vec![s] }
            }
            ClusterModel::Ar1 { alpha, phi, q_plus } => {
                let (s, j) = ar1_sign_and_j(rng, alpha, phi, q_plus);
                ar1_theta(phi, s, j, self.horizon)
            }
            ClusterModel::Empirical(_) => self.pool.as_ref().unwrap().pick(rng).clone(),
        }
    }

    pub fn cluster<R: RngCore + ?Sized>(&self, rng: &mut R) -> ClusterDraw {
        match self.model {
            ClusterModel::Iid { alpha, q_plus } => {
                let s = sign_draw(rng, q_plus);
                ClusterDraw { t_min: 0, values: vec![s], alpha, truncation_error: 0.0 }
            }
            ClusterModel::Ar1 { alpha, phi, q_plus } => {
                let (s, j) = ar1_sign_and_j(rng, alpha, phi, q_plus);
                ar1_cluster(alpha, phi, s, j, self.horizon)
            }
            ClusterModel::Empirical(_) => {
                let alpha = self.model.alpha();
                let th = self.pool.as_ref().unwrap().pick(rng);
                let values = normalize(&th.values, alpha);
                let truncation_error = edge_mass(&values, alpha);
                ClusterDraw { t_min: th.t_min, values, alpha, truncation_error }
            }
        }
    }

    /// Rejection sampler for the tilted cluster. Also returns the number of
    /// proposals used, whose reciprocal averages to the extremal index.
    pub fn tilted<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<(TiltedClusterDraw, u64)> {
        let alpha = self.model.alpha();
        for proposals in 1..=10_000_000u64 {
            let q = self.cluster(rng);
            let m = q.max_abs();
            if m > 0.0 && open_unit(rng) < m.powf(alpha) {
                return Ok((q.tilted(), proposals));
            }
        }
        Err(Error::Sampling("tilted-cluster rejection sampler did not accept in 10^7 proposals".into()))
    }
}

fn sign_draw<R: RngCore + ?Sized>(rng: &mut R, q_plus: f64) -> f64 {
    if q_plus >= 1.0 {
        1.0
    } else if q_plus <= 0.0 || open_unit(rng) >= q_plus {
        -1.0
    } else {
        1.0
    }
}

// Theta_0 = +1 w.p. q+ and P(J = j) = r^j (1 - r), r = |phi|^alpha.
fn ar1_sign_and_j<R: RngCore + ?Sized>(rng: &mut R, alpha: f64, phi: f64, q_plus: f64) -> (f64, i64) {
    let s = sign_draw(rng, q_plus);
    let r = phi.abs().powf(alpha);
    let j = (open_unit(rng).ln() / r.ln()).floor() as i64;
    (s, j.max(0))
}

pub fn sample_spectral_tail(model: &ClusterModel, horizon: usize, seed: u64) -> Result<TailProcessDraw> {
    let s = model.sampler(horizon, seed)?;
    Ok(s.spectral_tail(&mut s.rng(0)))
}

pub fn sample_cluster(model: &ClusterModel, horizon: usize, seed: u64) -> Result<ClusterDraw> {
    let s = model.sampler(horizon, seed)?;
    Ok(s.cluster(&mut s.rng(0)))
}

pub fn sample_tilted_cluster(model: &ClusterModel, horizon: usize, seed: u64) -> Result<(TiltedClusterDraw, u64)> {
    let s = model.sampler(horizon, seed)?;
    s.tilted(&mut s.rng(0))
}

pub fn extremal_index(model: &ClusterModel) -> Result<Estimate> {
    model.extremal_index()
}

pub fn cluster_moment(model: &ClusterModel, p: f64) -> Result<Estimate> {
    model.cluster_moment(p)
}

/// Weighted cluster draws for expectations.
#[derive(Debug, Clone)]
pub struct ClusterEnsemble {
    pub alpha: f64,
    pub draws: Vec<ClusterDraw>,
    pub weights: Vec<f64>,
    pub method: Method,
}

impl ClusterEnsemble {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.method != Method::MonteCarlo
    }

    /// `E f(Q)`.
    pub fn expect<F: Fn(&ClusterDraw) -> f64>(&self, f: F) -> Estimate {
        let vals: Vec<f64> = self.draws.iter().map(&f).collect();
        self.weighted(&vals)
    }

    fn weighted(&self, vals: &[f64]) -> Estimate {
        if self.is_exact() {
            let v = compensated_sum(vals.iter().zip(&self.weights).map(|(v, w)| v * w));
            Estimate { estimate: v, stderr: 0.0, reps: vals.len(), method: self.method }
        } else {
            let (m, se) = mean_stderr(vals);
            Estimate::mc(m, se, vals.len())
        }
    }

    /// `E h(Q~) = E[max|Q|^alpha h(Q / max|Q|)] / E max|Q|^alpha`.
    pub fn expect_tilted<F: Fn(&[f64]) -> f64>(&self, h: F) -> Estimate {
        let b: Vec<f64> = self.draws.iter().map(|q| q.max_abs().powf(self.alpha)).collect();
        let a: Vec<f64> = self
            .draws
            .iter()
            .zip(&b)
            .map(|(q, bi)| {
                if *bi == 0.0 {
                    0.0
                } else {
                    bi * h(&q.tilted().values)
                }
            })
            .collect();
        weighted_ratio(self, &a, &b)
    }

    /// Weighted ratio `E[w f(Q)] / E[w]` for a general weight `w(Q)`.
    pub fn expect_weighted<W: Fn(&ClusterDraw) -> f64, F: Fn(&ClusterDraw) -> f64>(&self, w: W, f: F) -> Estimate {
        let b: Vec<f64> = self.draws.iter().map(&w).collect();
        let a: Vec<f64> = self.draws.iter().zip(&b).map(|(q, bi)| if *bi == 0.0 { 0.0 } else { bi * f(q) }).collect();
        weighted_ratio(self, &a, &b)
    }

    pub fn extremal_index(&self) -> Estimate {
        self.expect(|q| q.max_abs().powf(self.alpha))
    }
}

fn weighted_ratio(ens: &ClusterEnsemble, a: &[f64], b: &[f64]) -> Estimate {
    let ea = ens.weighted(a);
    let eb = ens.weighted(b);
    let r = ea.estimate / eb.estimate;
    if ens.is_exact() {
        return Estimate { estimate: r, stderr: 0.0, reps: a.len(), method: ens.method };
    }
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - r * y) / eb.estimate).collect();
    let (_, se) = mean_stderr(&resid);
    Estimate::mc(r, se, a.len())
}

/// A functional of a window `(w_{-h}, ..., w_h)` with a declared bound.
#[derive(Clone)]
pub struct BoundedFunctional {
    pub name: String,
    pub bound: f64,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for BoundedFunctional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundedFunctional").field("name", &self.name).field("bound", &self.bound).finish()
    }
}

impl BoundedFunctional {
    pub fn new(name: impl Into<String>, bound: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return config("time-change functionals must be bounded");
        }
        Ok(Self { name: name.into(), bound, f: Arc::new(f) })
    }

    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        let v = (self.f)(w);
        if !(v.abs() <= self.bound * (1.0 + 1e-12)) {
            return config(format!("functional {} returned {v}, outside its bound {}", self.name, self.bound));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeChangeRow {
    pub name: String,
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
    pub rhs_stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TimeChangeReport {
    pub t: i64,
    pub h: usize,
    pub reps: usize,
    /// Draws with `Theta_{-t} != 0` on the left-hand side.
    pub lhs_kept: usize,
    /// Both sides condition on a null event (e.g. iid with `t != 0`).
    pub vacuous: bool,
    pub rows: Vec<TimeChangeRow>,
}

/// Monte Carlo check of the time-change formula
/// `E[f(Theta_{-h..h}) | Theta_{-t} != 0] = E[|Theta_t|^alpha f(Theta_{t-h..t+h} / |Theta_t|)] / E|Theta_t|^alpha`.
pub fn verify_time_change(
    model: &ClusterModel,
    t: i64,
    functionals: &[BoundedFunctional],
    h: usize,
    reps: usize,
    seed: u64,
) -> Result<TimeChangeReport> {
    if reps == 0 {
        return config("reps must be positive");
    }
    let reach = t.unsigned_abs() as usize + h;
    let horizon = match model {
        ClusterModel::Empirical(s) => {
            if reach > s.half_width {
                return config("t + h exceeds the empirical block half-width");
            }
            s.half_width
        }
        _ => model.default_horizon().max(reach),
    };
    let sampler = model.sampler(horizon, seed)?;
    let alpha = model.alpha();
    let mut lhs: Vec<Vec<f64>> = vec![Vec::new(); functionals.len()];
    let mut lhs_kept = 0usize;
    let mut rng = sampler.rng(1);
    for _ in 0..reps {
        let th = sampler.spectral_tail(&mut rng);
        if th.at(-t) != 0.0 {
            lhs_kept += 1;
            let w = th.window(0, h);
            for (k, f) in functionals.iter().enumerate() {
                lhs[k].push(f.eval(&w)?);
            }
        }
    }
    let mut weights = Vec::with_capacity(reps);
    let mut rhs: Vec<Vec<f64>> = vec![Vec::with_capacity(reps); functionals.len()];
    let mut rng = sampler.rng(2);
    for _ in 0..reps {
        let th = sampler.spectral_tail(&mut rng);
        let tt = th.at(t).abs();
        let wgt = tt.powf(alpha);
        weights.push(wgt);
        for (k, f) in functionals.iter().enumerate() {
            if wgt == 0.0 {
                rhs[k].push(0.0);
            } else {
                let w: Vec<f64> = th.window(t, h).iter().map(|v| v / tt).collect();
                rhs[k].push(wgt * f.eval(&w)?);
            }
        }
    }
    let wsum = compensated_sum(weights.iter().copied());
    let vacuous = lhs_kept == 0 || wsum == 0.0;
    let mut rows = Vec::new();
    for (k, f) in functionals.iter().enumerate() {
        if vacuous {
            rows.push(TimeChangeRow {
                name: f.name.clone(),
                lhs: f64::NAN,
                lhs_stderr: f64::NAN,
                rhs: f64::NAN,
                rhs_stderr: f64::NAN,
                z: f64::NAN,
            });
            continue;
        }
        let (l, lse) = mean_stderr(&lhs[k]);
        let wbar = wsum / reps as f64;
        let r = compensated_sum(rhs[k].iter().copied()) / wsum;
        let resid: Vec<f64> = rhs[k].iter().zip(&weights).map(|(a, w)| (a - r * w) / wbar).collect();
        let (_, rse) = mean_stderr(&resid);
        let se = (lse * lse + rse * rse).sqrt();
        let z = if se > 0.0 { (l - r).abs() / se } else if l == r { 0.0 } else { f64::INFINITY };
        rows.push(TimeChangeRow { name: f.name.clone(), lhs: l, lhs_stderr: lse, rhs: r, rhs_stderr: rse, z });
    }
    Ok(TimeChangeReport { t, h, reps, lhs_kept, vacuous, rows })
}

/// Noise kind check used by callers that need a one-sided cluster.
pub fn is_positive(model: &ClusterModel) -> bool {
    match model {
        ClusterModel::Iid { q_plus, .. } => *q_plus >= 1.0,
        ClusterModel::Ar1 { phi, q_plus, .. } => *q_plus >= 1.0 && *phi > 0.0,
        ClusterModel::Empirical(s) => match &s.source {
            ProcessModel::Iid { noise } => noise.kind == NoiseKind::Pareto && noise.q_plus >= 1.0,
            ProcessModel::Ar1 { phi, noise, .. } => noise.kind == NoiseKind::Pareto && noise.q_plus >= 1.0 && *phi > 0.0,
            ProcessModel::Sre { .. } => false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn iid_cluster_is_single_sign() {
        let m = ClusterModel::iid(0.7, 0.3).unwrap();
        let q = sample_cluster(&m, 0, 4).unwrap();
        assert_eq!(q.values.len(), 1);
        assert_eq!(q.values[0].abs(), 1.0);
        assert_eq!(m.extremal_index().unwrap().estimate, 1.0);
    }

    #[test]
    fn ar1_cluster_facts() {
        let m = ClusterModel::ar1(1.0, 0.5, 1.0).unwrap();
        let s = m.sampler(m.default_horizon(), 3).unwrap();
        let mut rng = s.rng(0);
        for _ in 0..200 {
            let th = s.spectral_tail(&mut rng);
            assert_eq!(th.at(0), 1.0);
            for t in th.t_min..th.t_max() {
                assert_relative_eq!(th.at(t + 1), 0.5 * th.at(t), max_relative = 1e-14);
            }
            let q = s.cluster(&mut rng);
            assert_relative_eq!(q.max_abs(), 0.5, max_relative = 1e-12);
            let mass = q.power_sum(1.0);
            assert!(mass <= 1.0 + 1e-12 && mass >= 1.0 - q.truncation_error - 1e-12);
        }
        assert_relative_eq!(m.extremal_index().unwrap().estimate, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ar1_negative_phi_signs() {
        let m = ClusterModel::ar1(1.5, -0.5, 0.8).unwrap();
        let r = 0.5f64.powf(1.5);
        let (pp, pm) = m.sign_probabilities().unwrap();
        assert_relative_eq!(pp, (0.8 + 0.2 * r) / (1.0 + r), epsilon = 1e-15);
        assert_relative_eq!(pp + pm, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ar1_horizon_rule() {
        let m = ClusterModel::ar1(1.0, 0.5, 1.0).unwrap();
        let h = m.default_horizon();
        assert!(0.5f64.powi(h as i32) / 0.5 < AR1_HORIZON_EPS);
        assert!(0.5f64.powi(h as i32 - 1) / 0.5 >= AR1_HORIZON_EPS);
    }

    #[test]
    fn tilted_sum_for_positive_ar1() {
        let m = ClusterModel::ar1(0.5, 0.5, 1.0).unwrap();
        for seed in 0..20 {
            let (q, _) = sample_tilted_cluster(&m, m.default_horizon(), seed).unwrap();
            assert_relative_eq!(q.sum(), 2.0, epsilon = 1e-9);
            assert_eq!(q.max_abs(), 1.0);
        }
    }

    #[test]
    fn cluster_moment_is_one_at_p_alpha() {
        let m = ClusterModel::ar1(0.8, 0.6, 0.5).unwrap();
        assert_relative_eq!(m.cluster_moment(0.8).unwrap().estimate, 1.0, epsilon = 1e-14);
        let ens = m.ensemble(0, 0).unwrap();
        let direct = ens.expect(|q| q.norm(2.0).powf(0.8)).estimate;
        assert_relative_eq!(direct, m.cluster_moment(2.0).unwrap().estimate, max_relative = 1e-9);
    }

    #[test]
    fn ensemble_theta_matches_closed_form() {
        let m = ClusterModel::ar1(0.8, -0.4, 0.3).unwrap();
        let ens = m.ensemble(0, 0).unwrap();
        assert_relative_eq!(ens.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(ens.extremal_index().estimate, m.extremal_index().unwrap().estimate, max_relative = 1e-9);
    }

    #[test]
    fn unbounded_functional_rejected() {
        assert!(BoundedFunctional::new("f", f64::INFINITY, |w| w[0]).is_err());
    }

    #[test]
    fn iid_time_change_is_vacuous() {
        let m = ClusterModel::iid(1.5, 0.5).unwrap();
        let f = BoundedFunctional::new("ind", 1.0, |w| if w[1] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let r = verify_time_change(&m, 1, &[f], 1, 1000, 1).unwrap();
        assert!(r.vacuous);
    }

    #[test]
    fn empirical_needs_exceedances() {
        let noise = crate::process::NoiseSpec::pareto(0.8, 1.0).unwrap();
        let src = ProcessModel::iid(noise).unwrap();
        let mut spec = EmpiricalSpec::new(src);
        spec.path_len = 1000;
        spec.half_width = 5;
        let m = ClusterModel::empirical(spec.clone()).unwrap();
        assert!(matches!(sample_cluster(&m, 5, 1), Err(Error::Sampling(_))));
        spec.path_len = 20_000;
        let m = ClusterModel::empirical(spec).unwrap();
        let q = sample_cluster(&m, 5, 1).unwrap();
        assert_relative_eq!(q.power_sum(0.8), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn sre_constant_multiplier_extremal_index() {
        let noise = crate::process::NoiseSpec::pareto(0.8, 1.0).unwrap();
        let law = crate::process::SreLaw { a: Multiplier::Constant { value: 0.0 }, b: Innovation::Heavy { noise } };
        let src = ProcessModel::sre(0.8, law).unwrap();
        let m = ClusterModel::empirical(EmpiricalSpec::new(src)).unwrap();
        assert_eq!(m.extremal_index().unwrap().estimate, 1.0);
    }
}
