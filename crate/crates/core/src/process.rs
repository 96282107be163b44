//! Stationary regularly varying processes: iid noise, AR(1) and stochastic
//! recurrence equations `X_t = A_t X_{t-1} + B_t`.
//!
//! Paths are deterministic functions of `(model, n, seed)`. Coupled paths
//! share the innovations from time 1 on but start from independent
//! stationary draws.

use crate::error::{config, model, Error, Result};
use crate::rng::{mix_seed, open_unit, rng_from_seed, stream_rng, SimRng};
use crate::special::{stable_constant, Power};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

pub const AR1_BURN_IN: usize = 1_000;
pub const SRE_BURN_IN: usize = 10_000;
pub const SRE_AN_PRESAMPLE: usize = 10_000_000;

const KESTEN_MC_DRAWS: usize = 1 << 22;
const KESTEN_TOL: f64 = 1e-3;
const KESTEN_SEED: u64 = 0x6b65_7374_656e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `|Z| = U^{-1/alpha}`, so `P(|Z| > z) = z^{-alpha}` for `z >= 1`.
    Pareto,
    /// Symmetric stable with characteristic function `exp(-|u|^alpha)`.
    SymmetricStable,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub alpha: f64,
    /// Probability of a positive sign. The negative tail gets `1 - q_plus`.
    #[serde(default = "half")]
    pub q_plus: f64,
}

impl NoiseSpec {
    pub fn pareto(alpha: f64, q_plus: f64) -> Result<Self> {
        let s = Self { kind: NoiseKind::Pareto, alpha, q_plus };
        s.validate()?;
        Ok(s)
    }

    pub fn symmetric_stable(alpha: f64) -> Result<Self> {
        let s = Self { kind: NoiseKind::SymmetricStable, alpha, q_plus: 0.5 };
        s.validate()?;
        Ok(s)
    }

    pub fn q_minus(&self) -> f64 {
        1.0 - self.q_plus
    }

    pub fn validate(&self) -> Result<()> {
        validate_alpha(self.alpha)?;
        if !(0.0..=1.0).contains(&self.q_plus) {
            return config(format!("q_plus must lie in [0, 1], got {}", self.q_plus));
        }
        if self.kind == NoiseKind::SymmetricStable && (self.q_plus - 0.5).abs() > 1e-12 {
            return config("symmetric stable noise has q_plus = 0.5");
        }
        Ok(())
    }

    /// `c` in `P(|Z| > z) ~ c z^{-alpha}`.
    pub fn tail_constant(&self) -> f64 {
        match self.kind {
            NoiseKind::Pareto => 1.0,
            NoiseKind::SymmetricStable => 1.0 / stable_constant(self.alpha).unwrap_or(f64::NAN),
        }
    }

    pub fn mean(&self) -> Result<f64> {
        if self.alpha <= 1.0 {
            return Err(Error::Unsupported(format!(
                "noise with alpha = {} has no finite mean",
                self.alpha
            )));
        }
        Ok(match self.kind {
            NoiseKind::Pareto => (self.q_plus - self.q_minus()) * self.alpha / (self.alpha - 1.0),
            NoiseKind::SymmetricStable => 0.0,
        })
    }

    pub fn sampler(&self) -> NoiseSampler {
        NoiseSampler {
            kind: self.kind,
            alpha: self.alpha,
            inv: Power::new(-1.0 / self.alpha),
            q_plus: self.q_plus,
        }
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) || (alpha - 1.0).abs() < 1e-12 {
        return config(format!("alpha must lie in (0,1) or (1,2), got {alpha}"));
    }
    Ok(())
}

/// Inverse-CDF map of the Pareto magnitude, `u^{-1/alpha}`.
pub fn pareto_quantile(u: f64, alpha: f64) -> f64 {
    u.powf(-1.0 / alpha)
}

#[derive(Debug, Clone, Copy)]
pub struct NoiseSampler {
    kind: NoiseKind,
    alpha: f64,
    inv: Power,
    q_plus: f64,
}

impl NoiseSampler {
    #[inline]
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Pareto => {
                let mag = self.inv.apply(open_unit(rng));
                if self.q_plus >= 1.0 {
                    mag
                } else if self.q_plus <= 0.0 || open_unit(rng) >= self.q_plus {
                    -mag
                } else {
                    mag
                }
            }
            NoiseKind::SymmetricStable => {
                // Chambers-Mallows-Stuck, beta = 0.
                let a = self.alpha;
                let v = PI * (open_unit(rng) - 0.5);
                let w = -open_unit(rng).ln();
                (a * v).sin() / v.cos().powf(1.0 / a) * (((1.0 - a) * v).cos() / w).powf((1.0 - a) / a)
            }
        }
    }
}

pub fn sample_noise(spec: &NoiseSpec, count: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    let s = spec.sampler();
    let mut rng = rng_from_seed(seed);
    Ok((0..count).map(|_| s.draw(&mut rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Multiplier {
    Constant { value: f64 },
    /// `A = exp(mu + sigma N)`; `E A^alpha = 1` needs `mu = -alpha sigma^2 / 2`.
    LogNormal { mu: f64, sigma: f64 },
}

impl Multiplier {
    #[inline]
    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Multiplier::Constant { value } => value,
            Multiplier::LogNormal { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mu + sigma * z).exp()
            }
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Multiplier::Constant { value } => value,
            Multiplier::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    /// Monte Carlo estimate of `E|A|^q`.
    fn abs_moment_mc(&self, q: f64) -> f64 {
        match *self {
            Multiplier::Constant { value } => value.abs().powf(q),
            Multiplier::LogNormal { .. } => {
                let mut rng = rng_from_seed(KESTEN_SEED);
                let mut acc = crate::special::KahanSum::new();
                for _ in 0..KESTEN_MC_DRAWS {
                    acc.add(self.draw(&mut rng).abs().powf(q));
                }
                acc.value() / KESTEN_MC_DRAWS as f64
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Innovation {
    Constant { value: f64 },
    Normal { mean: f64, sd: f64 },
    /// Regularly varying `B`; the tail then comes from `B` and needs
    /// `E|A|^alpha < 1`.
    Heavy { noise: NoiseSpec },
}

impl Innovation {
    #[inline]
    fn draw<R: RngCore + ?Sized>(&self, rng: &mut R, heavy: &Option<NoiseSampler>) -> f64 {
        match *self {
            Innovation::Constant { value } => value,
            Innovation::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Innovation::Heavy { .. } => heavy.as_ref().map(|s| s.draw(rng)).unwrap_or(f64::NAN),
        }
    }

    fn mean(&self) -> Result<f64> {
        match self {
            Innovation::Constant { value } => Ok(*value),
            Innovation::Normal { mean, .. } => Ok(*mean),
            Innovation::Heavy { noise } => noise.mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SreLaw {
    pub a: Multiplier,
    pub b: Innovation,
}

impl SreLaw {
    /// Kesten-type law with lognormal `A` calibrated so that `E A^alpha = 1`.
    pub fn kesten_lognormal(alpha: f64, sigma: f64, b: Innovation) -> Self {
        Self {
            a: Multiplier::LogNormal { mu: -0.5 * alpha * sigma * sigma, sigma },
            b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessModel {
    Iid {
        noise: NoiseSpec,
    },
    Ar1 {
        phi: f64,
        noise: NoiseSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<usize>,
    },
    Sre {
        alpha: f64,
        law: SreLaw,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        an_presample: Option<usize>,
    },
}

impl ProcessModel {
    pub fn iid(noise: NoiseSpec) -> Result<Self> {
        let m = ProcessModel::Iid { noise };
        m.validate()?;
        Ok(m)
    }

    pub fn ar1(phi: f64, noise: NoiseSpec) -> Result<Self> {
        let m = ProcessModel::Ar1 { phi, noise, burn_in: None };
        m.validate()?;
        Ok(m)
    }

    pub fn sre(alpha: f64, law: SreLaw) -> Result<Self> {
        let m = ProcessModel::Sre { alpha, law, burn_in: None, an_presample: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_burn_in(mut self, n: usize) -> Self {
        match &mut self {
            ProcessModel::Iid { .. } => {}
            ProcessModel::Ar1 { burn_in, .. } | ProcessModel::Sre { burn_in, .. } => *burn_in = Some(n),
        }
        self
    }

    pub fn with_an_presample(mut self, len: usize) -> Self {
        if let ProcessModel::Sre { an_presample, .. } = &mut self {
            *an_presample = Some(len);
        }
        self
    }

    pub fn alpha(&self) -> f64 {
        match self {
            ProcessModel::Iid { noise } | ProcessModel::Ar1 { noise, .. } => noise.alpha,
            ProcessModel::Sre { alpha, .. } => *alpha,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProcessModel::Iid { .. } => "iid",
            ProcessModel::Ar1 { .. } => "ar1",
            ProcessModel::Sre { .. } => "sre",
        }
    }

    pub fn burn_in(&self) -> usize {
        match self {
            ProcessModel::Iid { .. } => 0,
            ProcessModel::Ar1 { burn_in, .. } => burn_in.unwrap_or(AR1_BURN_IN),
            ProcessModel::Sre { burn_in, .. } => burn_in.unwrap_or(SRE_BURN_IN),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessModel::Iid { noise } => noise.validate(),
            ProcessModel::Ar1 { phi, noise, .. } => {
                noise.validate()?;
                if !(phi.abs() < 1.0) || *phi == 0.0 {
                    return config(format!("ar1 needs 0 < |phi| < 1, got {phi}"));
                }
                Ok(())
            }
            ProcessModel::Sre { alpha, law, .. } => {
                validate_alpha(*alpha)?;
                validate_sre(*alpha, law)
            }
        }
    }

    /// `a_n` with `n P(|X| > a_n) -> 1`.
    pub fn normalizing_an(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return config("normalizing constant needs n >= 1");
        }
        let nf = n as f64;
        match self {
            ProcessModel::Iid { noise } => Ok((noise.tail_constant() * nf).powf(1.0 / noise.alpha)),
            ProcessModel::Ar1 { phi, noise, .. } => {
                let a = noise.alpha;
                Ok((noise.tail_constant() * nf / (1.0 - phi.abs().powf(a))).powf(1.0 / a))
            }
            ProcessModel::Sre { an_presample, .. } => {
                let len = an_presample.unwrap_or(SRE_AN_PRESAMPLE);
                if len < 10 * n {
                    return config(format!(
                        "an_presample of {len} is too short for the (1 - 1/{n}) quantile"
                    ));
                }
                let mut abs: Vec<f64> = self
                    .sample_path(len, mix_seed(KESTEN_SEED, n as u64))?
                    .values
                    .into_iter()
                    .map(f64::abs)
                    .collect();
                let k = ((len as f64) * (1.0 - 1.0 / nf)).ceil() as usize;
                let k = k.clamp(1, len) - 1;
                let (_, q, _) = abs.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
                Ok(*q)
            }
        }
    }

    /// Mean of the stationary law (needs alpha > 1).
    pub fn stationary_mean(&self) -> Result<f64> {
        if self.alpha() < 1.0 {
            return Err(Error::Unsupported(format!(
                "stationary mean is infinite for alpha = {}",
                self.alpha()
            )));
        }
        match self {
            ProcessModel::Iid { noise } => noise.mean(),
            ProcessModel::Ar1 { phi, noise, .. } => Ok(noise.mean()? / (1.0 - phi)),
            ProcessModel::Sre { law, .. } => Ok(law.b.mean()? / (1.0 - law.a.mean())),
        }
    }

    pub fn sample_path(&self, n: usize, seed: u64) -> Result<Path> {
        self.validate_light()?;
        let mut rng = rng_from_seed(seed);
        let mut values = Vec::with_capacity(n);
        self.fill_path(&mut values, n, &mut rng);
        Ok(Path { values, model: self.clone(), seed })
    }

    /// Write `n` path values into `out`, reusing its allocation. The model
    /// must already be validated.
    pub fn fill_path(&self, out: &mut Vec<f64>, n: usize, rng: &mut SimRng) {
        out.clear();
        if n == 0 {
            return;
        }
        let mut st = Stepper::new(self);
        match self {
            ProcessModel::Iid { .. } => {
                for _ in 0..n {
                    out.push(st.innovation(rng).1);
                }
            }
            _ => {
                let mut x = st.stationary_start(rng, self.burn_in());
                out.push(x);
                for _ in 1..n {
                    let (a, b) = st.innovation(rng);
                    x = a * x + b;
                    out.push(x);
                }
            }
        }
    }

    /// Two paths with independent stationary starts and shared innovations.
    pub fn sample_coupled_paths(&self, n: usize, seed: u64) -> Result<(Path, Path)> {
        if let ProcessModel::Iid { .. } = self {
            return model("coupling an iid model is meaningless; use two independent paths");
        }
        self.validate_light()?;
        let mut st = Stepper::new(self);
        let mut r0 = stream_rng(seed, 1);
        let mut r1 = stream_rng(seed, 2);
        let mut shared = stream_rng(seed, 0);
        let mut x = st.stationary_start(&mut r0, self.burn_in());
        let mut y = st.stationary_start(&mut r1, self.burn_in());
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        if n > 0 {
            xs.push(x);
            ys.push(y);
        }
        for _ in 1..n {
            let (a, b) = st.innovation(&mut shared);
            x = a * x + b;
            y = a * y + b;
            xs.push(x);
            ys.push(y);
        }
        Ok((
            Path { values: xs, model: self.clone(), seed },
            Path { values: ys, model: self.clone(), seed },
        ))
    }

    // Structural checks only; the Monte Carlo Kesten check runs at
    // construction and config validation, not on every path.
    fn validate_light(&self) -> Result<()> {
        match self {
            ProcessModel::Iid { noise } => noise.validate(),
            ProcessModel::Ar1 { .. } => self.validate(),
            ProcessModel::Sre { alpha, law, .. } => {
                validate_alpha(*alpha)?;
                if let Innovation::Heavy { noise } = &law.b {
                    noise.validate()?;
                }
                Ok(())
            }
        }
    }
}

fn validate_sre(alpha: f64, law: &SreLaw) -> Result<()> {
    if let Multiplier::LogNormal { sigma, mu } = law.a {
        if !(sigma > 0.0) || !mu.is_finite() {
            return config("lognormal multiplier needs finite mu and sigma > 0");
        }
    }
    let probes = [0.25 * alpha, 0.5 * alpha, 0.75 * alpha];
    if probes.iter().all(|&q| law.a.abs_moment_mc(q) >= 1.0) {
        return model("sre multiplier is not contractive: E|A|^q >= 1 for every probed q < alpha");
    }
    let m = law.a.abs_moment_mc(alpha);
    match &law.b {
        Innovation::Heavy { noise } => {
            noise.validate()?;
            if (noise.alpha - alpha).abs() > 1e-12 {
                return config(format!(
                    "heavy innovation has alpha {} but the model declares {alpha}",
                    noise.alpha
                ));
            }
            if m > 1.0 - KESTEN_TOL {
                return model(format!(
                    "heavy-tailed B needs E|A|^alpha < 1, estimated {m:.6}"
                ));
            }
        }
        Innovation::Constant { value } if *value == 0.0 => {
            return model("B = 0 gives the zero process");
        }
        Innovation::Normal { sd, .. } if !(*sd >= 0.0) => {
            return config("normal innovation needs sd >= 0");
        }
        _ => {
            if (m - 1.0).abs() > KESTEN_TOL {
                return model(format!(
                    "Kesten condition E|A|^alpha = 1 fails: estimated {m:.6} at alpha = {alpha}"
                ));
            }
        }
    }
    Ok(())
}

/// One-step generator of `(A_t, B_t)`; for AR(1) `A_t = phi`.
struct Stepper<'a> {
    model: &'a ProcessModel,
    noise: Option<NoiseSampler>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a ProcessModel) -> Self {
        let noise = match model {
            ProcessModel::Iid { noise } | ProcessModel::Ar1 { noise, .. } => Some(noise.sampler()),
            ProcessModel::Sre { law, .. } => match &law.b {
                Innovation::Heavy { noise } => Some(noise.sampler()),
                _ => None,
            },
        };
        Self { model, noise }
    }

    #[inline]
    fn innovation<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> (f64, f64) {
        match self.model {
            ProcessModel::Iid { .. } => (0.0, self.noise.as_ref().unwrap().draw(rng)),
            ProcessModel::Ar1 { phi, .. } => (*phi, self.noise.as_ref().unwrap().draw(rng)),
            ProcessModel::Sre { law, .. } => {
                let a = law.a.draw(rng);
                let b = law.b.draw(rng, &self.noise);
                (a, b)
            }
        }
    }

    fn stationary_start<R: RngCore + ?Sized>(&mut self, rng: &mut R, burn_in: usize) -> f64 {
        let mut x = 0.0;
        for _ in 0..burn_in.max(1) {
            let (a, b) = self.innovation(rng);
            x = a * x + b;
        }
        x
    }
}

/// `X_t = phi X_{t-1} + z_t` for `t = 1..=z.len()`, starting from `x0`.
pub fn ar1_recursion(phi: f64, x0: f64, z: &[f64]) -> Vec<f64> {
    let mut x = x0;
    z.iter()
        .map(|&zt| {
            x = phi * x + zt;
            x
        })
        .collect()
}

/// `X_t = a_t X_{t-1} + b_t` for `t = 1..=a.len()`, starting from `x0`.
pub fn sre_recursion(a: &[f64], b: &[f64], x0: f64) -> Vec<f64> {
    let mut x = x0;
    a.iter()
        .zip(b)
        .map(|(&at, &bt)| {
            x = at * x + bt;
            x
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub values: Vec<f64>,
    pub model: ProcessModel,
    pub seed: u64,
}

impl Path {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// CSV with a single `value` column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["value"])?;
        for v in &self.values {
            out.write_record([format!("{v:e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pareto_quantile_example() {
        assert_eq!(pareto_quantile(0.25, 0.5), 16.0);
    }

    #[test]
    fn alpha_one_and_two_rejected() {
        assert!(NoiseSpec::pareto(1.0, 0.5).is_err());
        assert!(NoiseSpec::pareto(2.0, 0.5).is_err());
        assert!(NoiseSpec::pareto(1.999, 0.5).is_ok());
    }

    #[test]
    fn ar1_needs_nonzero_contractive_phi() {
        let z = NoiseSpec::pareto(1.5, 0.5).unwrap();
        assert!(ProcessModel::ar1(1.0, z.clone()).is_err());
        assert!(ProcessModel::ar1(0.0, z.clone()).is_err());
        assert!(ProcessModel::ar1(-0.3, z).is_ok());
    }

    #[test]
    fn ar1_recursion_hook() {
        assert_eq!(ar1_recursion(0.5, 0.0, &[1.0, 1.0, 1.0]), vec![1.0, 1.5, 1.75]);
    }

    #[test]
    fn iid_an_is_power() {
        let m = ProcessModel::iid(NoiseSpec::pareto(0.5, 0.5).unwrap()).unwrap();
        assert_relative_eq!(m.normalizing_an(10_000).unwrap(), 1e8, max_relative = 1e-12);
    }

    #[test]
    fn ar1_an_formula() {
        let m = ProcessModel::ar1(0.5, NoiseSpec::pareto(1.5, 0.5).unwrap()).unwrap();
        let expect = (1000.0 / (1.0 - 0.5f64.powf(1.5))).powf(1.0 / 1.5);
        assert_relative_eq!(m.normalizing_an(1000).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn stationary_means() {
        let iid = ProcessModel::iid(NoiseSpec::pareto(1.5, 1.0).unwrap()).unwrap();
        assert_relative_eq!(iid.stationary_mean().unwrap(), 3.0, epsilon = 1e-12);
        let ar = ProcessModel::ar1(0.5, NoiseSpec::pareto(1.5, 1.0).unwrap()).unwrap();
        assert_relative_eq!(ar.stationary_mean().unwrap(), 6.0, epsilon = 1e-12);
        let small = ProcessModel::iid(NoiseSpec::pareto(0.5, 1.0).unwrap()).unwrap();
        assert!(small.stationary_mean().is_err());
    }

    #[test]
    fn iid_path_matches_noise_stream() {
        let spec = NoiseSpec::pareto(0.7, 0.3).unwrap();
        let m = ProcessModel::iid(spec.clone()).unwrap();
        let p = m.sample_path(500, 11).unwrap();
        assert_eq!(p.values, sample_noise(&spec, 500, 11).unwrap());
    }

    #[test]
    fn coupling_iid_is_an_error() {
        let m = ProcessModel::iid(NoiseSpec::pareto(0.7, 0.3).unwrap()).unwrap();
        assert!(m.sample_coupled_paths(10, 1).is_err());
    }

    #[test]
    fn ar1_coupling_is_geometric() {
        let m = ProcessModel::ar1(0.5, NoiseSpec::pareto(1.5, 0.5).unwrap()).unwrap();
        let (x, y) = m.sample_coupled_paths(30, 5).unwrap();
        let d0 = x.values[0] - y.values[0];
        assert!(d0 != 0.0);
        for t in 0..20 {
            let d = x.values[t] - y.values[t];
            assert_relative_eq!(d, 0.5f64.powi(t as i32) * d0, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn sre_with_zero_multiplier_is_iid_b() {
        let noise = NoiseSpec::pareto(0.8, 1.0).unwrap();
        let law = SreLaw { a: Multiplier::Constant { value: 0.0 }, b: Innovation::Heavy { noise } };
        let m = ProcessModel::sre(0.8, law).unwrap();
        let (x, y) = m.sample_coupled_paths(50, 3).unwrap();
        assert!(x.values.iter().all(|v| *v >= 1.0));
        for t in 1..50 {
            assert_eq!(x.values[t], y.values[t]);
        }
    }

    #[test]
    fn sre_kesten_checked() {
        let good = SreLaw::kesten_lognormal(1.5, 0.5, Innovation::Constant { value: 1.0 });
        assert!(ProcessModel::sre(1.5, good.clone()).is_ok());
        assert!(ProcessModel::sre(1.2, good).is_err());
        let expansive = SreLaw { a: Multiplier::Constant { value: 1.2 }, b: Innovation::Constant { value: 1.0 } };
        assert!(ProcessModel::sre(1.5, expansive).is_err());
    }

    #[test]
    fn symmetric_stable_is_symmetric() {
        let spec = NoiseSpec::symmetric_stable(1.5).unwrap();
        let xs = sample_noise(&spec, 200_000, 9).unwrap();
        let pos = xs.iter().filter(|x| **x > 0.0).count() as f64 / xs.len() as f64;
        assert!((pos - 0.5).abs() < 0.005);
        // Empirical CF at u = 1 against exp(-1).
        let cf = xs.iter().map(|x| x.cos()).sum::<f64>() / xs.len() as f64;
        assert!((cf - (-1.0f64).exp()).abs() < 0.005);
    }

    #[test]
    fn config_round_trip() {
        let law = SreLaw::kesten_lognormal(1.5, 0.5, Innovation::Normal { mean: 1.0, sd: 0.2 });
        let m = ProcessModel::Sre { alpha: 1.5, law, burn_in: Some(50), an_presample: None };
        let s = toml::to_string(&m).unwrap();
        let back: ProcessModel = toml::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
