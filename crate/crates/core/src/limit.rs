//! Limit laws of `(a_n^{-1} S_n, a_n^{-1} M_n, a_n^{-p} gamma_{n,p}^p)`.
//!
//! Transforms are written as integrals against `nu(dy) = alpha y^{-alpha-1} dy`
//! of cluster functionals:
//!
//! ```text
//! log Phi(u, x, lambda) = int E[ e^{i y u SQ - y^p lambda VQ} 1(y MQ <= x) - 1 - i y u SQ 1(alpha > 1) ] nu(dy)
//! ```
//!
//! with `SQ = sum Q_t`, `MQ = max |Q_t|`, `VQ = sum |Q_t|^p`. The expectation
//! over `Q` is an exact finite sum for the analytic cluster models and a
//! Monte Carlo average (with common random numbers across grid points) for
//! the empirical one. The `y` integral is done per cluster atom by adaptive
//! Gauss-Kronrod after `s = y^{-alpha}`; the oscillatory far tail that shows
//! up in the tilted-cluster form is rotated onto the imaginary axis.

use crate::cluster::{max_abs, power_sum, ClusterEnsemble, ClusterModel};
use crate::error::{config, Error, Result};
use crate::estimate::Method;
use crate::quadrature::{integrate, integrate_real, integrate_to_inf, Tolerance};
use crate::rng::{exponential, mix_seed, open_unit, rng_from_seed};
use crate::special::{gamma, stable_constant, Power};
use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::io::Write;

pub const DEFAULT_MC_CLUSTERS: usize = 10_000;
pub const DEFAULT_LEPAGE_TERMS: usize = 10_000;
pub const MIN_EMPIRICAL_SAMPLES: usize = 100;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformValue {
    pub value: Complex64,
    /// Quadrature error estimate, propagated to the transform.
    pub quad_error: f64,
    /// Monte Carlo standard error from the cluster average (0 when exact).
    pub stderr: f64,
    pub method: Method,
}

#[derive(Debug, Clone, Copy)]
struct Atom {
    weight: f64,
    sum: f64,
    max: f64,
}

/// Cluster-dependent transforms with cached cluster draws.
#[derive(Debug, Clone)]
pub struct TransformEngine {
    alpha: f64,
    ensemble: ClusterEnsemble,
    atoms: Vec<Atom>,
    tol: Tolerance,
}

impl TransformEngine {
    /// `mc_clusters` draws are used when the model has no exact atom set.
    pub fn new(model: &ClusterModel, mc_clusters: usize, seed: u64) -> Result<Self> {
        let alpha = model.alpha();
        if (alpha - 1.0).abs() < 1e-12 {
            return Err(Error::Unsupported("limit transforms need alpha != 1".into()));
        }
        let ensemble = model.ensemble(mc_clusters, seed)?;
        Ok(Self::from_ensemble(ensemble))
    }

    pub fn from_ensemble(ensemble: ClusterEnsemble) -> Self {
        let atoms = ensemble
            .draws
            .iter()
            .zip(&ensemble.weights)
            .map(|(q, w)| Atom { weight: *w, sum: q.sum(), max: q.max_abs() })
            .collect();
        Self { alpha: ensemble.alpha, ensemble, atoms, tol: Tolerance::abs(1e-8) }
    }

    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.tol = tol;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ensemble(&self) -> &ClusterEnsemble {
        &self.ensemble
    }

    fn method(&self, quad: bool) -> Method {
        match (self.ensemble.is_exact(), quad) {
            (false, _) => Method::MonteCarlo,
            (true, true) => Method::Quadrature,
            (true, false) => Method::ClosedForm,
        }
    }

    /// Combine per-atom exponent contributions into `exp(sum w_k l_k)` with a
    /// Monte Carlo error for empirical ensembles.
    fn combine(&self, terms: &[Complex64], quad_err: f64, quad: bool) -> TransformValue {
        let log = terms.iter().zip(&self.atoms).fold(ZERO, |acc, (t, a)| acc + t * a.weight);
        let value = log.exp();
        let stderr = if self.ensemble.is_exact() {
            0.0
        } else {
            let n = terms.len() as f64;
            let var = terms.iter().map(|t| (t - log).norm_sqr()).sum::<f64>() / (n - 1.0).max(1.0);
            value.norm() * (var / n).sqrt()
        };
        TransformValue { value, quad_error: value.norm() * quad_err, stderr, method: self.method(quad) }
    }

    fn stable_terms(&self, u: f64) -> Result<Vec<Complex64>> {
        let c = stable_constant(self.alpha)?;
        let tan = (FRAC_PI_2 * self.alpha).tan();
        Ok(self.atoms.iter().map(|a| stable_exponent(c, tan, self.alpha, u * a.sum)).collect())
    }

    /// Characteristic function of the stable limit `xi` of `a_n^{-1} S_n`.
    pub fn stable_cf(&self, u: f64) -> Result<TransformValue> {
        let terms = self.stable_terms(u)?;
        Ok(self.combine(&terms, 0.0, false))
    }

    /// `(sigma^alpha(1), beta(1))` of the stable limit.
    pub fn stable_parameters(&self) -> (f64, f64) {
        let a = self.alpha;
        let s: f64 = self.atoms.iter().map(|t| t.weight * t.sum.abs().powf(a)).sum();
        let b: f64 = self.atoms.iter().map(|t| t.weight * t.sum.signum() * t.sum.abs().powf(a)).sum();
        (s, if s > 0.0 { b / s } else { 0.0 })
    }

    /// `E[e^{iu xi} 1(eta <= x)]`, via the tilted cluster.
    pub fn hybrid_cf(&self, u: f64, x: f64) -> Result<TransformValue> {
        if !(x > 0.0) {
            return config("hybrid transform needs x > 0");
        }
        let mut terms = self.stable_terms(u)?;
        if x.is_infinite() {
            return Ok(self.combine(&terms, 0.0, false));
        }
        let a = self.alpha;
        let mut err = 0.0;
        for (t, atom) in terms.iter_mut().zip(&self.atoms) {
            if atom.max == 0.0 {
                continue;
            }
            let ma = atom.max.powf(a);
            let (k, e) = tail_kernel(a, x, u * atom.sum / atom.max, self.tol);
            *t -= ma * (x.powf(-a) + k);
            err += atom.weight * ma * e;
        }
        Ok(self.combine(&terms, err, true))
    }

    /// `E exp(-lambda zeta^p)`, closed form.
    pub fn laplace_zeta(&self, lambda: f64, p: f64) -> Result<TransformValue> {
        let a = self.alpha;
        if !(p > a) {
            return config(format!("laplace transform of zeta^p needs p > alpha, got p = {p}"));
        }
        if !(lambda >= 0.0) {
            return config("lambda must be nonnegative");
        }
        let g = gamma(1.0 - a / p)?;
        let lp = lambda.powf(a / p);
        let terms: Vec<Complex64> = self
            .ensemble
            .draws
            .iter()
            .map(|q| Complex64::new(-g * q.norm(p).powf(a) * lp, 0.0))
            .collect();
        Ok(self.combine(&terms, 0.0, false))
    }

    /// `Phi(u, x, lambda) = E[e^{iu xi - lambda zeta^p} 1(eta <= x)]` by
    /// quadrature of the Levy-Khintchine integral.
    pub fn joint_cf_laplace(&self, u: f64, x: f64, lambda: f64, p: f64) -> Result<TransformValue> {
        let a = self.alpha;
        if !(p > a) {
            return config(format!("joint transform needs p > alpha, got p = {p}"));
        }
        if !(lambda >= 0.0) || !(x > 0.0) {
            return config("joint transform needs lambda >= 0 and x > 0");
        }
        if lambda == 0.0 && x.is_infinite() {
            return self.stable_cf(u);
        }
        let vs: Vec<f64> = self.ensemble.draws.iter().map(|q| q.power_sum(p)).collect();
        let mut err = 0.0;
        let mut terms = Vec::with_capacity(self.atoms.len());
        for (atom, v) in self.atoms.iter().zip(&vs) {
            if atom.max == 0.0 {
                terms.push(ZERO);
                continue;
            }
            let (t, e) = joint_atom(a, p, u * atom.sum, lambda * v, x / atom.max, self.tol);
            err += atom.weight * e;
            terms.push(t);
        }
        Ok(self.combine(&terms, err, true))
    }

    /// `E exp(-lambda (zeta / eta)^p)`: tilted-cluster numerator over
    /// `1 + int_0^1 E[1 - e^{-y^p lambda V}] nu(dy)`, `V = sum |Q~_t|^p`.
    pub fn norm_ratio_laplace(&self, lambda: f64, p: f64) -> Result<TransformValue> {
        let a = self.alpha;
        if !(p > a) {
            return config(format!("norm ratio transform needs p > alpha, got p = {p}"));
        }
        if !(lambda >= 0.0) {
            return config("lambda must be nonnegative");
        }
        let ws: Vec<f64> = self.atoms.iter().map(|t| t.max.powf(a)).collect();
        let theta: f64 = self.atoms.iter().zip(&ws).map(|(t, w)| t.weight * w).sum();
        if !(theta > 0.0) {
            return Err(Error::Degenerate("cluster maximum is identically zero".into()));
        }
        // y = v^m with m (p - alpha) = 1 makes the integrand bounded at 0.
        let m = 1.0 / (p - a);
        let mut num = 0.0;
        let mut den = 1.0;
        let mut err = 0.0;
        let mut num_terms = Vec::with_capacity(self.atoms.len());
        let mut den_terms = Vec::with_capacity(self.atoms.len());
        for ((atom, w), q) in self.atoms.iter().zip(&ws).zip(&self.ensemble.draws) {
            if atom.max == 0.0 {
                num_terms.push(0.0);
                den_terms.push(0.0);
                continue;
            }
            let c = lambda * q.power_sum(p) / atom.max.powf(p);
            let wt = atom.weight * w / theta;
            let nt = (-c).exp();
            let (d, e) = if c == 0.0 {
                (0.0, 0.0)
            } else {
                integrate_real(
                    |v| {
                        if v == 0.0 {
                            return a * m * c;
                        }
                        let y = v.powf(m);
                        -(-c * y.powf(p)).exp_m1() * a * m * y.powf(-a) / v
                    },
                    0.0,
                    1.0,
                    self.tol,
                )
            };
            num += wt * nt;
            den += wt * d;
            err += wt * e;
            num_terms.push(w * nt / theta);
            den_terms.push(w * (1.0 + d) / theta);
        }
        let value = num / den;
        let stderr = if self.ensemble.is_exact() {
            0.0
        } else {
            let n = num_terms.len() as f64;
            let sn = (num_terms.iter().map(|t| (t - num).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
            let sd = (den_terms.iter().map(|t| (t - den).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
            value * ((sn / num).powi(2) + (sd / den).powi(2)).sqrt()
        };
        Ok(TransformValue {
            value: Complex64::new(value, 0.0),
            quad_error: value * err / den,
            stderr,
            method: self.method(true),
        })
    }

    /// Characteristic function of `R = xi / eta`.
    pub fn ratio_cf(&self, u: f64) -> Result<TransformValue> {
        let a = self.alpha;
        let ws: Vec<f64> = self.atoms.iter().map(|t| t.max.powf(a)).collect();
        let theta: f64 = self.atoms.iter().zip(&ws).map(|(t, w)| t.weight * w).sum();
        if !(theta > 0.0) {
            return Err(Error::Degenerate("cluster maximum is identically zero".into()));
        }
        let tilted: Vec<f64> = self.atoms.iter().map(|t| if t.max > 0.0 { t.sum / t.max } else { 0.0 }).collect();
        let mean: f64 = self.atoms.iter().zip(&ws).zip(&tilted).map(|((t, w), s)| t.weight * w * s).sum::<f64>() / theta;
        let var: f64 = self
            .atoms
            .iter()
            .zip(&ws)
            .zip(&tilted)
            .map(|((t, w), s)| t.weight * w * (s - mean) * (s - mean))
            .sum::<f64>()
            / theta;
        if mean.abs() < 1e-12 && var < 1e-12 {
            return Err(Error::Degenerate("tilted cluster sum is degenerate at zero".into()));
        }
        let mut num = ZERO;
        let mut den = ZERO;
        let mut err = 0.0;
        let mut num_terms = Vec::with_capacity(self.atoms.len());
        let mut den_terms = Vec::with_capacity(self.atoms.len());
        for ((atom, w), s) in self.atoms.iter().zip(&ws).zip(&tilted) {
            let wt = atom.weight * w / theta;
            let z = u * s;
            let nt = Complex64::new(0.0, z).exp();
            let (d, e) = ratio_denominator_atom(a, z, self.tol);
            num += wt * nt;
            den += wt * d;
            err += wt * e;
            num_terms.push(*w * nt / theta);
            den_terms.push(*w * d / theta);
        }
        let value = num / den;
        let stderr = if self.ensemble.is_exact() {
            0.0
        } else {
            let n = num_terms.len() as f64;
            let sn = (num_terms.iter().map(|t| (t - num).norm_sqr()).sum::<f64>() / (n - 1.0) / n).sqrt();
            let sd = (den_terms.iter().map(|t| (t - den).norm_sqr()).sum::<f64>() / (n - 1.0) / n).sqrt();
            value.norm() * ((sn / num.norm()).powi(2) + (sd / den.norm()).powi(2)).sqrt()
        };
        Ok(TransformValue {
            value,
            quad_error: value.norm() * err / den.norm(),
            stderr,
            method: self.method(true),
        })
    }
}

fn stable_exponent(c: f64, tan: f64, alpha: f64, w: f64) -> Complex64 {
    if w == 0.0 {
        return ZERO;
    }
    -c * w.abs().powf(alpha) * Complex64::new(1.0, -w.signum() * tan)
}

/// `e^{a + ib} - 1` without cancellation.
#[inline]
fn cexpm1(a: f64, b: f64) -> Complex64 {
    let ea1 = a.exp_m1();
    let (sb, cb) = b.sin_cos();
    let h = (0.5 * b).sin();
    Complex64::new(ea1 * cb - 2.0 * h * h, (ea1 + 1.0) * sb)
}

/// `e^{a + ib} - 1 - ib`, with a series for `sin b - b` at small `b`.
#[inline]
fn cexpm1_compensated(a: f64, b: f64) -> Complex64 {
    let ea1 = a.exp_m1();
    let (sb, cb) = b.sin_cos();
    let h = (0.5 * b).sin();
    let sin_minus = if b.abs() < 1e-4 {
        let b2 = b * b;
        -b * b2 / 6.0 * (1.0 - b2 / 20.0)
    } else {
        sb - b
    };
    Complex64::new(ea1 * cb - 2.0 * h * h, ea1 * sb + sin_minus)
}

/// `int_{s0}^inf f(s) ds` for `f(s) ~ s^{-beta}`, `beta > 1`. The change of
/// variables `s = s0 tau^{-gamma}` with `gamma = 2 / (beta - 1)` makes the
/// integrand vanish linearly at `tau = 0` instead of leaving an algebraic
/// endpoint singularity.
fn integrate_power_tail<F: Fn(f64) -> Complex64>(f: F, s0: f64, beta: f64, tol: Tolerance) -> (Complex64, f64) {
    let gam = 2.0 / (beta - 1.0);
    let g = |tau: f64| {
        if tau <= 0.0 {
            return ZERO;
        }
        let s = s0 * tau.powf(-gam);
        if !s.is_finite() {
            return ZERO;
        }
        f(s) * (s0 * gam * tau.powf(-gam - 1.0))
    };
    let r = integrate(g, 0.0, 1.0, tol);
    (r.value, r.error)
}

fn tail_exponent(alpha: f64, p: f64, w: f64) -> f64 {
    let lin = if w == 0.0 { f64::INFINITY } else if alpha > 1.0 { 2.0 / alpha } else { 1.0 / alpha };
    lin.min(p / alpha)
}

/// Integral over `y in (0, y_max]` (s in `[y_max^{-alpha}, inf)`) of
/// `g(y) = e^{iyw - y^p v} - 1 - iyw 1(alpha > 1)` against `nu`, plus the
/// analytic contribution of `(-1 - iyw 1(alpha > 1))` on `(y_max, inf)`.
///
/// Returns the log-transform contribution of one cluster atom.
fn joint_atom(alpha: f64, p: f64, w: f64, v: f64, y_max: f64, tol: Tolerance) -> (Complex64, f64) {
    let comp = alpha > 1.0;
    let inv = -1.0 / alpha;
    let g = move |s: f64| {
        let y = s.powf(inv);
        let a = if v == 0.0 { 0.0 } else { -y.powf(p) * v };
        if comp {
            cexpm1_compensated(a, y * w)
        } else {
            cexpm1(a, y * w)
        }
    };
    let s0 = if y_max.is_infinite() { 0.0 } else { y_max.powf(-alpha) };
    let mut total = ZERO;
    let mut err = 0.0;
    // Outer part, y > y_max.
    if y_max.is_finite() {
        total -= Complex64::new(s0, 0.0);
        if comp {
            total -= I * w * alpha / (alpha - 1.0) * y_max.powf(1.0 - alpha);
        }
    }
    let s1 = 1.0f64;
    if s0 < s1 {
        // y in [1, y_max]: the compensator s^{-1/alpha} is integrated exactly
        // so that the quadrature never sees the singularity at s = 0.
        let h = move |s: f64| {
            let y = s.powf(inv);
            let a = if v == 0.0 { 0.0 } else { -y.powf(p) * v };
            cexpm1(a, y * w)
        };
        let r = integrate(h, s0, s1, tol);
        total += r.value;
        err += r.error;
        if comp {
            let e = 1.0 + inv;
            total -= I * w * (s1.powf(e) - if s0 == 0.0 { 0.0 } else { s0.powf(e) }) / e;
        }
        let (v, e) = integrate_power_tail(g, s1, tail_exponent(alpha, p, w), tol);
        total += v;
        err += e;
    } else {
        let (v, e) = integrate_power_tail(g, s0, tail_exponent(alpha, p, w), tol);
        total += v;
        err += e;
    }
    (total, err)
}

/// `K(x, w) = int_x^inf (e^{iyw} - 1) nu(dy)`.
///
/// Uses `int_a^inf e^{iz} z^{-alpha-1} dz = i e^{ia} int_0^inf e^{-t} (a + it)^{-alpha-1} dt`,
/// which turns the oscillatory tail into an exponentially damped integral.
pub fn tail_kernel(alpha: f64, x: f64, w: f64, tol: Tolerance) -> (Complex64, f64) {
    if w == 0.0 {
        return (ZERO, 0.0);
    }
    let aw = w.abs();
    let a = x * aw;
    let scale = alpha * aw.powf(alpha);
    let inner_tol = Tolerance { abs: tol.abs / scale, rel: 1e-13, max_intervals: tol.max_intervals };
    let f = move |t: f64| (-t).exp() * Complex64::new(a, t).powf(-alpha - 1.0);
    let mut val = ZERO;
    let mut err = 0.0;
    let mut lo = 0.0;
    // Breakpoints resolve the peak of width ~a near t = 0.
    let mut hi = a.min(1.0);
    while hi < 1.0 {
        let r = integrate(f, lo, hi, inner_tol);
        val += r.value;
        err += r.error;
        lo = hi;
        hi = (hi * 8.0).min(1.0);
    }
    let r = integrate(f, lo, 1.0, inner_tol);
    val += r.value;
    err += r.error;
    let r = integrate_to_inf(f, 1.0, inner_tol);
    val += r.value;
    err += r.error;
    let e = I * Complex64::new(0.0, a).exp() * val;
    let e = if w > 0.0 { e } else { e.conj() };
    (scale * e - x.powf(-alpha), scale * err)
}

/// Denominator of the ratio transform for one tilted atom with `z = u SQ~`:
/// `int_0^1 (1 + iyz 1(alpha>1) - e^{iyz}) nu(dy) + 1 + iz alpha/(alpha-1) 1(alpha>1)`.
fn ratio_denominator_atom(alpha: f64, z: f64, tol: Tolerance) -> (Complex64, f64) {
    let comp = alpha > 1.0;
    let inv = -1.0 / alpha;
    let g = move |s: f64| {
        let y = s.powf(inv);
        if comp {
            -cexpm1_compensated(0.0, y * z)
        } else {
            -cexpm1(0.0, y * z)
        }
    };
    if z == 0.0 {
        return (Complex64::new(1.0, 0.0), 0.0);
    }
    let (v, e) = integrate_power_tail(g, 1.0, tail_exponent(alpha, f64::INFINITY, z), tol);
    let mut total = v + 1.0;
    if comp {
        total += I * z * alpha / (alpha - 1.0);
    }
    (total, e)
}

pub fn stable_cf(u: f64, cluster: &ClusterModel) -> Result<TransformValue> {
    TransformEngine::new(cluster, DEFAULT_MC_CLUSTERS, 0)?.stable_cf(u)
}

pub fn hybrid_cf(u: f64, x: f64, cluster: &ClusterModel) -> Result<TransformValue> {
    TransformEngine::new(cluster, DEFAULT_MC_CLUSTERS, 0)?.hybrid_cf(u, x)
}

pub fn laplace_zeta(lambda: f64, cluster: &ClusterModel, p: f64) -> Result<TransformValue> {
    TransformEngine::new(cluster, DEFAULT_MC_CLUSTERS, 0)?.laplace_zeta(lambda, p)
}

pub fn joint_cf_laplace(u: f64, x: f64, lambda: f64, cluster: &ClusterModel, p: f64) -> Result<TransformValue> {
    TransformEngine::new(cluster, DEFAULT_MC_CLUSTERS, 0)?.joint_cf_laplace(u, x, lambda, p)
}

pub fn ratio_cf(u: f64, cluster: &ClusterModel) -> Result<TransformValue> {
    TransformEngine::new(cluster, DEFAULT_MC_CLUSTERS, 0)?.ratio_cf(u)
}

/// One draw of `(xi, eta, zeta^p)` from a truncated LePage series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub xi: f64,
    pub eta: f64,
    pub zeta_p: f64,
    /// Bound on the expected absolute contribution of the dropped terms to `xi`.
    pub truncation_bound: f64,
}

#[derive(Debug, Clone)]
pub struct LepageSampler {
    alpha: f64,
    p: f64,
    n_terms: usize,
    // (sum Q, max |Q|, sum |Q|^p) and cumulative weights.
    atoms: Vec<(f64, f64, f64)>,
    cumulative: Vec<f64>,
    mean_l1: f64,
}

impl LepageSampler {
    pub fn new(cluster: &ClusterModel, p: f64, n_terms: usize, seed: u64) -> Result<Self> {
        let alpha = cluster.alpha();
        if alpha >= 1.0 {
            return Err(Error::Unsupported(
                "LePage sampling is only provided for alpha < 1 (no centering of the series)".into(),
            ));
        }
        if !(p > alpha) {
            return config(format!("LePage sampling needs p > alpha, got p = {p}"));
        }
        if n_terms < 10 {
            return config("LePage sampling needs at least 10 terms");
        }
        let ens = cluster.ensemble(0, seed)?;
        let atoms: Vec<(f64, f64, f64)> = ens
            .draws
            .iter()
            .map(|q| (q.sum(), max_abs(&q.values), power_sum(&q.values, p)))
            .collect();
        let total: f64 = ens.weights.iter().sum();
        let mut acc = 0.0;
        let cumulative = ens
            .weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        let mean_l1 = ens.expect(|q| q.power_sum(1.0)).estimate;
        Ok(Self { alpha, p, n_terms, atoms, cumulative, mean_l1 })
    }

    #[inline]
    fn pick<R: RngCore + ?Sized>(&self, rng: &mut R) -> (f64, f64, f64) {
        if self.atoms.len() == 1 {
            return self.atoms[0];
        }
        let u = open_unit(rng);
        let i = self.cumulative.partition_point(|c| *c < u).min(self.atoms.len() - 1);
        self.atoms[i]
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> LimitSample {
        let pa = Power::new(-1.0 / self.alpha);
        let pp = Power::new(-self.p / self.alpha);
        let mut gam = 0.0;
        let mut xi = 0.0;
        let mut eta = 0.0f64;
        let mut zeta = 0.0;
        for _ in 0..self.n_terms {
            gam += exponential(rng);
            let (s, m, v) = self.pick(rng);
            let y = pa.apply(gam);
            xi += y * s;
            eta = eta.max(y * m);
            zeta += pp.apply(gam) * v;
        }
        // E sum_{i > N} Gamma_i^{-1/alpha} sum|Q_j| <= Gamma_N^{1-1/alpha} / (1/alpha - 1) E||Q||_1.
        let e = 1.0 / self.alpha - 1.0;
        let truncation_bound = gam.powf(-e) / e * self.mean_l1;
        LimitSample { xi, eta, zeta_p: zeta, truncation_bound }
    }

    /// `count` independent draws; draw `i` uses its own stream.
    pub fn sample_many(&self, count: usize, seed: u64) -> Vec<LimitSample> {
        (0..count as u64)
            .into_par_iter()
            .map(|i| self.sample(&mut rng_from_seed(mix_seed(seed, i))))
            .collect()
    }
}

pub fn sample_limit_lepage(cluster: &ClusterModel, p: f64, n_terms: usize, seed: u64) -> Result<LimitSample> {
    let s = LepageSampler::new(cluster, p, n_terms, seed)?;
    Ok(s.sample(&mut rng_from_seed(seed)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmpiricalKind {
    /// `E e^{iu S}`.
    Cf,
    /// `E e^{-lambda S}` of a nonnegative sample.
    Laplace,
    /// `E e^{iu S} 1(M <= x)`.
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformPoint {
    pub u: f64,
    pub x: f64,
    pub lambda: f64,
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
    pub method: Method,
}

impl TransformPoint {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Grid of `(u, x, lambda)` points. Missing axes default to `{0}`, `{inf}`, `{0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TransformGrid {
    #[serde(default)]
    pub u: Vec<f64>,
    #[serde(default)]
    pub x: Vec<f64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

impl TransformGrid {
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let us = if self.u.is_empty() { vec![0.0] } else { self.u.clone() };
        let xs = if self.x.is_empty() { vec![f64::INFINITY] } else { self.x.clone() };
        let ls = if self.lambda.is_empty() { vec![0.0] } else { self.lambda.clone() };
        let mut out = Vec::new();
        for &u in &us {
            for &x in &xs {
                for &l in &ls {
                    out.push((u, x, l));
                }
            }
        }
        out
    }
}

/// Empirical transform of samples `(s_i, m_i)`; `m` is only read by the
/// hybrid kind.
pub fn empirical_transform(samples: &[(f64, f64)], kind: EmpiricalKind, grid: &TransformGrid) -> Result<Vec<TransformPoint>> {
    if samples.len() < MIN_EMPIRICAL_SAMPLES {
        return config(format!(
            "empirical transform needs at least {MIN_EMPIRICAL_SAMPLES} samples, got {}",
            samples.len()
        ));
    }
    if kind == EmpiricalKind::Laplace && samples.iter().any(|(s, _)| *s < 0.0) {
        return config("laplace transform needs nonnegative samples");
    }
    let n = samples.len() as f64;
    grid.points()
        .into_iter()
        .map(|(u, x, lambda)| {
            let vals: Vec<Complex64> = samples
                .iter()
                .map(|&(s, m)| match kind {
                    EmpiricalKind::Cf => Complex64::new(0.0, u * s).exp(),
                    EmpiricalKind::Laplace => Complex64::new((-lambda * s).exp(), 0.0),
                    EmpiricalKind::Hybrid => {
                        if m <= x {
                            Complex64::new(0.0, u * s).exp()
                        } else {
                            ZERO
                        }
                    }
                })
                .collect();
            let mean = vals.iter().fold(ZERO, |a, v| a + v) / n;
            let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
            Ok(TransformPoint { u, x, lambda, re: mean.re, im: mean.im, stderr: (var / n).sqrt(), method: Method::MonteCarlo })
        })
        .collect()
}

/// CSV columns `u, x, lambda, re, im, stderr, method`.
pub fn write_transform_csv<W: Write>(points: &[TransformPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["u", "x", "lambda", "re", "im", "stderr", "method"])?;
    for p in points {
        out.write_record([
            format!("{}", p.u),
            format!("{}", p.x),
            format!("{}", p.lambda),
            format!("{:e}", p.re),
            format!("{:e}", p.im),
            format!("{:e}", p.stderr),
            p.method.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn iid_pos(alpha: f64) -> TransformEngine {
        TransformEngine::new(&ClusterModel::iid(alpha, 1.0).unwrap(), 0, 0).unwrap()
    }

    #[test]
    fn stable_cf_at_zero_is_one() {
        let e = iid_pos(0.5);
        assert_eq!(e.stable_cf(0.0).unwrap().value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn stable_cf_iid_closed_form() {
        // log phi = -Gamma(1-a) cos(pi a/2) |u|^a (1 - i sign(u) tan(pi a/2)).
        let a = 0.5;
        let e = iid_pos(a);
        let g = gamma(1.0 - a).unwrap() * (FRAC_PI_2 * a).cos();
        for &u in &[0.5, -1.0, 2.0] {
            let expect = (-g * f64::abs(u).powf(a) * Complex64::new(1.0, -f64::signum(u) * (FRAC_PI_2 * a).tan())).exp();
            assert!((e.stable_cf(u).unwrap().value - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn tail_kernel_matches_series_route() {
        // For alpha < 1: int_a^inf (e^{iz}-1) z^{-a-1} dz = Gamma(-a) e^{-i pi a/2} - sum_k i^k a^{k-a}/(k!(k-a)).
        let alpha = 0.5;
        for &a in &[0.01, 0.3, 1.0, 2.5] {
            let mut series = ZERO;
            let mut term = Complex64::new(1.0, 0.0);
            for k in 1..80 {
                term *= I * a / k as f64;
                series += term * a.powf(-alpha) / (k as f64 - alpha);
            }
            let full = gamma(-alpha).unwrap() * Complex64::new(0.0, -FRAC_PI_2 * alpha).exp();
            let expect = alpha * (full - series);
            let (k, _) = tail_kernel(alpha, a, 1.0, Tolerance::abs(1e-12));
            assert!((k - expect).norm() < 1e-9, "a = {a}: {k} vs {expect}");
        }
    }

    #[test]
    fn hybrid_at_u_zero_is_frechet() {
        let m = ClusterModel::ar1(0.8, 0.5, 1.0).unwrap();
        let e = TransformEngine::new(&m, 0, 0).unwrap();
        let theta = 1.0 - 0.5f64.powf(0.8);
        for &x in &[0.5, 1.0, 2.0] {
            let v = e.hybrid_cf(0.0, x).unwrap().value;
            assert_relative_eq!(v.re, (-theta * f64::powf(x, -0.8)).exp(), epsilon = 1e-12);
            assert!(v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn hybrid_two_routes_agree() {
        for &(alpha, phi, q) in &[(0.5, 0.5, 1.0), (0.7, -0.4, 0.3), (1.5, 0.3, 0.8)] {
            let m = ClusterModel::ar1(alpha, phi, q).unwrap();
            let e = TransformEngine::new(&m, 0, 0).unwrap();
            for &u in &[0.5, 1.0, -2.0] {
                for &x in &[0.5, 1.0, 2.0] {
                    let a = e.hybrid_cf(u, x).unwrap().value;
                    let b = e.joint_cf_laplace(u, x, 0.0, 2.0).unwrap().value;
                    assert!((a - b).norm() < 1e-8, "alpha {alpha} u {u} x {x}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn joint_reduces_to_laplace() {
        let e = iid_pos(0.5);
        for &l in &[0.5, 1.0, 2.0] {
            let a = e.joint_cf_laplace(0.0, f64::INFINITY, l, 2.0).unwrap().value;
            let b = e.laplace_zeta(l, 2.0).unwrap().value;
            assert!((a - b).norm() < 1e-8, "{a} vs {b}");
        }
        assert_relative_eq!(e.laplace_zeta(1.0, 2.0).unwrap().value.re, (-gamma(0.75).unwrap()).exp(), epsilon = 1e-14);
    }

    #[test]
    fn joint_large_x_tends_to_stable() {
        let e = iid_pos(1.5);
        let a = e.joint_cf_laplace(1.0, 1e6, 0.0, 2.0).unwrap().value;
        let b = e.stable_cf(1.0).unwrap().value;
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn ratio_cf_at_zero() {
        let e = iid_pos(0.5);
        assert!((e.ratio_cf(0.0).unwrap().value - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn ratio_cf_symmetric_degenerate_is_error() {
        // Two-point symmetric iid cluster: E SQ~ = 0 but Var = 1, so fine.
        let e = TransformEngine::new(&ClusterModel::iid(0.5, 0.5).unwrap(), 0, 0).unwrap();
        assert!(e.ratio_cf(1.0).is_ok());
    }

    #[test]
    fn lepage_rejects_alpha_above_one() {
        let m = ClusterModel::iid(1.5, 1.0).unwrap();
        assert!(matches!(LepageSampler::new(&m, 2.0, 100, 0), Err(Error::Unsupported(_))));
        let m = ClusterModel::iid(0.5, 1.0).unwrap();
        assert!(LepageSampler::new(&m, 0.4, 100, 0).is_err());
        assert!(LepageSampler::new(&m, 2.0, 5, 0).is_err());
    }

    #[test]
    fn lepage_invariants() {
        let m = ClusterModel::ar1(0.6, 0.5, 0.7).unwrap();
        let s = LepageSampler::new(&m, 2.0, 200, 0).unwrap();
        for d in s.sample_many(50, 3) {
            assert!(d.eta > 0.0 && d.zeta_p > 0.0);
            assert!(d.truncation_bound > 0.0);
            assert!(d.zeta_p.powf(0.5) >= d.eta * (1.0 - 1e-12));
        }
    }

    #[test]
    fn empirical_hybrid_at_infinity_is_cf() {
        let samples: Vec<(f64, f64)> = (0..200).map(|i| (i as f64 * 0.37 % 5.0, i as f64 * 0.11 % 3.0)).collect();
        let grid = TransformGrid { u: vec![0.5, 1.0], x: vec![f64::INFINITY], lambda: vec![] };
        let a = empirical_transform(&samples, EmpiricalKind::Cf, &grid).unwrap();
        let b = empirical_transform(&samples, EmpiricalKind::Hybrid, &grid).unwrap();
        assert_eq!(a, b);
        assert!(empirical_transform(&samples[..50], EmpiricalKind::Cf, &grid).is_err());
    }

    #[test]
    fn norm_ratio_laplace_matches_lepage() {
        let m = ClusterModel::ar1(0.5, 0.5, 1.0).unwrap();
        let e = TransformEngine::new(&m, 0, 0).unwrap();
        assert_relative_eq!(e.norm_ratio_laplace(0.0, 2.0).unwrap().value.re, 1.0, epsilon = 1e-12);
        let draws = LepageSampler::new(&m, 2.0, 500, 1).unwrap().sample_many(20_000, 9);
        for &l in &[0.3, 1.0] {
            let v: Vec<f64> = draws.iter().map(|d| (-l * d.zeta_p / d.eta.powi(2)).exp()).collect();
            let (mean, se) = crate::special::mean_stderr(&v);
            let want = e.norm_ratio_laplace(l, 2.0).unwrap().value.re;
            assert!((mean - want).abs() < 4.0 * se, "lambda {l}: {mean} vs {want} (se {se})");
        }
    }
}
