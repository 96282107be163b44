//! Gamma function and small numeric helpers shared by every module.

use crate::error::{Error, Result};

/// Euler's Gamma. Refuses the poles at 0, -1, -2, ...
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Numerical(format!("gamma of non-finite argument {x}")));
    }
    if x <= 0.0 && x == x.round() {
        return Err(Error::Numerical(format!("gamma has a pole at {x}")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// `c_alpha = Gamma(2 - alpha) cos(pi alpha / 2) / (1 - alpha)`, the constant
/// in front of the stable characteristic exponent. Equals
/// `Gamma(1 - alpha) cos(pi alpha / 2)` for alpha < 1 and is positive on
/// (0, 1) and (1, 2).
pub fn stable_constant(alpha: f64) -> Result<f64> {
    if (alpha - 1.0).abs() < 1e-12 {
        return Err(Error::Unsupported("alpha = 1 has no stable constant of this form".into()));
    }
    Ok(gamma(2.0 - alpha)? * (std::f64::consts::FRAC_PI_2 * alpha).cos() / (1.0 - alpha))
}

/// Neumaier's compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = KahanSum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(xs.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Least-squares slope and r^2 of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = compensated_sum(x.iter().copied()) / n as f64;
    let my = compensated_sum(y.iter().copied()) / n as f64;
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Some((slope, intercept, r2))
}

/// `x.powf(e)` with a fast path for the small integer exponents that show
/// up constantly (alpha = 0.5 gives exponent -2).
#[derive(Debug, Clone, Copy)]
pub struct Power {
    exp: f64,
    int: Option<i32>,
}

impl Power {
    pub fn new(exp: f64) -> Self {
        let int = if exp == exp.round() && exp.abs() <= 8.0 {
            Some(exp as i32)
        } else {
            None
        };
        Self { exp, int }
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self.int {
            Some(k) => x.powi(k),
            None => x.powf(self.exp),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_reference_values() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(gamma(0.5).unwrap(), pi.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(gamma(5.0).unwrap(), 24.0, max_relative = 1e-12);
        assert_relative_eq!(gamma(0.25).unwrap(), 3.625_609_908_221_908_3, max_relative = 1e-12);
        assert_relative_eq!(gamma(0.75).unwrap(), 1.225_416_702_465_178, max_relative = 1e-12);
        assert_relative_eq!(gamma(-0.5).unwrap(), -2.0 * pi.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(gamma(1.5).unwrap(), pi.sqrt() / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn gamma_poles_refused() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-2.0).is_err());
    }

    #[test]
    fn stable_constant_matches_gamma_one_minus_alpha() {
        for &a in &[0.2, 0.5, 0.8] {
            let direct = gamma(1.0 - a).unwrap() * (std::f64::consts::FRAC_PI_2 * a).cos();
            assert_relative_eq!(stable_constant(a).unwrap(), direct, max_relative = 1e-12);
        }
        assert!(stable_constant(1.5).unwrap() > 0.0);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [0.5, -0.5, -1.5, -2.5];
        let (s, i, r2) = linear_fit(&x, &y).unwrap();
        assert_relative_eq!(s, -1.0, epsilon = 1e-14);
        assert_relative_eq!(i, 1.5, epsilon = 1e-14);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-14);
    }
}
