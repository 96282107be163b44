use super::report::ReportRow;
use crate::error::{config, Result};
use num_complex::Complex64;

/// Minimum sample size on each side of a distributional comparison.
pub const MIN_COMPARE_SAMPLES: usize = 1_000;

/// `c(0.01)` in the asymptotic two-sample KS critical value.
const KS_C_001: f64 = 1.628;

/// Two-sample Kolmogorov-Smirnov distance `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { 1.0 };
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        // Step past every copy of the smaller value on both sides, so ties
        // move the two CDFs together.
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// 1% critical value of the two-sample KS statistic times `slack`.
pub fn ks_bound(n: usize, m: usize, slack: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C_001 * ((n + m) / (n * m)).sqrt() * slack
}

fn ecf(xs: &[f64], u: f64) -> Complex64 {
    let s = xs.iter().fold(Complex64::new(0.0, 0.0), |acc, x| acc + Complex64::new(0.0, u * x).exp());
    s / xs.len() as f64
}

/// Distance between a statistic sample and a limit-law sample: a KS row and,
/// when `u_grid` is non-empty, a row for the sup over `u` of the difference
/// of empirical characteristic functions.
///
/// `ks_bound_override` replaces the computed critical value. The CF bound is
/// `z_bound * slack * sqrt(1/n + 1/m)`, which dominates the Monte Carlo
/// noise of each point.
pub fn compare_to_limit(
    name: &str,
    stat: &[f64],
    limit: &[f64],
    u_grid: &[f64],
    z_bound: f64,
    slack: f64,
    ks_bound_override: Option<f64>,
) -> Result<Vec<ReportRow>> {
    if stat.len() < MIN_COMPARE_SAMPLES || limit.len() < MIN_COMPARE_SAMPLES {
        return config(format!(
            "compare_to_limit needs at least {MIN_COMPARE_SAMPLES} samples per side, got {} and {}",
            stat.len(),
            limit.len()
        ));
    }
    let (n, m) = (stat.len(), limit.len());
    let d = ks_two_sample(stat, limit);
    let bound = ks_bound_override.unwrap_or_else(|| ks_bound(n, m, slack));
    let mut rows = vec![ReportRow::tolerance(format!("{name}_ks"), Some(0.0), d, d, bound)];
    if !u_grid.is_empty() {
        let sup = u_grid.iter().map(|&u| (ecf(stat, u) - ecf(limit, u)).norm()).fold(0.0, f64::max);
        let cf_bound = z_bound * slack * (1.0 / n as f64 + 1.0 / m as f64).sqrt();
        rows.push(ReportRow::tolerance(format!("{name}_cf_sup"), Some(0.0), sup, sup, cf_bound));
    }
    Ok(rows)
}
