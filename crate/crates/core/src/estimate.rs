use serde::{Deserialize, Serialize};
use std::fmt;

/// How a number was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    /// Exact expectation over a finite atom set (analytic cluster models).
    ExactAtoms,
    MonteCarlo,
    Quadrature,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::ClosedForm => "closed_form",
            Method::ExactAtoms => "exact_atoms",
            Method::MonteCarlo => "monte_carlo",
            Method::Quadrature => "quadrature",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
    pub reps: usize,
    pub method: Method,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { estimate: value, stderr: 0.0, reps: 0, method: Method::ClosedForm }
    }

    pub fn mc(estimate: f64, stderr: f64, reps: usize) -> Self {
        Self { estimate, stderr, reps, method: Method::MonteCarlo }
    }

    /// `|self - other|` in units of the combined standard error. Infinite
    /// when both are exact and differ.
    pub fn z_against(&self, other: f64) -> f64 {
        let d = (self.estimate - other).abs();
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}
