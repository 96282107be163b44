use crate::cluster::ClusterModel;
use crate::error::{Error, Result};
use crate::limit::{TransformGrid, DEFAULT_LEPAGE_TERMS, DEFAULT_MC_CLUSTERS};
use crate::process::ProcessModel;
use crate::stats::Centering;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Limit,
    Transform,
    Verify,
    Diagnose,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Limit => "limit",
            ExperimentKind::Transform => "transform",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Diagnose => "diagnose",
        }
    }
}

/// One experiment, read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    pub model: ProcessModel,
    /// Cluster model for the limit side; derived from `model` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterModel>,
    #[serde(default)]
    pub simulation: SimulationParams,
    #[serde(default)]
    pub limit: LimitParams,
    #[serde(default)]
    pub transform: TransformParams,
    #[serde(default)]
    pub verify: VerifyParams,
    #[serde(default)]
    pub diagnose: DiagnoseParams,
    #[serde(default)]
    pub tolerance: Tolerances,
    #[serde(default)]
    pub output: OutputParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationParams {
    pub n: usize,
    pub reps: usize,
    /// Exponents of the moduli `gamma_{n,p}` to record.
    pub ps: Vec<f64>,
    pub greenwood_ps: Vec<f64>,
    pub kurtosis: bool,
    pub centering: Centering,
}

impl Default for SimulationParams {
    fn default() -> Self {
        Self { n: 100_000, reps: 1_000, ps: vec![2.0], greenwood_ps: Vec::new(), kurtosis: false, centering: Centering::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitParams {
    pub p: f64,
    pub n_terms: usize,
    pub samples: usize,
    /// Points at which the empirical Laplace transform of `zeta^p` is checked.
    pub lambda: Vec<f64>,
    /// Points at which the empirical CF of `xi / eta` is checked against `ratio_cf`.
    pub ratio_u: Vec<f64>,
    /// Also simulate `S_n / M_n` and compare it with `xi / eta`.
    pub compare_ratio: bool,
}

impl Default for LimitParams {
    fn default() -> Self {
        Self {
            p: 2.0,
            n_terms: DEFAULT_LEPAGE_TERMS,
            samples: 10_000,
            lambda: vec![0.5, 1.0, 2.0],
            ratio_u: vec![0.5, 1.0],
            compare_ratio: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfDecomposition {
    pub u: f64,
    pub lambda: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformParams {
    pub grid: TransformGrid,
    pub p: f64,
    pub mc_clusters: usize,
    /// Compare against the empirical transform of simulated paths.
    pub empirical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_decomposition: Option<SelfDecomposition>,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            grid: TransformGrid { u: vec![0.5, 1.0, 2.0], x: Vec::new(), lambda: Vec::new() },
            p: 2.0,
            mc_clusters: DEFAULT_MC_CLUSTERS,
            empirical: false,
            self_decomposition: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stat", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    /// `S_n / M_n`.
    RatioMax,
    /// `S_n / gamma_{n,p}`.
    Student { p: f64 },
    Greenwood { p: f64 },
    Kurtosis,
}

impl Statistic {
    pub fn label(&self) -> String {
        match self {
            Statistic::RatioMax => "ratio_max".into(),
            Statistic::Student { p } => format!("student_p{p}"),
            Statistic::Greenwood { p } => format!("greenwood_p{p}"),
            Statistic::Kurtosis => "kurtosis".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyParams {
    pub statistics: Vec<Statistic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingParams {
    pub q: f64,
    pub t_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnticlusterParams {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_n: Option<usize>,
    pub k_grid: Vec<usize>,
    #[serde(default = "one")]
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupledAnticlusterParams {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_n: Option<usize>,
    pub k_grid: Vec<usize>,
    pub q: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseParams {
    pub reps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anticluster: Option<AnticlusterParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coupled_anticluster: Option<CoupledAnticlusterParams>,
}

impl Default for DiagnoseParams {
    fn default() -> Self {
        Self { reps: 1_000, coupling: None, anticluster: None, coupled_anticluster: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Pass bound on `|z|` for Monte Carlo rows.
    pub z_bound: f64,
    pub quad_abs: f64,
    pub quad_rel: f64,
    /// Pass bound on `|empirical - limit|` for transform rows.
    pub transform_tol: f64,
    /// Pass bound for the self-decomposition identity.
    pub identity_tol: f64,
    /// Slack factor on the 1% two-sample KS critical value.
    pub ks_slack: f64,
    /// Fixed KS bound; overrides the computed one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ks_bound: Option<f64>,
    /// Relative tolerance on fitted decay slopes.
    pub decay_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            z_bound: 3.0,
            quad_abs: 1e-8,
            quad_rel: 1e-10,
            transform_tol: 0.05,
            identity_tol: 1e-6,
            ks_slack: 1.5,
            ks_bound: None,
            decay_rel: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    pub dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for OutputParams {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), workers: None }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn cluster_model(&self) -> Result<ClusterModel> {
        match &self.cluster {
            Some(c) => Ok(c.clone()),
            None => ClusterModel::for_process(&self.model),
        }
    }

    /// Check every parameter the experiment kind reads and report all
    /// violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let mut bad = |cond: bool, msg: String| {
            if cond {
                errs.push(msg);
            }
        };
        bad(
            self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)),
            format!("name: {:?} must be non-empty and use only [A-Za-z0-9._-]", self.name),
        );
        bad(self.seed > i64::MAX as u64, format!("seed: {} exceeds {}", self.seed, i64::MAX));
        if let Err(e) = self.model.validate() {
            bad(true, format!("model: {e}"));
        }
        let alpha = self.model.alpha();
        if let Some(c) = &self.cluster {
            if let Err(e) = c.validate() {
                bad(true, format!("cluster: {e}"));
            }
        }
        if let Some(w) = self.output.workers {
            bad(w == 0, "output.workers: must be >= 1".into());
        }
        let t = &self.tolerance;
        bad(!(t.z_bound > 0.0), format!("tolerance.z_bound: must be positive, got {}", t.z_bound));
        bad(!(t.quad_abs > 0.0), format!("tolerance.quad_abs: must be positive, got {}", t.quad_abs));
        bad(!(t.quad_rel >= 0.0), format!("tolerance.quad_rel: must be nonnegative, got {}", t.quad_rel));
        bad(!(t.transform_tol > 0.0), format!("tolerance.transform_tol: must be positive, got {}", t.transform_tol));
        bad(!(t.identity_tol > 0.0), format!("tolerance.identity_tol: must be positive, got {}", t.identity_tol));
        bad(!(t.ks_slack >= 1.0), format!("tolerance.ks_slack: must be >= 1, got {}", t.ks_slack));
        bad(!(t.decay_rel > 0.0), format!("tolerance.decay_rel: must be positive, got {}", t.decay_rel));

        let sim = &self.simulation;
        let uses_sim = match self.kind {
            ExperimentKind::Simulate | ExperimentKind::Verify => true,
            ExperimentKind::Limit => self.limit.compare_ratio,
            ExperimentKind::Transform => self.transform.empirical,
            ExperimentKind::Diagnose => false,
        };
        if uses_sim {
            bad(sim.n == 0, "simulation.n: must be >= 1".into());
            bad(sim.reps == 0, "simulation.reps: must be >= 1".into());
            for p in &sim.ps {
                bad(!(*p > 0.0), format!("simulation.ps: {p} must be positive"));
            }
            for p in &sim.greenwood_ps {
                bad(!(alpha < 1.0 && alpha < *p), format!("simulation.greenwood_ps: {p} needs alpha < min(p, 1)"));
            }
        }

        match self.kind {
            ExperimentKind::Simulate => {}
            ExperimentKind::Limit => {
                let l = &self.limit;
                bad(!(alpha < 1.0), format!("model.alpha: LePage sampling needs alpha < 1, got {alpha}"));
                bad(!(l.p > alpha), format!("limit.p: {} must exceed alpha = {alpha}", l.p));
                bad(l.n_terms < 10, format!("limit.n_terms: {} must be >= 10", l.n_terms));
                bad(l.samples < 100, format!("limit.samples: {} must be >= 100", l.samples));
                if l.compare_ratio {
                    bad(l.samples < 1000, format!("limit.samples: {} must be >= 1000 to compare", l.samples));
                    bad(sim.reps < 1000, format!("simulation.reps: {} must be >= 1000 to compare", sim.reps));
                }
                for v in &l.lambda {
                    bad(!(*v >= 0.0), format!("limit.lambda: {v} must be nonnegative"));
                }
            }
            ExperimentKind::Transform => {
                let tr = &self.transform;
                bad((alpha - 1.0).abs() < 1e-12, "model.alpha: limit transforms need alpha != 1".into());
                bad(!(tr.p > alpha), format!("transform.p: {} must exceed alpha = {alpha}", tr.p));
                bad(tr.mc_clusters == 0, "transform.mc_clusters: must be >= 1".into());
                for x in &tr.grid.x {
                    bad(!(*x > 0.0), format!("transform.grid.x: {x} must be positive"));
                }
                for v in &tr.grid.lambda {
                    bad(!(*v >= 0.0), format!("transform.grid.lambda: {v} must be nonnegative"));
                }
                for u in &tr.grid.u {
                    bad(!u.is_finite(), format!("transform.grid.u: {u} must be finite"));
                }
                if let Some(sd) = &tr.self_decomposition {
                    bad(!(sd.c > 0.0 && sd.c < 1.0), format!("transform.self_decomposition.c: {} must lie in (0, 1)", sd.c));
                    bad(!(sd.lambda >= 0.0), "transform.self_decomposition.lambda: must be nonnegative".into());
                }
            }
            ExperimentKind::Verify => {
                let v = &self.verify;
                bad(v.statistics.is_empty(), "verify.statistics: list at least one statistic".into());
                for s in &v.statistics {
                    match s {
                        Statistic::RatioMax => bad((alpha - 1.0).abs() < 1e-12, "verify.ratio_max: alpha = 1 is excluded".into()),
                        Statistic::Student { p } => bad(!(*p > alpha), format!("verify.student: p = {p} must exceed alpha")),
                        Statistic::Greenwood { p } => {
                            bad(!(alpha < 1.0 && alpha < *p), format!("verify.greenwood: p = {p} needs alpha < min(p, 1)"))
                        }
                        Statistic::Kurtosis => bad(!(alpha < 2.0), "verify.kurtosis: needs alpha < 2".into()),
                    }
                }
            }
            ExperimentKind::Diagnose => {
                let d = &self.diagnose;
                bad(d.reps == 0, "diagnose.reps: must be >= 1".into());
                bad(
                    d.coupling.is_none() && d.anticluster.is_none() && d.coupled_anticluster.is_none(),
                    "diagnose: configure at least one of coupling, anticluster, coupled_anticluster".into(),
                );
                let qmax = alpha.min(1.0);
                if let Some(c) = &d.coupling {
                    bad(!(c.q > 0.0 && c.q < qmax), format!("diagnose.coupling.q: {} must lie in (0, {qmax})", c.q));
                    bad(c.t_max < 2, "diagnose.coupling.t_max: must be >= 2".into());
                }
                if let Some(a) = &d.anticluster {
                    check_cutoffs(&mut bad, "diagnose.anticluster", a.n, a.r_n, &a.k_grid);
                    bad(!(a.x > 0.0), "diagnose.anticluster.x: must be positive".into());
                }
                if let Some(a) = &d.coupled_anticluster {
                    check_cutoffs(&mut bad, "diagnose.coupled_anticluster", a.n, a.r_n, &a.k_grid);
                    bad(!(a.q > 0.0 && a.q < qmax), format!("diagnose.coupled_anticluster.q: {} must lie in (0, {qmax})", a.q));
                }
                if d.coupling.is_some() || d.coupled_anticluster.is_some() {
                    bad(matches!(self.model, ProcessModel::Iid { .. }), "model: coupling diagnostics need ar1 or sre".into());
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errs))
        }
    }
}

fn check_cutoffs(bad: &mut impl FnMut(bool, String), what: &str, n: usize, r_n: Option<usize>, k_grid: &[usize]) {
    let r = r_n.unwrap_or_else(|| crate::diagnostics::default_rn(n));
    bad(n < 2, format!("{what}.n: must be >= 2"));
    bad(r == 0 || r >= n, format!("{what}.r_n: {r} must lie in [1, n)"));
    bad(k_grid.is_empty(), format!("{what}.k_grid: must not be empty"));
    for k in k_grid {
        bad(*k == 0 || *k > r + 1, format!("{what}.k_grid: {k} outside [1, r_n + 1]"));
    }
}
