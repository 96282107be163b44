//! Declarative experiment runner.
//!
//! An [`ExperimentConfig`] names one experiment; [`run_experiment`] runs it
//! on a dedicated thread pool and writes `report.json` plus tidy CSV files to
//! `<output.dir>/<name>/`. Everything except the wall time in the report is a
//! function of the config alone.

mod compare;
mod config;
mod report;

pub use compare::{compare_to_limit, ks_bound, ks_two_sample, MIN_COMPARE_SAMPLES};
pub use config::{
    AnticlusterParams, CoupledAnticlusterParams, CouplingParams, DiagnoseParams, ExperimentConfig, ExperimentKind,
    LimitParams, OutputParams, SelfDecomposition, SimulationParams, Statistic, Tolerances, TransformParams,
    VerifyParams,
};
pub use report::{Check, Metadata, Report, ReportRow};

use crate::cluster::ClusterModel;
use crate::diagnostics::{anticluster_stat, coupled_anticluster_stat, coupling_decay, DecaySeries};
use crate::error::{Error, Result};
use crate::limit::{write_transform_csv, LepageSampler, TransformEngine, TransformPoint};
use crate::oracles::{expected_greenwood, expected_kurtosis_limit, expected_ratio_max, expected_ratio_student};
use crate::process::ProcessModel;
use crate::quadrature::Tolerance;
use crate::rng::mix_seed;
use crate::special::mean_stderr;
use crate::stats::{run_batch, write_batch_csv, BatchSpec, ReplicaRecord};
use num_complex::Complex64;
use sha2::{Digest, Sha256};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "SELFNORM_WORKERS";

// Stream salts, so each part of an experiment has its own generators.
const SALT_BATCH: u64 = 1;
const SALT_LEPAGE: u64 = 2;
const SALT_CLUSTERS: u64 = 3;
const SALT_COUPLING: u64 = 4;
const SALT_ANTICLUSTER: u64 = 5;
const SALT_COUPLED: u64 = 6;

/// Worker count: explicit value, then `SELFNORM_WORKERS`, then the config,
/// then the number of available cores.
pub fn resolve_workers(explicit: Option<usize>, config: &ExperimentConfig) -> Result<usize> {
    if let Some(w) = explicit {
        return if w == 0 { Err(Error::Config("workers must be >= 1".into())) } else { Ok(w) };
    }
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        return match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        };
    }
    Ok(config
        .output
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
}

/// SHA-256 of the canonical TOML form, ignoring the worker count.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let mut c = config.clone();
    c.output.workers = None;
    Ok(hex::encode(Sha256::digest(c.to_toml()?.as_bytes())))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    run_experiment_with_workers(config, None)
}

pub fn run_experiment_with_workers(config: &ExperimentConfig, workers: Option<usize>) -> Result<Report> {
    config.validate()?;
    let workers = resolve_workers(workers, config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let dir = config.output.dir.join(&config.name);
    std::fs::create_dir_all(&dir)?;
    let mut run = Run { config, dir, rows: Vec::new(), artifacts: Vec::new() };
    pool.install(|| run.dispatch())?;
    let report = Report {
        metadata: Metadata {
            name: config.name.clone(),
            kind: config.kind.as_str().into(),
            config_hash: config_hash(config)?,
            seed: config.seed,
            workers,
            wall_time_secs: start.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        rows: run.rows,
        artifacts: run.artifacts,
    };
    report.write_json(&run.dir.join("report.json"))?;
    Ok(report)
}

struct Run<'a> {
    config: &'a ExperimentConfig,
    dir: PathBuf,
    rows: Vec<ReportRow>,
    artifacts: Vec<String>,
}

impl Run<'_> {
    fn seed(&self, salt: u64) -> u64 {
        mix_seed(self.config.seed, salt)
    }

    fn create(&mut self, file: &str) -> Result<BufWriter<File>> {
        self.artifacts.push(file.into());
        Ok(BufWriter::new(File::create(self.dir.join(file))?))
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn z_bound(&self) -> f64 {
        self.config.tolerance.z_bound
    }

    fn quad_tol(&self) -> Tolerance {
        Tolerance { abs: self.config.tolerance.quad_abs, rel: self.config.tolerance.quad_rel, ..Tolerance::default() }
    }

    fn engine(&self, cluster: &ClusterModel) -> Result<TransformEngine> {
        Ok(TransformEngine::new(cluster, self.config.transform.mc_clusters, self.seed(SALT_CLUSTERS))?
            .with_tolerance(self.quad_tol()))
    }

    fn dispatch(&mut self) -> Result<()> {
        match self.config.kind {
            ExperimentKind::Simulate => self.simulate(),
            ExperimentKind::Limit => self.limit(),
            ExperimentKind::Transform => self.transform(),
            ExperimentKind::Verify => self.verify(),
            ExperimentKind::Diagnose => self.diagnose(),
        }
    }

    fn batch(&mut self, spec: &BatchSpec) -> Result<Vec<ReplicaRecord>> {
        let records = run_batch(&self.config.model, spec)?;
        let w = self.create("batch.csv")?;
        write_batch_csv(&records, spec, w)?;
        Ok(records)
    }

    fn batch_spec(&self, ps: Vec<f64>, greenwood_ps: Vec<f64>, kurtosis: bool) -> BatchSpec {
        let s = &self.config.simulation;
        BatchSpec { n: s.n, reps: s.reps, seed: self.seed(SALT_BATCH), ps, greenwood_ps, kurtosis, centering: s.centering }
    }

    fn simulate(&mut self) -> Result<()> {
        let s = self.config.simulation.clone();
        let spec = self.batch_spec(s.ps.clone(), s.greenwood_ps.clone(), s.kurtosis);
        let recs = self.batch(&spec)?;
        let info = |name: String, xs: Vec<f64>| {
            let (m, se) = mean_stderr(&xs);
            ReportRow::info(name, m, se)
        };
        self.rows.push(info("ratio_max".into(), recs.iter().map(|r| r.ratio_max()).collect()));
        for (i, p) in s.ps.iter().enumerate() {
            self.rows.push(info(format!("student_p{p}"), recs.iter().map(|r| r.sum / r.moduli[i]).collect()));
        }
        for (i, p) in s.greenwood_ps.iter().enumerate() {
            self.rows.push(info(format!("greenwood_p{p}"), recs.iter().map(|r| r.greenwood[i]).collect()));
        }
        if s.kurtosis {
            self.rows.push(info("kurtosis".into(), recs.iter().filter_map(|r| r.kurtosis).collect()));
        }
        Ok(())
    }

    fn verify(&mut self) -> Result<()> {
        let stats = self.config.verify.statistics.clone();
        let cluster = self.config.cluster_model()?;
        let mut ps = Vec::new();
        let mut gps = Vec::new();
        let mut kurt = false;
        for s in &stats {
            match s {
                Statistic::Student { p } => ps.push(*p),
                Statistic::Greenwood { p } => gps.push(*p),
                Statistic::Kurtosis => kurt = true,
                Statistic::RatioMax => {}
            }
        }
        let spec = self.batch_spec(ps.clone(), gps.clone(), kurt);
        let recs = self.batch(&spec)?;
        for s in &stats {
            let (oracle, samples): (_, Vec<f64>) = match s {
                Statistic::RatioMax => (expected_ratio_max(&cluster)?, recs.iter().map(|r| r.ratio_max()).collect()),
                Statistic::Student { p } => {
                    let i = ps.iter().position(|q| q == p).expect("p registered above");
                    (expected_ratio_student(&cluster, *p)?, recs.iter().map(|r| r.sum / r.moduli[i]).collect())
                }
                Statistic::Greenwood { p } => {
                    let i = gps.iter().position(|q| q == p).expect("p registered above");
                    (expected_greenwood(&cluster, *p)?, recs.iter().map(|r| r.greenwood[i]).collect())
                }
                Statistic::Kurtosis => (expected_kurtosis_limit(&cluster)?, recs.iter().filter_map(|r| r.kurtosis).collect()),
            };
            let (m, se) = mean_stderr(&samples);
            let comb = (se * se + oracle.stderr * oracle.stderr).sqrt();
            self.rows.push(ReportRow::z_score(s.label(), oracle.value, m, comb, self.z_bound()));
        }
        Ok(())
    }

    fn limit(&mut self) -> Result<()> {
        let l = self.config.limit.clone();
        let cluster = self.config.cluster_model()?;
        let sampler = LepageSampler::new(&cluster, l.p, l.n_terms, self.seed(SALT_LEPAGE))?;
        let draws = sampler.sample_many(l.samples, self.seed(SALT_LEPAGE));
        {
            let mut w = csv::Writer::from_writer(self.create("limit_samples.csv")?);
            w.write_record(["xi", "eta", "zeta_p", "truncation_bound"])?;
            for d in &draws {
                w.write_record([d.xi.to_string(), d.eta.to_string(), d.zeta_p.to_string(), d.truncation_bound.to_string()])?;
            }
            w.flush()?;
        }
        let engine = self.engine(&cluster)?;
        let zb = self.z_bound();
        for &lam in &l.lambda {
            let t = engine.laplace_zeta(lam, l.p)?;
            let xs: Vec<f64> = draws.iter().map(|d| (-lam * d.zeta_p).exp()).collect();
            let (m, se) = mean_stderr(&xs);
            let comb = (se * se + t.stderr * t.stderr).sqrt();
            self.rows.push(ReportRow::z_score(format!("laplace_zeta(lambda={lam})"), t.value.re, m, comb, zb));
            let t = engine.norm_ratio_laplace(lam, l.p)?;
            let xs: Vec<f64> = draws.iter().map(|d| (-lam * d.zeta_p / d.eta.powf(l.p)).exp()).collect();
            let (m, se) = mean_stderr(&xs);
            let comb = (se * se + t.stderr * t.stderr).sqrt();
            self.rows.push(ReportRow::z_score(format!("norm_ratio_laplace(lambda={lam})"), t.value.re, m, comb, zb));
        }
        let ratios: Vec<f64> = draws.iter().map(|d| d.xi / d.eta).collect();
        for &u in &l.ratio_u {
            let t = engine.ratio_cf(u)?;
            let re: Vec<f64> = ratios.iter().map(|r| (u * r).cos()).collect();
            let im: Vec<f64> = ratios.iter().map(|r| (u * r).sin()).collect();
            for (part, xs, target) in [("re", re, t.value.re), ("im", im, t.value.im)] {
                let (m, se) = mean_stderr(&xs);
                let comb = (se * se + t.stderr * t.stderr).sqrt();
                self.rows.push(ReportRow::z_score(format!("ratio_cf_{part}(u={u})"), target, m, comb, zb));
            }
        }
        if l.compare_ratio {
            let spec = self.batch_spec(Vec::new(), Vec::new(), false);
            let recs = self.batch(&spec)?;
            let stat: Vec<f64> = recs.iter().map(|r| r.ratio_max()).collect();
            let t = &self.config.tolerance;
            let rows = compare_to_limit("ratio_max", &stat, &ratios, &l.ratio_u, t.z_bound, t.ks_slack, t.ks_bound)?;
            self.rows.extend(rows);
        }
        Ok(())
    }

    fn transform(&mut self) -> Result<()> {
        let tp = self.config.transform.clone();
        let cluster = self.config.cluster_model()?;
        let engine = self.engine(&cluster)?;
        let p = tp.p;
        let eval = |u: f64, x: f64, lam: f64| {
            if lam == 0.0 && x.is_infinite() {
                engine.stable_cf(u)
            } else if lam == 0.0 {
                engine.hybrid_cf(u, x)
            } else {
                engine.joint_cf_laplace(u, x, lam, p)
            }
        };
        let mut analytic = Vec::new();
        for (u, x, lam) in tp.grid.points() {
            let v = eval(u, x, lam)?;
            analytic.push(TransformPoint {
                u,
                x,
                lambda: lam,
                re: v.value.re,
                im: v.value.im,
                stderr: v.stderr,
                method: v.method,
            });
        }
        write_transform_csv(&analytic, self.create("transform_limit.csv")?)?;

        if tp.empirical {
            let spec = self.batch_spec(vec![p], Vec::new(), false);
            let recs = self.batch(&spec)?;
            let a_n = self.config.model.normalizing_an(spec.n)?;
            let samples: Vec<(f64, f64, f64)> =
                recs.iter().map(|r| (r.sum / a_n, r.max_abs / a_n, (r.moduli[0] / a_n).powf(p))).collect();
            let mut emp = Vec::new();
            for a in &analytic {
                let vals: Vec<Complex64> = samples
                    .iter()
                    .map(|&(s, m, g)| {
                        if m <= a.x {
                            Complex64::new(-a.lambda * g, a.u * s).exp()
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<Complex64>() / n;
                let var = vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0).max(1.0);
                let se = (var / n).sqrt();
                let diff = (mean - a.value()).norm();
                let name = format!("transform(u={},x={},lambda={})", a.u, a.x, a.lambda);
                self.rows.push(
                    ReportRow::tolerance(name, Some(a.value().norm()), mean.norm(), diff, self.config.tolerance.transform_tol)
                        .with_stderr(se),
                );
                emp.push(TransformPoint { re: mean.re, im: mean.im, stderr: se, method: crate::estimate::Method::MonteCarlo, ..*a });
            }
            write_transform_csv(&emp, self.create("transform_empirical.csv")?)?;
        } else {
            for a in &analytic {
                let name = format!("transform(u={},x={},lambda={})", a.u, a.x, a.lambda);
                self.rows.push(ReportRow::info(name, a.value().norm(), a.stderr));
            }
        }

        if let Some(sd) = &tp.self_decomposition {
            let a = engine.alpha();
            let phi = eval(sd.u, f64::INFINITY, sd.lambda)?.value;
            let phi_c = eval(sd.c * sd.u, f64::INFINITY, sd.c.powf(p) * sd.lambda)?.value;
            let rhs = phi_c * ((1.0 - sd.c.powf(a)) * phi.ln()).exp();
            let diff = (phi - rhs).norm();
            self.rows.push(ReportRow::tolerance(
                format!("self_decomposition(u={},lambda={},c={})", sd.u, sd.lambda, sd.c),
                Some(0.0),
                diff,
                diff,
                self.config.tolerance.identity_tol,
            ));
        }
        Ok(())
    }

    fn write_series(&mut self, s: &DecaySeries) -> Result<()> {
        s.write_csv(self.create(&format!("{}.csv", s.name))?)?;
        let json = format!("{}.json", s.name);
        std::fs::write(self.path(&json), s.summary_json()? + "\n")?;
        self.artifacts.push(json);
        Ok(())
    }

    fn monotone_row(&mut self, s: &DecaySeries) {
        let rise = s.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        self.rows.push(ReportRow::tolerance(format!("{}_nonincreasing", s.name), None, rise, rise, 0.0));
    }

    fn diagnose(&mut self) -> Result<()> {
        let d = self.config.diagnose.clone();
        let model = &self.config.model;
        if let Some(c) = &d.coupling {
            let s = coupling_decay(model, c.q, c.t_max, d.reps, self.seed(SALT_COUPLING))?;
            self.write_series(&s)?;
            self.rows.push(ReportRow::info("coupling_t0", s.values[0], s.stderr[0]));
            match (model, s.fitted_log_slope) {
                (ProcessModel::Ar1 { phi, .. }, Some(slope)) => {
                    let want = c.q * phi.abs().ln();
                    let tol = self.config.tolerance.decay_rel * want.abs();
                    self.rows.push(ReportRow::tolerance("coupling_log_slope", Some(want), slope, slope - want, tol));
                }
                (_, Some(slope)) => self.rows.push(ReportRow::info("coupling_log_slope", slope, 0.0)),
                (_, None) => self.rows.push(ReportRow::info("coupling_t1", s.values[1], s.stderr[1])),
            }
        }
        if let Some(a) = &d.anticluster {
            let s = anticluster_stat(model, a.n, a.r_n, &a.k_grid, a.x, d.reps, self.seed(SALT_ANTICLUSTER))?;
            self.write_series(&s)?;
            for ((k, v), se) in s.index.iter().zip(&s.values).zip(&s.stderr) {
                self.rows.push(ReportRow::info(format!("anticluster(k={k})"), *v, *se));
            }
            self.monotone_row(&s);
        }
        if let Some(a) = &d.coupled_anticluster {
            let s = coupled_anticluster_stat(model, a.n, a.r_n, &a.k_grid, a.q, d.reps, self.seed(SALT_COUPLED))?;
            self.write_series(&s)?;
            for ((k, v), se) in s.index.iter().zip(&s.values).zip(&s.stderr) {
                self.rows.push(ReportRow::info(format!("coupled_anticluster(k={k})"), *v, *se));
            }
            self.monotone_row(&s);
        }
        Ok(())
    }
}

/// Read a config file, run it, and return the report.
pub fn run_config_file(path: &Path, workers: Option<usize>) -> Result<Report> {
    let cfg = ExperimentConfig::load(path)?;
    run_experiment_with_workers(&cfg, workers)
}
