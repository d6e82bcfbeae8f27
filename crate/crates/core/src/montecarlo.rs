//! Seeded, parallel Monte Carlo experiments.
//!
//! Two experiments are supported:
//!
//! * the Ĉ study: `Ĉ = n · Var[tᵀθ̂/‖θ̂‖]` over `reps` data sets drawn with
//!   `Σ = I` and `E(x) = 0`, for a unit `t` orthogonal to `h`; for affine
//!   equivariant estimators this converges to the constant `C`.
//! * the MSI study: mean `|cos|` between estimated and true direction with a
//!   fresh `Σ = AAᵀ` and mean difference drawn per replicate.
//!
//! Each replicate owns the random stream `rng_stream(master_seed, g)` where
//! `g` is its global index, and results are reduced in index order. Output
//! therefore does not depend on the number of worker threads.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::asymptotics::constant_for;
use crate::error::{Error, Result};
use crate::estimators::{align_sign, est_lda, IterOptions, Method, StandardizedMoments};
use crate::linalg::{inv_sqrt, Matrix, SpdMatrix, Vector};
use crate::model::{sample, DataSet, MixtureParams};

/// Environment variable consulted for the default worker count.
pub const THREADS_ENV: &str = "SKEWLDA_THREADS";

/// Below this many usable replicates a Ĉ value is flagged as low precision.
pub const LOW_PRECISION_REPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SigmaMode {
    Identity,
    RandomAat,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub p: usize,
    pub alpha_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub sigma_mode: SigmaMode,
    pub tol: f64,
    pub max_iter: usize,
}

impl ExperimentConfig {
    /// Parse a JSON config. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::config("<root>", format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::config("<root>", "expected a JSON object"))?;
        const KNOWN: [&str; 10] = [
            "p",
            "alpha_grid",
            "tau_grid",
            "n_grid",
            "reps",
            "master_seed",
            "methods",
            "sigma_mode",
            "tol",
            "max_iter",
        ];
        if let Some(unknown) = obj.keys().find(|k| !KNOWN.contains(&k.as_str())) {
            return Err(Error::config(unknown.as_str(), "unknown field"));
        }
        let get = |name: &str| {
            obj.get(name)
                .ok_or_else(|| Error::config(name, "missing required field"))
        };
        let uint = |name: &str, v: &Value| {
            v.as_u64()
                .ok_or_else(|| Error::config(name, "expected a non-negative integer"))
        };
        let float_list = |name: &str| -> Result<Vec<f64>> {
            get(name)?
                .as_array()
                .ok_or_else(|| Error::config(name, "expected an array of numbers"))?
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| Error::config(name, "expected an array of numbers"))
                })
                .collect()
        };

        let p = uint("p", get("p")?)? as usize;
        let alpha_grid = float_list("alpha_grid")?;
        let tau_grid = float_list("tau_grid")?;
        let n_grid = get("n_grid")?
            .as_array()
            .ok_or_else(|| Error::config("n_grid", "expected an array of integers"))?
            .iter()
            .map(|v| uint("n_grid", v).map(|n| n as usize))
            .collect::<Result<Vec<_>>>()?;
        let reps = uint("reps", get("reps")?)? as usize;
        let master_seed = uint("master_seed", get("master_seed")?)?;
        let methods = match obj.get("methods") {
            None => Method::ALL.to_vec(),
            Some(v) => v
                .as_array()
                .ok_or_else(|| Error::config("methods", "expected an array of method names"))?
                .iter()
                .map(|m| {
                    m.as_str()
                        .ok_or_else(|| Error::config("methods", "expected method names"))?
                        .parse::<Method>()
                        .map_err(|e| Error::config("methods", e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let sigma_mode = match obj.get("sigma_mode").map(|v| v.as_str()) {
            None => SigmaMode::Identity,
            Some(Some("identity")) => SigmaMode::Identity,
            Some(Some("random-aat")) | Some(Some("random-AAt")) => SigmaMode::RandomAat,
            Some(_) => {
                return Err(Error::config(
                    "sigma_mode",
                    "expected \"identity\" or \"random-aat\"",
                ))
            }
        };
        let tol = match obj.get("tol") {
            None => IterOptions::default().tol,
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::config("tol", "expected a number"))?,
        };
        let max_iter = match obj.get("max_iter") {
            None => IterOptions::default().max_iter,
            Some(v) => uint("max_iter", v)? as usize,
        };
        let config = ExperimentConfig {
            p,
            alpha_grid,
            tau_grid,
            n_grid,
            reps,
            master_seed,
            methods,
            sigma_mode,
            tol,
            max_iter,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 2 {
            return Err(Error::config("p", "must be at least 2"));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|&a| !(a > 0.5 && a < 1.0)) {
            return Err(Error::config(
                "alpha_grid",
                "must be non-empty with every value in (0.5, 1)",
            ));
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::config(
                "tau_grid",
                "must be non-empty with every value positive",
            ));
        }
        if self.n_grid.is_empty() || self.n_grid.iter().any(|&n| n <= self.p) {
            return Err(Error::config(
                "n_grid",
                "must be non-empty with every sample size above p",
            ));
        }
        if self.reps < 2 {
            return Err(Error::config("reps", "must be at least 2"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "must name at least one method"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter", "must be positive"));
        }
        Ok(())
    }

    fn iter_options(&self) -> IterOptions {
        IterOptions {
            init: None,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &alpha1 in &self.alpha_grid {
            for &tau in &self.tau_grid {
                for &n in &self.n_grid {
                    cells.push(Cell { alpha1, tau, n });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    alpha1: f64,
    tau: f64,
    n: usize,
}

/// Outcome of one estimator on one simulated data set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub method: Method,
    pub n: usize,
    pub alpha1: f64,
    pub tau: f64,
    pub rep: usize,
    /// `tᵀθ̂/‖θ̂‖` after aligning the sign with the true `θ`; `None` on failure.
    pub t_projection: Option<f64>,
    pub msi: Option<f64>,
    pub converged: bool,
}

impl ReplicateResult {
    pub fn succeeded(&self) -> bool {
        self.converged && self.msi.is_some()
    }
}

/// Deterministic unit vector orthogonal to `h`: Gram-Schmidt of the basis
/// vector least aligned with `h`.
pub fn orth_unit(h: &Vector) -> Result<Vector> {
    let p = h.len();
    if p < 2 {
        return Err(Error::Dimension("orth_unit needs p >= 2".into()));
    }
    let norm = h.norm();
    if !(norm > 0.0) {
        return Err(Error::Domain("orth_unit needs a nonzero vector".into()));
    }
    let hn = h / norm;
    let mut j = 0;
    for i in 1..p {
        if hn[i].abs() < hn[j].abs() {
            j = i;
        }
    }
    let mut t = -&hn * hn[j];
    t[j] += 1.0;
    // one re-orthogonalization pass tightens tᵀh to rounding level
    let t = &t - &hn * hn.dot(&t);
    Ok(t.normalize())
}

/// Maximal similarity index `|uᵀv| / (‖u‖‖v‖)`.
pub fn msi(u: &Vector, v: &Vector) -> Result<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if !(nu > 0.0 && nv > 0.0) {
        return Err(Error::Domain("msi needs nonzero vectors".into()));
    }
    Ok((u.dot(v).abs() / (nu * nv)).min(1.0))
}

/// Independent random stream for replicate `index` under `master_seed`.
pub fn rng_stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Worker count from `SKEWLDA_THREADS`, falling back to the machine's
/// available parallelism.
pub fn default_workers() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn random_unit<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vector {
    loop {
        let v = Vector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        if v.norm() > 1e-8 {
            return v.normalize();
        }
    }
}

fn random_sigma<R: Rng + ?Sized>(p: usize, rng: &mut R) -> SpdMatrix {
    loop {
        let a = Matrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(s) = SpdMatrix::new(&a * a.transpose()) {
            if inv_sqrt(&s).is_ok() {
                return s;
            }
        }
    }
}

fn run_methods<R: Rng + ?Sized>(
    config: &ExperimentConfig,
    cell: Cell,
    rep: usize,
    params: &MixtureParams,
    data: &DataSet,
    t: Option<&Vector>,
    rng: &mut R,
) -> Vec<ReplicateResult> {
    let theta = params.theta();
    let opts = config.iter_options();
    let standardized = StandardizedMoments::from_data(data);
    config
        .methods
        .iter()
        .map(|&method| {
            let est = match method {
                Method::Lda => est_lda(data),
                _ => match &standardized {
                    Err(e) => Err(Error::SingularMatrix(e.to_string())),
                    Ok(sm) => match method {
                        Method::Mom => sm.mom(cell.alpha1),
                        Method::Skewvec => sm.skewvec(),
                        Method::Tobi => sm.tobi(),
                        Method::Jade3 => sm.jade3(&opts, rng),
                        Method::Pp => sm.pp(&opts, rng),
                        Method::Lda => unreachable!(),
                    },
                },
            }
            .and_then(|e| align_sign(e, &theta));
            let mut result = ReplicateResult {
                method,
                n: cell.n,
                alpha1: cell.alpha1,
                tau: cell.tau,
                rep,
                t_projection: None,
                msi: None,
                converged: false,
            };
            if let Ok(est) = est {
                result.converged = est.converged;
                result.msi = msi(&est.unit, &theta).ok();
                result.t_projection = t.map(|t| t.dot(&est.unit));
            }
            result
        })
        .collect()
}

fn run_parallel<F>(total: usize, workers: usize, job: F) -> Result<Vec<Vec<ReplicateResult>>>
where
    F: Fn(usize) -> Vec<ReplicateResult> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(pool.install(|| (0..total).into_par_iter().map(&job).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatRow {
    pub method: Method,
    pub alpha1: f64,
    pub tau: f64,
    pub n: usize,
    pub reps_used: usize,
    pub reps_failed: usize,
    pub c_hat: f64,
    pub c_theory: Option<f64>,
    pub low_precision: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MsiRow {
    pub method: Method,
    pub alpha1: f64,
    pub tau: f64,
    pub n: usize,
    pub p: usize,
    pub reps_used: usize,
    pub reps_failed: usize,
    pub mean_msi: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput<Row> {
    pub rows: Vec<Row>,
    pub replicates: Vec<ReplicateResult>,
}

fn collect_cells(
    config: &ExperimentConfig,
    cells: &[Cell],
    per_item: Vec<Vec<ReplicateResult>>,
) -> Vec<(Cell, Method, Vec<ReplicateResult>)> {
    let mut grouped = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        for &method in &config.methods {
            let results: Vec<ReplicateResult> = per_item[c * config.reps..(c + 1) * config.reps]
                .iter()
                .flat_map(|item| item.iter().filter(|r| r.method == method).cloned())
                .collect();
            grouped.push((*cell, method, results));
        }
    }
    grouped
}

fn sort_key_cmp(a: (Method, f64, f64, usize), b: (Method, f64, f64, usize)) -> std::cmp::Ordering {
    a.0.tag()
        .cmp(b.0.tag())
        .then(a.1.total_cmp(&b.1))
        .then(a.2.total_cmp(&b.2))
        .then(a.3.cmp(&b.3))
}

/// The Ĉ study under `Σ = I`, `E(x) = 0`, `h = √τ e₁`.
pub fn chat_experiment(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentOutput<ChatRow>> {
    config.validate()?;
    if config.sigma_mode != SigmaMode::Identity {
        return Err(Error::config(
            "sigma_mode",
            "the C-hat experiment runs with sigma_mode \"identity\"",
        ));
    }
    let p = config.p;
    let cells = config.cells();
    let per_item = run_parallel(cells.len() * config.reps, workers, |g| {
        let cell = cells[g / config.reps];
        let rep = g % config.reps;
        let mut rng = rng_stream(config.master_seed, g as u64);
        let mut h = Vector::zeros(p);
        h[0] = cell.tau.sqrt();
        let params = MixtureParams::centered(cell.alpha1, h.clone(), SpdMatrix::identity(p))
            .expect("validated config");
        let t = orth_unit(&h).expect("p >= 2");
        let data = sample(&params, cell.n, &mut rng);
        run_methods(config, cell, rep, &params, &data, Some(&t), &mut rng)
    })?;

    let mut rows = Vec::new();
    for (cell, method, results) in collect_cells(config, &cells, per_item.clone()) {
        let values: Vec<f64> = results
            .iter()
            .filter(|r| r.succeeded())
            .filter_map(|r| r.t_projection)
            .collect();
        let used = values.len();
        let c_hat = if used >= 2 {
            let mean = values.iter().sum::<f64>() / used as f64;
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            cell.n as f64 * ss / (used - 1) as f64
        } else {
            f64::NAN
        };
        rows.push(ChatRow {
            method,
            alpha1: cell.alpha1,
            tau: cell.tau,
            n: cell.n,
            reps_used: used,
            reps_failed: results.len() - used,
            c_hat,
            c_theory: constant_for(method, cell.alpha1, cell.tau, p).unwrap_or(None),
            low_precision: used < LOW_PRECISION_REPS,
        });
    }
    rows.sort_by(|a, b| {
        sort_key_cmp(
            (a.method, a.alpha1, a.tau, a.n),
            (b.method, b.alpha1, b.tau, b.n),
        )
    });
    Ok(ExperimentOutput {
        rows,
        replicates: per_item.into_iter().flatten().collect(),
    })
}

/// The MSI study: per replicate a fresh `Σ` (per `sigma_mode`) and a mean
/// difference with uniformly random direction scaled to the cell's `τ`.
pub fn msi_experiment(
    config: &ExperimentConfig,
    workers: usize,
) -> Result<ExperimentOutput<MsiRow>> {
    config.validate()?;
    let p = config.p;
    let cells = config.cells();
    let per_item = run_parallel(cells.len() * config.reps, workers, |g| {
        let cell = cells[g / config.reps];
        let rep = g % config.reps;
        let mut rng = rng_stream(config.master_seed, g as u64);
        let sigma = match config.sigma_mode {
            SigmaMode::Identity => SpdMatrix::identity(p),
            SigmaMode::RandomAat => random_sigma(p, &mut rng),
        };
        let direction = random_unit(p, &mut rng);
        let params = MixtureParams::with_tau(cell.alpha1, &direction, sigma, cell.tau)
            .expect("validated config");
        let data = sample(&params, cell.n, &mut rng);
        run_methods(config, cell, rep, &params, &data, None, &mut rng)
    })?;

    let mut rows = Vec::new();
    for (cell, method, results) in collect_cells(config, &cells, per_item.clone()) {
        let values: Vec<f64> = results
            .iter()
            .filter(|r| r.succeeded())
            .filter_map(|r| r.msi)
            .collect();
        let used = values.len();
        let mean_msi = if used > 0 {
            values.iter().sum::<f64>() / used as f64
        } else {
            f64::NAN
        };
        rows.push(MsiRow {
            method,
            alpha1: cell.alpha1,
            tau: cell.tau,
            n: cell.n,
            p,
            reps_used: used,
            reps_failed: results.len() - used,
            mean_msi,
        });
    }
    rows.sort_by(|a, b| {
        sort_key_cmp(
            (a.method, a.alpha1, a.tau, a.n),
            (b.method, b.alpha1, b.tau, b.n),
        )
    });
    Ok(ExperimentOutput {
        rows,
        replicates: per_item.into_iter().flatten().collect(),
    })
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn write_chat_csv<W: Write>(rows: &[ChatRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "alpha1",
        "tau",
        "n",
        "reps_used",
        "reps_failed",
        "c_hat",
        "c_theory",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.method.tag().to_string(),
            num(r.alpha1),
            num(r.tau),
            r.n.to_string(),
            r.reps_used.to_string(),
            r.reps_failed.to_string(),
            num(r.c_hat),
            r.c_theory.map(num).unwrap_or_default(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_msi_csv<W: Write>(rows: &[MsiRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method",
        "alpha1",
        "tau",
        "n",
        "p",
        "reps_used",
        "reps_failed",
        "mean_msi",
    ])
    .map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.method.tag().to_string(),
            num(r.alpha1),
            num(r.tau),
            r.n.to_string(),
            r.p.to_string(),
            r.reps_used.to_string(),
            r.reps_failed.to_string(),
            num(r.mean_msi),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
