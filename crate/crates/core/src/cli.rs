//! Command-line front end.
//!
//! Errors are reported on stderr as a single line `error[<kind>]: <message>`.
//! Exit codes: 0 success, 1 runtime or numeric failure, 2 usage or config error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::asymptotics::{avar_ae, avar_mom, c0_constant, c_lda, c_skewvec, WEIGHT_MARGIN};
use crate::error::{Error, Result};
use crate::estimators::{estimate, IterOptions, Method};
use crate::linalg::{Matrix, SpdMatrix, Vector};
use crate::model::{DataSet, MixtureParams};
use crate::montecarlo::{
    chat_experiment, default_workers, msi_experiment, write_chat_csv, write_msi_csv,
    ExperimentConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "skewlda",
    version,
    about = "Unsupervised discriminant directions from third moments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a discriminant direction from a CSV file.
    Estimate(EstimateArgs),
    /// Print the limiting efficiency constants (and covariances when Σ and h are given).
    Constants(ConstantsArgs),
    /// Run the C-hat Monte Carlo study.
    SimulateChat(SimulateArgs),
    /// Run the MSI Monte Carlo study.
    SimulateMsi(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Headered CSV; feature columns plus an optional `label` column (-1/1).
    #[arg(long)]
    pub input: PathBuf,
    /// One of mom, skewvec, tobi, jade3, lda, pp.
    #[arg(long)]
    pub method: String,
    /// Mixture weight of the larger component (required by mom).
    #[arg(long)]
    pub alpha1: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iter: usize,
    /// Seed for random restarts of the iterative methods.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstantsArgs {
    #[arg(long)]
    pub alpha1: f64,
    /// Squared Mahalanobis separation; implied by --sigma and --h when given.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    /// Within-group covariance, rows separated by ';', entries by ','.
    #[arg(long, requires = "h")]
    pub sigma: Option<String>,
    /// Mean difference, entries separated by ','.
    #[arg(long, requires = "sigma")]
    pub h: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to $SKEWLDA_THREADS or all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Parse arguments, run, report errors. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => run_estimate(&args),
        Command::Constants(args) => {
            let stdout = io::stdout();
            run_constants(&args, &mut stdout.lock())
        }
        Command::SimulateChat(args) => run_simulation(&args, false),
        Command::SimulateMsi(args) => run_simulation(&args, true),
    }
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Usage(format!(
            "input file {} does not exist",
            path.display()
        )));
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            return Err(Error::Usage(format!(
                "output directory {} does not exist",
                dir.display()
            )));
        }
    }
    Ok(())
}

/// Read a headered numeric CSV. A column named `label` becomes the labels.
pub fn read_dataset<R: Read>(reader: R) -> Result<DataSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let label_col = headers.iter().position(|h| h == "label");
    let p = headers.len() - usize::from(label_col.is_some());
    if p == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no feature columns".into(),
        });
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        for (j, field) in record.iter().enumerate() {
            if Some(j) == label_col {
                let label: i8 = match field.parse::<f64>() {
                    Ok(1.0) => 1,
                    Ok(-1.0) => -1,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("label must be -1 or 1, got {field:?}"),
                        })
                    }
                };
                labels.push(label);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {:?}: not a number: {field:?}", &headers[j]),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("column {:?}: non-finite value", &headers[j]),
                    });
                }
                values.push(v);
            }
        }
    }
    let n = values.len() / p;
    let x = Matrix::from_row_slice(n, p, &values);
    match label_col {
        Some(_) => DataSet::with_labels(x, labels),
        None => Ok(DataSet::new(x)),
    }
}

/// Write a data set as CSV with columns `x1..xp` and, if present, `label`.
pub fn write_dataset<W: Write>(data: &DataSet, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = data.p();
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    if data.labels().is_some() {
        header.push("label".into());
    }
    let io_err = |e: csv::Error| Error::Io(io::Error::other(e.to_string()));
    w.write_record(&header).map_err(io_err)?;
    for (i, row) in data.observations().row_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        if let Some(labels) = data.labels() {
            rec.push(labels[i].to_string());
        }
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_estimate(args: &EstimateArgs) -> Result<()> {
    let method: Method = args.method.parse()?;
    check_input(&args.input)?;
    if let Some(out) = &args.output {
        check_output(out)?;
    }
    if method == Method::Mom && args.alpha1.is_none() {
        return Err(Error::Usage("method mom requires --alpha1".into()));
    }
    if !(args.tol > 0.0) || args.max_iter == 0 {
        return Err(Error::Usage("--tol and --max-iter must be positive".into()));
    }
    let data = read_dataset(File::open(&args.input)?)?;
    if method == Method::Lda && data.labels().is_none() {
        return Err(Error::SupervisionRequired(
            "method lda needs a `label` column with values -1/1".into(),
        ));
    }
    let opts = IterOptions {
        init: None,
        tol: args.tol,
        max_iter: args.max_iter,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let est = estimate(method, &data, args.alpha1, &opts, &mut rng)?;

    let x = data.observations();
    let mean = x.row_mean();
    let scores: Vec<f64> = x
        .row_iter()
        .map(|row| (row - &mean).dot(&est.unit.transpose()))
        .collect();
    let report = json!({
        "method": method.tag(),
        "n": data.n(),
        "p": data.p(),
        "unit": est.unit.as_slice(),
        "raw_norm": est.raw_norm(),
        "converged": est.converged,
        "iterations": est.iterations,
        "warnings": est.warnings,
        "scores": scores,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(io::Error::other(e)))?;
    match &args.output {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_numbers(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split([',', ' '])
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("{what}: not a number: {s:?}")))
        })
        .collect()
}

fn parse_sigma(text: &str) -> Result<Matrix> {
    let rows = text
        .split(';')
        .map(|r| parse_numbers(r, "--sigma"))
        .collect::<Result<Vec<_>>>()?;
    let p = rows.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::Usage("--sigma must be a square matrix".into()));
    }
    Ok(Matrix::from_fn(p, p, |i, j| rows[i][j]))
}

fn write_matrix<W: Write>(out: &mut W, name: &str, m: &Matrix) -> io::Result<()> {
    writeln!(out, "{name}")?;
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>14.6}")).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    Ok(())
}

pub fn run_constants<W: Write>(args: &ConstantsArgs, out: &mut W) -> Result<()> {
    let alpha1 = args.alpha1;
    if !(alpha1 > 0.5 && alpha1 < 1.0) {
        return Err(Error::Usage(format!(
            "alpha1 = {alpha1} must lie in (0.5, 1); alpha1 = 0.5 is the excluded symmetric case"
        )));
    }
    if !(alpha1 > 0.5 + WEIGHT_MARGIN && alpha1 < 1.0 - WEIGHT_MARGIN) {
        return Err(Error::Divergence(alpha1));
    }

    let params = match (&args.sigma, &args.h) {
        (Some(s), Some(h)) => {
            let sigma = SpdMatrix::new(parse_sigma(s)?)
                .map_err(|e| Error::Usage(format!("--sigma: {e}")))?;
            let h = Vector::from_vec(parse_numbers(h, "--h")?);
            if h.len() != sigma.dim() {
                return Err(Error::Usage(format!(
                    "--h has {} entries but --sigma is {}x{}",
                    h.len(),
                    sigma.dim(),
                    sigma.dim()
                )));
            }
            Some(
                MixtureParams::centered(alpha1, h, sigma)
                    .map_err(|e| Error::Usage(e.to_string()))?,
            )
        }
        _ => None,
    };

    let tau = match (&params, args.tau) {
        (Some(pm), given) => {
            let tau = pm.derived().tau;
            if let Some(t) = given {
                if (t - tau).abs() > 1e-8 * tau.max(1.0) {
                    return Err(Error::Usage(format!(
                        "--tau {t} disagrees with the value {tau} implied by --sigma and --h"
                    )));
                }
            }
            tau
        }
        (None, Some(t)) => t,
        (None, None) => return Err(Error::Usage("--tau is required without --sigma/--h".into())),
    };
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Usage(format!("tau must be positive, got {tau}")));
    }
    let p = match (&params, args.p) {
        (Some(pm), Some(p)) if p != pm.dim() => {
            return Err(Error::Usage(format!(
                "--p {p} disagrees with the dimension {} of --sigma",
                pm.dim()
            )))
        }
        (Some(pm), _) => pm.dim(),
        (None, Some(p)) => p,
        (None, None) => return Err(Error::Usage("--p is required without --sigma/--h".into())),
    };
    if p < 2 {
        return Err(Error::Usage(format!("p must be at least 2, got {p}")));
    }

    let c0 = c0_constant(alpha1, tau)?;
    writeln!(out, "alpha1     {alpha1}")?;
    writeln!(out, "tau        {tau}")?;
    writeln!(out, "p          {p}")?;
    writeln!(out, "C_LDA      {:.6}", c_lda(alpha1, tau)?)?;
    writeln!(out, "C0         {c0:.6}   (TOBI, JADE3, PP)")?;
    writeln!(out, "C_SKEWVEC  {:.6}", c_skewvec(alpha1, tau, p)?)?;
    if let Some(pm) = &params {
        let ae = avar_ae(c0, pm, Method::Tobi)?;
        write_matrix(out, "avar TOBI/JADE3/PP", &ae.covariance)?;
        let mom = avar_mom(pm);
        write_matrix(out, "avar MOM", &mom.covariance)?;
    }
    Ok(())
}

pub fn run_simulation(args: &SimulateArgs, msi: bool) -> Result<()> {
    check_input(&args.config)?;
    check_output(&args.out)?;
    let text = std::fs::read_to_string(&args.config)?;
    let config = ExperimentConfig::from_json(&text)?;
    let workers = match args.threads {
        Some(0) => return Err(Error::Usage("--threads must be positive".into())),
        Some(t) => t,
        None => default_workers(),
    };
    if msi {
        let result = msi_experiment(&config, workers)?;
        let file = BufWriter::new(File::create(&args.out)?);
        write_msi_csv(&result.rows, file)?;
    } else {
        let result = chat_experiment(&config, workers)?;
        for row in result.rows.iter().filter(|r| r.low_precision) {
            eprintln!(
                "warning: {} at alpha1={} tau={} n={} used only {} replicates (low precision)",
                row.method, row.alpha1, row.tau, row.n, row.reps_used
            );
        }
        let file = BufWriter::new(File::create(&args.out)?);
        write_chat_csv(&result.rows, file)?;
    }
    Ok(())
}
