//! The `mcalogit` command line: `ca`, `mca`, `fit-multilogit`, `simulate`
//! and `reproduce-table2`.
//!
//! Options may also come from a `key=value` file given with `--config`
//! (keys are the long flag names); flags win over the file, the file wins
//! over built-in defaults. Exit codes: 0 success, 2 usage or input error,
//! 3 internal error.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::biplot::render_svg;
use crate::corresp::{ca_fit, ca_reconstruct, pearson_chi2, read_contingency};
use crate::error::Error;
use crate::export::{fmt_num, write_coordinates_csv, BiplotData, CoordinatePoint, PointKind};
use crate::mca::{mca, McaVariant};
use crate::multilogit::{
    fit_cross_validated, fit_majorization, latent_coordinates, predict_probabilities, CvOptions, Init, MmOptions,
};
use crate::simulate::{generate_dataset, run_grid, table2_row, GridCell, GridOptions, SimConfig, TABLE2};
use crate::tables::{encode_indicator, read_table, CategoricalTable, TableSchema};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "MCALOGIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mcalogit", version, about = "CA, MCA and multilogit-bilinear models for categorical data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correspondence analysis of a contingency table
    Ca(CaArgs),
    /// Multiple correspondence analysis of a categorical table
    Mca(McaArgs),
    /// Fit the multilogit-bilinear model by majorization
    FitMultilogit(FitArgs),
    /// Draw one dataset from the latent distance model
    Simulate(SimulateArgs),
    /// Rerun rows of the model vs MCA RMSE comparison
    ReproduceTable2(Table2Args),
}

#[derive(Debug, Args)]
pub struct Common {
    /// key=value file with defaults for any long option
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CaArgs {
    /// Contingency CSV: header of column labels, optional row-label column
    pub input: PathBuf,
    #[arg(long)]
    pub rank: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct McaArgs {
    /// Categorical CSV with a header row
    pub input: PathBuf,
    #[arg(long)]
    pub rank: Option<usize>,
    /// indicator or burt
    #[arg(long)]
    pub variant: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Categorical CSV with a header row
    pub input: PathBuf,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Trace-norm penalty, or `cv` to choose it by cross-validation
    #[arg(long)]
    pub lambda: Option<String>,
    /// mca or cold
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Nesterov extrapolation with restarts
    #[arg(long)]
    pub accelerate: Option<bool>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub categories: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub strength: Option<f64>,
    #[arg(long)]
    pub base_variance: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Table2Args {
    /// `all` or a comma-separated list of row numbers (1-24)
    #[arg(long)]
    pub cells: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also fit the cross-validated penalized model on rows 7, 12 and 19
    #[arg(long)]
    pub lambda_cv: bool,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub base_variance: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(Error),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {}", m),
            CliError::Input(e) => write!(f, "input error: {}", e),
            CliError::Internal(m) => write!(f, "internal error: {}", m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite | Error::NotPositiveDefinite(_) | Error::ShapeMismatch { .. } | Error::LayoutMismatch => {
                CliError::Internal(e.to_string())
            }
            other => CliError::Input(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Values read from a `--config` file.
#[derive(Debug, Default)]
pub struct ConfigFile(BTreeMap<String, String>);

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", lineno + 1)))?;
            map.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {}", p.display(), e)))?;
                Self::parse(&text)
            }
        }
    }

    /// Flag value, else the file's value, else `default`.
    fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.0.get(key) {
            Some(s) => s
                .parse()
                .map_err(|e| CliError::Usage(format!("config value for `{}`: {}", key, e))),
            None => Ok(default),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub versions: BTreeMap<String, String>,
    pub input_digest: Option<String>,
    pub outputs: Vec<String>,
    pub converged: Option<bool>,
}

impl RunManifest {
    fn new(command: &str, config: Value, seed: Option<u64>, input_digest: Option<String>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("mcalogit".into(), env!("CARGO_PKG_VERSION").into());
        Self {
            command: command.into(),
            config,
            seed,
            versions,
            input_digest,
            outputs: Vec::new(),
            converged: None,
        }
    }
}

struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(path: Option<PathBuf>, default: &str) -> CliResult<Self> {
        let dir = path.unwrap_or_else(|| PathBuf::from(default));
        fs::create_dir_all(&dir).map_err(|e| CliError::Usage(format!("cannot create {}: {}", dir.display(), e)))?;
        Ok(Self { dir, written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Internal(format!("writing {}: {}", path.display(), e)))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        self.write(name, text + "\n")
    }

    fn finish(mut self, mut manifest: RunManifest) -> CliResult<PathBuf> {
        self.written.push("manifest.json".into());
        manifest.outputs = self.written.clone();
        self.write_json("manifest.json", &manifest)?;
        Ok(self.dir)
    }
}

fn read_input(path: &Path) -> CliResult<(Vec<u8>, String)> {
    let bytes = fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {}", path.display(), e)))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    Ok((bytes, digest))
}

fn read_categorical(path: &Path) -> CliResult<(CategoricalTable, String)> {
    let (bytes, digest) = read_input(path)?;
    Ok((read_table(bytes.as_slice(), &TableSchema::default())?, digest))
}

fn matrix_csv(header: &[String], rows: &[String], m: &DMatrix<f64>) -> CliResult<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["id".to_string()];
    head.extend(header.iter().cloned());
    wtr.write_record(&head).map_err(|e| CliError::Internal(e.to_string()))?;
    for (i, id) in rows.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(m.row(i).iter().map(|&x| fmt_num(x)));
        wtr.write_record(&rec).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    wtr.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

fn coordinates_csv(points: &[CoordinatePoint]) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_coordinates_csv(&mut buf, points)?;
    Ok(buf)
}

fn category_names(t: &CategoricalTable) -> Vec<String> {
    let layout = t.layout();
    (0..layout.n_categories())
        .map(|col| {
            let (j, c) = layout.locate(col);
            format!("{}={}", t.names()[j], t.labels()[j][c])
        })
        .collect()
}

fn nums(v: impl IntoIterator<Item = f64>) -> Vec<String> {
    v.into_iter().map(fmt_num).collect()
}

fn positive_rank(rank: usize) -> CliResult<usize> {
    if rank == 0 {
        Err(CliError::Usage("--rank must be at least 1".into()))
    } else {
        Ok(rank)
    }
}

pub fn cmd_ca(args: CaArgs) -> CliResult<PathBuf> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let rank = positive_rank(cfg.pick(args.rank, "rank", 2)?)?;
    let (bytes, digest) = read_input(&args.input)?;
    let t = read_contingency(bytes.as_slice())?;
    let res = ca_fit(&t, rank)?;
    let mut out = OutDir::create(args.common.out, "ca_out")?;
    let points = res.points(&t);
    out.write("coordinates.csv", coordinates_csv(&points)?)?;
    let chi2 = pearson_chi2(&t);
    out.write_json(
        "inertia.json",
        &json!({
            "chi2": fmt_num(chi2),
            "total": fmt_num(t.total()),
            "total_inertia": fmt_num(res.total_inertia),
            "singular_values": nums(res.factors.d().iter().copied()),
            "eigenvalues": nums(res.eigenvalues().iter().copied()),
            "inertia_shares": nums(res.inertia_shares().iter().copied()),
            "spectrum": nums(res.spectrum.iter().copied()),
        }),
    )?;
    let recon = ca_reconstruct(&res, &t, rank)?;
    out.write("reconstruction.csv", matrix_csv(t.col_labels(), t.row_labels(), &recon)?)?;
    let shares: Vec<f64> = res.inertia_shares().iter().copied().collect();
    let data = BiplotData::new("Correspondence analysis", &points, Some(&shares));
    out.write("biplot.svg", render_svg(&data))?;
    let config = json!({ "input": args.input.display().to_string(), "rank": rank });
    out.finish(RunManifest::new("ca", config, None, Some(digest)))
}

pub fn cmd_mca(args: McaArgs) -> CliResult<PathBuf> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let rank = positive_rank(cfg.pick(args.rank, "rank", 2)?)?;
    let variant: McaVariant = cfg
        .pick(args.variant, "variant", "indicator".to_string())?
        .parse()
        .map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let (t, digest) = read_categorical(&args.input)?;
    let res = mca(&t, rank, variant)?;
    let mut out = OutDir::create(args.common.out, "mca_out")?;
    let points = res.points(&t);
    out.write("coordinates.csv", coordinates_csv(&points)?)?;
    out.write_json(
        "eigenvalues.json",
        &json!({
            "variant": variant,
            "eigenvalues": nums(res.eigenvalues.iter().copied()),
            "singular_values": nums(res.factors.d().iter().copied()),
            "inertia_shares": nums(res.inertia_shares().iter().copied()),
            "spectrum": nums(res.spectrum.iter().copied()),
            "total_inertia": fmt_num(res.total_inertia()),
        }),
    )?;
    let dims: Vec<String> = (1..=res.rank()).map(|q| format!("dim{}", q)).collect();
    out.write("eta2.csv", matrix_csv(&dims, t.names(), &res.correlation_ratios(&t))?)?;
    let shares: Vec<f64> = res.inertia_shares().iter().copied().collect();
    let data = BiplotData::new("Multiple correspondence analysis", &points, Some(&shares));
    out.write("biplot.svg", render_svg(&data))?;
    let config = json!({ "input": args.input.display().to_string(), "rank": rank, "variant": variant });
    out.finish(RunManifest::new("mca", config, None, Some(digest)))
}

pub fn cmd_fit_multilogit(args: FitArgs) -> CliResult<PathBuf> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let rank = cfg.pick(args.rank, "rank", 2)?;
    let lambda_text = cfg.pick(args.lambda, "lambda", "0".to_string())?;
    let init: Init = cfg
        .pick(args.init, "init", "mca".to_string())?
        .parse()
        .map_err(|e: Error| CliError::Usage(e.to_string()))?;
    let seed = cfg.pick(args.seed, "seed", 0)?;
    let defaults = MmOptions::default();
    let mut opts = MmOptions {
        lambda: 0.0,
        max_iter: cfg.pick(args.max_iter, "max-iter", defaults.max_iter)?,
        tol: cfg.pick(args.tol, "tol", defaults.tol)?,
        init,
        accelerate: cfg.pick(args.accelerate, "accelerate", defaults.accelerate)?,
    };
    let cross_validate = lambda_text == "cv";
    if !cross_validate {
        opts.lambda = lambda_text
            .parse()
            .map_err(|_| CliError::Usage(format!("--lambda expects a number or `cv`, got `{}`", lambda_text)))?;
        if !(opts.lambda >= 0.0) {
            return Err(CliError::Usage("--lambda must be nonnegative".into()));
        }
    }
    let (t, digest) = read_categorical(&args.input)?;
    let a = encode_indicator(&t);
    let (model, trace, cv) = if cross_validate {
        let cv = CvOptions { seed, ..CvOptions::default() };
        let (model, trace, res) = fit_cross_validated(&a, rank, &opts, &cv)?;
        opts.lambda = res.best_lambda;
        (model, trace, Some(res))
    } else {
        let (model, trace) = fit_majorization(&a, rank, &opts)?;
        (model, trace, None)
    };
    let mut out = OutDir::create(args.common.out, "fit_out")?;
    out.write_json(
        "model.json",
        &json!({
            "rank": rank,
            "lambda": fmt_num(opts.lambda),
            "categories": category_names(&t),
            "beta": nums(model.beta.iter().copied()),
            "singular_values": nums(model.factors.d().iter().copied()),
            "u": (0..model.n()).map(|i| nums(model.factors.u().row(i).iter().copied())).collect::<Vec<_>>(),
            "v": (0..model.layout.n_categories()).map(|c| nums(model.factors.v().row(c).iter().copied())).collect::<Vec<_>>(),
            "converged": trace.converged,
            "iterations": trace.iterations,
            "warning": trace.warning,
            "cross_validation": cv.as_ref().map(|r| json!({
                "lambda_max": fmt_num(r.lambda_max),
                "lambdas": nums(r.lambdas.iter().copied()),
                "deviance": nums(r.deviance.iter().copied()),
            })),
        }),
    )?;
    let mut trace_csv = String::from("iteration,objective,gradient_norm\n");
    for (it, (o, g)) in trace.objective.iter().zip(&trace.gradient_norm).enumerate() {
        trace_csv.push_str(&format!("{},{},{}\n", it, fmt_num(*o), fmt_num(*g)));
    }
    out.write("trace.csv", trace_csv)?;
    let probs = predict_probabilities(&model)?;
    let ids: Vec<String> = (1..=t.n()).map(|i| format!("i{}", i)).collect();
    out.write("probabilities.csv", matrix_csv(&category_names(&t), &ids, &probs.probs)?)?;
    let lat = latent_coordinates(&model);
    let mut points: Vec<CoordinatePoint> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| CoordinatePoint {
            id: id.clone(),
            kind: PointKind::Individual,
            coords: lat.individuals.row(i).iter().copied().collect(),
        })
        .collect();
    points.extend(category_names(&t).into_iter().enumerate().map(|(c, id)| CoordinatePoint {
        id,
        kind: PointKind::Category,
        coords: lat.categories.row(c).iter().copied().collect(),
    }));
    if rank > 0 {
        out.write("latent.csv", coordinates_csv(&points)?)?;
        out.write("biplot.svg", render_svg(&BiplotData::new("Multilogit-bilinear latent space", &points, None)))?;
    }
    let config = json!({
        "input": args.input.display().to_string(),
        "rank": rank,
        "lambda": lambda_text,
        "init": init,
        "max_iter": opts.max_iter,
        "tol": opts.tol,
        "accelerate": opts.accelerate,
    });
    let mut manifest = RunManifest::new("fit-multilogit", config, Some(seed), Some(digest));
    manifest.converged = Some(trace.converged);
    out.finish(manifest)
}

pub fn cmd_simulate(args: SimulateArgs) -> CliResult<PathBuf> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let sim = SimConfig {
        n: cfg.pick(args.n, "n", 50)?,
        m: cfg.pick(args.m, "m", 20)?,
        categories_per_variable: cfg.pick(args.categories, "categories", 3)?,
        k: cfg.pick(args.rank, "rank", 2)?,
        ratio: cfg.pick(args.ratio, "ratio", 1.0)?,
        strength: cfg.pick(args.strength, "strength", 1.0)?,
        base_variance: cfg.pick(args.base_variance, "base-variance", crate::simulate::DEFAULT_BASE_VARIANCE)?,
        seed: cfg.pick(args.seed, "seed", 0)?,
    };
    sim.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = generate_dataset(&sim)?;
    let mut out = OutDir::create(args.common.out, "simulate_out")?;
    let t = &data.table;
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let to_internal = |e: csv::Error| CliError::Internal(e.to_string());
    wtr.write_record(t.names()).map_err(to_internal)?;
    for i in 0..t.n() {
        let rec: Vec<&str> = (0..t.m()).map(|j| t.labels()[j][t.code(i, j)].as_str()).collect();
        wtr.write_record(&rec).map_err(to_internal)?;
    }
    out.write("data.csv", wtr.into_inner().map_err(|e| CliError::Internal(e.to_string()))?)?;
    let layout = t.layout();
    let cats: Vec<String> = (0..layout.n_categories())
        .map(|col| {
            let (j, c) = layout.locate(col);
            format!("{}={}", t.names()[j], t.labels()[j][c])
        })
        .collect();
    let ids: Vec<String> = (1..=t.n()).map(|i| format!("i{}", i)).collect();
    out.write("true_probabilities.csv", matrix_csv(&cats, &ids, &data.true_probs.probs)?)?;
    let mut points: Vec<CoordinatePoint> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| CoordinatePoint {
            id: id.clone(),
            kind: PointKind::Individual,
            coords: data.individuals.row(i).iter().copied().collect(),
        })
        .collect();
    points.extend(cats.into_iter().enumerate().map(|(c, id)| CoordinatePoint {
        id,
        kind: PointKind::Category,
        coords: data.categories.row(c).iter().copied().collect(),
    }));
    out.write("latent.csv", coordinates_csv(&points)?)?;
    let config = serde_json::to_value(sim).map_err(|e| CliError::Internal(e.to_string()))?;
    out.finish(RunManifest::new("simulate", config, Some(sim.seed), None))
}

fn parse_cells(list: &str) -> CliResult<Vec<usize>> {
    if list.trim() == "all" {
        return Ok(TABLE2.iter().map(|r| r.id).collect());
    }
    list.split(',')
        .map(|s| {
            let id: usize = s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad cell id `{}`", s.trim())))?;
            table2_row(id)
                .map(|r| r.id)
                .ok_or_else(|| CliError::Usage(format!("unknown cell id {} (expected 1-24)", id)))
        })
        .collect()
}

pub fn cmd_reproduce_table2(args: Table2Args) -> CliResult<PathBuf> {
    let cfg = ConfigFile::load(args.common.config.as_deref())?;
    let ids = parse_cells(&cfg.pick(args.cells, "cells", "1,5,10,14".to_string())?)?;
    let reps = cfg.pick(args.reps, "reps", 10)?;
    if reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let seed = cfg.pick(args.seed, "seed", 0)?;
    let lambda_cv = args.lambda_cv || cfg.pick(None, "lambda-cv", false)?;
    let base_variance = cfg.pick(args.base_variance, "base-variance", crate::simulate::DEFAULT_BASE_VARIANCE)?;
    let defaults = MmOptions::default();
    let mm = MmOptions {
        max_iter: cfg.pick(args.max_iter, "max-iter", defaults.max_iter)?,
        tol: cfg.pick(args.tol, "tol", defaults.tol)?,
        ..defaults
    };
    let cells: Vec<GridCell> = ids
        .iter()
        .map(|&id| {
            let row = table2_row(id).expect("validated id");
            let mut cell = GridCell::from_table2(row);
            cell.config.base_variance = base_variance;
            cell.penalized = lambda_cv && row.penalized.is_some();
            cell
        })
        .collect();
    let opts = GridOptions {
        reps,
        master_seed: seed,
        mm,
        cv: CvOptions::default(),
    };
    let report = run_grid(&cells, &opts)?;
    let mut out = OutDir::create(args.common.out, "table2_out")?;
    let mut csv_bytes = Vec::new();
    report.write_csv(&mut csv_bytes)?;
    out.write("table2.csv", csv_bytes)?;
    out.write_json("table2.json", &report)?;
    out.write("table2.txt", report.render())?;
    let config = json!({
        "cells": ids,
        "reps": reps,
        "lambda_cv": lambda_cv,
        "base_variance": base_variance,
        "max_iter": mm.max_iter,
        "tol": mm.tol,
        "strength_scales": report.strength_scales,
    });
    out.finish(RunManifest::new("reproduce-table2", config, Some(seed), None))
}

pub fn run(cli: Cli) -> CliResult<PathBuf> {
    match cli.command {
        Command::Ca(a) => cmd_ca(a),
        Command::Mca(a) => cmd_mca(a),
        Command::FitMultilogit(a) => cmd_fit_multilogit(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::ReproduceTable2(a) => cmd_reproduce_table2(a),
    }
}

/// Configures the global thread pool from [`THREADS_ENV`].
pub fn init_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("{} must be a positive integer, got `{}`", THREADS_ENV, v)))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let result = init_threads().and_then(|_| run(cli));
    match result {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            0
        }
        Err(e) => {
            eprintln!("mcalogit: {}", e);
            e.exit_code()
        }
    }
}
