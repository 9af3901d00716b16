//! Data generated from the multilogit-bilinear model in its distance form,
//!
//! ```text
//! ũ_i, ṽ_j(c) ~ N_K(0, s² diag(d_1, …, d_K)),   θ_ij(c) = −½‖ũ_i − ṽ_j(c)‖²,
//! ```
//!
//! and a grid runner comparing the fitted model with the one-step (MCA)
//! estimate by the RMSE of the predicted probabilities.

use nalgebra::DMatrix;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mca::mca_one_step;
use crate::multilogit::{
    fit_cross_validated, fit_majorization, predict_probabilities, probabilities_from_one_step, rmse_probabilities,
    softmax_blocks, CvOptions, MmOptions, ProbabilityBlocks,
};
use crate::tables::{encode_indicator, CategoricalTable, CategoryLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    pub categories_per_variable: usize,
    pub k: usize,
    /// `d_1 / d_K`.
    pub ratio: f64,
    /// Multiplies every latent coordinate.
    pub strength: f64,
    /// `d_K`; the remaining variances are `d_K` and `d_1 = ratio · d_K`.
    pub base_variance: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.k == 0 {
            return Err(Error::InvalidArgument("n, m and k must be positive".into()));
        }
        if self.categories_per_variable < 2 {
            return Err(Error::InvalidArgument("need at least two categories per variable".into()));
        }
        if !(self.ratio >= 1.0) || !self.ratio.is_finite() {
            return Err(Error::InvalidArgument(format!("ratio must be at least 1, got {}", self.ratio)));
        }
        if !(self.base_variance > 0.0) || !self.base_variance.is_finite() {
            return Err(Error::InvalidArgument(format!("base variance must be positive, got {}", self.base_variance)));
        }
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return Err(Error::InvalidArgument(format!("strength must be nonnegative, got {}", self.strength)));
        }
        Ok(())
    }

    /// Latent variances `d_1 = ratio · d_K`, `d_2 = … = d_K`.
    pub fn variances(&self) -> Vec<f64> {
        (0..self.k)
            .map(|q| if q == 0 { self.ratio * self.base_variance } else { self.base_variance })
            .collect()
    }

    pub fn layout(&self) -> CategoryLayout {
        CategoryLayout::new(vec![self.categories_per_variable; self.m])
    }
}

#[derive(Debug, Clone)]
pub struct SimDataset {
    pub table: CategoricalTable,
    pub true_probs: ProbabilityBlocks,
    /// `n × K`.
    pub individuals: DMatrix<f64>,
    /// `C × K`, one row per category in layout order.
    pub categories: DMatrix<f64>,
}

/// `θ_ij(c) = −½‖ũ_i − ṽ_j(c)‖²`.
pub fn distance_logits(individuals: &DMatrix<f64>, categories: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(individuals.nrows(), categories.nrows(), |i, c| {
        -0.5 * (individuals.row(i) - categories.row(c)).norm_squared()
    })
}

pub fn generate_dataset(cfg: &SimConfig) -> Result<SimDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let layout = cfg.layout();
    let sd: Vec<f64> = cfg.variances().iter().map(|d| cfg.strength * d.sqrt()).collect();
    let mut draw = |rows: usize| {
        let mut x = DMatrix::zeros(rows, cfg.k);
        for i in 0..rows {
            for (q, s) in sd.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                x[(i, q)] = s * z;
            }
        }
        x
    };
    let individuals = draw(cfg.n);
    let categories = draw(layout.n_categories());
    let true_probs = softmax_blocks(&distance_logits(&individuals, &categories), &layout);
    let mut rows = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let row = layout
            .blocks()
            .map(|b| {
                let u: f64 = rand::Rng::random(&mut rng);
                let mut acc = 0.0;
                let last = b.end - b.start - 1;
                for (c, col) in b.enumerate() {
                    acc += true_probs.probs[(i, col)];
                    if u < acc {
                        return c;
                    }
                }
                last
            })
            .collect::<Vec<_>>();
        rows.push(row);
    }
    let names = (1..=cfg.m).map(|j| format!("V{}", j)).collect();
    let table = CategoricalTable::new(names, &rows, layout.counts().to_vec(), None)?;
    Ok(SimDataset {
        table,
        true_probs,
        individuals,
        categories,
    })
}

/// Fits on the table with unobserved categories removed and returns the
/// predicted probabilities in the full layout (zero for removed categories).
fn on_observed_categories<F>(data: &SimDataset, fit: F) -> Result<ProbabilityBlocks>
where
    F: FnOnce(&CategoricalTable) -> Result<ProbabilityBlocks>,
{
    let (reduced, dropped) = data.table.drop_empty_categories()?;
    let est = fit(&reduced)?;
    if dropped.is_empty() {
        return Ok(est);
    }
    let full = data.table.layout();
    let mut probs = DMatrix::zeros(data.table.n(), full.n_categories());
    let mut src = 0;
    for dst in 0..full.n_categories() {
        if !dropped.contains(&full.locate(dst)) {
            probs.set_column(dst, &est.probs.column(src));
            src += 1;
        }
    }
    Ok(ProbabilityBlocks {
        probs,
        layout: full.clone(),
    })
}

/// How the model estimate is regularized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Penalty {
    Fixed(f64),
    CrossValidated(CvOptions),
}

pub fn model_estimate(data: &SimDataset, k: usize, mm: &MmOptions, penalty: &Penalty) -> Result<ProbabilityBlocks> {
    on_observed_categories(data, |t| {
        let a = encode_indicator(t);
        let model = match penalty {
            Penalty::Fixed(lambda) => fit_majorization(&a, k, &MmOptions { lambda: *lambda, ..*mm })?.0,
            Penalty::CrossValidated(cv) => fit_cross_validated(&a, k, mm, cv)?.0,
        };
        predict_probabilities(&model)
    })
}

pub fn mca_estimate(data: &SimDataset, k: usize) -> Result<ProbabilityBlocks> {
    on_observed_categories(data, |t| Ok(probabilities_from_one_step(&mca_one_step(t, k)?)))
}

/// `d_K` used for the published grid.
pub const DEFAULT_BASE_VARIANCE: f64 = 4.0;

/// One row of the published comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Table2Row {
    pub id: usize,
    pub n: usize,
    pub m: usize,
    pub rank: usize,
    pub ratio: f64,
    pub strength: f64,
    pub model: f64,
    pub mca: f64,
    pub penalized: Option<f64>,
}

const fn row(id: usize, n: usize, m: usize, rank: usize, ratio: f64, strength: f64, model: f64, mca: f64) -> Table2Row {
    Table2Row {
        id,
        n,
        m,
        rank,
        ratio,
        strength,
        model,
        mca,
        penalized: None,
    }
}

const fn pen(r: Table2Row, p: f64) -> Table2Row {
    Table2Row { penalized: Some(p), ..r }
}

pub const TABLE2: [Table2Row; 24] = [
    row(1, 50, 20, 2, 1.0, 0.1, 0.044, 0.035),
    row(2, 50, 20, 2, 1.0, 1.0, 0.020, 0.045),
    row(3, 50, 20, 2, 2.0, 0.1, 0.048, 0.036),
    row(4, 50, 20, 2, 2.0, 1.0, 0.0206, 0.042),
    row(5, 50, 20, 6, 1.0, 0.1, 0.111, 0.064),
    row(6, 50, 20, 6, 1.0, 1.0, 0.045, 0.026),
    pen(row(7, 50, 20, 6, 2.0, 0.1, 0.115, 0.071), 0.028),
    row(8, 50, 20, 6, 2.0, 1.0, 0.032, 0.051),
    row(9, 300, 100, 2, 1.0, 0.1, 0.005, 0.006),
    row(10, 300, 100, 2, 1.0, 1.0, 0.004, 0.042),
    row(11, 300, 100, 2, 2.0, 0.1, 0.0047, 0.005),
    pen(row(12, 300, 100, 2, 2.0, 1.0, 0.0037, 0.040), 0.00369),
    row(13, 300, 300, 2, 1.0, 0.1, 0.003, 0.004),
    row(14, 300, 300, 2, 1.0, 1.0, 0.002, 0.039),
    row(15, 300, 300, 2, 2.0, 0.1, 0.003, 0.004),
    row(16, 300, 300, 2, 2.0, 1.0, 0.002, 0.039),
    row(17, 300, 100, 6, 1.0, 0.1, 0.019, 0.015),
    row(18, 300, 100, 6, 1.0, 1.0, 0.011, 0.023),
    pen(row(19, 300, 100, 6, 2.0, 0.1, 0.018, 0.017), 0.010),
    row(20, 300, 100, 6, 2.0, 1.0, 0.010, 0.056),
    row(21, 300, 300, 6, 1.0, 0.1, 0.011, 0.008),
    row(22, 300, 300, 6, 1.0, 1.0, 0.006, 0.022),
    row(23, 300, 300, 6, 2.0, 0.1, 0.009, 0.012),
    row(24, 300, 300, 6, 2.0, 1.0, 0.006, 0.061),
];

pub fn table2_row(id: usize) -> Option<&'static Table2Row> {
    TABLE2.iter().find(|r| r.id == id)
}

/// A cell of the experiment grid; `config.seed` is ignored and replaced by
/// a per-replicate seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub id: usize,
    pub config: SimConfig,
    /// Also fit the cross-validated penalized model.
    pub penalized: bool,
}

impl GridCell {
    pub fn from_table2(r: &Table2Row) -> Self {
        Self {
            id: r.id,
            config: SimConfig {
                n: r.n,
                m: r.m,
                categories_per_variable: 3,
                k: r.rank,
                ratio: r.ratio,
                strength: r.strength,
                base_variance: DEFAULT_BASE_VARIANCE,
                seed: 0,
            },
            penalized: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub reps: usize,
    pub master_seed: u64,
    pub mm: MmOptions,
    pub cv: CvOptions,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            reps: 10,
            master_seed: 0,
            mm: MmOptions::default(),
            cv: CvOptions::default(),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replicate `rep` of cell `cell`.
pub fn replicate_seed(master: u64, cell: usize, rep: usize) -> u64 {
    splitmix(splitmix(splitmix(master) ^ cell as u64) ^ rep as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub cell: usize,
    pub rep: usize,
    pub seed: u64,
    pub model: Option<f64>,
    pub mca: Option<f64>,
    pub penalized: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Summary {
    fn of(xs: impl Iterator<Item = f64>) -> Option<Self> {
        let xs: Vec<f64> = xs.collect();
        if xs.is_empty() {
            return None;
        }
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, sd, count: xs.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: GridCell,
    pub model: Option<Summary>,
    pub mca: Option<Summary>,
    pub penalized: Option<Summary>,
    pub reps: usize,
    /// Replicates with at least one failed estimator.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub options: GridOptions,
    pub strength_scales: String,
    pub cells: Vec<CellSummary>,
    pub replicates: Vec<RepRecord>,
}

/// Estimators plugged into [`run_grid_with`]; each returns probabilities in
/// the full layout of the dataset.
pub trait Estimators: Sync {
    fn model(&self, data: &SimDataset, cell: &GridCell) -> Result<ProbabilityBlocks>;
    fn mca(&self, data: &SimDataset, cell: &GridCell) -> Result<ProbabilityBlocks>;
    fn penalized(&self, data: &SimDataset, cell: &GridCell) -> Result<ProbabilityBlocks>;
}

/// Unpenalized majorization fit, one-step estimate, and cross-validated
/// trace-norm fit.
pub struct DefaultEstimators {
    pub mm: MmOptions,
    pub cv: CvOptions,
}

impl Estimators for DefaultEstimators {
    fn model(&self, data: &SimDataset, cell: &GridCell) -> Result<ProbabilityBlocks> {
        model_estimate(data, cell.config.k, &self.mm, &Penalty::Fixed(0.0))
    }

    fn mca(&self, data: &SimDataset, cell: &GridCell) -> Result<ProbabilityBlocks> {
        mca_estimate(data, cell.config.k)
    }

    fn penalized(&self, data: &SimDataset, cell: &GridCell) -> Result<ProbabilityBlocks> {
        let cv = CvOptions {
            seed: data.table.n() as u64 ^ cell.config.seed,
            ..self.cv.clone()
        };
        model_estimate(data, cell.config.k, &self.mm, &Penalty::CrossValidated(cv))
    }
}

fn run_replicate<E: Estimators>(est: &E, cell: &GridCell, rep: usize, master: u64) -> RepRecord {
    let seed = replicate_seed(master, cell.id, rep);
    let cell = GridCell {
        config: SimConfig { seed, ..cell.config },
        ..*cell
    };
    let mut rec = RepRecord {
        cell: cell.id,
        rep,
        seed,
        model: None,
        mca: None,
        penalized: None,
        errors: Vec::new(),
    };
    let data = match generate_dataset(&cell.config) {
        Ok(d) => d,
        Err(e) => {
            rec.errors.push(format!("generate: {}", e));
            return rec;
        }
    };
    let mut score = |name: &str, r: Result<ProbabilityBlocks>| match r.and_then(|p| rmse_probabilities(&data.true_probs, &p)) {
        Ok(x) if x.is_finite() => Some(x),
        Ok(x) => {
            rec.errors.push(format!("{}: rmse {}", name, x));
            None
        }
        Err(e) => {
            rec.errors.push(format!("{}: {}", name, e));
            None
        }
    };
    let model = score("model", est.model(&data, &cell));
    let mca = score("mca", est.mca(&data, &cell));
    let penalized = if cell.penalized {
        score("penalized", est.penalized(&data, &cell))
    } else {
        None
    };
    rec.model = model;
    rec.mca = mca;
    rec.penalized = penalized;
    for e in &rec.errors {
        log::warn!("cell {} rep {}: {}", rec.cell, rep, e);
    }
    rec
}

/// Runs every cell × replicate in parallel. The report does not depend on
/// the number of threads.
pub fn run_grid_with<E: Estimators>(cells: &[GridCell], opts: &GridOptions, est: &E) -> Result<RmseReport> {
    if opts.reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    for c in cells {
        c.config.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..opts.reps).map(move |r| (c, r))).collect();
    let replicates: Vec<RepRecord> = jobs
        .par_iter()
        .map(|&(c, r)| run_replicate(est, &cells[c], r, opts.master_seed))
        .collect();
    let summaries = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let recs = &replicates[c * opts.reps..(c + 1) * opts.reps];
            CellSummary {
                cell: *cell,
                model: Summary::of(recs.iter().filter_map(|r| r.model)),
                mca: Summary::of(recs.iter().filter_map(|r| r.mca)),
                penalized: Summary::of(recs.iter().filter_map(|r| r.penalized)),
                reps: opts.reps,
                failures: recs.iter().filter(|r| !r.errors.is_empty()).count(),
            }
        })
        .collect();
    Ok(RmseReport {
        options: opts.clone(),
        strength_scales: "coordinates".into(),
        cells: summaries,
        replicates,
    })
}

pub fn run_grid(cells: &[GridCell], opts: &GridOptions) -> Result<RmseReport> {
    let est = DefaultEstimators {
        mm: opts.mm,
        cv: opts.cv.clone(),
    };
    run_grid_with(cells, opts, &est)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(crate::export::fmt_num).unwrap_or_default()
}

impl RmseReport {
    /// One row per cell: `cell,n,m,rank,ratio,strength,model,mca,model_sd,
    /// mca_sd,penalized,reps,failures`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "cell", "n", "m", "rank", "ratio", "strength", "model", "mca", "model_sd", "mca_sd", "penalized", "reps",
            "failures",
        ])?;
        for s in &self.cells {
            let c = &s.cell.config;
            wtr.write_record([
                s.cell.id.to_string(),
                c.n.to_string(),
                c.m.to_string(),
                c.k.to_string(),
                crate::export::fmt_num(c.ratio),
                crate::export::fmt_num(c.strength),
                fmt_opt(s.model.map(|x| x.mean)),
                fmt_opt(s.mca.map(|x| x.mean)),
                fmt_opt(s.model.map(|x| x.sd)),
                fmt_opt(s.mca.map(|x| x.sd)),
                fmt_opt(s.penalized.map(|x| x.mean)),
                s.reps.to_string(),
                s.failures.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Text table of mean squared errors (squared RMSE means) next to the
    /// published values, which are on that scale.
    pub fn render(&self) -> String {
        let head = ["cell", "n", "m", "rank", "ratio", "strength", "model", "mca", "penalized", "pub.model", "pub.mca", "pub.pen"];
        let mut out = head.iter().map(|h| format!("{:>9}", h)).collect::<Vec<_>>().join(" ");
        out.push('\n');
        let cell = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{:.4}", v));
        let sq = |x: Option<Summary>| x.map(|s| s.mean * s.mean);
        for s in &self.cells {
            let c = &s.cell.config;
            let published = table2_row(s.cell.id).filter(|r| r.n == c.n && r.m == c.m && r.rank == c.k);
            let fields = [
                s.cell.id.to_string(),
                c.n.to_string(),
                c.m.to_string(),
                c.k.to_string(),
                c.ratio.to_string(),
                c.strength.to_string(),
                cell(sq(s.model)),
                cell(sq(s.mca)),
                cell(sq(s.penalized)),
                cell(published.map(|r| r.model)),
                cell(published.map(|r| r.mca)),
                cell(published.and_then(|r| r.penalized)),
            ];
            out.push_str(&fields.iter().map(|f| format!("{:>9}", f)).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
        out
    }
}
