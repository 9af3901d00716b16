//! Multiple correspondence analysis and its one-step likelihood reading.
//!
//! MCA is CA applied to the indicator matrix `A` or the Burt matrix `B`:
//!
//! ```text
//! Z_A = (A − 1pᵀ) D_p^{-1/2} / √(mn)
//! Z_B = D_p^{-1/2} (B − n p pᵀ) D_p^{-1/2} / (mn)  =  Z_Aᵀ Z_A
//! ```
//!
//! Coordinates follow the usual convention: individuals in principal
//! coordinates `√n · U D`, categories in standard coordinates
//! `√(mn) · D_p^{-1/2} V` or principal coordinates (standard × D).
//!
//! [`mca_one_step`] maximizes the second-order expansion of the
//! multilogit-bilinear log-likelihood around the independence model. The
//! maximizer is `SVD_K((A − 1pᵀ)D_p^{-1/2}) D_p^{-1/2}`, i.e. the indicator-MCA
//! decomposition up to the factor `√(mn)` and the right weight `D_p^{-1/2}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corresp::{scale_cols, scale_rows};
use crate::error::{Error, Result};
use crate::export::{CoordinatePoint, PointKind};
use crate::lowrank::{solve_with_factors, symmetric_eigen, thin_svd, QuadraticProblem, RankKFactors, Weight};
use crate::tables::{
    burt_matrix, category_margins, encode_indicator, CategoricalTable, CategoryLayout, IndicatorMatrix,
    MarginVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McaVariant {
    Indicator,
    Burt,
}

impl std::str::FromStr for McaVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(McaVariant::Indicator),
            "burt" => Ok(McaVariant::Burt),
            other => Err(Error::InvalidArgument(format!("unknown MCA variant `{}`", other))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McaResult {
    pub variant: McaVariant,
    /// Rank-K factors of `Z_A`. For the Burt variant `V` and `D` come from
    /// the eigendecomposition of `Z_B`, and `U = Z_A V D⁻¹` (zero columns where
    /// `D` vanishes).
    pub factors: RankKFactors,
    /// `√n · U D`.
    pub row_principal: DMatrix<f64>,
    /// `√(mn) · D_p^{-1/2} V`.
    pub category_standard: DMatrix<f64>,
    /// Standard coordinates scaled by `D`.
    pub category_coords: DMatrix<f64>,
    /// `D²` of the retained dimensions.
    pub eigenvalues: DVector<f64>,
    /// All eigenvalues of `Z_B`, nonincreasing.
    pub spectrum: DVector<f64>,
    pub margins: MarginVector,
}

impl McaResult {
    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    /// Sum of all eigenvalues, `(C − m)/m` for a complete table.
    pub fn total_inertia(&self) -> f64 {
        self.spectrum.sum()
    }

    pub fn inertia_shares(&self) -> DVector<f64> {
        let total = self.total_inertia();
        self.eigenvalues.map(|e| if total > 0.0 { e / total } else { 0.0 })
    }

    /// `m × K` table of `η²(f_k, X_j)` for the principal components `f_k`.
    pub fn correlation_ratios(&self, t: &CategoricalTable) -> DMatrix<f64> {
        let k = self.rank();
        DMatrix::from_fn(t.m(), k, |j, q| {
            correlation_ratio(self.row_principal.column(q).as_slice(), t, j).unwrap_or(0.0)
        })
    }

    /// Individuals and categories in principal coordinates.
    pub fn points(&self, t: &CategoricalTable) -> Vec<CoordinatePoint> {
        let individuals = (0..t.n()).map(|i| CoordinatePoint {
            id: format!("i{}", i + 1),
            kind: PointKind::Individual,
            coords: self.row_principal.row(i).iter().cloned().collect(),
        });
        let layout = t.layout();
        let categories = (0..layout.n_categories()).map(|col| {
            let (j, c) = layout.locate(col);
            CoordinatePoint {
                id: format!("{}={}", t.names()[j], t.labels()[j][c]),
                kind: PointKind::Category,
                coords: self.category_coords.row(col).iter().cloned().collect(),
            }
        });
        individuals.chain(categories).collect()
    }
}

/// `Z_A = (A − 1pᵀ)D_p^{-1/2}/√(mn)`.
pub fn indicator_residuals(a: &IndicatorMatrix, p: &MarginVector) -> DMatrix<f64> {
    let n = a.n();
    let m = a.layout().n_variables();
    let scale = 1.0 / ((m * n) as f64).sqrt();
    let pv = p.p();
    let inv = p.inv_sqrt();
    DMatrix::from_fn(n, pv.len(), |i, c| (a.entries()[(i, c)] - pv[c]) * inv[c] * scale)
}

/// `Z_B = D_p^{-1/2}(B − n p pᵀ)D_p^{-1/2}/(mn)`, computed from the Burt
/// counts without forming `Z_A`.
pub fn burt_residuals(a: &IndicatorMatrix, p: &MarginVector) -> DMatrix<f64> {
    let b = burt_matrix(a);
    let n = a.n() as f64;
    let m = a.layout().n_variables() as f64;
    let pv = p.p();
    let c = pv.len();
    DMatrix::from_fn(c, c, |s, t| {
        (b.entries()[(s, t)] as f64 - n * pv[s] * pv[t]) / ((pv[s] * pv[t]).sqrt() * m * n)
    })
}

fn rank_bound(t: &CategoricalTable) -> usize {
    t.n().min(t.layout().n_categories() - t.m())
}

fn check_rank(t: &CategoricalTable, k: usize) -> Result<()> {
    let max = rank_bound(t);
    if k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    Ok(())
}

fn assemble(
    variant: McaVariant,
    factors: RankKFactors,
    spectrum: DVector<f64>,
    margins: MarginVector,
    n: usize,
    m: usize,
) -> McaResult {
    let sqrt_n = (n as f64).sqrt();
    let ud = scale_cols(factors.u(), factors.d());
    let row_principal = ud * sqrt_n;
    let category_standard = scale_rows(factors.v(), &margins.inv_sqrt()) * ((m * n) as f64).sqrt();
    let category_coords = scale_cols(&category_standard, factors.d());
    let eigenvalues = factors.d().map(|d| d * d);
    McaResult {
        variant,
        factors,
        row_principal,
        category_standard,
        category_coords,
        eigenvalues,
        spectrum,
        margins,
    }
}

/// MCA by SVD of `Z_A`. Requires every category to be observed and
/// `k ≤ min(n, C − m)`.
pub fn mca_indicator(t: &CategoricalTable, k: usize) -> Result<McaResult> {
    check_rank(t, k)?;
    let a = encode_indicator(t);
    let p = category_margins(&a)?;
    let z = indicator_residuals(&a, &p);
    let full = thin_svd(&z)?;
    let spectrum = full.d().map(|d| d * d);
    Ok(assemble(McaVariant::Indicator, full.truncate(k), spectrum, p, t.n(), t.m()))
}

/// MCA by eigendecomposition of `Z_B`. Individuals are projected as
/// supplementary points, `√n · Z_A V`.
pub fn mca_burt(t: &CategoricalTable, k: usize) -> Result<McaResult> {
    check_rank(t, k)?;
    let a = encode_indicator(t);
    let p = category_margins(&a)?;
    let zb = burt_residuals(&a, &p);
    let (vals, vecs) = symmetric_eigen(&zb).ok_or(Error::NonFinite)?;
    let spectrum = vals.map(|e| e.max(0.0));
    let mut v = vecs.columns(0, k).into_owned();
    for mut col in v.column_iter_mut() {
        let big = col.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if big < 0.0 {
            col.neg_mut();
        }
    }
    let d = DVector::from_iterator(k, spectrum.iter().take(k).map(|l| l.sqrt()));
    let za = indicator_residuals(&a, &p);
    let proj = &za * &v;
    let tiny = 1e-12 * d.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let u = DMatrix::from_fn(t.n(), k, |i, q| if d[q] > tiny { proj[(i, q)] / d[q] } else { 0.0 });
    let factors = RankKFactors::new(u, d, v)?;
    let mut res = assemble(McaVariant::Burt, factors, spectrum, p, t.n(), t.m());
    // U D = Z_A V exactly, even for vanishing D
    res.row_principal = proj * (t.n() as f64).sqrt();
    Ok(res)
}

pub fn mca(t: &CategoricalTable, k: usize, variant: McaVariant) -> Result<McaResult> {
    match variant {
        McaVariant::Indicator => mca_indicator(t, k),
        McaVariant::Burt => mca_burt(t, k),
    }
}

/// Offsets `log pʲ`, shifted per block to `pʲ`-weighted mean zero.
pub fn centered_log_margins(p: &MarginVector) -> DVector<f64> {
    let mut beta = p.p().map(f64::ln);
    for b in p.layout().blocks() {
        let mean: f64 = b.clone().map(|c| p.p()[c] * beta[c]).sum();
        for c in b {
            beta[c] -= mean;
        }
    }
    beta
}

/// Enforces `Γʲpʲ = 0` by removing each row-block's `pʲ`-weighted mean.
pub fn center_blocks(gamma: &mut DMatrix<f64>, p: &DVector<f64>, layout: &CategoryLayout) {
    for i in 0..gamma.nrows() {
        for b in layout.blocks() {
            let mean: f64 = b.clone().map(|c| p[c] * gamma[(i, c)]).sum();
            for c in b {
                gamma[(i, c)] -= mean;
            }
        }
    }
}

/// Largest `|Σ_c pʲ(c) Γ_i^j(c)|` over rows and blocks.
pub fn block_centering_error(gamma: &DMatrix<f64>, p: &DVector<f64>, layout: &CategoryLayout) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..gamma.nrows() {
        for b in layout.blocks() {
            let s: f64 = b.map(|c| p[c] * gamma[(i, c)]).sum();
            worst = worst.max(s.abs());
        }
    }
    worst
}

/// The one-step estimate `(β₀, Γ̂)` of the multilogit-bilinear model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OneStepEstimate {
    pub beta0: DVector<f64>,
    /// `n × C`, rank ≤ K, `Γ̂ʲpʲ = 0`.
    pub gamma: DMatrix<f64>,
    /// Truncated SVD of `(A − 1pᵀ)D_p^{-1/2}`, so `Γ̂ = U D Vᵀ D_p^{-1/2}`.
    pub factors: RankKFactors,
    pub margins: MarginVector,
}

impl OneStepEstimate {
    pub fn layout(&self) -> &CategoryLayout {
        self.margins.layout()
    }
}

/// Maximizes the quadratic expansion `⟨Γ, A − 1pᵀ⟩ − ½‖Γ D_p^{1/2}‖²_F` under
/// `rank(Γ) ≤ k`.
pub fn mca_one_step(t: &CategoricalTable, k: usize) -> Result<OneStepEstimate> {
    check_rank(t, k)?;
    one_step_from_indicator(&encode_indicator(t), k)
}

/// [`mca_one_step`] on an arbitrary (possibly fuzzy-coded) indicator matrix
/// whose blocks each sum to one per row.
pub fn one_step_from_indicator(a: &IndicatorMatrix, k: usize) -> Result<OneStepEstimate> {
    let p = category_margins(a)?;
    let mut g = a.entries().clone();
    for mut row in g.row_iter_mut() {
        row -= p.p().transpose();
    }
    let problem = QuadraticProblem {
        gradient: g,
        left: Weight::identity(a.n()),
        right: Weight::Diagonal(p.sqrt()),
        rank: k,
    };
    let (mut gamma, factors) = solve_with_factors(&problem)?;
    center_blocks(&mut gamma, p.p(), p.layout());
    Ok(OneStepEstimate {
        beta0: centered_log_margins(&p),
        gamma,
        factors,
        margins: p,
    })
}

/// Between-category over total sum of squares of `scores` grouped by
/// variable `j`.
pub fn correlation_ratio(scores: &[f64], t: &CategoricalTable, j: usize) -> Result<f64> {
    if scores.len() != t.n() {
        return Err(Error::ShapeMismatch {
            expected: (t.n(), 1),
            got: (scores.len(), 1),
        });
    }
    if j >= t.m() {
        return Err(Error::IndexOutOfRange { index: j, len: t.m() });
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let total: f64 = scores.iter().map(|s| (s - mean).powi(2)).sum();
    if total <= 1e-300 || total <= 1e-24 * scores.iter().map(|s| s * s).sum::<f64>() {
        return Err(Error::ConstantScores);
    }
    let cj = t.layout().counts()[j];
    let mut sums = vec![0.0; cj];
    let mut counts = vec![0usize; cj];
    for (i, &s) in scores.iter().enumerate() {
        let c = t.code(i, j);
        sums[c] += s;
        counts[c] += 1;
    }
    let between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &k)| k > 0)
        .map(|(&s, &k)| k as f64 * (s / k as f64 - mean).powi(2))
        .sum();
    Ok((between / total).clamp(0.0, 1.0))
}
