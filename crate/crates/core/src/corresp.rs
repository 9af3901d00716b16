//! Correspondence analysis of a two-way contingency table.
//!
//! With `P = X/N`, row margins `r` and column margins `c`, the pseudo-residuals
//! are `Z = D_r^{-1/2}(P − r cᵀ)D_c^{-1/2}`. The SVD `Z = Ũ D Ṽᵀ` gives
//! standard coordinates `D_r^{-1/2}Ũ`, `D_c^{-1/2}Ṽ`, and the reconstruction
//! `x̂_ij/N = r_i c_j (1 + Σ_k d_k u_ik v_jk)`.
//!
//! Scale note: `‖Z‖²_F` is the total inertia; the Pearson χ² statistic is
//! `N‖Z‖²_F`. Both are exposed under distinct names.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{CoordinatePoint, PointKind};
use crate::lowrank::{thin_svd, RankKFactors};

#[derive(Debug, Clone, PartialEq)]
pub struct ContingencyTable {
    counts: DMatrix<f64>,
    total: f64,
    r: DVector<f64>,
    c: DVector<f64>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl ContingencyTable {
    /// Validates nonnegative finite counts with strictly positive margins.
    /// Zero rows or columns are rejected, not smoothed.
    pub fn new(counts: DMatrix<f64>) -> Result<Self> {
        let (n, m) = counts.shape();
        if n == 0 || m == 0 {
            return Err(Error::EmptyInput("contingency table has no cells".into()));
        }
        for i in 0..n {
            for j in 0..m {
                let x = counts[(i, j)];
                if !x.is_finite() {
                    return Err(Error::NonFinite);
                }
                if x < 0.0 {
                    return Err(Error::NegativeCount { row: i, column: j, value: x });
                }
            }
        }
        let total = counts.sum();
        let r = DVector::from_iterator(n, counts.row_iter().map(|row| row.sum() / total));
        let c = DVector::from_iterator(m, counts.column_iter().map(|col| col.sum() / total));
        if let Some(i) = r.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::ZeroMargin { axis: "row", index: i });
        }
        if let Some(j) = c.iter().position(|&x| !(x > 0.0)) {
            return Err(Error::ZeroMargin { axis: "column", index: j });
        }
        Ok(Self {
            counts,
            total,
            r,
            c,
            row_labels: (1..=n).map(|i| format!("r{}", i)).collect(),
            col_labels: (1..=m).map(|j| format!("c{}", j)).collect(),
        })
    }

    pub fn with_labels(mut self, rows: Vec<String>, cols: Vec<String>) -> Result<Self> {
        if rows.len() != self.counts.nrows() || cols.len() != self.counts.ncols() {
            return Err(Error::InvalidArgument("label count does not match table shape".into()));
        }
        self.row_labels = rows;
        self.col_labels = cols;
        Ok(self)
    }

    pub fn from_i64(counts: &DMatrix<i64>) -> Result<Self> {
        Self::new(counts.map(|x| x as f64))
    }

    pub fn counts(&self) -> &DMatrix<f64> {
        &self.counts
    }

    /// Grand total `N`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn row_margins(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn col_margins(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// The correspondence matrix `X/N`.
    pub fn proportions(&self) -> DMatrix<f64> {
        &self.counts / self.total
    }

    /// Independence fit `r cᵀ`.
    pub fn independence(&self) -> DMatrix<f64> {
        &self.r * self.c.transpose()
    }
}

/// Reads a count grid from CSV. The header holds the column labels; when
/// its first cell is empty or the first column is not numeric, the first
/// column holds row labels.
pub fn read_contingency<R: std::io::Read>(reader: R) -> Result<ContingencyTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    let labelled = header.first().is_some_and(String::is_empty)
        || records.iter().any(|r| r.get(0).is_some_and(|x| x.parse::<f64>().is_err()));
    let skip = usize::from(labelled);
    let m = header.len() - skip;
    if m == 0 {
        return Err(Error::EmptyInput("no count columns".into()));
    }
    let mut counts = DMatrix::zeros(records.len(), m);
    let mut rows = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != header.len() {
            return Err(Error::Malformed {
                row: i + 1,
                column: rec.len().min(header.len()) + 1,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        rows.push(if labelled { rec[0].to_string() } else { format!("r{}", i + 1) });
        for j in 0..m {
            let field = &rec[j + skip];
            let x: f64 = field.parse().map_err(|_| Error::Malformed {
                row: i + 1,
                column: j + skip + 1,
                message: format!("`{}` is not a number", field),
            })?;
            if !x.is_finite() || x < 0.0 {
                return Err(Error::Malformed {
                    row: i + 1,
                    column: j + skip + 1,
                    message: format!("count {} must be finite and nonnegative", x),
                });
            }
            counts[(i, j)] = x;
        }
    }
    ContingencyTable::new(counts)?.with_labels(rows, header[skip..].to_vec())
}

/// `Z = D_r^{-1/2}(X/N − r cᵀ)D_c^{-1/2}`.
pub fn ca_pseudo_residuals(t: &ContingencyTable) -> DMatrix<f64> {
    let (n, m) = t.counts.shape();
    DMatrix::from_fn(n, m, |i, j| {
        let e = t.r[i] * t.c[j];
        (t.counts[(i, j)] / t.total - e) / e.sqrt()
    })
}

/// Total inertia `‖Z‖²_F`.
pub fn total_inertia(t: &ContingencyTable) -> f64 {
    ca_pseudo_residuals(t).norm_squared()
}

/// Pearson χ² for row-column independence, `N‖Z‖²_F`.
pub fn pearson_chi2(t: &ContingencyTable) -> f64 {
    t.total * total_inertia(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaResult {
    /// Rank-K factors `Ũ, D, Ṽ` of `Z`.
    pub factors: RankKFactors,
    /// All singular values of `Z`.
    pub spectrum: DVector<f64>,
    pub row_standard: DMatrix<f64>,
    pub col_standard: DMatrix<f64>,
    pub row_principal: DMatrix<f64>,
    pub col_principal: DMatrix<f64>,
    /// `Σ` of all squared singular values of `Z`, independent of K.
    pub total_inertia: f64,
}

impl CaResult {
    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    /// Eigenvalues (squared singular values) of the retained dimensions.
    pub fn eigenvalues(&self) -> DVector<f64> {
        self.factors.d().map(|d| d * d)
    }

    /// Share of total inertia per retained dimension.
    pub fn inertia_shares(&self) -> DVector<f64> {
        let total = self.total_inertia;
        self.eigenvalues().map(|e| if total > 0.0 { e / total } else { 0.0 })
    }

    /// Principal coordinates of rows and columns as exportable points.
    pub fn points(&self, t: &ContingencyTable) -> Vec<CoordinatePoint> {
        let rows = t.row_labels.iter().enumerate().map(|(i, id)| CoordinatePoint {
            id: id.clone(),
            kind: PointKind::Row,
            coords: self.row_principal.row(i).iter().cloned().collect(),
        });
        let cols = t.col_labels.iter().enumerate().map(|(j, id)| CoordinatePoint {
            id: id.clone(),
            kind: PointKind::Col,
            coords: self.col_principal.row(j).iter().cloned().collect(),
        });
        rows.chain(cols).collect()
    }
}

pub(crate) fn scale_rows(m: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut row, &s) in out.row_iter_mut().zip(w.iter()) {
        row *= s;
    }
    out
}

pub(crate) fn scale_cols(m: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for (mut col, &s) in out.column_iter_mut().zip(w.iter()) {
        col *= s;
    }
    out
}

/// Rank-K correspondence analysis. `k` may go up to `min(n, m)`; only
/// `min(n, m) − 1` dimensions carry inertia.
pub fn ca_fit(t: &ContingencyTable, k: usize) -> Result<CaResult> {
    let z = ca_pseudo_residuals(t);
    let max = z.nrows().min(z.ncols());
    if k > max {
        return Err(Error::RankOutOfRange { rank: k, max });
    }
    let full = thin_svd(&z)?;
    let spectrum = full.d().clone();
    let factors = full.truncate(k);
    Ok(ca_result_from_factors(t, factors, spectrum))
}

pub(crate) fn ca_result_from_factors(
    t: &ContingencyTable,
    factors: RankKFactors,
    spectrum: DVector<f64>,
) -> CaResult {
    let r_is = t.r.map(|x| 1.0 / x.sqrt());
    let c_is = t.c.map(|x| 1.0 / x.sqrt());
    let row_standard = scale_rows(factors.u(), &r_is);
    let col_standard = scale_rows(factors.v(), &c_is);
    let row_principal = scale_cols(&row_standard, factors.d());
    let col_principal = scale_cols(&col_standard, factors.d());
    let total_inertia = spectrum.norm_squared();
    CaResult {
        factors,
        spectrum,
        row_standard,
        col_standard,
        row_principal,
        col_principal,
        total_inertia,
    }
}

/// Fitted proportions `r_i c_j (1 + Σ_{k<K} d_k u_ik v_jk)` from standard
/// coordinates. `k = 0` is the independence fit.
pub fn ca_reconstruct(res: &CaResult, t: &ContingencyTable, k: usize) -> Result<DMatrix<f64>> {
    if k > res.rank() {
        return Err(Error::RankOutOfRange { rank: k, max: res.rank() });
    }
    let (n, m) = t.counts.shape();
    let d = res.factors.d();
    Ok(DMatrix::from_fn(n, m, |i, j| {
        let s: f64 = (0..k)
            .map(|q| d[q] * res.row_standard[(i, q)] * res.col_standard[(j, q)])
            .sum();
        t.r[i] * t.c[j] * (1.0 + s)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contingency_csv_with_and_without_row_labels() {
        let t = read_contingency(",a,b\nx,2,0\ny,0,2\n".as_bytes()).unwrap();
        assert_eq!(t.row_labels(), ["x", "y"]);
        assert_eq!(t.col_labels(), ["a", "b"]);
        assert!((pearson_chi2(&t) - 4.0).abs() < 1e-12);
        let t = read_contingency("a,b,c\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(t.counts().shape(), (2, 3));
        assert_eq!(t.row_labels(), ["r1", "r2"]);
        match read_contingency("a,b\n1,2\n3,oops\n".as_bytes()) {
            Err(Error::Malformed { row: 2, column: 2, .. }) => {}
            other => panic!("{:?}", other),
        }
        assert!(read_contingency("a,b\n1,-2\n3,4\n".as_bytes()).is_err());
        assert!(read_contingency("a,b\n".as_bytes()).is_err());
    }

    /// Textbook Σ (obs − exp)² / exp with expected = row·col / N.
    fn chi2_loop(x: &DMatrix<f64>) -> f64 {
        let n: f64 = x.sum();
        let mut stat = 0.0;
        for i in 0..x.nrows() {
            let ri: f64 = x.row(i).sum();
            for j in 0..x.ncols() {
                let cj: f64 = x.column(j).sum();
                let e = ri * cj / n;
                stat += (x[(i, j)] - e).powi(2) / e;
            }
        }
        stat
    }

    fn random_counts(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.random_range(1..30) as f64)
    }

    #[test]
    fn independence_table_has_zero_residuals() {
        let t = ContingencyTable::new(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert!(ca_pseudo_residuals(&t).amax() < 1e-15);
        assert_eq!(pearson_chi2(&t), 0.0);
        let res = ca_fit(&t, 1).unwrap();
        assert!(res.factors.d()[0] < 1e-15);
        assert!(res.row_principal.amax() < 1e-15);
    }

    #[test]
    fn diagonal_table() {
        let t = ContingencyTable::new(DMatrix::from_row_slice(2, 2, &[2., 0., 0., 2.])).unwrap();
        let z = ca_pseudo_residuals(&t);
        // independent scalar evaluation of the residual formula
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert!((z - expected).amax() < 1e-15);
        assert!((pearson_chi2(&t) - 4.0).abs() < 1e-12);
        assert!((chi2_loop(t.counts()) - 4.0).abs() < 1e-12);
        let res = ca_fit(&t, 1).unwrap();
        assert!((res.factors.d()[0] - 1.0).abs() < 1e-12);
        let fitted = ca_reconstruct(&res, &t, 1).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 0., 0., 0.5]);
        assert!((fitted - expected).amax() < 1e-12);
    }

    #[test]
    fn chi2_matches_textbook_loop() {
        let x = DMatrix::from_row_slice(2, 3, &[1., 1., 0., 0., 2., 2.]);
        let t = ContingencyTable::new(x.clone()).unwrap();
        assert!((pearson_chi2(&t) - chi2_loop(&x)).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let x = random_counts(&mut rng, 5, 4);
            let t = ContingencyTable::new(x.clone()).unwrap();
            assert!((pearson_chi2(&t) - chi2_loop(&x)).abs() < 1e-10 * chi2_loop(&x).max(1.0));
        }
    }

    #[test]
    fn full_rank_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_counts(&mut rng, 5, 4);
        let t = ContingencyTable::new(x).unwrap();
        let res = ca_fit(&t, 4).unwrap();
        let z = ca_pseudo_residuals(&t);
        assert!((z - res.factors.reconstruct()).norm() < 1e-10);
        let fitted = ca_reconstruct(&res, &t, 4).unwrap();
        assert!((fitted - t.proportions()).amax() < 1e-10);
        let base = ca_reconstruct(&res, &t, 0).unwrap();
        assert!((base - t.independence()).amax() < 1e-15);
    }

    #[test]
    fn residuals_orthogonal_to_margin_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = ContingencyTable::new(random_counts(&mut rng, 6, 5)).unwrap();
        let z = ca_pseudo_residuals(&t);
        assert!((z.transpose() * t.row_margins().map(f64::sqrt)).norm() < 1e-10);
        assert!((&z * t.col_margins().map(f64::sqrt)).norm() < 1e-10);
    }

    #[test]
    fn reconstruction_error_nonincreasing_in_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = ContingencyTable::new(random_counts(&mut rng, 7, 5)).unwrap();
        let res = ca_fit(&t, 5).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..=5 {
            let err = (ca_reconstruct(&res, &t, k).unwrap() - t.proportions()).norm();
            assert!(err <= last + 1e-14);
            last = err;
        }
        assert!(last < 1e-10);
    }

    #[test]
    fn coordinates_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = ContingencyTable::new(random_counts(&mut rng, 6, 4)).unwrap();
        let res = ca_fit(&t, 2).unwrap();
        assert!((res.total_inertia - total_inertia(&t)).abs() < 1e-12);
        for q in 0..2 {
            let d = res.factors.d()[q];
            assert!((res.row_principal.column(q) - res.row_standard.column(q) * d).amax() < 1e-14);
            // standard coordinates have unit weighted variance
            let var: f64 = (0..6).map(|i| t.row_margins()[i] * res.row_standard[(i, q)].powi(2)).sum();
            assert!((var - 1.0).abs() < 1e-10);
        }
        let pts = res.points(&t);
        assert_eq!(pts.len(), 10);
        assert_eq!(pts[6].kind, PointKind::Col);
    }

    #[test]
    fn zero_margins_and_negatives_rejected() {
        let x = DMatrix::from_row_slice(2, 2, &[1., 0., 0., 0.]);
        assert!(matches!(ContingencyTable::new(x), Err(Error::ZeroMargin { axis: "row", index: 1 })));
        let x = DMatrix::from_row_slice(2, 2, &[1., -1., 1., 1.]);
        assert!(matches!(ContingencyTable::new(x), Err(Error::NegativeCount { .. })));
    }

    /// On tables generated from a log-bilinear model with weak interaction,
    /// the CA reconstruction is close to its log-linear reading.
    #[test]
    fn weak_interaction_log_approximation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (n, m) = (8, 6);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = DMatrix::from_fn(n, m, |i, j| 100.0 * (a[i] + b[j] + 0.05 * u[i] * v[j]).exp());
        let t = ContingencyTable::new(x).unwrap();
        let res = ca_fit(&t, 1).unwrap();
        let fitted = ca_reconstruct(&res, &t, 1).unwrap() * t.total();
        let d = res.factors.d()[0];
        for i in 0..n {
            for j in 0..m {
                let loglin = t.total().ln()
                    + t.row_margins()[i].ln()
                    + t.col_margins()[j].ln()
                    + d * res.row_standard[(i, 0)] * res.col_standard[(j, 0)];
                assert!((fitted[(i, j)].ln() - loglin).abs() <= 0.01);
            }
        }
    }
}
