//! Categorical tables and the dummy-coded structures built from them.
//!
//! A [`CategoricalTable`] holds `n` individuals answering `m` nominal
//! questions. Variable `j` has `C_j ≥ 2` levels, coded `0..C_j` internally.
//! Concatenating the per-variable dummy codings gives the indicator matrix
//! `A` (`n × C`, `C = Σ C_j`), and `B = AᵀA` is the Burt matrix holding every
//! two-way cross tabulation.

use std::collections::HashMap;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Block structure of the `C` category columns: variable `j` owns the
/// contiguous range `offsets[j]..offsets[j] + counts[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryLayout {
    counts: Vec<usize>,
    offsets: Vec<usize>,
}

impl CategoryLayout {
    pub fn new(counts: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(counts.len());
        let mut acc = 0;
        for &c in &counts {
            offsets.push(acc);
            acc += c;
        }
        Self { counts, offsets }
    }

    /// Number of variables `m`.
    pub fn n_variables(&self) -> usize {
        self.counts.len()
    }

    /// Total number of categories `C`.
    pub fn n_categories(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j] + self.counts[j]
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.counts.len()).map(move |j| self.block(j))
    }

    /// Column index of category `c` of variable `j`.
    pub fn column(&self, j: usize, c: usize) -> usize {
        self.offsets[j] + c
    }

    /// Inverse of [`column`](Self::column).
    pub fn locate(&self, col: usize) -> (usize, usize) {
        let j = match self.offsets.binary_search(&col) {
            Ok(j) => {
                // zero-width blocks never occur for valid layouts
                j
            }
            Err(j) => j - 1,
        };
        (j, col - self.offsets[j])
    }
}

/// `n × m` nominal observations with per-variable level counts and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalTable {
    names: Vec<String>,
    labels: Vec<Vec<String>>,
    layout: CategoryLayout,
    n: usize,
    /// Row-major `n × m`, 0-based level codes.
    codes: Vec<usize>,
}

impl CategoricalTable {
    /// Builds a table from 0-based codes. `counts[j]` is the declared number
    /// of levels of variable `j`; levels need not all be observed.
    pub fn new(
        names: Vec<String>,
        rows: &[Vec<usize>],
        counts: Vec<usize>,
        labels: Option<Vec<Vec<String>>>,
    ) -> Result<Self> {
        let m = counts.len();
        if m == 0 {
            return Err(Error::EmptyInput("table has no variables".into()));
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput("table has no rows".into()));
        }
        if names.len() != m {
            return Err(Error::InvalidArgument(format!(
                "{} names for {} variables",
                names.len(),
                m
            )));
        }
        if let Some(j) = counts.iter().position(|&c| c < 2) {
            return Err(Error::SingleLevel {
                column: names[j].clone(),
                level: "0".into(),
            });
        }
        let mut codes = Vec::with_capacity(rows.len() * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Malformed {
                    row: i,
                    column: row.len(),
                    message: format!("expected {} values", m),
                });
            }
            for (j, &x) in row.iter().enumerate() {
                if x >= counts[j] {
                    return Err(Error::Malformed {
                        row: i,
                        column: j,
                        message: format!("code {} exceeds level count {}", x, counts[j]),
                    });
                }
                codes.push(x);
            }
        }
        let labels = match labels {
            Some(l) => {
                if l.len() != m || l.iter().zip(&counts).any(|(l, &c)| l.len() != c) {
                    return Err(Error::InvalidArgument("label lists do not match level counts".into()));
                }
                l
            }
            None => counts
                .iter()
                .map(|&c| (1..=c).map(|k| k.to_string()).collect())
                .collect(),
        };
        Ok(Self {
            names,
            labels,
            layout: CategoryLayout::new(counts),
            n: rows.len(),
            codes,
        })
    }

    /// Builds a table from 1-based codes (`1..=C_j`), inferring `C_j` as the
    /// column maximum. Variables are named `V1, V2, ...`.
    pub fn from_one_based(rows: &[Vec<usize>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let mut counts = vec![0; m];
        let mut zero_based = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let mut r = Vec::with_capacity(m);
            for (j, &x) in row.iter().enumerate() {
                if x == 0 {
                    return Err(Error::Malformed {
                        row: i,
                        column: j,
                        message: "codes are 1-based".into(),
                    });
                }
                if j < m {
                    counts[j] = counts[j].max(x);
                }
                r.push(x - 1);
            }
            zero_based.push(r);
        }
        let names = (1..=m).map(|j| format!("V{}", j)).collect();
        Self::new(names, &zero_based, counts, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.layout.n_variables()
    }

    pub fn layout(&self) -> &CategoryLayout {
        &self.layout
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    /// 0-based level of individual `i` on variable `j`.
    pub fn code(&self, i: usize, j: usize) -> usize {
        self.codes[i * self.m() + j]
    }

    pub fn row(&self, i: usize) -> &[usize] {
        let m = self.m();
        &self.codes[i * m..(i + 1) * m]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).map(move |i| self.code(i, j))
    }

    /// Observed count of each level of each variable.
    pub fn level_counts(&self) -> Vec<Vec<u64>> {
        let mut counts: Vec<Vec<u64>> = self.layout.counts().iter().map(|&c| vec![0; c]).collect();
        for i in 0..self.n {
            for (j, &x) in self.row(i).iter().enumerate() {
                counts[j][x] += 1;
            }
        }
        counts
    }

    /// Removes levels that no individual chose, renumbering the remaining
    /// ones. Returns the reduced table and the `(variable, level)` pairs that
    /// were dropped. Fails if a variable is left with a single level.
    pub fn drop_empty_categories(&self) -> Result<(Self, Vec<(usize, usize)>)> {
        let counts = self.level_counts();
        let mut dropped = Vec::new();
        let mut remap: Vec<Vec<usize>> = Vec::with_capacity(self.m());
        let mut new_counts = Vec::with_capacity(self.m());
        let mut new_labels = Vec::with_capacity(self.m());
        for (j, cj) in counts.iter().enumerate() {
            let mut map = vec![usize::MAX; cj.len()];
            let mut next = 0;
            let mut labels = Vec::new();
            for (c, &k) in cj.iter().enumerate() {
                if k == 0 {
                    log::warn!(
                        "dropping empty category {} of variable {}",
                        self.labels[j][c],
                        self.names[j]
                    );
                    dropped.push((j, c));
                } else {
                    map[c] = next;
                    next += 1;
                    labels.push(self.labels[j][c].clone());
                }
            }
            if next < 2 {
                return Err(Error::SingleLevel {
                    column: self.names[j].clone(),
                    level: labels.first().cloned().unwrap_or_default(),
                });
            }
            remap.push(map);
            new_counts.push(next);
            new_labels.push(labels);
        }
        if dropped.is_empty() {
            return Ok((self.clone(), dropped));
        }
        let rows: Vec<Vec<usize>> = (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| remap[j][x])
                    .collect()
            })
            .collect();
        let table = Self::new(self.names.clone(), &rows, new_counts, Some(new_labels))?;
        Ok((table, dropped))
    }

    /// Variable names, level labels and observed counts, for JSON export.
    pub fn schema(&self) -> TableSchemaExport {
        let counts = self.level_counts();
        TableSchemaExport {
            n: self.n,
            variables: self
                .names
                .iter()
                .zip(&self.labels)
                .zip(counts)
                .map(|((name, levels), counts)| VariableSchema {
                    name: name.clone(),
                    levels: levels.clone(),
                    counts,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub levels: Vec<String>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchemaExport {
    pub n: usize,
    pub variables: Vec<VariableSchema>,
}

/// How to read a categorical CSV file.
#[derive(Debug, Clone)]
pub struct TableSchema {
    pub delimiter: u8,
    /// Columns to keep, by header name. `None` keeps all of them.
    pub columns: Option<Vec<String>>,
}

impl Default for TableSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            columns: None,
        }
    }
}

pub fn load_table<P: AsRef<Path>>(path: P, schema: &TableSchema) -> Result<CategoricalTable> {
    let file = std::fs::File::open(path)?;
    read_table(file, schema)
}

/// Reads a header-first CSV of nominal values. Levels are numbered in order of
/// first appearance.
pub fn read_table<R: Read>(reader: R, schema: &TableSchema) -> Result<CategoricalTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyInput("missing header row".into()));
    }
    let selected: Vec<usize> = match &schema.columns {
        None => (0..headers.len()).collect(),
        Some(cols) => cols
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::UnknownColumn(c.clone()))
            })
            .collect::<Result<_>>()?,
    };
    let m = selected.len();
    let mut level_maps: Vec<HashMap<String, usize>> = vec![HashMap::new(); m];
    let mut labels: Vec<Vec<String>> = vec![Vec::new(); m];
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(m);
        for (k, &col) in selected.iter().enumerate() {
            let value = record.get(col).ok_or_else(|| Error::Malformed {
                row: i + 1,
                column: col + 1,
                message: "missing field".into(),
            })?;
            let next = labels[k].len();
            let code = *level_maps[k].entry(value.to_owned()).or_insert_with(|| {
                labels[k].push(value.to_owned());
                next
            });
            row.push(code);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("no data rows".into()));
    }
    for k in 0..m {
        if labels[k].len() < 2 {
            return Err(Error::SingleLevel {
                column: headers[selected[k]].clone(),
                level: labels[k][0].clone(),
            });
        }
    }
    let names = selected.iter().map(|&c| headers[c].clone()).collect();
    let counts = labels.iter().map(Vec::len).collect();
    CategoricalTable::new(names, &rows, counts, Some(labels))
}

/// 0/1 dummy coding `A` of a table.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorMatrix {
    entries: DMatrix<f64>,
    layout: CategoryLayout,
}

impl IndicatorMatrix {
    /// Wraps an arbitrary matrix with the given block layout. No 0/1 or
    /// block-sum checks are made.
    pub fn from_raw(entries: DMatrix<f64>, counts: Vec<usize>) -> Result<Self> {
        let layout = CategoryLayout::new(counts);
        if layout.n_categories() != entries.ncols() {
            return Err(Error::ShapeMismatch {
                expected: (entries.nrows(), layout.n_categories()),
                got: entries.shape(),
            });
        }
        Ok(Self { entries, layout })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn layout(&self) -> &CategoryLayout {
        &self.layout
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Argmax of each block of each row: recovers the 0-based codes.
    pub fn decode(&self) -> Vec<Vec<usize>> {
        (0..self.n())
            .map(|i| {
                self.layout
                    .blocks()
                    .map(|b| {
                        let start = b.start;
                        b.max_by(|&x, &y| self.entries[(i, x)].total_cmp(&self.entries[(i, y)]))
                            .map_or(0, |c| c - start)
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn encode_indicator(t: &CategoricalTable) -> IndicatorMatrix {
    let layout = t.layout().clone();
    let mut entries = DMatrix::zeros(t.n(), layout.n_categories());
    for i in 0..t.n() {
        for (j, &x) in t.row(i).iter().enumerate() {
            entries[(i, layout.column(j, x))] = 1.0;
        }
    }
    IndicatorMatrix { entries, layout }
}

/// `B = AᵀA` with integer entries.
#[derive(Debug, Clone, PartialEq)]
pub struct BurtMatrix {
    entries: DMatrix<i64>,
    layout: CategoryLayout,
}

impl BurtMatrix {
    pub fn entries(&self) -> &DMatrix<i64> {
        &self.entries
    }

    pub fn layout(&self) -> &CategoryLayout {
        &self.layout
    }

    /// Block `B^{j,j2}`: the cross tabulation of variables `j` and `j2`.
    pub fn block(&self, j: usize, j2: usize) -> DMatrix<i64> {
        let (r, c) = (self.layout.block(j), self.layout.block(j2));
        self.entries
            .view((r.start, c.start), (r.len(), c.len()))
            .into_owned()
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        self.entries.map(|x| x as f64)
    }
}

pub fn burt_matrix(a: &IndicatorMatrix) -> BurtMatrix {
    // integer-valued, so the floating product is exact for n < 2^53
    let gram = a.entries.tr_mul(&a.entries);
    BurtMatrix {
        entries: gram.map(|x| x.round() as i64),
        layout: a.layout.clone(),
    }
}

/// Normalized column margins `p` of `A`; each variable block sums to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginVector {
    p: DVector<f64>,
    layout: CategoryLayout,
}

impl MarginVector {
    /// Validates that every block is a strictly positive probability vector.
    pub fn new(p: DVector<f64>, layout: CategoryLayout) -> Result<Self> {
        if p.len() != layout.n_categories() {
            return Err(Error::LayoutMismatch);
        }
        for (j, b) in layout.blocks().enumerate() {
            for c in b.clone() {
                if !(p[c] > 0.0) {
                    return Err(Error::EmptyCategory {
                        variable: j,
                        category: c - b.start,
                    });
                }
            }
        }
        Ok(Self { p, layout })
    }

    pub fn p(&self) -> &DVector<f64> {
        &self.p
    }

    pub fn layout(&self) -> &CategoryLayout {
        &self.layout
    }

    pub fn block(&self, j: usize) -> &[f64] {
        &self.p.as_slice()[self.layout.block(j)]
    }

    pub fn sqrt(&self) -> DVector<f64> {
        self.p.map(f64::sqrt)
    }

    pub fn inv_sqrt(&self) -> DVector<f64> {
        self.p.map(|x| 1.0 / x.sqrt())
    }
}

pub fn category_margins(a: &IndicatorMatrix) -> Result<MarginVector> {
    let n = a.n() as f64;
    let p = DVector::from_iterator(
        a.entries.ncols(),
        a.entries.column_iter().map(|col| col.sum() / n),
    );
    MarginVector::new(p, a.layout.clone())
}

/// Contingency counts of variable `j` (rows) against `j2` (columns).
pub fn cross_tab(t: &CategoricalTable, j: usize, j2: usize) -> Result<DMatrix<i64>> {
    let m = t.m();
    for idx in [j, j2] {
        if idx >= m {
            return Err(Error::IndexOutOfRange { index: idx, len: m });
        }
    }
    if j == j2 {
        return Err(Error::SameVariable(j));
    }
    let counts = t.layout().counts();
    let mut out = DMatrix::zeros(counts[j], counts[j2]);
    for i in 0..t.n() {
        out[(t.code(i, j), t.code(i, j2))] += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_row_table() -> CategoricalTable {
        CategoricalTable::from_one_based(&[
            vec![1, 1],
            vec![2, 3],
            vec![1, 2],
            vec![2, 3],
            vec![2, 2],
            vec![2, 2],
        ])
        .unwrap()
    }

    #[test]
    fn indicator_of_worked_example() {
        let a = encode_indicator(&six_row_table());
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(6, 5, &[
            1., 0., 1., 0., 0.,
            0., 1., 0., 0., 1.,
            1., 0., 0., 1., 0.,
            0., 1., 0., 0., 1.,
            0., 1., 0., 1., 0.,
            0., 1., 0., 1., 0.,
        ]);
        assert_eq!(a.entries(), &expected);
        assert_eq!(a.layout().offsets(), &[0, 2]);
    }

    #[test]
    fn burt_of_worked_example() {
        let b = burt_matrix(&encode_indicator(&six_row_table()));
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(5, 5, &[
            2, 0, 1, 1, 0,
            0, 4, 0, 2, 2,
            1, 0, 1, 0, 0,
            1, 2, 0, 3, 0,
            0, 2, 0, 0, 2,
        ]);
        assert_eq!(b.entries(), &expected);
        assert_eq!(b.block(0, 1), DMatrix::from_row_slice(2, 3, &[1, 1, 0, 0, 2, 2]));
    }

    #[test]
    fn margins_of_worked_example() {
        let p = category_margins(&encode_indicator(&six_row_table())).unwrap();
        let expected = [2. / 6., 4. / 6., 1. / 6., 3. / 6., 2. / 6.];
        for (x, y) in p.p().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_tab_matches_burt_block_and_rejects_same_variable() {
        let t = six_row_table();
        let ct = cross_tab(&t, 0, 1).unwrap();
        assert_eq!(ct, DMatrix::from_row_slice(2, 3, &[1, 1, 0, 0, 2, 2]));
        assert!(matches!(cross_tab(&t, 1, 1), Err(Error::SameVariable(1))));
        assert!(matches!(cross_tab(&t, 0, 2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn minimal_indicator() {
        let t = CategoricalTable::new(vec!["x".into()], &[vec![0]], vec![2], None).unwrap();
        let a = encode_indicator(&t);
        assert_eq!(a.entries(), &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn burt_of_raw_column_of_ones() {
        let a = IndicatorMatrix::from_raw(DMatrix::from_element(7, 1, 1.0), vec![1]).unwrap();
        assert_eq!(burt_matrix(&a).entries(), &DMatrix::from_element(1, 1, 7));
    }

    #[test]
    fn empty_category_is_reported_then_droppable() {
        let t = CategoricalTable::new(
            vec!["a".into(), "b".into()],
            &[vec![0, 0], vec![1, 2], vec![0, 2]],
            vec![2, 3],
            None,
        )
        .unwrap();
        let a = encode_indicator(&t);
        assert!(matches!(
            category_margins(&a),
            Err(Error::EmptyCategory { variable: 1, category: 1 })
        ));
        let (reduced, dropped) = t.drop_empty_categories().unwrap();
        assert_eq!(dropped, vec![(1, 1)]);
        assert_eq!(reduced.layout().counts(), &[2, 2]);
        assert_eq!(reduced.labels()[1], vec!["1".to_string(), "3".to_string()]);
        assert!(category_margins(&encode_indicator(&reduced)).is_ok());
    }

    #[test]
    fn csv_levels_follow_first_appearance() {
        let data = "v1,v2\na,x\nb,z\na,y\nb,z\nb,y\nb,y\n";
        let t = read_table(data.as_bytes(), &TableSchema::default()).unwrap();
        assert_eq!(t.layout().counts(), &[2, 3]);
        assert_eq!(t.labels()[1], vec!["x", "z", "y"]);
        assert_eq!(t.row(1), &[1, 1]);
    }

    #[test]
    fn csv_single_level_and_empty_are_errors() {
        let one_row = "a,b\n0,1\n";
        assert!(matches!(
            read_table(one_row.as_bytes(), &TableSchema::default()),
            Err(Error::SingleLevel { .. })
        ));
        assert!(read_table("".as_bytes(), &TableSchema::default()).is_err());
        assert!(matches!(
            read_table("a,b\n".as_bytes(), &TableSchema::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn csv_balanced_design() {
        let data = "u;v\n0;0\n0;1\n1;0\n1;1\n";
        let schema = TableSchema {
            delimiter: b';',
            columns: None,
        };
        let t = read_table(data.as_bytes(), &schema).unwrap();
        let p = category_margins(&encode_indicator(&t)).unwrap();
        assert!(p.p().iter().all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn csv_column_selection() {
        let data = "id,q1,q2\n1,a,x\n2,b,y\n3,a,y\n";
        let schema = TableSchema {
            delimiter: b',',
            columns: Some(vec!["q2".into(), "q1".into()]),
        };
        let t = read_table(data.as_bytes(), &schema).unwrap();
        assert_eq!(t.names(), &["q2", "q1"]);
        let bad = TableSchema {
            delimiter: b',',
            columns: Some(vec!["nope".into()]),
        };
        assert!(matches!(read_table(data.as_bytes(), &bad), Err(Error::UnknownColumn(_))));
    }

    #[test]
    fn schema_export_has_counts() {
        let s = six_row_table().schema();
        assert_eq!(s.variables[0].counts, vec![2, 4]);
        assert_eq!(s.variables[1].counts, vec![1, 3, 2]);
        let json = serde_json::to_string(&s).unwrap();
        let back: TableSchemaExport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn layout_locate_inverts_column() {
        let l = CategoryLayout::new(vec![2, 3, 4]);
        for j in 0..3 {
            for c in 0..l.counts()[j] {
                assert_eq!(l.locate(l.column(j, c)), (j, c));
            }
        }
    }
}
