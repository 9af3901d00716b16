//! Coordinate export: CSV tables (`id,dim1..dimK,type`) and the JSON biplot
//! payload consumed by [`crate::biplot`].

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Row,
    Col,
    Individual,
    Category,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::Row => "row",
            PointKind::Col => "col",
            PointKind::Individual => "individual",
            PointKind::Category => "category",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "row" => Some(PointKind::Row),
            "col" => Some(PointKind::Col),
            "individual" => Some(PointKind::Individual),
            "category" => Some(PointKind::Category),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinatePoint {
    pub id: String,
    pub kind: PointKind,
    pub coords: Vec<f64>,
}

/// Round-trip exact, 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // normalizes -0
        "0".to_string()
    } else {
        format!("{:.16e}", x)
    }
}

pub fn write_coordinates_csv<W: Write>(w: W, points: &[CoordinatePoint]) -> Result<()> {
    let k = points.first().map_or(0, |p| p.coords.len());
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string()];
    header.extend((1..=k).map(|q| format!("dim{}", q)));
    header.push("type".into());
    wtr.write_record(&header)?;
    for p in points {
        if p.coords.len() != k {
            return Err(Error::InvalidArgument(format!("point {} has {} coordinates, expected {}", p.id, p.coords.len(), k)));
        }
        let mut rec = vec![p.id.clone()];
        rec.extend(p.coords.iter().map(|&x| fmt_num(x)));
        rec.push(p.kind.as_str().into());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_coordinates_csv<R: std::io::Read>(r: R) -> Result<Vec<CoordinatePoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let last = rec.len() - 1;
        let kind = PointKind::parse(&rec[last]).ok_or_else(|| Error::Malformed {
            row: i + 1,
            column: last,
            message: format!("unknown point type `{}`", &rec[last]),
        })?;
        let coords = (1..last)
            .map(|c| {
                rec[c].parse::<f64>().map_err(|e| Error::Malformed {
                    row: i + 1,
                    column: c,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(CoordinatePoint {
            id: rec[0].to_string(),
            kind,
            coords,
        });
    }
    Ok(out)
}

/// Everything needed to draw a two-axis biplot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiplotData {
    pub title: String,
    pub axis_labels: [String; 2],
    pub points: Vec<CoordinatePoint>,
}

impl BiplotData {
    /// Uses dimensions 1 and 2 of `points` (padding with zeros when fewer
    /// dimensions exist). `shares` labels each axis with its inertia share.
    pub fn new(title: impl Into<String>, points: &[CoordinatePoint], shares: Option<&[f64]>) -> Self {
        let label = |q: usize| match shares.and_then(|s| s.get(q)) {
            Some(s) => format!("Dim {} ({:.1}%)", q + 1, 100.0 * s),
            None => format!("Dim {}", q + 1),
        };
        Self {
            title: title.into(),
            axis_labels: [label(0), label(1)],
            points: points
                .iter()
                .map(|p| CoordinatePoint {
                    id: p.id.clone(),
                    kind: p.kind,
                    coords: vec![
                        p.coords.first().copied().unwrap_or(0.0),
                        p.coords.get(1).copied().unwrap_or(0.0),
                    ],
                })
                .collect(),
        }
    }
}
