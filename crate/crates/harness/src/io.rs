//! Correspondence files and small text inputs.
//!
//! Correspondence CSV: a header row naming at least `x1,y1,x2,y2` (pixels). Optional per-point
//! covariances use `cov1_00,cov1_01,cov1_10,cov1_11` and `cov2_00,...` (row-major). Column order is free.

use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Vector2};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Correspondence {
    pub x1: Vector2<f64>,
    pub x2: Vector2<f64>,
    pub cov1: Option<Matrix2<f64>>,
    pub cov2: Option<Matrix2<f64>>,
}

const COV_SUFFIX: [&str; 4] = ["00", "01", "10", "11"];

pub fn load_correspondences(path: &Path) -> Result<Vec<Correspondence>> {
    let csv_err = |source| HarnessError::Csv { path: path.to_path_buf(), source };
    let fmt_err = |msg: String| HarnessError::Format { path: path.to_path_buf(), msg };
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| fmt_err(format!("missing column `{name}`")));
    let pos = [need("x1")?, need("y1")?, need("x2")?, need("y2")?];
    let cov_cols = |view: usize| -> Result<Option<[usize; 4]>> {
        let found: Vec<Option<usize>> = COV_SUFFIX.iter().map(|s| col(&format!("cov{view}_{s}"))).collect();
        match found.iter().filter(|c| c.is_some()).count() {
            0 => Ok(None),
            4 => Ok(Some([found[0].unwrap(), found[1].unwrap(), found[2].unwrap(), found[3].unwrap()])),
            _ => Err(fmt_err(format!("incomplete covariance columns for view {view}"))),
        }
    };
    let (c1, c2) = (cov_cols(1)?, cov_cols(2)?);
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let num = |k: usize| -> Result<f64> {
            let cell = row.get(k).unwrap_or("");
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fmt_err(format!("row {}: bad number `{cell}` in column `{}`", i + 2, header[k])))
        };
        let cov = |c: Option<[usize; 4]>| -> Result<Option<Matrix2<f64>>> {
            c.map(|k| Ok(Matrix2::new(num(k[0])?, num(k[1])?, num(k[2])?, num(k[3])?))).transpose()
        };
        out.push(Correspondence {
            x1: Vector2::new(num(pos[0])?, num(pos[1])?),
            x2: Vector2::new(num(pos[2])?, num(pos[3])?),
            cov1: cov(c1)?,
            cov2: cov(c2)?,
        });
    }
    Ok(out)
}

/// Parses `n` comma- or whitespace-separated numbers.
pub fn parse_numbers(s: &str, n: Option<usize>) -> Result<Vec<f64>> {
    let v: std::result::Result<Vec<f64>, _> =
        s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(str::parse).collect();
    let v = v.map_err(|_| HarnessError::InvalidConfig(format!("cannot parse numbers from `{s}`")))?;
    if let Some(n) = n {
        if v.len() != n {
            return Err(HarnessError::InvalidConfig(format!("expected {n} numbers, found {}", v.len())));
        }
    }
    Ok(v)
}

/// Row-major 3x3 matrix from nine numbers.
pub fn parse_matrix3(s: &str) -> Result<Matrix3<f64>> {
    Ok(Matrix3::from_row_slice(&parse_numbers(s, Some(9))?))
}
