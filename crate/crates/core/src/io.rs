//! JSON matrices and CSV tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwrcError};
use crate::linalg::{cplx, ComplexMatrix};
use crate::rates::{PowerConfig, TwrcInstance};

/// Row-major JSON form of a complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl From<&ComplexMatrix> for MatrixJson {
    fn from(m: &ComplexMatrix) -> Self {
        let (rows, cols) = m.shape();
        let entries = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j)));
        MatrixJson {
            rows,
            cols,
            re: entries.clone().map(|ij| m[ij].re).collect(),
            im: entries.map(|ij| m[ij].im).collect(),
        }
    }
}

impl MatrixJson {
    /// Validates shape and finiteness; `field` names the matrix in error messages.
    pub fn to_matrix(&self, field: &str) -> Result<ComplexMatrix> {
        let n = self.rows * self.cols;
        if self.rows == 0 || self.cols == 0 {
            return Err(parse_err(field, "rows and cols must be positive"));
        }
        for (name, v) in [("re", &self.re), ("im", &self.im)] {
            if v.len() != n {
                return Err(parse_err(
                    &format!("{field}.{name}"),
                    &format!("expected {n} entries for {}x{}, got {}", self.rows, self.cols, v.len()),
                ));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(parse_err(&format!("{field}.{name}[{i}]"), "entry is not finite"));
            }
        }
        Ok(ComplexMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&r, &i)| cplx(r, i)),
        ))
    }
}

fn parse_err(field: &str, msg: &str) -> TwrcError {
    TwrcError::Parse { field: field.to_string(), msg: msg.to_string() }
}

fn json_err(field: &str, e: serde_json::Error) -> TwrcError {
    parse_err(field, &format!("line {} column {}: {e}", e.line(), e.column()))
}

pub fn matrix_to_json(m: &ComplexMatrix) -> String {
    serde_json::to_string(&MatrixJson::from(m)).expect("matrix serialization")
}

pub fn matrix_from_json(text: &str) -> Result<ComplexMatrix> {
    let j: MatrixJson = serde_json::from_str(text).map_err(|e| json_err("matrix", e))?;
    j.to_matrix("matrix")
}

pub fn write_matrix(path: &Path, m: &ComplexMatrix) -> Result<()> {
    Ok(fs::write(path, matrix_to_json(m))?)
}

pub fn read_matrix(path: &Path) -> Result<ComplexMatrix> {
    matrix_from_json(&fs::read_to_string(path)?)
}

/// Channel file. Missing downlink matrices default to the transposed uplink (reciprocity).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    pub h_ar: MatrixJson,
    pub h_br: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_ra: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_rb: Option<MatrixJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerConfig>,
}

impl ChannelFile {
    pub fn from_instance(ch: &TwrcInstance) -> Self {
        ChannelFile {
            h_ar: (&ch.h_ar).into(),
            h_br: (&ch.h_br).into(),
            h_ra: Some((&ch.h_ra).into()),
            h_rb: Some((&ch.h_rb).into()),
            power: Some(ch.power),
        }
    }

    /// Builds the instance; `fallback` supplies the powers when the file has none.
    pub fn to_instance(&self, fallback: PowerConfig) -> Result<TwrcInstance> {
        let h_ar = self.h_ar.to_matrix("h_ar")?;
        let h_br = self.h_br.to_matrix("h_br")?;
        let h_ra = match &self.h_ra {
            Some(m) => m.to_matrix("h_ra")?,
            None => h_ar.transpose(),
        };
        let h_rb = match &self.h_rb {
            Some(m) => m.to_matrix("h_rb")?,
            None => h_br.transpose(),
        };
        let power = self.power.unwrap_or(fallback);
        power.validate()?;
        TwrcInstance::new(h_ar, h_br, h_ra, h_rb, power)
    }
}

pub fn read_channels(path: &Path) -> Result<ChannelFile> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| json_err(&path.display().to_string(), e))
}

/// Float text that round-trips exactly: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header plus string rows; every cell is already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| parse_err("csv", "empty input"))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(parse_err(
                    &format!("csv line {}", i + 2),
                    &format!("expected {} fields, got {}", header.len(), row.len()),
                ));
            }
            rows.push(row);
        }
        Ok(Table { header, rows })
    }

    /// Column `name` parsed as floats.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(name, "no such column"))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[j].parse().map_err(|e| parse_err(&format!("{name} row {}", i + 1), &format!("{e}"))))
            .collect()
    }
}
