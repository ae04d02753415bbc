use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

/// One stage of the expression-matrix ladder, applied in the order given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PreprocessStep {
    /// Keep the `n` highest-variance columns.
    Hvg(usize),
    /// Counts-per-million row scaling.
    Cpm,
    /// `ln(1 + x)`.
    Log,
}

impl PreprocessStep {
    pub fn apply(self, pc: &PointCloud) -> Result<PointCloud> {
        match self {
            PreprocessStep::Hvg(n) => select_hvg(pc, n),
            PreprocessStep::Cpm => cpm_normalize(pc),
            PreprocessStep::Log => log_transform(pc),
        }
    }

    /// Parses a comma-separated list such as `hvg:2000,cpm,log`.
    pub fn parse_list(s: &str) -> Result<Vec<PreprocessStep>> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl FromStr for PreprocessStep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.split_once(':') {
            Some(("hvg", n)) => n
                .parse()
                .map(PreprocessStep::Hvg)
                .map_err(|_| Error::InvalidInput(format!("bad gene count in {s:?}"))),
            None if lower == "cpm" => Ok(PreprocessStep::Cpm),
            None if lower == "log" => Ok(PreprocessStep::Log),
            _ => Err(Error::InvalidInput(format!(
                "unknown preprocessing stage {s:?} (expected hvg:<n>, cpm or log)"
            ))),
        }
    }
}

impl fmt::Display for PreprocessStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreprocessStep::Hvg(n) => write!(f, "hvg:{n}"),
            PreprocessStep::Cpm => f.write_str("cpm"),
            PreprocessStep::Log => f.write_str("log"),
        }
    }
}

fn ensure_non_negative(pc: &PointCloud) -> Result<()> {
    if let Some(pos) = pc.as_flat().iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidInput(format!(
            "negative entry {} at row {}, column {}",
            pc.as_flat()[pos],
            pc.row_ids()[pos / pc.dim()],
            pc.column_names()[pos % pc.dim()]
        )));
    }
    Ok(())
}

/// Scales each row to sum to one million.
pub fn cpm_normalize(pc: &PointCloud) -> Result<PointCloud> {
    ensure_non_negative(pc)?;
    let mut data = Vec::with_capacity(pc.as_flat().len());
    for (i, row) in pc.rows().enumerate() {
        let total: f64 = row.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "row {} sums to zero; counts-per-million is undefined",
                pc.row_ids()[i]
            )));
        }
        data.extend(row.iter().map(|v| v / total * 1e6));
    }
    pc.with_data(data)
}

/// Keeps the `n_genes` columns with the largest sample variance, preserving
/// their original order. Equal variances favour the lower column index.
pub fn select_hvg(pc: &PointCloud, n_genes: usize) -> Result<PointCloud> {
    if n_genes == 0 || n_genes > pc.dim() {
        return Err(Error::OutOfRange {
            what: "n_genes",
            value: n_genes,
            min: 1,
            max: pc.dim(),
        });
    }
    let mean = pc.mean();
    let denom = (pc.n_points().max(2) - 1) as f64;
    let mut variance = vec![0.0; pc.dim()];
    for row in pc.rows() {
        for ((acc, v), m) in variance.iter_mut().zip(row).zip(&mean) {
            *acc += (v - m) * (v - m);
        }
    }
    variance.iter_mut().for_each(|v| *v /= denom);

    let mut order: Vec<usize> = (0..pc.dim()).collect();
    order.sort_by(|&a, &b| variance[b].total_cmp(&variance[a]).then(a.cmp(&b)));
    let mut keep = order[..n_genes].to_vec();
    keep.sort_unstable();
    Ok(pc.select_columns(&keep))
}

/// Entry-wise natural `ln(1 + x)`.
pub fn log_transform(pc: &PointCloud) -> Result<PointCloud> {
    ensure_non_negative(pc)?;
    pc.map_values(f64::ln_1p)
}
