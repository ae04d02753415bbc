//! Point clouds: ingestion, synthetic generators and expression-matrix
//! preprocessing.

mod io;
mod preprocess;
pub(crate) mod synthetic;

pub use io::{load_matrix, parse_matrix, save_matrix, write_matrix};
pub use preprocess::{cpm_normalize, log_transform, select_hvg, PreprocessStep};
pub use synthetic::{
    gen_s_curve, gen_sphere_circle_union, gen_swiss_roll, s_curve_point, sample_hypersphere,
    swiss_roll_point, HypersphereParams, LabeledCloud, SCurveParams, SCurveSample,
};

use std::collections::HashSet;

use crate::error::{Error, Result};

/// An `N x m` matrix of finite reals, one row per point, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    data: Vec<f64>,
    n_points: usize,
    dim: usize,
    column_names: Vec<String>,
    row_ids: Vec<String>,
}

impl PointCloud {
    /// Builds a cloud with default labels (`x0..`, `0..`).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} columns, expected {m}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(data, n, m)
    }

    pub fn from_flat(data: Vec<f64>, n_points: usize, dim: usize) -> Result<Self> {
        let column_names = (0..dim).map(|j| format!("x{j}")).collect();
        let row_ids = (0..n_points).map(|i| i.to_string()).collect();
        Self::with_labels(data, n_points, dim, column_names, row_ids)
    }

    pub fn with_labels(
        data: Vec<f64>,
        n_points: usize,
        dim: usize,
        column_names: Vec<String>,
        row_ids: Vec<String>,
    ) -> Result<Self> {
        if n_points == 0 || dim == 0 {
            return Err(Error::InvalidInput(format!(
                "point cloud must be non-empty, got {n_points}x{dim}"
            )));
        }
        if data.len() != n_points * dim {
            return Err(Error::DimensionMismatch {
                expected: n_points * dim,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / dim,
                column: pos % dim,
                message: format!("non-finite value {}", data[pos]),
            });
        }
        if column_names.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: column_names.len(),
            });
        }
        if row_ids.len() != n_points {
            return Err(Error::DimensionMismatch {
                expected: n_points,
                actual: row_ids.len(),
            });
        }
        ensure_unique("column name", &column_names)?;
        ensure_unique("row id", &row_ids)?;
        Ok(PointCloud {
            data,
            n_points,
            dim,
            column_names,
            row_ids,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Ambient dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Sub-cloud of the given rows, in the given order. Labels are carried over.
    pub fn select_rows(&self, indices: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        PointCloud {
            data,
            n_points: indices.len(),
            dim: self.dim,
            column_names: self.column_names.clone(),
            row_ids: indices.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    /// Sub-cloud keeping the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(self.n_points * columns.len());
        for row in self.rows() {
            data.extend(columns.iter().map(|&j| row[j]));
        }
        PointCloud {
            data,
            n_points: self.n_points,
            dim: columns.len(),
            column_names: columns
                .iter()
                .map(|&j| self.column_names[j].clone())
                .collect(),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Applies `f` to every entry, keeping labels. Fails if any result is non-finite.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<PointCloud> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        PointCloud::with_labels(
            data,
            self.n_points,
            self.dim,
            self.column_names.clone(),
            self.row_ids.clone(),
        )
    }

    /// Same shape and labels, new values.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Result<PointCloud> {
        PointCloud::with_labels(
            data,
            self.n_points,
            self.dim,
            self.column_names.clone(),
            self.row_ids.clone(),
        )
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<PointCloud> {
        self.map_values(|v| v * factor)
    }

    pub fn rename_columns(mut self, names: Vec<String>) -> Result<PointCloud> {
        if names.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: names.len(),
            });
        }
        ensure_unique("column name", &names)?;
        self.column_names = names;
        Ok(self)
    }

    /// Per-column arithmetic mean.
    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for row in self.rows() {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        let n = self.n_points as f64;
        mean.iter_mut().for_each(|v| *v /= n);
        mean
    }
}

fn ensure_unique(what: &str, labels: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(labels.len());
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate {what} {l:?}")));
        }
    }
    Ok(())
}

/// Squared Euclidean distance between two equally long slices.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(PointCloud::from_flat(vec![1.0, f64::NAN], 1, 2).is_err());
        assert!(PointCloud::from_flat(vec![f64::INFINITY], 1, 1).is_err());
        assert!(PointCloud::from_flat(vec![], 0, 2).is_err());
    }

    #[test]
    fn rejects_duplicate_labels() {
        let err = PointCloud::with_labels(
            vec![1.0, 2.0],
            1,
            2,
            vec!["a".into(), "a".into()],
            vec!["r".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn row_and_column_selection() {
        let pc = PointCloud::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let sub = pc.select_rows(&[1]);
        assert_eq!(sub.row(0), &[4.0, 5.0, 6.0]);
        assert_eq!(sub.row_ids(), &["1".to_string()]);
        let cols = pc.select_columns(&[2, 0]);
        assert_eq!(cols.row(1), &[6.0, 4.0]);
        assert_eq!(cols.column_names(), &["x2".to_string(), "x0".to_string()]);
        assert_eq!(pc.mean(), vec![2.5, 3.5, 4.5]);
    }
}
