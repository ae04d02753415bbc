use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::PointCloud;
use crate::error::{Error, Result};

/// Linear forward chart of one cluster: `y = basisᵀ (x − mean)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaChart {
    pub cluster: usize,
    pub mean: Vec<f64>,
    /// `n` orthonormal principal directions, each of length `m`, strongest first.
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

impl PcaChart {
    /// Embedding dimension `n`.
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.mean.len()
    }
}

/// Full principal decomposition of a centred point set.
#[derive(Clone, Debug)]
pub struct PrincipalAxes {
    pub mean: Vec<f64>,
    /// All right singular directions, by non-increasing singular value.
    pub components: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Number of singular values above the numerical-rank cutoff.
    pub rank: usize,
}

impl PrincipalAxes {
    /// Coordinates of every row of `points` on the leading `rank` axes.
    pub fn scores(&self, points: &PointCloud) -> Vec<Vec<f64>> {
        points
            .rows()
            .map(|r| {
                self.components[..self.rank]
                    .iter()
                    .map(|c| {
                        c.iter()
                            .zip(r)
                            .zip(&self.mean)
                            .map(|((a, x), m)| a * (x - m))
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn chart(&self, cluster: usize, n: usize) -> Result<PcaChart> {
        if n > self.rank {
            return Err(Error::RankDeficient {
                requested: n,
                rank: self.rank,
            });
        }
        Ok(PcaChart {
            cluster,
            mean: self.mean.clone(),
            components: self.components[..n].to_vec(),
            singular_values: self.singular_values[..n].to_vec(),
        })
    }
}

/// SVD of the mean-centred points. Each direction's largest-magnitude entry
/// is made positive so results are reproducible.
pub fn principal_axes(points: &PointCloud) -> Result<PrincipalAxes> {
    let (rows, cols) = (points.n_points(), points.dim());
    if rows < 2 {
        return Err(Error::InvalidInput(format!(
            "PCA needs at least 2 points, got {rows}"
        )));
    }
    let mean = points.mean();
    let centred = DMatrix::from_fn(rows, cols, |i, j| points.get(i, j) - mean[j]);
    let svd = centred.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let components: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
            let mut pivot = 0;
            for (j, x) in v.iter().enumerate() {
                if x.abs() > v[pivot].abs() {
                    pivot = j;
                }
            }
            if v[pivot] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();

    let cutoff =
        singular_values.first().copied().unwrap_or(0.0) * rows.max(cols) as f64 * f64::EPSILON;
    let rank = singular_values.iter().filter(|&&s| s > cutoff).count();
    Ok(PrincipalAxes {
        mean,
        components,
        singular_values,
        rank,
    })
}

/// Fits an `n`-dimensional chart to the points of one cluster.
pub fn fit_pca(points: &PointCloud, n: usize, cluster: usize) -> Result<PcaChart> {
    let max = (points.n_points().saturating_sub(1)).min(points.dim());
    if n == 0 || n > max {
        return Err(Error::OutOfRange {
            what: "embedding dimension",
            value: n,
            min: 1,
            max,
        });
    }
    principal_axes(points)?.chart(cluster, n)
}

pub fn project(chart: &PcaChart, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != chart.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.ambient_dim(),
            actual: x.len(),
        });
    }
    Ok(chart
        .components
        .iter()
        .map(|c| {
            c.iter()
                .zip(x)
                .zip(&chart.mean)
                .map(|((a, v), m)| a * (v - m))
                .sum()
        })
        .collect())
}

/// Best linear inverse: `basis · y + mean`.
pub fn reconstruct(chart: &PcaChart, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != chart.dim() {
        return Err(Error::DimensionMismatch {
            expected: chart.dim(),
            actual: y.len(),
        });
    }
    let mut x = chart.mean.clone();
    for (c, &w) in chart.components.iter().zip(y) {
        for (xi, ci) in x.iter_mut().zip(c) {
            *xi += w * ci;
        }
    }
    Ok(x)
}

pub fn project_cloud(chart: &PcaChart, pc: &PointCloud) -> Result<PointCloud> {
    let mut data = Vec::with_capacity(pc.n_points() * chart.dim());
    for r in pc.rows() {
        data.extend(project(chart, r)?);
    }
    let names = (0..chart.dim()).map(|j| format!("pc{j}")).collect();
    PointCloud::with_labels(
        data,
        pc.n_points(),
        chart.dim(),
        names,
        pc.row_ids().to_vec(),
    )
}

pub fn reconstruct_cloud(chart: &PcaChart, embedded: &PointCloud) -> Result<PointCloud> {
    let mut data = Vec::with_capacity(embedded.n_points() * chart.ambient_dim());
    for r in embedded.rows() {
        data.extend(reconstruct(chart, r)?);
    }
    PointCloud::from_flat(data, embedded.n_points(), chart.ambient_dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cloud(n: usize, m: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::from_flat(
            (0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect(),
            n,
            m,
        )
        .unwrap()
    }

    fn planar(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(-3.0..3.0), rng.random_range(-1.0..1.0));
                vec![a + 2.0 * b + 1.0, -a + b, 0.5 * a - b + 4.0]
            })
            .collect();
        PointCloud::from_rows(&rows).unwrap()
    }

    fn gram_error(chart: &PcaChart) -> f64 {
        let mut worst = 0.0f64;
        for (i, a) in chart.components.iter().enumerate() {
            for (j, b) in chart.components.iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    #[test]
    fn planar_cloud_reconstructs_exactly() {
        let pc = planar(200, 1);
        let axes = principal_axes(&pc).unwrap();
        assert_eq!(axes.rank, 2);
        let chart = fit_pca(&pc, 2, 0).unwrap();
        for r in pc.rows() {
            let back = reconstruct(&chart, &project(&chart, r).unwrap()).unwrap();
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() < 1e-9);
            }
        }
        assert!(matches!(
            fit_pca(&pc, 3, 0),
            Err(Error::RankDeficient {
                requested: 3,
                rank: 2
            })
        ));
    }

    #[test]
    fn duplicated_points_have_rank_zero() {
        let pc = PointCloud::from_rows(&vec![vec![1.0, 2.0, 3.0]; 10]).unwrap();
        assert!(matches!(
            fit_pca(&pc, 1, 0),
            Err(Error::RankDeficient { rank: 0, .. })
        ));
    }

    #[test]
    fn dimension_limits() {
        let pc = random_cloud(3, 5, 0);
        assert!(fit_pca(&pc, 0, 0).is_err());
        assert!(fit_pca(&pc, 3, 0).is_err());
        assert!(fit_pca(&pc, 2, 0).is_ok());
        assert!(fit_pca(&random_cloud(1, 3, 0), 1, 0).is_err());
    }

    #[test]
    fn random_cluster_basis_orthonormal() {
        let pc = random_cloud(100, 10, 3);
        let chart = fit_pca(&pc, 10, 0).unwrap();
        assert!(gram_error(&chart) < 1e-10);
        assert!(chart.singular_values.windows(2).all(|w| w[0] >= w[1]));
        for c in &chart.components {
            let pivot = c
                .iter()
                .fold(0.0f64, |m, &x| if x.abs() > m.abs() { x } else { m });
            assert!(pivot > 0.0);
        }
    }

    #[test]
    fn mean_and_axis_projections() {
        let pc = random_cloud(50, 4, 9);
        let chart = fit_pca(&pc, 3, 0).unwrap();
        assert!(project(&chart, &chart.mean)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-15));
        for j in 0..3 {
            let x: Vec<f64> = chart
                .mean
                .iter()
                .zip(&chart.components[j])
                .map(|(m, c)| m + c)
                .collect();
            let y = project(&chart, &x).unwrap();
            for (i, v) in y.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-12);
            }
        }
        assert_eq!(reconstruct(&chart, &[0.0; 3]).unwrap(), chart.mean);
        assert!(project(&chart, &[0.0; 3]).is_err());
        assert!(reconstruct(&chart, &[0.0; 4]).is_err());
    }

    #[test]
    fn full_rank_round_trip_on_cluster() {
        let pc = random_cloud(40, 6, 12);
        let chart = fit_pca(&pc, 6, 0).unwrap();
        let back = reconstruct_cloud(&chart, &project_cloud(&chart, &pc).unwrap()).unwrap();
        for (a, b) in pc.as_flat().iter().zip(back.as_flat()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn projection_properties(seed in 0u64..5000, n in 1usize..5, x in proptest::collection::vec(-5.0f64..5.0, 5), y in proptest::collection::vec(-5.0f64..5.0, 5)) {
            let pc = random_cloud(30, 5, seed);
            let chart = fit_pca(&pc, n, 0).unwrap();
            prop_assert!(gram_error(&chart) < 1e-10);

            // contraction
            let py = project(&chart, &x).unwrap();
            let norm_y = py.iter().map(|v| v * v).sum::<f64>().sqrt();
            let norm_x = x.iter().zip(&chart.mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>().sqrt();
            prop_assert!(norm_y <= norm_x + 1e-12);

            // project ∘ reconstruct = id on R^n
            let yv = &y[..n];
            let round = project(&chart, &reconstruct(&chart, yv).unwrap()).unwrap();
            for (a, b) in round.iter().zip(yv) {
                prop_assert!((a - b).abs() < 1e-10);
            }

            // reconstruct ∘ project is idempotent
            let once = reconstruct(&chart, &py).unwrap();
            let twice = reconstruct(&chart, &project(&chart, &once).unwrap()).unwrap();
            for (a, b) in once.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
