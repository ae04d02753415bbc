//! The learned atlas: per-cluster PCA forward charts paired with trained
//! inverse networks, plus generative sampling through them.

mod generate;
mod mlp;
mod train;

pub use generate::{
    generate, sample_ball, BallSample, GenerateParams, GeneratedCloud, SampleCount,
};
pub use mlp::{init_mlp, Activation, Architecture, Layer, MlpInverse, Standardizer};
pub use train::{
    cross_validate, cross_validate_with, kfold_partition, standardized_mse, train_inverse,
    TrainParams, TrainedInverse,
};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterCover;
use crate::dataset::PointCloud;
use crate::distortion::ajd;
use crate::embedding::{fit_pca, project, reconstruct, PcaChart};
use crate::error::{Error, Result};
use crate::par::Exec;

pub const FORMAT: &str = "manifold-atlas";
pub const FORMAT_VERSION: u32 = 1;

/// One chart of the atlas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasChart {
    pub cluster: usize,
    pub forward: PcaChart,
    pub inverse: MlpInverse,
    /// Embeddings of the expanded cluster's points; generative sampling draws
    /// balls around these.
    pub embedded: Vec<Vec<f64>>,
    /// Own (pre-expansion) member count.
    pub raw_size: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atlas {
    pub format: String,
    pub version: u32,
    pub dim: usize,
    pub ambient_dim: usize,
    pub column_names: Vec<String>,
    pub cover: ClusterCover,
    pub charts: Vec<AtlasChart>,
    pub training: TrainParams,
}

impl Atlas {
    pub fn chart(&self, cluster: usize) -> Result<&AtlasChart> {
        self.charts
            .iter()
            .find(|c| c.cluster == cluster)
            .ok_or(Error::UnknownCluster(cluster))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self).map_err(|e| Error::Serialization(e.to_string()))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Atlas> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let atlas: Atlas = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
        atlas.validate()?;
        Ok(atlas)
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT || self.version != FORMAT_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported container {} v{} (expected {FORMAT} v{FORMAT_VERSION})",
                self.format, self.version
            )));
        }
        for c in &self.charts {
            let ok = c.forward.dim() == self.dim
                && c.forward.ambient_dim() == self.ambient_dim
                && c.inverse.input_dim() == self.dim
                && c.inverse.output_dim() == self.ambient_dim
                && c.inverse.is_smooth_chain()
                && c.embedded.iter().all(|e| e.len() == self.dim);
            if !ok {
                return Err(Error::Serialization(format!(
                    "chart {} has inconsistent dimensions",
                    c.cluster
                )));
            }
        }
        Ok(())
    }
}

/// Fits a chart of dimension `dim` to every expanded cluster of `cover` and
/// trains its inverse, one cluster per worker. Failures are collected per chart.
pub fn build_atlas(
    pc: &PointCloud,
    cover: &ClusterCover,
    dim: usize,
    params: &TrainParams,
    exec: Exec,
) -> Result<Atlas> {
    if cover.n_points() != pc.n_points() {
        return Err(Error::DimensionMismatch {
            expected: cover.n_points(),
            actual: pc.n_points(),
        });
    }
    let sizes = cover.sizes();
    let results = exec.map_range(cover.k, |c| -> Result<AtlasChart> {
        let points = pc.select_rows(&cover.expanded_members[c]);
        let forward = fit_pca(&points, dim, c)?;
        let chart_params = TrainParams {
            seed: params.seed.wrapping_add(c as u64),
            ..*params
        };
        let trained = train_inverse(&forward, &points, &chart_params)?;
        let embedded = points
            .rows()
            .map(|r| project(&forward, r))
            .collect::<Result<Vec<_>>>()?;
        log::info!(
            "chart {c}: {} points, loss {:.3e} -> {:.3e}",
            points.n_points(),
            trained.initial_loss,
            trained.final_loss
        );
        Ok(AtlasChart {
            cluster: c,
            forward,
            inverse: trained.net,
            embedded,
            raw_size: sizes[c],
            initial_loss: trained.initial_loss,
            final_loss: trained.final_loss,
        })
    });
    let mut charts = Vec::with_capacity(cover.k);
    let mut failures = Vec::new();
    for (c, r) in results.into_iter().enumerate() {
        match r {
            Ok(chart) => charts.push(chart),
            Err(e) => failures.push((c, e.to_string())),
        }
    }
    if !failures.is_empty() {
        return Err(Error::ChartFailures(failures));
    }
    Ok(Atlas {
        format: FORMAT.to_string(),
        version: FORMAT_VERSION,
        dim,
        ambient_dim: pc.dim(),
        column_names: pc.column_names().to_vec(),
        cover: cover.clone(),
        charts,
        training: *params,
    })
}

/// `destandardize(net(standardize(y)))` for the chart of `cluster`.
pub fn map_inverse(atlas: &Atlas, cluster: usize, y: &[f64]) -> Result<Vec<f64>> {
    atlas.chart(cluster)?.inverse.predict(y)
}

/// How well one chart reproduces its cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartEvaluation {
    pub cluster: usize,
    /// AJD between the cluster and the network's reconstructions.
    pub ajd_network: f64,
    /// AJD between the cluster and the linear PCA reconstructions.
    pub ajd_linear: f64,
    /// Network MSE in standardized output units.
    pub mse: f64,
}

/// Scores every chart of `atlas` against the cloud it was trained on.
pub fn evaluate_atlas(
    atlas: &Atlas,
    pc: &PointCloud,
    h: usize,
    exec: Exec,
) -> Result<Vec<ChartEvaluation>> {
    let evals = exec.map_slice(&atlas.charts, |chart| -> Result<ChartEvaluation> {
        let members = &atlas.cover.expanded_members[chart.cluster];
        let points = pc.select_rows(members);
        let mut net_out = Vec::with_capacity(points.n_points() * pc.dim());
        let mut lin_out = Vec::with_capacity(points.n_points() * pc.dim());
        for y in &chart.embedded {
            net_out.extend(chart.inverse.predict(y)?);
            lin_out.extend(reconstruct(&chart.forward, y)?);
        }
        let net_cloud = PointCloud::from_flat(net_out, points.n_points(), pc.dim())?;
        let lin_cloud = PointCloud::from_flat(lin_out, points.n_points(), pc.dim())?;
        let targets: Vec<Vec<f64>> = points.rows().map(<[f64]>::to_vec).collect();
        Ok(ChartEvaluation {
            cluster: chart.cluster,
            ajd_network: ajd(&points, &net_cloud, h)?.ajd,
            ajd_linear: ajd(&points, &lin_cloud, h)?.ajd,
            mse: standardized_mse(&chart.inverse, &chart.embedded, &targets),
        })
    });
    evals.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{expand_transitions, kmeans, KMeansParams};
    use crate::neighbors::knn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_atlas() -> (PointCloud, Atlas) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rows: Vec<Vec<f64>> = (0..120)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.random_range(0.0..4.0), rng.random_range(0.0..1.0));
                vec![a, b, (a * 0.8).sin()]
            })
            .collect();
        let pc = PointCloud::from_rows(&rows).unwrap();
        let cover = expand_transitions(
            &kmeans(&pc, KMeansParams::new(2, 0)).unwrap(),
            &knn(&pc, 5).unwrap(),
        )
        .unwrap();
        let params = TrainParams {
            epochs: 20,
            architecture: Architecture {
                hidden_layers: 2,
                hidden_width: Some(8),
            },
            ..TrainParams::default()
        };
        let atlas = build_atlas(&pc, &cover, 2, &params, Exec::default()).unwrap();
        (pc, atlas)
    }

    #[test]
    fn container_round_trips_bit_exactly() {
        let (_, atlas) = small_atlas();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("atlas.json");
        atlas.save(&path).unwrap();
        let back = Atlas::load(&path).unwrap();
        assert_eq!(back, atlas);
        for (a, b) in atlas.charts.iter().zip(&back.charts) {
            let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
            assert_eq!(bits(a.inverse.parameters()), bits(b.inverse.parameters()));
            assert_eq!(bits(a.forward.mean.clone()), bits(b.forward.mean.clone()));
        }
    }

    #[test]
    fn corrupt_or_foreign_containers_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, b"{not json").unwrap();
        assert!(matches!(Atlas::load(&path), Err(Error::Serialization(_))));
        assert!(matches!(
            Atlas::load(dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));

        let (_, mut atlas) = small_atlas();
        atlas.version = 99;
        atlas.save(&path).unwrap();
        assert!(Atlas::load(&path).is_err());
    }

    #[test]
    fn map_inverse_checks_cluster() {
        let (_, atlas) = small_atlas();
        assert!(map_inverse(&atlas, 0, &[0.0, 0.0]).is_ok());
        assert!(matches!(
            map_inverse(&atlas, 7, &[0.0, 0.0]),
            Err(Error::UnknownCluster(7))
        ));
        assert!(map_inverse(&atlas, 0, &[0.0]).is_err());
    }

    #[test]
    fn rank_too_small_fails_per_chart() {
        let (pc, atlas) = small_atlas();
        let err = build_atlas(&pc, &atlas.cover, 4, &atlas.training, Exec::default()).unwrap_err();
        match err {
            Error::ChartFailures(f) => assert_eq!(f.len(), 2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn evaluation_reports_every_chart() {
        let (pc, atlas) = small_atlas();
        let evals = evaluate_atlas(&atlas, &pc, 5, Exec::default()).unwrap();
        assert_eq!(evals.len(), 2);
        for e in evals {
            assert!((0.0..=1.0).contains(&e.ajd_network));
            assert!(e.mse.is_finite());
        }
    }
}
