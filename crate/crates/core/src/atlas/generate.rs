use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Atlas;
use crate::dataset::synthetic::unit_vector;
use crate::dataset::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Clone, Debug, PartialEq)]
pub struct BallSample {
    /// Index of the embedded point the ball was centred on.
    pub center: usize,
    pub radius: f64,
    pub point: Vec<f64>,
}

/// Picks an embedded point uniformly, takes the distance to its `r_rank`-th
/// nearest embedded neighbor as radius, and draws uniformly from that ball.
/// `r_rank = 0` gives a zero radius, i.e. the centre itself.
pub fn sample_ball(embedded: &[Vec<f64>], r_rank: usize, rng: &mut impl Rng) -> Result<BallSample> {
    if embedded.len() <= r_rank || embedded.is_empty() {
        return Err(Error::OutOfRange {
            what: "r_rank",
            value: r_rank,
            min: 0,
            max: embedded.len().saturating_sub(1),
        });
    }
    let center = rng.random_range(0..embedded.len());
    let c = &embedded[center];
    let radius = if r_rank == 0 {
        0.0
    } else {
        let mut d: Vec<f64> = embedded
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != center)
            .map(|(_, e)| sq_dist(c, e))
            .collect();
        let (_, kth, _) = d.select_nth_unstable_by(r_rank - 1, f64::total_cmp);
        kth.sqrt()
    };
    let dim = c.len();
    let direction = unit_vector(rng, dim);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    let point = c.iter().zip(&direction).map(|(x, d)| x + r * d).collect();
    Ok(BallSample {
        center,
        radius,
        point,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleCount {
    /// As many samples per chart as the cluster had own members.
    OriginalSizes,
    PerCluster(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub samples: SampleCount,
    pub r_rank: usize,
    pub seed: u64,
}

/// Generated points with the chart each one came from.
#[derive(Clone, Debug)]
pub struct GeneratedCloud {
    pub cloud: PointCloud,
    pub clusters: Vec<usize>,
}

/// Samples balls in every chart's embedding and maps the samples back to the
/// ambient space through the chart's inverse network.
pub fn generate(atlas: &Atlas, params: GenerateParams, exec: Exec) -> Result<GeneratedCloud> {
    if atlas.charts.len() != atlas.cover.k {
        return Err(Error::InvalidInput(format!(
            "atlas has {} trained charts for {} clusters",
            atlas.charts.len(),
            atlas.cover.k
        )));
    }
    let per_chart = exec.map_slice(&atlas.charts, |chart| -> Result<Vec<Vec<f64>>> {
        let count = match params.samples {
            SampleCount::OriginalSizes => chart.raw_size,
            SampleCount::PerCluster(n) => n,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(chart.cluster as u64);
        (0..count)
            .map(|_| {
                let ball = sample_ball(&chart.embedded, params.r_rank, &mut rng)?;
                chart.inverse.predict(&ball.point)
            })
            .collect()
    });
    let mut data = Vec::new();
    let mut clusters = Vec::new();
    for (chart, rows) in atlas.charts.iter().zip(per_chart) {
        for row in rows? {
            data.extend(row);
            clusters.push(chart.cluster);
        }
    }
    if clusters.is_empty() {
        return Err(Error::InvalidInput("no samples requested".into()));
    }
    let n = clusters.len();
    let ids = (0..n).map(|i| i.to_string()).collect();
    let cloud =
        PointCloud::with_labels(data, n, atlas.ambient_dim, atlas.column_names.clone(), ids)?;
    Ok(GeneratedCloud { cloud, clusters })
}
