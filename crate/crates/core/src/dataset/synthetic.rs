use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SCurveParams {
    pub n_points: usize,
    pub seed: u64,
}

/// An S-curve sample: the 3D cloud and its `(t, height)` ground-truth chart,
/// row-aligned.
#[derive(Clone, Debug)]
pub struct SCurveSample {
    pub cloud: PointCloud,
    pub latent: PointCloud,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypersphereParams {
    /// `d` of `S^d`; the sphere spans the first `d + 1` coordinates.
    pub intrinsic_dim: usize,
    pub ambient_dim: usize,
    pub n_points: usize,
    pub seed: u64,
}

/// A cloud whose rows carry a component label.
#[derive(Clone, Debug)]
pub struct LabeledCloud {
    pub cloud: PointCloud,
    pub labels: Vec<usize>,
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The S-curve embedding of a latent `(t, height)` pair.
pub fn s_curve_point(t: f64, height: f64) -> [f64; 3] {
    [t.sin(), height, sign(t) * (t.cos() - 1.0)]
}

pub fn swiss_roll_point(t: f64, height: f64) -> [f64; 3] {
    [t * t.cos(), height, t * t.sin()]
}

fn xyz_names() -> Vec<String> {
    ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
}

fn require_points(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("n_points must be at least 1".into()));
    }
    Ok(())
}

/// Samples `t` uniformly on `[-3π/2, 3π/2]` and `height` on `[0, 2]`.
pub fn gen_s_curve(params: SCurveParams) -> Result<SCurveSample> {
    require_points(params.n_points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_points;
    let mut cloud = Vec::with_capacity(3 * n);
    let mut latent = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let t = rng.random_range(-1.5 * PI..=1.5 * PI);
        let height = rng.random_range(0.0..=2.0);
        cloud.extend_from_slice(&s_curve_point(t, height));
        latent.extend_from_slice(&[t, height]);
    }
    let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    Ok(SCurveSample {
        cloud: PointCloud::with_labels(cloud, n, 3, xyz_names(), ids.clone())?,
        latent: PointCloud::with_labels(latent, n, 2, vec!["t".into(), "height".into()], ids)?,
    })
}

/// Samples `t` uniformly on `[1.5π, 4.5π]` and `height` on `[0, 21]`.
pub fn gen_swiss_roll(n_points: usize, seed: u64) -> Result<PointCloud> {
    require_points(n_points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(3 * n_points);
    for _ in 0..n_points {
        let t = rng.random_range(1.5 * PI..=4.5 * PI);
        let height = rng.random_range(0.0..=21.0);
        data.extend_from_slice(&swiss_roll_point(t, height));
    }
    let ids = (0..n_points).map(|i| i.to_string()).collect();
    PointCloud::with_labels(data, n_points, 3, xyz_names(), ids)
}

/// Uniform unit vector in `R^dim`, by normalizing a standard normal draw.
pub(crate) fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Uniform sample of `S^d` in its first `d + 1` coordinates, zero-padded to
/// the ambient dimension.
pub fn sample_hypersphere(params: HypersphereParams) -> Result<PointCloud> {
    require_points(params.n_points)?;
    let sphere_dim = params.intrinsic_dim + 1;
    if params.ambient_dim < sphere_dim {
        return Err(Error::InvalidInput(format!(
            "ambient dimension {} cannot hold S^{}",
            params.ambient_dim, params.intrinsic_dim
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut data = vec![0.0; params.n_points * params.ambient_dim];
    for row in data.chunks_exact_mut(params.ambient_dim) {
        row[..sphere_dim].copy_from_slice(&unit_vector(&mut rng, sphere_dim));
    }
    PointCloud::from_flat(data, params.n_points, params.ambient_dim)
}

/// Unit sphere at the origin plus a unit circle in the `z = 0` plane centred
/// at `(offset, 0, 0)`. Label 0 marks sphere points, 1 circle points.
pub fn gen_sphere_circle_union(
    n_sphere: usize,
    n_circle: usize,
    offset: f64,
    seed: u64,
) -> Result<LabeledCloud> {
    if offset.is_nan() || offset <= 2.0 {
        return Err(Error::InvalidInput(format!(
            "offset must exceed 2 for disjoint components, got {offset}"
        )));
    }
    require_points(n_sphere + n_circle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_sphere + n_circle;
    let mut data = Vec::with_capacity(3 * n);
    for _ in 0..n_sphere {
        data.extend(unit_vector(&mut rng, 3));
    }
    for _ in 0..n_circle {
        let theta = rng.random_range(0.0..2.0 * PI);
        data.extend_from_slice(&[offset + theta.cos(), theta.sin(), 0.0]);
    }
    let mut labels = vec![0; n_sphere];
    labels.resize(n, 1);
    let ids = (0..n).map(|i| i.to_string()).collect();
    Ok(LabeledCloud {
        cloud: PointCloud::with_labels(data, n, 3, xyz_names(), ids)?,
        labels,
    })
}
