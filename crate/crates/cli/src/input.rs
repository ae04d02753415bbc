//! Input resolution: a matrix file, or a built-in generator written as
//! `gen:<name>[:key=value,...]`, followed by the optional preprocessing stages.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use manifold_atlas::dataset::{
    gen_s_curve, gen_sphere_circle_union, gen_swiss_roll, load_matrix, sample_hypersphere,
    HypersphereParams, PreprocessStep, SCurveParams,
};
use manifold_atlas::PointCloud;

use crate::GeneratorName;

pub fn load(input: &str, preprocess: Option<&str>) -> Result<PointCloud> {
    let mut pc = match input.strip_prefix("gen:") {
        Some(spec) => from_spec(spec)?,
        None => load_matrix(Path::new(input)).with_context(|| format!("loading {input}"))?,
    };
    if let Some(stages) = preprocess {
        for step in PreprocessStep::parse_list(stages)? {
            pc = step
                .apply(&pc)
                .with_context(|| format!("preprocessing stage {step}"))?;
            log::info!("after {step}: {} x {}", pc.n_points(), pc.dim());
        }
    }
    Ok(pc)
}

/// Settings shared by `generate` and `gen:` inputs.
#[derive(Clone, Debug)]
pub struct GeneratorSpec {
    pub name: GeneratorName,
    pub n: usize,
    pub seed: u64,
    pub dim: usize,
    pub ambient: usize,
    pub n_circle: Option<usize>,
    pub offset: f64,
}

pub struct Generated {
    pub cloud: PointCloud,
    pub latent: Option<PointCloud>,
    pub labels: Option<Vec<usize>>,
}

impl GeneratorSpec {
    pub fn run(&self) -> Result<Generated> {
        let plain = |cloud| Generated {
            cloud,
            latent: None,
            labels: None,
        };
        Ok(match self.name {
            GeneratorName::SCurve => {
                let s = gen_s_curve(SCurveParams {
                    n_points: self.n,
                    seed: self.seed,
                })?;
                Generated {
                    cloud: s.cloud,
                    latent: Some(s.latent),
                    labels: None,
                }
            }
            GeneratorName::SwissRoll => plain(gen_swiss_roll(self.n, self.seed)?),
            GeneratorName::Hypersphere => plain(sample_hypersphere(HypersphereParams {
                intrinsic_dim: self.dim,
                ambient_dim: self.ambient,
                n_points: self.n,
                seed: self.seed,
            })?),
            GeneratorName::SphereCircle => {
                let n_circle = self.n_circle.unwrap_or(self.n / 2);
                let u = gen_sphere_circle_union(self.n, n_circle, self.offset, self.seed)?;
                Generated {
                    cloud: u.cloud,
                    latent: None,
                    labels: Some(u.labels),
                }
            }
        })
    }
}

fn from_spec(spec: &str) -> Result<PointCloud> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let name: GeneratorName =
        clap::ValueEnum::from_str(name, true).map_err(|e| anyhow!("unknown generator: {e}"))?;
    let mut kv = BTreeMap::new();
    for pair in rest.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value in generator spec, got {pair:?}"))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    fn take<T: std::str::FromStr>(
        kv: &mut BTreeMap<String, String>,
        key: &str,
        default: T,
    ) -> Result<T> {
        match kv.remove(key) {
            Some(v) => v.parse().map_err(|_| anyhow!("bad value {v:?} for {key}")),
            None => Ok(default),
        }
    }
    let n = take(&mut kv, "n", 5000)?;
    let spec = GeneratorSpec {
        name,
        n,
        seed: take(&mut kv, "seed", 0)?,
        dim: take(&mut kv, "dim", 9)?,
        ambient: take(&mut kv, "ambient", 20)?,
        n_circle: Some(take(&mut kv, "n_circle", n / 2)?),
        offset: take(&mut kv, "offset", 5.0)?,
    };
    if let Some(k) = kv.keys().next() {
        bail!("unknown generator parameter {k:?}");
    }
    Ok(spec.run()?.cloud)
}
