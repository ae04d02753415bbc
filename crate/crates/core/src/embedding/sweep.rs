use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::pca::principal_axes;
use crate::clustering::ClusterCover;
use crate::dataset::PointCloud;
use crate::distortion::ajd_against;
use crate::error::{Error, Result};
use crate::neighbors::knn_with;
use crate::par::Exec;

/// AJD of one cluster's PCA embedding against its original points, for each
/// embedding dimension `1..=d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCurve {
    pub cluster: usize,
    pub size: usize,
    pub rank: usize,
    /// `(dimension, ajd)` in ascending dimension.
    pub points: Vec<(usize, f64)>,
}

impl ClusterCurve {
    pub fn at(&self, dim: usize) -> Option<f64> {
        self.points.iter().find(|p| p.0 == dim).map(|p| p.1)
    }

    /// Smallest dimension whose AJD is at or below `tau`.
    pub fn crossing(&self, tau: f64) -> Option<usize> {
        self.points.iter().find(|p| p.1 <= tau).map(|p| p.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCluster {
    pub cluster: usize,
    pub size: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AjdSweep {
    pub h: usize,
    pub d_max: usize,
    pub curves: Vec<ClusterCurve>,
    pub skipped: Vec<SkippedCluster>,
}

impl AjdSweep {
    /// Mean over clusters at each dimension, using the clusters whose curve
    /// reaches that dimension.
    pub fn mean_curve(&self) -> Vec<(usize, f64)> {
        let top = self
            .curves
            .iter()
            .flat_map(|c| c.points.last())
            .map(|p| p.0)
            .max()
            .unwrap_or(0);
        (1..=top)
            .filter_map(|d| {
                let vals: Vec<f64> = self.curves.iter().filter_map(|c| c.at(d)).collect();
                (!vals.is_empty()).then(|| (d, vals.iter().sum::<f64>() / vals.len() as f64))
            })
            .collect()
    }

    pub fn curve(&self, cluster: usize) -> Option<&ClusterCurve> {
        self.curves.iter().find(|c| c.cluster == cluster)
    }

    /// Long format: `cluster_id,dimension,ajd`.
    pub fn write_curves(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "cluster_id,dimension,ajd")?;
        for c in &self.curves {
            for (d, v) in &c.points {
                writeln!(w, "{},{d},{v}", c.cluster)?;
            }
        }
        Ok(())
    }

    pub fn write_mean_curve(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "dimension,ajd")?;
        for (d, v) in self.mean_curve() {
            writeln!(w, "{d},{v}")?;
        }
        Ok(())
    }
}

pub fn ajd_sweep(
    cover: &ClusterCover,
    pc: &PointCloud,
    h: usize,
    d_max: usize,
) -> Result<AjdSweep> {
    ajd_sweep_with(cover, pc, h, d_max, Exec::default())
}

/// For every expanded cluster, the AJD between its points and their PCA
/// embedding at each dimension up to `min(d_max, size − 1, rank)`. Neighbor
/// searches are restricted to the cluster's own expanded member set. Clusters
/// with at most `h` members are skipped.
pub fn ajd_sweep_with(
    cover: &ClusterCover,
    pc: &PointCloud,
    h: usize,
    d_max: usize,
    exec: Exec,
) -> Result<AjdSweep> {
    if cover.n_points() != pc.n_points() {
        return Err(Error::DimensionMismatch {
            expected: cover.n_points(),
            actual: pc.n_points(),
        });
    }
    if d_max == 0 || d_max > pc.dim() {
        return Err(Error::OutOfRange {
            what: "d_max",
            value: d_max,
            min: 1,
            max: pc.dim(),
        });
    }
    if h == 0 {
        return Err(Error::InvalidInput("h must be at least 1".into()));
    }

    let outcomes = exec.map_range(
        cover.k,
        |c| -> Result<std::result::Result<ClusterCurve, SkippedCluster>> {
            let members = &cover.expanded_members[c];
            let size = members.len();
            if size < h + 1 {
                return Ok(Err(SkippedCluster {
                    cluster: c,
                    size,
                    reason: format!("{size} points, need more than h = {h}"),
                }));
            }
            let points = pc.select_rows(members);
            let axes = principal_axes(&points)?;
            if axes.rank == 0 {
                return Ok(Err(SkippedCluster {
                    cluster: c,
                    size,
                    reason: "all points coincide".into(),
                }));
            }
            let scores = axes.scores(&points);
            let reference = knn_with(&points, h, exec)?;
            let top = d_max.min(size - 1).min(axes.rank);
            let curve = (1..=top)
                .map(|d| {
                    let flat: Vec<f64> =
                        scores.iter().flat_map(|s| s[..d].iter().copied()).collect();
                    let low = PointCloud::from_flat(flat, size, d)?;
                    Ok((d, ajd_against(&reference, &low, exec)?.ajd))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Ok(ClusterCurve {
                cluster: c,
                size,
                rank: axes.rank,
                points: curve,
            }))
        },
    );

    let mut curves = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(curve) => curves.push(curve),
            Err(skip) => {
                log::warn!("skipping cluster {}: {}", skip.cluster, skip.reason);
                skipped.push(skip);
            }
        }
    }
    Ok(AjdSweep {
        h,
        d_max,
        curves,
        skipped,
    })
}

/// AJD of a single PCA embedding of the whole cloud at dimension `d`.
pub fn global_pca_ajd(pc: &PointCloud, h: usize, d: usize) -> Result<f64> {
    let chart = super::fit_pca(pc, d, 0)?;
    let low = super::project_cloud(&chart, pc)?;
    Ok(crate::distortion::ajd(pc, &low, h)?.ajd)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    Manifold { dim: usize },
    NoManifold,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Manifold { dim } => write!(f, "manifold({dim})"),
            Verdict::NoManifold => f.write_str("no-manifold"),
            Verdict::Inconclusive => f.write_str("inconclusive"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionVerdict {
    pub verdict: Verdict,
    pub tau: f64,
    pub delta: usize,
    /// Per evaluated cluster, the first dimension with AJD ≤ tau.
    pub crossings: Vec<(usize, Option<usize>)>,
}

/// Reads a manifold dimension off aligned sweep curves.
///
/// Each cluster's crossing is its first dimension with AJD ≤ `tau`. If every
/// cluster crosses and the crossings span at most `delta`, the data is called a
/// manifold of the largest crossing dimension; a wider span means no common
/// manifold. Any cluster that never crosses is inconclusive, and so is a sweep
/// that skipped clusters (they have no curve that could cross) or evaluated none.
pub fn estimate_dimension(sweep: &AjdSweep, tau: f64, delta: usize) -> DimensionVerdict {
    let crossings: Vec<(usize, Option<usize>)> = sweep
        .curves
        .iter()
        .map(|c| (c.cluster, c.crossing(tau)))
        .collect();
    let verdict = if crossings.is_empty()
        || !sweep.skipped.is_empty()
        || crossings.iter().any(|c| c.1.is_none())
    {
        Verdict::Inconclusive
    } else {
        let dims = crossings.iter().filter_map(|c| c.1);
        let (lo, hi) = dims.fold((usize::MAX, 0), |(l, h), d| (l.min(d), h.max(d)));
        if hi - lo <= delta {
            Verdict::Manifold { dim: hi }
        } else {
            Verdict::NoManifold
        }
    };
    DimensionVerdict {
        verdict,
        tau,
        delta,
        crossings,
    }
}
