//! Per-cluster linear charts and the dimension diagnostics built on them.

mod pca;
mod sweep;

pub use pca::{
    fit_pca, principal_axes, project, project_cloud, reconstruct, reconstruct_cloud, PcaChart,
    PrincipalAxes,
};
pub use sweep::{
    ajd_sweep, ajd_sweep_with, estimate_dimension, global_pca_ajd, AjdSweep, ClusterCurve,
    DimensionVerdict, SkippedCluster, Verdict,
};
