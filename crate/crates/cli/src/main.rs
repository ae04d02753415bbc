//! `manifold-atlas`: test point clouds against the manifold hypothesis, learn
//! local atlases and sample from them.

mod commands;
mod input;
mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "manifold-atlas", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic point cloud.
    Generate(GenerateArgs),
    /// Cluster, sweep PCA dimensions and check connectivity.
    Diagnose(DiagnoseArgs),
    /// Fit per-cluster charts and train their inverse networks.
    Train(TrainArgs),
    /// Draw new points from a trained atlas.
    Sample(SampleArgs),
    /// Score a low-dimensional representation against the original data.
    Ajd(AjdArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorName {
    SCurve,
    SwissRoll,
    Hypersphere,
    SphereCircle,
}

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub name: GeneratorName,
    /// Number of points (sphere points for sphere-circle).
    #[arg(long, default_value_t = 5000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Intrinsic dimension d of the hypersphere S^d.
    #[arg(long, default_value_t = 9)]
    pub dim: usize,
    /// Ambient dimension of the hypersphere.
    #[arg(long, default_value_t = 20)]
    pub ambient: usize,
    /// Circle points for sphere-circle [default: n / 2].
    #[arg(long)]
    pub n_circle: Option<usize>,
    /// Distance between sphere and circle centres for sphere-circle.
    #[arg(long, default_value_t = 5.0)]
    pub offset: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct InputArgs {
    /// Matrix file (comma or tab separated), or `gen:<name>[:key=value,...]`.
    #[arg(long, short)]
    pub input: String,
    /// Preprocessing stages applied in order, e.g. `hvg:2000,cpm,log`.
    #[arg(long)]
    pub preprocess: Option<String>,
}

#[derive(Args, Serialize)]
pub struct CoverArgs {
    /// Number of k-means clusters.
    #[arg(long, short, default_value_t = 10)]
    pub k: usize,
    /// Neighbors consulted when adopting transition points.
    #[arg(long, short, default_value_t = 10)]
    pub l: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Serialize)]
pub struct SweepArgs {
    /// Neighborhood size for Jaccard distances.
    #[arg(long, default_value_t = 20)]
    pub h: usize,
    /// Largest PCA dimension swept [default: min(ambient dimension, 30)].
    #[arg(long)]
    pub d_max: Option<usize>,
    /// AJD threshold a curve must reach to count as crossed.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    /// Largest spread of crossing dimensions still called one manifold.
    #[arg(long, default_value_t = 2)]
    pub delta: usize,
}

#[derive(Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cover: CoverArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Number of ε values on the connectivity grid.
    #[arg(long, default_value_t = 100)]
    pub epsilon_grid: usize,
    /// Giant-component jump that signals a separate component.
    #[arg(long, default_value_t = 0.2)]
    pub jump_threshold: f64,
    /// Skip the O(N²) ε-network analysis.
    #[arg(long)]
    pub skip_epsilon: bool,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct NetworkArgs {
    #[arg(long, default_value_t = 10_000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub hidden_layers: usize,
    /// Hidden layer width [default: max(64, 2 × ambient dimension)].
    #[arg(long)]
    pub hidden_width: Option<usize>,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub cover: CoverArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub network: NetworkArgs,
    /// Chart dimension to use instead of the diagnosed one.
    #[arg(long)]
    pub force_dim: Option<usize>,
    /// Also run k-fold cross validation for every chart.
    #[arg(long)]
    pub cv: bool,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SampleArgs {
    /// Atlas container written by `train`.
    #[arg(long, short)]
    pub atlas: PathBuf,
    /// Ball radius: distance to this nearest embedded neighbor.
    #[arg(long, default_value_t = 1)]
    pub r_rank: usize,
    /// Samples per chart [default: each cluster's original size].
    #[arg(long)]
    pub n_per_cluster: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct AjdArgs {
    /// Original data.
    #[arg(long)]
    pub high: PathBuf,
    /// Representation of the same rows, in the same order.
    #[arg(long)]
    pub low: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub h: usize,
    #[arg(long, short)]
    pub out: PathBuf,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate(a) => commands::generate(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Train(a) => commands::train(&a),
        Command::Sample(a) => commands::sample(&a),
        Command::Ajd(a) => commands::ajd(&a),
    }
}
