use std::io::Write;

use anyhow::{bail, ensure, Context, Result};
use manifold_atlas::atlas::{
    build_atlas, cross_validate, evaluate_atlas, generate as generate_cloud, Architecture, Atlas,
    GenerateParams, SampleCount, TrainParams,
};
use manifold_atlas::clustering::{expand_transitions, kmeans, ClusterCover, KMeansParams};
use manifold_atlas::connectivity::{classify_components, epsilon_curve, transition_graph};
use manifold_atlas::dataset::{load_matrix, write_matrix};
use manifold_atlas::distortion::ajd as score_ajd;
use manifold_atlas::embedding::{
    ajd_sweep, estimate_dimension, AjdSweep, DimensionVerdict, Verdict,
};
use manifold_atlas::neighbors::knn;
use manifold_atlas::{Exec, PointCloud};
use serde_json::json;

use crate::input::{self, GeneratorSpec};
use crate::run::Run;
use crate::{AjdArgs, CoverArgs, DiagnoseArgs, GenerateArgs, SampleArgs, SweepArgs, TrainArgs};

/// Clusters below this size make local PCA and h-neighborhoods unreliable.
const SMALL_CLUSTER: usize = 50;

/// Cap on the default sweep depth for very wide inputs.
const DEFAULT_D_MAX: usize = 30;

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let spec = GeneratorSpec {
        name: args.name,
        n: args.n,
        seed: args.seed,
        dim: args.dim,
        ambient: args.ambient,
        n_circle: args.n_circle,
        offset: args.offset,
    };
    Run::start(&args.out, "generate", args, Some(args.seed))?.execute(|run| {
        let g = spec.run()?;
        run.write("cloud.csv", |w| write_matrix(&g.cloud, w))?;
        if let Some(latent) = &g.latent {
            run.write("latent.csv", |w| write_matrix(latent, w))?;
        }
        if let Some(labels) = &g.labels {
            run.write("labels.csv", |w| {
                writeln!(w, "row,label")?;
                labels
                    .iter()
                    .enumerate()
                    .try_for_each(|(i, l)| writeln!(w, "{i},{l}"))
            })?;
        }
        run.set_results(json!({ "n_points": g.cloud.n_points(), "dim": g.cloud.dim() }));
        log::info!(
            "wrote {} x {} cloud to {}",
            g.cloud.n_points(),
            g.cloud.dim(),
            args.out.display()
        );
        Ok(())
    })
}

fn build_cover(pc: &PointCloud, args: &CoverArgs) -> Result<ClusterCover> {
    let raw = kmeans(pc, KMeansParams::new(args.k, args.seed)).context("clustering")?;
    let smallest = raw.sizes().into_iter().min().unwrap_or(0);
    if smallest < SMALL_CLUSTER {
        log::warn!(
            "smallest of {} clusters has {smallest} points (< {SMALL_CLUSTER}); consider a smaller --k",
            args.k
        );
    }
    let nbrs = knn(pc, args.l).context("transition neighbors")?;
    expand_transitions(&raw, &nbrs).context("transition expansion")
}

fn sweep(
    pc: &PointCloud,
    cover: &ClusterCover,
    args: &SweepArgs,
) -> Result<(AjdSweep, DimensionVerdict)> {
    let d_max = args.d_max.unwrap_or(pc.dim().min(DEFAULT_D_MAX));
    let sweep = ajd_sweep(cover, pc, args.h, d_max).context("AJD sweep")?;
    for s in &sweep.skipped {
        log::warn!(
            "cluster {} ({} points) skipped: {}",
            s.cluster,
            s.size,
            s.reason
        );
    }
    let verdict = estimate_dimension(&sweep, args.tau, args.delta);
    Ok((sweep, verdict))
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<()> {
    Run::start(&args.out, "diagnose", args, Some(args.cover.seed))?.execute(|run| {
        let pc = input::load(&args.input.input, args.input.preprocess.as_deref())?;
        log::info!(
            "diagnosing {} points in {} dimensions",
            pc.n_points(),
            pc.dim()
        );
        let cover = build_cover(&pc, &args.cover)?;
        run.write("cover.csv", |w| cover.write_report(w))?;
        run.write("assignment.csv", |w| {
            writeln!(w, "row,cluster")?;
            cover
                .assignment
                .iter()
                .enumerate()
                .try_for_each(|(i, c)| writeln!(w, "{i},{c}"))
        })?;

        let (sweep, dimension) = sweep(&pc, &cover, &args.sweep)?;
        run.write("ajd_curves.csv", |w| sweep.write_curves(w))?;
        run.write("ajd_mean.csv", |w| sweep.write_mean_curve(w))?;

        let graph = transition_graph(&cover).context("transition graph")?;
        run.write("graph_nodes.csv", |w| graph.write_nodes(w))?;
        run.write("graph_edges.csv", |w| graph.write_edges(w))?;

        let components = if args.skip_epsilon {
            None
        } else {
            let curve = epsilon_curve(&pc, args.epsilon_grid).context("epsilon network")?;
            run.write("epsilon.csv", |w| curve.write_csv(w))?;
            Some(classify_components(&curve, args.jump_threshold))
        };

        let summary = json!({
            "n_points": pc.n_points(),
            "dim": pc.dim(),
            "seed": args.cover.seed,
            "clusters": cover.summary(),
            "skipped": sweep.skipped,
            "dimension": dimension,
            "components": components,
            "transition_graph_components": graph.n_components(),
        });
        run.write("summary.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &summary)?;
            writeln!(w)
        })?;
        let components_text = components.map_or("not computed".to_string(), |c| c.to_string());
        println!(
            "verdict: {}; components: {}; transition graph components: {}",
            dimension.verdict,
            components_text,
            graph.n_components()
        );
        run.set_results(json!({ "verdict": dimension.verdict, "components": components }));
        Ok(())
    })
}

pub fn train(args: &TrainArgs) -> Result<()> {
    Run::start(&args.out, "train", args, Some(args.cover.seed))?.execute(|run| {
        let pc = input::load(&args.input.input, args.input.preprocess.as_deref())?;
        let cover = build_cover(&pc, &args.cover)?;
        let dim = match args.force_dim {
            Some(d) => d,
            None => match sweep(&pc, &cover, &args.sweep)?.1.verdict {
                Verdict::Manifold { dim } => {
                    log::info!("diagnosed manifold dimension {dim}");
                    dim
                }
                other => bail!("diagnosis gave {other}; pass --force-dim to train anyway"),
            },
        };
        let n = &args.network;
        let params = TrainParams {
            epochs: n.epochs,
            batch_size: n.batch_size,
            learning_rate: n.learning_rate,
            architecture: Architecture {
                hidden_layers: n.hidden_layers,
                hidden_width: n.hidden_width,
            },
            seed: args.cover.seed,
            ..TrainParams::default()
        };
        let atlas =
            build_atlas(&pc, &cover, dim, &params, Exec::default()).context("training charts")?;
        atlas.save(run.output_path("atlas.json"))?;

        let evals = evaluate_atlas(&atlas, &pc, args.sweep.h, Exec::default())
            .context("evaluating charts")?;
        run.write("training_report.csv", |w| {
            writeln!(
                w,
                "cluster_id,points,raw_size,initial_loss,final_loss,ajd_network,ajd_linear,mse"
            )?;
            for (chart, e) in atlas.charts.iter().zip(&evals) {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    chart.cluster,
                    chart.embedded.len(),
                    chart.raw_size,
                    chart.initial_loss,
                    chart.final_loss,
                    e.ajd_network,
                    e.ajd_linear,
                    e.mse
                )?;
            }
            Ok(())
        })?;

        if args.cv {
            let mut rows = Vec::new();
            for chart in &atlas.charts {
                let points = pc.select_rows(&cover.expanded_members[chart.cluster]);
                let scores = cross_validate(&chart.forward, &points, args.folds, &params)
                    .with_context(|| format!("cross validation of chart {}", chart.cluster))?;
                log::info!("chart {}: CV MSE {:?}", chart.cluster, scores);
                rows.extend(
                    scores
                        .into_iter()
                        .enumerate()
                        .map(|(f, s)| (chart.cluster, f, s)),
                );
            }
            run.write("cv_report.csv", |w| {
                writeln!(w, "cluster_id,fold,mse")?;
                rows.iter()
                    .try_for_each(|(c, f, s)| writeln!(w, "{c},{f},{s}"))
            })?;
        }
        let worst = evals.iter().map(|e| e.ajd_network).fold(0.0, f64::max);
        println!(
            "trained {} charts of dimension {dim}; worst chart AJD {worst:.4}",
            atlas.charts.len()
        );
        run.set_results(json!({ "dim": dim, "charts": atlas.charts.len(), "evaluation": evals }));
        Ok(())
    })
}

pub fn sample(args: &SampleArgs) -> Result<()> {
    Run::start(&args.out, "sample", args, Some(args.seed))?.execute(|run| {
        let atlas = Atlas::load(&args.atlas)
            .with_context(|| format!("loading atlas {}", args.atlas.display()))?;
        let params = GenerateParams {
            samples: args
                .n_per_cluster
                .map_or(SampleCount::OriginalSizes, SampleCount::PerCluster),
            r_rank: args.r_rank,
            seed: args.seed,
        };
        let g = generate_cloud(&atlas, params, Exec::default()).context("sampling")?;
        run.write("generated.csv", |w| {
            let mut names = g.cloud.column_names().to_vec();
            names.push("cluster".into());
            writeln!(w, "{}", names.join(","))?;
            for (row, c) in g.cloud.rows().zip(&g.clusters) {
                let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                writeln!(w, "{},{c}", cells.join(","))?;
            }
            Ok(())
        })?;
        println!(
            "generated {} points from {} charts",
            g.cloud.n_points(),
            atlas.charts.len()
        );
        run.set_results(json!({ "n_points": g.cloud.n_points() }));
        Ok(())
    })
}

pub fn ajd(args: &AjdArgs) -> Result<()> {
    Run::start(&args.out, "ajd", args, None)?.execute(|run| {
        let high =
            load_matrix(&args.high).with_context(|| format!("loading {}", args.high.display()))?;
        let low =
            load_matrix(&args.low).with_context(|| format!("loading {}", args.low.display()))?;
        ensure!(
            high.n_points() == low.n_points(),
            "row counts differ: {} in {}, {} in {}",
            high.n_points(),
            args.high.display(),
            low.n_points(),
            args.low.display()
        );
        let report = score_ajd(&high, &low, args.h)?;
        run.write("jaccard.csv", |w| report.write_csv(w))?;
        println!("AJD = {}", report.ajd);
        run.set_results(json!({ "ajd": report.ajd, "h": args.h, "n_points": high.n_points() }));
        Ok(())
    })
}
