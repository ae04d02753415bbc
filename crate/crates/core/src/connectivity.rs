//! Is the cloud one piece? Two views: the graph of clusters joined by shared
//! transition points, and the giant-component curve of the ε-network.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterCover;
use crate::dataset::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::neighbors::pairwise_extremes_with;
use crate::par::Exec;

/// Clusters as nodes; an edge wherever transition points are shared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionGraph {
    pub node_sizes: Vec<usize>,
    /// `(i, j, weight)` with `i < j`; weight counts adoptions in both directions.
    pub edges: Vec<(usize, usize, usize)>,
    /// Connected components as sorted cluster-id lists.
    pub components: Vec<Vec<usize>>,
}

impl TransitionGraph {
    pub fn weight(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .iter()
            .find(|e| e.0 == a && e.1 == b)
            .map_or(0, |e| e.2)
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// `cluster_id,size`
    pub fn write_nodes(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "cluster_id,size")?;
        for (c, s) in self.node_sizes.iter().enumerate() {
            writeln!(w, "{c},{s}")?;
        }
        Ok(())
    }

    /// `source,target,weight`
    pub fn write_edges(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "source,target,weight")?;
        for (a, b, wt) in &self.edges {
            writeln!(w, "{a},{b},{wt}")?;
        }
        Ok(())
    }
}

pub fn transition_graph(cover: &ClusterCover) -> Result<TransitionGraph> {
    if !cover.is_expanded() {
        return Err(Error::InvalidInput(
            "transition graph needs an expanded cover".into(),
        ));
    }
    let mut weights: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (j, members) in cover.expanded_members.iter().enumerate() {
        for &p in members {
            let i = cover.assignment[p];
            if i != j {
                *weights.entry((i.min(j), i.max(j))).or_default() += 1;
            }
        }
    }
    let mut uf = UnionFind::<usize>::new(cover.k);
    for &(a, b) in weights.keys() {
        uf.union(a, b);
    }
    let labels = uf.into_labeling();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (c, root) in labels.into_iter().enumerate() {
        groups.entry(root).or_default().push(c);
    }
    let mut components: Vec<Vec<usize>> = groups.into_values().collect();
    components.sort_by_key(|g| g[0]);
    Ok(TransitionGraph {
        node_sizes: cover.sizes(),
        edges: weights.into_iter().map(|((a, b), w)| (a, b, w)).collect(),
        components,
    })
}

/// Giant-component fraction of the ε-network over a grid of thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCurve {
    pub grid: Vec<f64>,
    pub gcc_fraction: Vec<f64>,
    /// Number of connected components at each grid value.
    pub components: Vec<usize>,
}

impl EpsilonCurve {
    /// `epsilon,gcc_fraction,components`
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "epsilon,gcc_fraction,components")?;
        for ((e, g), c) in self
            .grid
            .iter()
            .zip(&self.gcc_fraction)
            .zip(&self.components)
        {
            writeln!(w, "{e},{g},{c}")?;
        }
        Ok(())
    }
}

/// Edges of a Euclidean minimum spanning tree (dense Prim), as
/// `(length, a, b)`.
fn minimum_spanning_tree(pc: &PointCloud, exec: Exec) -> Vec<(f64, usize, usize)> {
    let n = pc.n_points();
    let mut in_tree = vec![false; n];
    // (squared distance to tree, nearest tree vertex)
    let mut best = vec![(f64::INFINITY, 0usize); n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut current = 0;
    in_tree[0] = true;
    const CHUNK: usize = 1024;
    for _ in 1..n {
        let origin = pc.row(current);
        exec.for_each_chunk_mut(&mut best, CHUNK, |ci, chunk| {
            for (off, slot) in chunk.iter_mut().enumerate() {
                let j = ci * CHUNK + off;
                if !in_tree[j] {
                    let d = sq_dist(origin, pc.row(j));
                    if d < slot.0 {
                        *slot = (d, current);
                    }
                }
            }
        });
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || best[j].0 < next_d) {
                next = j;
                next_d = best[j].0;
            }
        }
        in_tree[next] = true;
        edges.push((next_d.sqrt(), best[next].1, next));
        current = next;
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    edges
}

pub fn epsilon_curve(pc: &PointCloud, grid_size: usize) -> Result<EpsilonCurve> {
    epsilon_curve_with(pc, grid_size, Exec::default())
}

/// `grid_size` thresholds spaced linearly from the smallest nonzero to the
/// largest pairwise distance. Components of the threshold graph at ε are the
/// components of the minimum-spanning-tree edges no longer than ε, so one
/// union-find sweep over the sorted tree edges covers the whole grid.
pub fn epsilon_curve_with(pc: &PointCloud, grid_size: usize, exec: Exec) -> Result<EpsilonCurve> {
    if grid_size < 2 {
        return Err(Error::InvalidInput(format!(
            "epsilon grid needs at least 2 values, got {grid_size}"
        )));
    }
    let (lo, hi) = pairwise_extremes_with(pc, exec)?;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| {
            if i + 1 == grid_size {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (grid_size - 1) as f64
            }
        })
        .collect();

    let n = pc.n_points();
    let edges = minimum_spanning_tree(pc, exec);
    let mut uf = UnionFind::<usize>::new(n);
    let mut sizes = vec![1usize; n];
    let mut largest = 1usize;
    let mut components = n;
    let mut next_edge = 0;
    let mut gcc_fraction = Vec::with_capacity(grid_size);
    let mut counts = Vec::with_capacity(grid_size);
    for &eps in &grid {
        while next_edge < edges.len() && edges[next_edge].0 <= eps {
            let (_, a, b) = edges[next_edge];
            let (ra, rb) = (uf.find_mut(a), uf.find_mut(b));
            if ra != rb {
                let merged = sizes[ra] + sizes[rb];
                uf.union(ra, rb);
                let root = uf.find_mut(ra);
                sizes[root] = merged;
                largest = largest.max(merged);
                components -= 1;
            }
            next_edge += 1;
        }
        gcc_fraction.push(largest as f64 / n as f64);
        counts.push(components);
    }
    debug_assert!(gcc_fraction.windows(2).all(|w| w[0] <= w[1]));
    Ok(EpsilonCurve {
        grid,
        gcc_fraction,
        components: counts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ComponentVerdict {
    Single,
    /// At least this many components were joined along the curve.
    Multiple {
        at_least: usize,
    },
}

impl fmt::Display for ComponentVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentVerdict::Single => f.write_str("single"),
            ComponentVerdict::Multiple { at_least } => write!(f, "multiple(>={at_least})"),
        }
    }
}

/// Fraction the giant component must already hold before jumps count.
pub const GIANT_ONSET: f64 = 0.2;

/// Flags a step in the giant-component curve: once the giant component holds
/// more than [`GIANT_ONSET`] of the points, any single grid step that grows it
/// by more than `jump_threshold` means a separate sizeable component merged in.
pub fn classify_components(curve: &EpsilonCurve, jump_threshold: f64) -> ComponentVerdict {
    let jumps = curve
        .gcc_fraction
        .windows(2)
        .filter(|w| w[0] > GIANT_ONSET && w[1] - w[0] > jump_threshold)
        .count();
    if jumps == 0 {
        ComponentVerdict::Single
    } else {
        ComponentVerdict::Multiple {
            at_least: jumps + 1,
        }
    }
}
