//! Local neighborhoods: k-means partition plus transition-point expansion so
//! adjacent clusters overlap along their borders.

use std::collections::BTreeSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::neighbors::NeighborTable;
use crate::par::Exec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeansParams {
            k,
            seed,
            max_iters: 300,
            tol: 1e-9,
        }
    }
}

/// A k-means partition and its transition-expanded cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterCover {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Per cluster, sorted point indices: own members plus adopted neighbors.
    pub expanded_members: Vec<Vec<usize>>,
    /// Points adopted into at least one cluster other than their own, sorted.
    pub transition_points: Vec<usize>,
    /// Neighbor count used for expansion; `None` until expanded.
    pub l: Option<usize>,
    /// Within-cluster sum of squares after seeding and after each Lloyd step.
    pub wcss_history: Vec<f64>,
}

impl ClusterCover {
    pub fn n_points(&self) -> usize {
        self.assignment.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Own members of cluster `c`, ascending.
    pub fn members(&self, c: usize) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == c)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn is_expanded(&self) -> bool {
        self.l.is_some()
    }

    pub fn summary(&self) -> Vec<ClusterSummary> {
        let sizes = self.sizes();
        (0..self.k)
            .map(|c| ClusterSummary {
                cluster: c,
                size: sizes[c],
                expanded_size: self.expanded_members[c].len(),
                adopted: self.expanded_members[c].len() - sizes[c],
            })
            .collect()
    }

    /// CSV with one row per cluster: `cluster_id,size,expanded_size,adopted`.
    pub fn write_report(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "cluster_id,size,expanded_size,adopted")?;
        for s in self.summary() {
            writeln!(
                w,
                "{},{},{},{}",
                s.cluster, s.size, s.expanded_size, s.adopted
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub expanded_size: usize,
    pub adopted: usize,
}

fn nearest_centroid(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn wcss(pc: &PointCloud, assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    pc.rows()
        .zip(assignment)
        .map(|(r, &c)| sq_dist(r, &centroids[c]))
        .sum()
}

/// Random first centre, then repeatedly the point farthest from every chosen
/// centre (lowest index on ties).
fn farthest_point_seeds(pc: &PointCloud, k: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = pc.n_points();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..n);
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut centroids = vec![pc.row(first).to_vec()];
    let mut min_d: Vec<f64> = pc.rows().map(|r| sq_dist(r, pc.row(first))).collect();
    while centroids.len() < k {
        let mut next = usize::MAX;
        let mut far = f64::NEG_INFINITY;
        for i in 0..n {
            if !chosen[i] && min_d[i] > far {
                far = min_d[i];
                next = i;
            }
        }
        chosen[next] = true;
        let c = pc.row(next).to_vec();
        for (i, r) in pc.rows().enumerate() {
            min_d[i] = min_d[i].min(sq_dist(r, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Moves the point farthest from its centroid (among clusters with more than
/// one member) into each empty cluster. Returns whether anything changed.
fn repair_empty(pc: &PointCloud, assignment: &mut [usize], centroids: &mut [Vec<f64>]) -> bool {
    let k = centroids.len();
    let mut repaired = false;
    loop {
        let mut sizes = vec![0usize; k];
        for &c in assignment.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return repaired;
        };
        let mut victim = None;
        let mut far = f64::NEG_INFINITY;
        for (i, r) in pc.rows().enumerate() {
            let c = assignment[i];
            if sizes[c] > 1 {
                let d = sq_dist(r, &centroids[c]);
                if d > far {
                    far = d;
                    victim = Some(i);
                }
            }
        }
        let victim = victim.expect("k <= N guarantees a cluster with spare points");
        assignment[victim] = empty;
        centroids[empty] = pc.row(victim).to_vec();
        repaired = true;
    }
}

fn cluster_means(pc: &PointCloud, assignment: &[usize], k: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; pc.dim()]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in pc.rows().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(r) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|v| *v /= n as f64);
    }
    sums
}

pub fn kmeans(pc: &PointCloud, params: KMeansParams) -> Result<ClusterCover> {
    kmeans_with(pc, params, Exec::default())
}

/// Lloyd iterations from farthest-point seeds.
pub fn kmeans_with(pc: &PointCloud, params: KMeansParams, exec: Exec) -> Result<ClusterCover> {
    let n = pc.n_points();
    let k = params.k;
    if k == 0 || k > n {
        return Err(Error::OutOfRange {
            what: "k",
            value: k,
            min: 1,
            max: n,
        });
    }
    let assign = |centroids: &[Vec<f64>]| -> Vec<usize> {
        exec.map_range(n, |i| nearest_centroid(pc.row(i), centroids).0)
    };

    let mut centroids = farthest_point_seeds(pc, k, params.seed);
    let mut assignment = assign(&centroids);
    let mut history = vec![wcss(pc, &assignment, &centroids)];
    for _ in 0..params.max_iters {
        repair_empty(pc, &mut assignment, &mut centroids);
        let updated = cluster_means(pc, &assignment, k);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0f64, f64::max)
            .sqrt();
        centroids = updated;
        assignment = assign(&centroids);
        let current = wcss(pc, &assignment, &centroids);
        let previous = *history.last().unwrap();
        debug_assert!(
            current <= previous * (1.0 + 1e-12) + 1e-12,
            "k-means objective increased: {previous} -> {current}"
        );
        history.push(current);
        if shift < params.tol {
            break;
        }
    }
    if repair_empty(pc, &mut assignment, &mut centroids) {
        centroids = cluster_means(pc, &assignment, k);
    }

    let mut expanded_members = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        expanded_members[c].push(i);
    }
    Ok(ClusterCover {
        k,
        assignment,
        centroids,
        expanded_members,
        transition_points: Vec::new(),
        l: None,
        wcss_history: history,
    })
}

/// Adds to each cluster every `l`-nearest neighbor of its members that belongs
/// to another cluster. `nbrs.q()` is taken as `l`.
pub fn expand_transitions(cover: &ClusterCover, nbrs: &NeighborTable) -> Result<ClusterCover> {
    let n = cover.n_points();
    if nbrs.n_points() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: nbrs.n_points(),
        });
    }
    let mut expanded: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); cover.k];
    for (i, &c) in cover.assignment.iter().enumerate() {
        expanded[c].insert(i);
    }
    let mut transition = BTreeSet::new();
    for (p, &c) in cover.assignment.iter().enumerate() {
        for &q in nbrs.neighbors(p) {
            if cover.assignment[q] != c {
                expanded[c].insert(q);
                transition.insert(q);
            }
        }
    }
    Ok(ClusterCover {
        expanded_members: expanded
            .into_iter()
            .map(|s| s.into_iter().collect())
            .collect(),
        transition_points: transition.into_iter().collect(),
        l: Some(nbrs.q()),
        ..cover.clone()
    })
}

/// Nearest centroid to `x`; ties go to the lower cluster id.
pub fn assign_new_point(cover: &ClusterCover, x: &[f64]) -> Result<usize> {
    if x.len() != cover.dim() {
        return Err(Error::DimensionMismatch {
            expected: cover.dim(),
            actual: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "point has non-finite coordinates".into(),
        ));
    }
    Ok(nearest_centroid(x, &cover.centroids).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::knn;
    use proptest::prelude::*;
    use rand::Rng;

    fn line(n: usize) -> PointCloud {
        PointCloud::from_rows(&(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap()
    }

    fn blobs(seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for centre in [0.0, 100.0] {
            for _ in 0..50 {
                rows.push(vec![
                    centre + rng.random_range(-1.0..1.0),
                    centre + rng.random_range(-1.0..1.0),
                ]);
            }
        }
        PointCloud::from_rows(&rows).unwrap()
    }

    /// Cover from a fixed assignment (means as centroids).
    fn fixed_cover(pc: &PointCloud, assignment: Vec<usize>, k: usize) -> ClusterCover {
        let centroids = cluster_means(pc, &assignment, k);
        let mut expanded_members = vec![Vec::new(); k];
        for (i, &c) in assignment.iter().enumerate() {
            expanded_members[c].push(i);
        }
        ClusterCover {
            k,
            assignment,
            centroids,
            expanded_members,
            transition_points: vec![],
            l: None,
            wcss_history: vec![],
        }
    }

    #[test]
    fn single_cluster_is_mean() {
        let pc = blobs(1);
        let cover = kmeans(&pc, KMeansParams::new(1, 0)).unwrap();
        let mean = pc.mean();
        for (a, b) in cover.centroids[0].iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn k_equals_n_has_zero_wcss() {
        let pc = PointCloud::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 5.0],
            vec![3.0, 2.0],
            vec![-4.0, 1.0],
        ])
        .unwrap();
        let cover = kmeans(&pc, KMeansParams::new(4, 3)).unwrap();
        assert_eq!(*cover.wcss_history.last().unwrap(), 0.0);
        let mut ids = cover.assignment.clone();
        ids.sort_unstable();
        assert_eq!(ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn separates_two_blobs() {
        let pc = blobs(7);
        let cover = kmeans(&pc, KMeansParams::new(2, 11)).unwrap();
        let first = cover.assignment[0];
        for i in 0..100 {
            assert_eq!(cover.assignment[i] == first, i < 50);
        }
    }

    /// Exhaustive optimum over all 2-partitions of a small two-blob cloud.
    #[test]
    fn two_blobs_match_exhaustive_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let c = if i < 6 { 0.0 } else { 100.0 };
                vec![
                    c + rng.random_range(-1.0..1.0),
                    c + rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let pc = PointCloud::from_rows(&rows).unwrap();
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..(1 << 12) - 1 {
            let assignment: Vec<usize> = (0..12).map(|i| ((mask >> i) & 1) as usize).collect();
            let centroids = cluster_means(&pc, &assignment, 2);
            let w = wcss(&pc, &assignment, &centroids);
            if w < best.0 {
                best = (w, mask);
            }
        }
        let cover = kmeans(&pc, KMeansParams::new(2, 0)).unwrap();
        let optimum: Vec<usize> = (0..12).map(|i| ((best.1 >> i) & 1) as usize).collect();
        let same = cover.assignment == optimum;
        let flipped = cover.assignment.iter().zip(&optimum).all(|(a, b)| a != b);
        assert!(same || flipped);
    }

    #[test]
    fn k_out_of_range() {
        let pc = line(3);
        assert!(kmeans(&pc, KMeansParams::new(0, 0)).is_err());
        assert!(kmeans(&pc, KMeansParams::new(4, 0)).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let pc = PointCloud::from_rows(&[vec![1.0], vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        let cover = kmeans(&pc, KMeansParams::new(3, 0)).unwrap();
        assert!(cover.sizes().iter().all(|&s| s > 0), "{:?}", cover.sizes());
    }

    #[test]
    fn collinear_transitions() {
        let pc = line(10);
        let assignment = (0..10).map(|i| usize::from(i >= 5)).collect();
        let cover = fixed_cover(&pc, assignment, 2);

        // l = 4: every point within two steps of the cut reaches across it.
        let expanded = expand_transitions(&cover, &knn(&pc, 4).unwrap()).unwrap();
        assert_eq!(expanded.transition_points, vec![3, 4, 5, 6]);
        assert_eq!(expanded.expanded_members[0], vec![0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(expanded.expanded_members[1], vec![3, 4, 5, 6, 7, 8, 9]);

        // l = 2: only the two points adjacent to the cut.
        let expanded = expand_transitions(&cover, &knn(&pc, 2).unwrap()).unwrap();
        assert_eq!(expanded.transition_points, vec![4, 5]);
        assert_eq!(expanded.expanded_members[0], vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(expanded.expanded_members[1], vec![4, 5, 6, 7, 8, 9]);
        assert_eq!(expanded.l, Some(2));
    }

    #[test]
    fn far_clusters_have_no_transitions() {
        let pc = blobs(2);
        let cover = kmeans(&pc, KMeansParams::new(2, 0)).unwrap();
        let expanded = expand_transitions(&cover, &knn(&pc, 10).unwrap()).unwrap();
        assert!(expanded.transition_points.is_empty());
        assert_eq!(expanded.expanded_members[0], cover.expanded_members[0]);
        assert_eq!(expanded.expanded_members[1], cover.expanded_members[1]);
    }

    #[test]
    fn expansion_rejects_mismatched_table() {
        let cover = fixed_cover(&line(10), (0..10).map(|i| i / 5).collect(), 2);
        assert!(expand_transitions(&cover, &knn(&line(6), 2).unwrap()).is_err());
    }

    #[test]
    fn new_point_assignment() {
        let pc = line(10);
        let cover = fixed_cover(&pc, (0..10).map(|i| i / 5).collect(), 2);
        assert_eq!(assign_new_point(&cover, &[2.0]).unwrap(), 0);
        assert_eq!(assign_new_point(&cover, &[7.0]).unwrap(), 1);
        assert_eq!(assign_new_point(&cover, &[4.5]).unwrap(), 0);
        assert!(assign_new_point(&cover, &[1.0, 2.0]).is_err());
        assert!(assign_new_point(&cover, &[f64::NAN]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn cover_invariants(seed in 0u64..1000, k in 1usize..8, l in 1usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..120)
                .map(|_| vec![rng.random_range(0.0..10.0), rng.random_range(0.0..3.0)])
                .collect();
            let pc = PointCloud::from_rows(&rows).unwrap();
            let raw = kmeans(&pc, KMeansParams::new(k, seed)).unwrap();

            // Lloyd monotonicity
            for w in raw.wcss_history.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
            prop_assert!(raw.sizes().iter().all(|&s| s > 0));

            let cover = expand_transitions(&raw, &knn(&pc, l).unwrap()).unwrap();
            let mut membership = vec![0usize; 120];
            let mut total = 0;
            for c in 0..k {
                for i in raw.members(c) {
                    prop_assert!(cover.expanded_members[c].binary_search(&i).is_ok());
                }
                for &i in &cover.expanded_members[c] {
                    membership[i] += 1;
                    if cover.assignment[i] != c {
                        prop_assert!(cover.transition_points.binary_search(&i).is_ok());
                    }
                }
                total += cover.expanded_members[c].len();
            }
            prop_assert!(total >= 120);
            for &t in &cover.transition_points {
                prop_assert!(membership[t] >= 2);
            }

            // every training point sits with its nearest centroid (brute force)
            for i in 0..120 {
                let mine = sq_dist(pc.row(i), &cover.centroids[cover.assignment[i]]);
                for c in &cover.centroids {
                    prop_assert!(mine <= sq_dist(pc.row(i), c) + 1e-12);
                }
            }

            let again = expand_transitions(&kmeans(&pc, KMeansParams::new(k, seed)).unwrap(), &knn(&pc, l).unwrap()).unwrap();
            prop_assert_eq!(again, cover);
        }
    }
}
