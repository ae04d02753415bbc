//! Exact Euclidean nearest-neighbor queries.
//!
//! Everything here is brute force on purpose: distortion scores are computed
//! from neighbor sets, and an approximate index would leak its own error into
//! them. Equal distances are ordered by ascending point index so tables are
//! fully deterministic.

use std::cmp::Ordering;

use crate::dataset::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::par::Exec;

/// The `q` nearest neighbors of every point, closest first.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborTable {
    q: usize,
    indices: Vec<usize>,
    distances: Vec<f64>,
}

impl NeighborTable {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n_points(&self) -> usize {
        self.indices.len() / self.q
    }

    /// Neighbor indices of point `i`, nearest first.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[i * self.q..(i + 1) * self.q]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i * self.q..(i + 1) * self.q]
    }
}

#[inline]
fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `q` nearest points to row `i` of `pc`, excluding `i` itself, as
/// `(squared distance, index)` pairs in ascending order.
pub(crate) fn nearest_to_row(pc: &PointCloud, i: usize, q: usize) -> Vec<(f64, usize)> {
    let query = pc.row(i);
    let mut cand: Vec<(f64, usize)> = pc
        .rows()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, r)| (sq_dist(query, r), j))
        .collect();
    if q < cand.len() {
        cand.select_nth_unstable_by(q, by_distance_then_index);
        cand.truncate(q);
    }
    cand.sort_unstable_by(by_distance_then_index);
    cand
}

pub fn knn(pc: &PointCloud, q: usize) -> Result<NeighborTable> {
    knn_with(pc, q, Exec::default())
}

pub fn knn_with(pc: &PointCloud, q: usize, exec: Exec) -> Result<NeighborTable> {
    let n = pc.n_points();
    if q == 0 || q + 1 > n {
        return Err(Error::OutOfRange {
            what: "neighbor count",
            value: q,
            min: 1,
            max: n.saturating_sub(1),
        });
    }
    let rows = exec.map_range(n, |i| nearest_to_row(pc, i, q));
    let mut indices = Vec::with_capacity(n * q);
    let mut distances = Vec::with_capacity(n * q);
    for row in rows {
        for (d2, j) in row {
            indices.push(j);
            distances.push(d2.sqrt());
        }
    }
    Ok(NeighborTable {
        q,
        indices,
        distances,
    })
}

/// Smallest nonzero and largest distance over all unordered pairs.
pub fn pairwise_extremes(pc: &PointCloud) -> Result<(f64, f64)> {
    pairwise_extremes_with(pc, Exec::default())
}

pub fn pairwise_extremes_with(pc: &PointCloud, exec: Exec) -> Result<(f64, f64)> {
    let n = pc.n_points();
    if n < 2 {
        return Err(Error::InvalidInput(
            "pairwise distances need at least two points".into(),
        ));
    }
    let per_row = exec.map_range(n, |i| {
        let a = pc.row(i);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for j in i + 1..n {
            let d = sq_dist(a, pc.row(j));
            if d > 0.0 && d < lo {
                lo = d;
            }
            hi = hi.max(d);
        }
        (lo, hi)
    });
    let (lo, hi) = per_row
        .into_iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), (a, b)| {
            (l.min(a), h.max(b))
        });
    if !lo.is_finite() {
        return Err(Error::InvalidInput("all points are identical".into()));
    }
    Ok((lo.sqrt(), hi.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    /// Sorts every other point by (distance, index) in full.
    fn naive(pc: &PointCloud, q: usize) -> Vec<Vec<usize>> {
        (0..pc.n_points())
            .map(|i| {
                let mut all: Vec<(f64, usize)> = (0..pc.n_points())
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d: f64 = pc
                            .row(i)
                            .iter()
                            .zip(pc.row(j))
                            .map(|(a, b)| (a - b).powi(2))
                            .sum();
                        (d, j)
                    })
                    .collect();
                all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                all.into_iter().take(q).map(|p| p.1).collect()
            })
            .collect()
    }

    #[test]
    fn collinear_example() {
        let t = knn(&line(&[0.0, 1.0, 3.0]), 1).unwrap();
        assert_eq!(t.neighbors(0), &[1]);
        assert_eq!(t.neighbors(1), &[0]);
        assert_eq!(t.neighbors(2), &[1]);
        assert_eq!(t.distances(2), &[2.0]);
    }

    #[test]
    fn full_query_is_permutation() {
        let pc = line(&[0.0, 4.0, 1.0, 9.0, 2.5]);
        let t = knn(&pc, 4).unwrap();
        for i in 0..5 {
            let mut others: Vec<usize> = t.neighbors(i).to_vec();
            others.sort_unstable();
            let expected: Vec<usize> = (0..5).filter(|&j| j != i).collect();
            assert_eq!(others, expected);
        }
    }

    #[test]
    fn duplicates_see_each_other_first() {
        let t = knn(&line(&[2.0, 7.0, 2.0]), 1).unwrap();
        assert_eq!(t.neighbors(0), &[2]);
        assert_eq!(t.neighbors(2), &[0]);
        assert_eq!(t.distances(0), &[0.0]);
    }

    #[test]
    fn ties_break_by_index() {
        let t = knn(&line(&[0.0, -1.0, 1.0]), 2).unwrap();
        assert_eq!(t.neighbors(0), &[1, 2]);
    }

    #[test]
    fn q_out_of_range() {
        let pc = line(&[0.0, 1.0, 2.0]);
        assert!(knn(&pc, 0).is_err());
        assert!(knn(&pc, 3).is_err());
    }

    #[test]
    fn extremes() {
        assert_eq!(
            pairwise_extremes(&line(&[0.0, 1.0, 3.0])).unwrap(),
            (1.0, 3.0)
        );
        assert_eq!(
            pairwise_extremes(&line(&[0.0, 0.0, 5.0])).unwrap(),
            (5.0, 5.0)
        );
        let shifted = line(&[100.0, 101.0, 103.0]);
        assert_eq!(pairwise_extremes(&shifted).unwrap(), (1.0, 3.0));
        assert!(pairwise_extremes(&line(&[1.0, 1.0])).is_err());
        assert!(pairwise_extremes(&line(&[1.0])).is_err());
    }

    proptest! {
        #[test]
        fn matches_naive_reference(
            seed_vals in proptest::collection::vec(-10.0f64..10.0, 6..400),
            q_frac in 0.0f64..1.0,
        ) {
            let n = seed_vals.len() / 2;
            let pc = PointCloud::from_flat(seed_vals[..2 * n].to_vec(), n, 2).unwrap();
            let q = 1 + ((n - 2) as f64 * q_frac) as usize;
            let table = knn(&pc, q).unwrap();
            let seq = knn_with(&pc, q, Exec::Sequential).unwrap();
            prop_assert_eq!(&table, &seq);
            let reference = naive(&pc, q);
            for i in 0..n {
                prop_assert_eq!(table.neighbors(i), &reference[i][..]);
                prop_assert!(table.distances(i).windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn permutation_relabels_table(vals in proptest::collection::vec(-10.0f64..10.0, 60), shift in 1usize..29) {
            let n = 30;
            let pc = PointCloud::from_flat(vals.clone(), n, 2).unwrap();
            // rotate rows by `shift`
            let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let permuted = pc.select_rows(&perm);
            let a = knn(&pc, 5).unwrap();
            let b = knn(&permuted, 5).unwrap();
            for (new_i, &old_i) in perm.iter().enumerate() {
                let relabeled: Vec<usize> = b.neighbors(new_i).iter().map(|&j| perm[j]).collect();
                prop_assert_eq!(&relabeled[..], a.neighbors(old_i));
            }
        }
    }
}
