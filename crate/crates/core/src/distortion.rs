//! Topological distortion between a cloud and a row-aligned representation of
//! it, measured by how much each point's `h`-nearest-neighbor set changes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataset::PointCloud;
use crate::error::{Error, Result};
use crate::neighbors::{knn_with, NeighborTable};
use crate::par::Exec;

/// Per-point Jaccard distances and their mean (the AJD).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JaccardReport {
    pub h: usize,
    pub per_point: Vec<f64>,
    pub ajd: f64,
}

impl JaccardReport {
    /// `row,jaccard` lines followed by a `# ajd=` summary line.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "row,jaccard")?;
        for (i, j) in self.per_point.iter().enumerate() {
            writeln!(w, "{i},{j}")?;
        }
        writeln!(
            w,
            "# ajd={},h={},n={}",
            self.ajd,
            self.h,
            self.per_point.len()
        )
    }
}

/// `(|a ∪ b| − |a ∩ b|) / |a ∪ b|` for two index sets. Duplicates within an
/// input are ignored.
pub fn jaccard_point(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput(
            "Jaccard distance of an empty set".into(),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    a.dedup();
    b.sort_unstable();
    b.dedup();
    Ok(sorted_jaccard(&a, &b))
}

/// Jaccard distance of two sorted, duplicate-free, non-empty slices.
fn sorted_jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - common;
    (union - common) as f64 / union as f64
}

pub fn ajd(high: &PointCloud, low: &PointCloud, h: usize) -> Result<JaccardReport> {
    ajd_with(high, low, h, Exec::default())
}

pub fn ajd_with(
    high: &PointCloud,
    low: &PointCloud,
    h: usize,
    exec: Exec,
) -> Result<JaccardReport> {
    if high.n_points() != low.n_points() {
        return Err(Error::DimensionMismatch {
            expected: high.n_points(),
            actual: low.n_points(),
        });
    }
    let reference = knn_with(high, h, exec)?;
    ajd_against(&reference, low, exec)
}

/// AJD of `low` against a precomputed neighbor table of the original cloud.
/// The table's `q` is used as `h`.
pub fn ajd_against(
    reference: &NeighborTable,
    low: &PointCloud,
    exec: Exec,
) -> Result<JaccardReport> {
    if reference.n_points() != low.n_points() {
        return Err(Error::DimensionMismatch {
            expected: reference.n_points(),
            actual: low.n_points(),
        });
    }
    let other = knn_with(low, reference.q(), exec)?;
    Ok(compare_tables(reference, &other, exec))
}

pub(crate) fn compare_tables(a: &NeighborTable, b: &NeighborTable, exec: Exec) -> JaccardReport {
    let per_point = exec.map_range(a.n_points(), |i| {
        let mut x = a.neighbors(i).to_vec();
        let mut y = b.neighbors(i).to_vec();
        x.sort_unstable();
        y.sort_unstable();
        sorted_jaccard(&x, &y)
    });
    let ajd = per_point.iter().sum::<f64>() / per_point.len() as f64;
    JaccardReport {
        h: a.q(),
        per_point,
        ajd,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn random_cloud(n: usize, m: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * m).map(|_| rng.random_range(0.0..1.0)).collect();
        PointCloud::from_flat(data, n, m).unwrap()
    }

    /// Set-arithmetic reference over fully sorted distance lists.
    fn naive_ajd(high: &PointCloud, low: &PointCloud, h: usize) -> Vec<f64> {
        let sets = |pc: &PointCloud, i: usize| -> HashSet<usize> {
            let mut all: Vec<(f64, usize)> = (0..pc.n_points())
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = pc
                        .row(i)
                        .iter()
                        .zip(pc.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d, j)
                })
                .collect();
            all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            all.into_iter().take(h).map(|p| p.1).collect()
        };
        (0..high.n_points())
            .map(|i| {
                let a = sets(high, i);
                let b = sets(low, i);
                let union = a.union(&b).count() as f64;
                let inter = a.intersection(&b).count() as f64;
                (union - inter) / union
            })
            .collect()
    }

    #[test]
    fn point_examples() {
        assert_eq!(jaccard_point(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0.0);
        assert_eq!(jaccard_point(&[1, 2], &[3, 4]).unwrap(), 1.0);
        assert_eq!(jaccard_point(&[1, 2, 3], &[2, 3, 4]).unwrap(), 0.5);
        assert_eq!(jaccard_point(&[3, 1, 2], &[4, 2, 3]).unwrap(), 0.5);
        assert!(jaccard_point(&[], &[1]).is_err());
    }

    #[test]
    fn identical_cloud_scores_zero() {
        let pc = random_cloud(100, 3, 1);
        assert_eq!(ajd(&pc, &pc, 10).unwrap().ajd, 0.0);
    }

    #[test]
    fn isometry_scores_zero() {
        let pc = random_cloud(100, 3, 2);
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        let moved: Vec<Vec<f64>> = pc
            .rows()
            .map(|r| {
                vec![
                    c * r[0] - s * r[1] + 4.0,
                    s * r[0] + c * r[1] - 1.0,
                    r[2] + 0.5,
                ]
            })
            .collect();
        let moved = PointCloud::from_rows(&moved).unwrap();
        let report = ajd(&pc, &moved, 10).unwrap();
        assert_eq!(report.ajd, 0.0);
        assert!(naive_ajd(&pc, &moved, 10).iter().all(|&j| j == 0.0));
    }

    #[test]
    fn shuffled_rows_score_near_one() {
        let pc = random_cloud(500, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut perm: Vec<usize> = (0..500).collect();
        for i in (1..500).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let shuffled = pc.select_rows(&perm);
        assert!(ajd(&pc, &shuffled, 20).unwrap().ajd > 0.8);
    }

    #[test]
    fn row_mismatch_rejected() {
        assert!(ajd(&random_cloud(10, 2, 0), &random_cloud(11, 2, 0), 3).is_err());
    }

    #[test]
    fn csv_report() {
        let pc = random_cloud(5, 2, 0);
        let r = ajd(&pc, &pc, 2).unwrap();
        let mut out = Vec::new();
        r.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.ends_with("# ajd=0,h=2,n=5\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn symmetric_bounded_and_matches_naive(
            n in 10usize..200,
            m_high in 2usize..6,
            m_low in 1usize..4,
            h_frac in 0.0f64..1.0,
            seed in 0u64..10_000,
        ) {
            let high = random_cloud(n, m_high, seed);
            let low = random_cloud(n, m_low, seed + 1);
            let h = 1 + ((n - 2) as f64 * h_frac) as usize;
            let forward = ajd(&high, &low, h).unwrap();
            let backward = ajd(&low, &high, h).unwrap();
            prop_assert!((forward.ajd - backward.ajd).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&forward.ajd));
            prop_assert!(forward.per_point.iter().all(|j| (0.0..=1.0).contains(j)));
            prop_assert_eq!(forward.per_point, naive_ajd(&high, &low, h));
        }
    }
}
