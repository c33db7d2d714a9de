//! Lloyd k-means over Lab pixels with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::LabImage;

const MAX_ITERS: usize = 100;

/// Result of clustering an image's pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSet {
    pub width: usize,
    pub height: usize,
    /// Lab cluster means.
    pub centers: Vec<[f64; 3]>,
    /// Cluster index per pixel, row-major.
    pub assignment: Vec<usize>,
    /// Pixels per cluster.
    pub counts: Vec<usize>,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.assignment.len()
    }
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn nearest(p: &[f64; 3], centers: &[[f64; 3]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = dist2(p, c);
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Clusters every pixel of `lab` into at most `k` groups.
///
/// Seeding stops early once every pixel coincides with a chosen center, so
/// images with fewer than `k` distinct colors yield fewer clusters. Clusters
/// that end up empty are dropped.
///
/// # Panics
///
/// Panics if `k` is zero or the image is empty.
pub fn kmeans_lab(lab: &LabImage, k: usize, seed: u64) -> ClusterSet {
    assert!(k >= 1, "k-means needs at least one cluster");
    assert!(!lab.is_empty(), "k-means needs at least one pixel");
    let points: Vec<[f64; 3]> = (0..lab.len()).map(|i| lab.color(i).map(f64::from)).collect();
    let n = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut centers = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, &d) in d2.iter().enumerate() {
            if d > 0.0 && target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        // Guard against rounding landing on an already-covered point.
        if d2[pick] <= 0.0 {
            pick = d2.iter().rposition(|&d| d > 0.0).expect("total is positive");
        }
        let c = points[pick];
        for (d, p) in d2.iter_mut().zip(&points) {
            *d = d.min(dist2(p, &c));
        }
        centers.push(c);
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITERS {
        let mut changed = false;
        for (a, p) in assignment.iter_mut().zip(&points) {
            let k = nearest(p, &centers);
            if *a != k {
                *a = k;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![[0.0f64; 3]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (&a, p) in assignment.iter().zip(&points) {
            counts[a] += 1;
            for c in 0..3 {
                sums[a][c] += p[c];
            }
        }
        for (k, center) in centers.iter_mut().enumerate() {
            if counts[k] > 0 {
                *center = sums[k].map(|s| s / counts[k] as f64);
            }
        }
    }

    let mut counts = vec![0usize; centers.len()];
    for &a in &assignment {
        counts[a] += 1;
    }
    let mut remap = vec![usize::MAX; centers.len()];
    let mut kept_centers = Vec::new();
    let mut kept_counts = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            remap[k] = kept_centers.len();
            kept_centers.push(centers[k]);
            kept_counts.push(c);
        }
    }
    for a in &mut assignment {
        *a = remap[*a];
    }
    ClusterSet {
        width: lab.width,
        height: lab.height,
        centers: kept_centers,
        assignment,
        counts: kept_counts,
    }
}
