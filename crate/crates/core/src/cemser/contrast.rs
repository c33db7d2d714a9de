//! The two contrast maps that lift low-contrast text out of its surroundings.
//!
//! Stage one clusters the image in Lab and scores each cluster by its color
//! contrast to the rest of the image times a center prior. Stage two looks
//! only at what stage one left dark, quantizes those colors coarsely and scores
//! each color bin by its contrast to the other bins.

use super::kmeans::{kmeans_lab, ClusterSet};
use crate::raster::{rgb_to_lab, to_lab, GrayMap, RasterImage};

/// Bins per channel used by the stage-two quantizer.
pub const QUANT_BINS: usize = 12;

/// Stage-one values below this mark the pixels stage two re-examines.
pub const REMAINING_THRESHOLD: f32 = 0.5;

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Min-max rescaling to [0, 1]; constant input maps to all zeros.
pub fn normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.is_nan() || lo.is_nan() || hi - lo <= 1e-12 {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Size-weighted color contrast of each cluster to all others, normalized.
pub fn contrast_cue(clusters: &ClusterSet) -> Vec<f64> {
    let n = clusters.pixel_count() as f64;
    let raw: Vec<f64> = clusters
        .centers
        .iter()
        .enumerate()
        .map(|(k, ck)| {
            clusters
                .centers
                .iter()
                .zip(&clusters.counts)
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, (cj, &nj))| nj as f64 / n * dist(ck, cj))
                .sum()
        })
        .collect();
    normalize(&raw)
}

/// One minus the mean distance of a cluster's pixels to the image center,
/// measured in half-diagonals.
pub fn spatial_cue(clusters: &ClusterSet) -> Vec<f64> {
    let (w, h) = (clusters.width, clusters.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let half_diag = (cx * cx + cy * cy).sqrt();
    let mut sums = vec![0.0f64; clusters.len()];
    for (i, &k) in clusters.assignment.iter().enumerate() {
        if half_diag > 0.0 {
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            sums[k] += ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() / half_diag;
        }
    }
    sums.iter()
        .zip(&clusters.counts)
        .map(|(s, &n)| (1.0 - s / n as f64).clamp(0.0, 1.0))
        .collect()
}

/// Per-pixel product of the contrast and spatial cues of the pixel's cluster,
/// rescaled to [0, 1].
pub fn contrast_map_stage1(img: &RasterImage, k: usize, seed: u64) -> GrayMap {
    let lab = to_lab(img);
    let clusters = kmeans_lab(&lab, k, seed);
    let cue: Vec<f64> = contrast_cue(&clusters)
        .iter()
        .zip(spatial_cue(&clusters))
        .map(|(c, s)| c * s)
        .collect();
    let cue = normalize(&cue);
    let values = clusters.assignment.iter().map(|&k| cue[k] as f32).collect();
    GrayMap::new(img.width(), img.height(), values).expect("one value per pixel")
}

/// Index of the 12×12×12 color bin holding `rgb`.
pub fn quantize_bin(rgb: [u8; 3]) -> [usize; 3] {
    rgb.map(|c| c as usize * QUANT_BINS / 256)
}

fn flat_bin(rgb: [u8; 3]) -> usize {
    let [r, g, b] = quantize_bin(rgb);
    (r * QUANT_BINS + g) * QUANT_BINS + b
}

/// Size-weighted Lab distance from each bin to every other bin.
pub fn bin_contrast(colors: &[[f64; 3]], counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    colors
        .iter()
        .enumerate()
        .map(|(k, ck)| {
            colors
                .iter()
                .zip(counts)
                .enumerate()
                .filter(|&(j, _)| j != k)
                .map(|(_, (cj, &nj))| nj as f64 / total as f64 * dist(ck, cj))
                .sum()
        })
        .collect()
}

/// Replaces each bin's value by a weighted mean over its `m` nearest bins in
/// color (itself included), with weights `T - D` for distance `D` and `T` the
/// sum of those `m` distances.
pub fn smooth_bin_values(values: &[f64], colors: &[[f64; 3]], m: usize) -> Vec<f64> {
    let m = m.min(values.len());
    if m <= 1 {
        return values.to_vec();
    }
    (0..values.len())
        .map(|k| {
            let mut near: Vec<(f64, usize)> = colors
                .iter()
                .enumerate()
                .map(|(j, c)| (dist(&colors[k], c), j))
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            near.truncate(m);
            let t: f64 = near.iter().map(|(d, _)| d).sum();
            if t <= 0.0 {
                return values[k];
            }
            near.iter().map(|&(d, j)| (t - d) * values[j]).sum::<f64>() / ((m - 1) as f64 * t)
        })
        .collect()
}

/// Contrast of the colors in the regions stage one left below
/// [`REMAINING_THRESHOLD`]; zero elsewhere.
///
/// Bins are ranked by frequency and the most frequent ones covering
/// `coverage` of the remaining pixels are kept; the rest are folded into the
/// nearest kept bin by mean Lab color.
pub fn contrast_map_stage2(img: &RasterImage, stage1: &GrayMap, coverage: f64) -> GrayMap {
    let (w, h) = (img.width(), img.height());
    let mut values = vec![0.0f32; w * h];
    let remaining: Vec<usize> = (0..w * h).filter(|&i| stage1.values[i] < REMAINING_THRESHOLD).collect();
    if remaining.is_empty() {
        return GrayMap::new(w, h, values).expect("one value per pixel");
    }

    let data = img.data();
    let rgb = |i: usize| [data[3 * i], data[3 * i + 1], data[3 * i + 2]];
    let bins = QUANT_BINS * QUANT_BINS * QUANT_BINS;
    let mut counts = vec![0usize; bins];
    let mut lab_sums = vec![[0.0f64; 3]; bins];
    for &i in &remaining {
        let b = flat_bin(rgb(i));
        counts[b] += 1;
        let lab = rgb_to_lab(rgb(i));
        for c in 0..3 {
            lab_sums[b][c] += lab[c];
        }
    }
    let mut order: Vec<usize> = (0..bins).filter(|&b| counts[b] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let colors_all: Vec<[f64; 3]> = order
        .iter()
        .map(|&b| lab_sums[b].map(|s| s / counts[b] as f64))
        .collect();

    let needed = coverage * remaining.len() as f64;
    let mut kept = 0;
    let mut covered = 0usize;
    while kept < order.len() && (kept == 0 || (covered as f64) < needed) {
        covered += counts[order[kept]];
        kept += 1;
    }

    // Map every occupied bin to a kept slot.
    let mut slot_of_bin = vec![usize::MAX; bins];
    let mut kept_counts: Vec<usize> = order[..kept].iter().map(|&b| counts[b]).collect();
    for (rank, &b) in order.iter().enumerate() {
        let slot = if rank < kept {
            rank
        } else {
            let c = &colors_all[rank];
            (0..kept)
                .min_by(|&x, &y| dist(c, &colors_all[x]).total_cmp(&dist(c, &colors_all[y])))
                .expect("at least one bin kept")
        };
        if rank >= kept {
            kept_counts[slot] += counts[b];
        }
        slot_of_bin[b] = slot;
    }
    let colors = &colors_all[..kept];
    let raw = bin_contrast(colors, &kept_counts);
    let smoothed = smooth_bin_values(&raw, colors, kept.div_ceil(4));
    let scaled = normalize(&smoothed);
    for &i in &remaining {
        values[i] = scaled[slot_of_bin[flat_bin(rgb(i))]] as f32;
    }
    GrayMap::new(w, h, values).expect("one value per pixel")
}
