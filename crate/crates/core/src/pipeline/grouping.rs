//! Text-line construction from character boxes and word splitting.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::raster::BoundingBox;

/// Thresholds for pairing, line merging and word splitting.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupingConfig {
    pub max_height_ratio: f64,
    /// Horizontal gap limit as a multiple of the wider box's width.
    pub max_gap_factor: f64,
    /// Vertical center offset limit as a multiple of the taller box's height.
    pub max_center_offset: f64,
    /// Radians.
    pub max_orientation_diff: f64,
    pub score_threshold: f64,
    pub word_gap_factor: f64,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            max_height_ratio: 1.7,
            max_gap_factor: 2.0,
            max_center_offset: 0.5,
            max_orientation_diff: 10f64.to_radians(),
            score_threshold: 0.5,
            word_gap_factor: 2.0,
        }
    }
}

impl GroupingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.max_height_ratio,
            self.max_gap_factor,
            self.max_center_offset,
            self.max_orientation_diff,
            self.word_gap_factor,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("grouping thresholds must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::InvalidConfig("score_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Horizontal distance between two boxes; 0 when their x-ranges overlap.
pub fn horizontal_gap(a: &BoundingBox, b: &BoundingBox) -> i32 {
    (a.x.max(b.x) - a.right().min(b.right())).max(0)
}

/// Whether two boxes look like neighbouring characters of one line.
pub fn is_pair(a: &BoundingBox, b: &BoundingBox, cfg: &GroupingConfig) -> bool {
    let (ha, hb) = (a.h as f64, b.h as f64);
    if ha <= 0.0 || hb <= 0.0 {
        return false;
    }
    let ratio = ha.max(hb) / ha.min(hb);
    let gap = horizontal_gap(a, b) as f64;
    let offset = (a.center().1 - b.center().1).abs();
    ratio <= cfg.max_height_ratio
        && gap <= cfg.max_gap_factor * a.w.max(b.w) as f64
        && offset <= cfg.max_center_offset * ha.max(hb)
}

/// All index pairs `(i, j)`, `i < j`, that satisfy [`is_pair`].
pub fn pair_components(boxes: &[BoundingBox], cfg: &GroupingConfig) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if is_pair(&boxes[i], &boxes[j], cfg) {
                out.push((i, j));
            }
        }
    }
    out
}

/// A group of at least two components believed to form one line.
#[derive(Clone, Debug, PartialEq)]
pub struct TextLine {
    /// Component indices, left to right by box center.
    pub members: Vec<usize>,
    pub bbox: BoundingBox,
    /// Direction of the best-fit line through member centers, in
    /// `(-π/2, π/2]`.
    pub orientation: f64,
}

/// Orientation of the total-least-squares line through `points`, in
/// `(-π/2, π/2]`; `None` when the points nearly coincide.
pub fn fit_orientation(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x / n, sy + y / n));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx + syy < 1e-9 {
        return None;
    }
    let mut theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    if theta <= -std::f64::consts::FRAC_PI_2 {
        theta += std::f64::consts::PI;
    }
    Some(theta)
}

/// Smallest angle between two undirected line orientations.
pub fn orientation_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}

fn centers(boxes: &[BoundingBox], members: &BTreeSet<usize>) -> Vec<(f64, f64)> {
    members.iter().map(|&i| boxes[i].center()).collect()
}

fn build_line(boxes: &[BoundingBox], members: &BTreeSet<usize>) -> TextLine {
    let mut ordered: Vec<usize> = members.iter().copied().collect();
    ordered.sort_by(|&a, &b| boxes[a].center().0.total_cmp(&boxes[b].center().0).then(a.cmp(&b)));
    let bbox = ordered
        .iter()
        .map(|&i| boxes[i])
        .reduce(|a, b| a.union(&b))
        .expect("lines have members");
    TextLine {
        members: ordered,
        bbox,
        orientation: fit_orientation(&centers(boxes, members)).unwrap_or(0.0),
    }
}

/// Merges pairs that share a component into lines, as long as the two
/// groups' fitted orientations agree within `max_orientation_diff`.
///
/// Pairs are first sorted and deduplicated, and at each step the mergeable
/// couple of groups with the smallest orientation difference is merged
/// (ties broken by member sets), so the result does not depend on the order
/// of `pairs`. Groups whose orientation is undefined merge with anything.
pub fn merge_pairs(boxes: &[BoundingBox], pairs: &[(usize, usize)], cfg: &GroupingConfig) -> Vec<TextLine> {
    let mut groups: Vec<BTreeSet<usize>> = pairs
        .iter()
        .map(|&(a, b)| [a.min(b), a.max(b)])
        .filter(|[a, b]| a != b)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|p| p.into_iter().collect())
        .collect();

    loop {
        let orient: Vec<Option<f64>> = groups.iter().map(|g| fit_orientation(&centers(boxes, g))).collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if groups[i].is_disjoint(&groups[j]) {
                    continue;
                }
                let d = match (orient[i], orient[j]) {
                    (Some(a), Some(b)) => orientation_diff(a, b),
                    _ => 0.0,
                };
                if d > cfg.max_orientation_diff {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => d < bd || (d == bd && (&groups[i], &groups[j]) < (&groups[bi], &groups[bj])),
                };
                if better {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        let absorbed = groups.swap_remove(j);
        groups[i].extend(absorbed);
        groups.sort();
        groups.dedup();
    }

    groups.iter().map(|g| build_line(boxes, g)).collect()
}

/// A detected word.
#[derive(Clone, Debug, PartialEq)]
pub struct WordBox {
    pub bbox: BoundingBox,
    /// Component indices, left to right.
    pub members: Vec<usize>,
    pub score: f32,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Splits a line wherever the horizontal gap between consecutive members
/// exceeds `word_gap_factor` times the line's median gap. Scores are the
/// mean of the member scores.
pub fn split_words(line: &TextLine, boxes: &[BoundingBox], scores: &[f32], cfg: &GroupingConfig) -> Vec<WordBox> {
    let m = &line.members;
    if m.is_empty() {
        return Vec::new();
    }
    let gaps: Vec<f64> = m
        .windows(2)
        .map(|w| horizontal_gap(&boxes[w[0]], &boxes[w[1]]) as f64)
        .collect();
    let limit = if gaps.is_empty() {
        f64::INFINITY
    } else {
        cfg.word_gap_factor * median(&mut gaps.clone())
    };
    let mut words = Vec::new();
    let mut current = vec![m[0]];
    for (k, &g) in gaps.iter().enumerate() {
        if g > limit {
            words.push(std::mem::take(&mut current));
        }
        current.push(m[k + 1]);
    }
    words.push(current);
    words
        .into_iter()
        .map(|members| {
            let bbox = members
                .iter()
                .map(|&i| boxes[i])
                .reduce(|a, b| a.union(&b))
                .expect("non-empty word");
            let score = members
                .iter()
                .map(|&i| scores.get(i).copied().unwrap_or(0.0))
                .sum::<f32>()
                / members.len() as f32;
            WordBox { bbox, members, score }
        })
        .collect()
}
