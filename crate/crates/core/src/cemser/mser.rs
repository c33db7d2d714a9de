//! Stability scoring and maximally-stable selection over a component tree.

use std::fmt;

use super::tree::{ComponentTree, NodeId};
use crate::raster::BoundingBox;

/// Which map a component was extracted from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MapSource {
    Original,
    ContrastMap1,
    ContrastMap2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    /// Regions darker than their surroundings (lower level sets of the map).
    DarkOnLight,
    /// Regions brighter than their surroundings (lower level sets of the inverted map).
    LightOnDark,
}

impl fmt::Display for MapSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MapSource::Original => "original",
            MapSource::ContrastMap1 => "contrast_map_1",
            MapSource::ContrastMap2 => "contrast_map_2",
        })
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::DarkOnLight => "dark_on_light",
            Polarity::LightOnDark => "light_on_dark",
        })
    }
}

/// A maximally stable extremal region.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtremalComponent {
    /// `(x, y)` coordinates of every member pixel, 4-connected.
    pub pixels: Vec<(u32, u32)>,
    pub level: u8,
    pub area: usize,
    pub variation: f64,
    pub bbox: BoundingBox,
    pub source: MapSource,
    pub polarity: Polarity,
}

/// Stability-selection parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MserParams {
    pub delta: u8,
    /// Minimum area as a fraction of the image area.
    pub min_area: f64,
    /// Maximum area as a fraction of the image area.
    pub max_area: f64,
    pub max_variation: f64,
}

impl Default for MserParams {
    fn default() -> Self {
        Self {
            delta: 5,
            min_area: 0.000_05,
            max_area: 0.25,
            max_variation: 0.5,
        }
    }
}

/// Area of the ancestor of `id` (or `id` itself) that is active at `level`.
fn area_above(tree: &ComponentTree, id: NodeId, level: u16) -> usize {
    let mut cur = id;
    while let Some(p) = tree.nodes[cur].parent {
        if tree.nodes[p].level as u16 > level {
            break;
        }
        cur = p;
    }
    tree.nodes[cur].area
}

/// Largest area among the components nested in `id` that are active at
/// `level` (`id` itself when it already exists there); 0 if none.
fn largest_below(tree: &ComponentTree, id: NodeId, level: i32) -> usize {
    if level < 0 {
        return 0;
    }
    if tree.nodes[id].level as i32 <= level {
        return tree.nodes[id].area;
    }
    let mut best = 0;
    let mut stack: Vec<NodeId> = tree.nodes[id].children.clone();
    while let Some(c) = stack.pop() {
        let node = &tree.nodes[c];
        if node.level as i32 <= level {
            best = best.max(node.area);
        } else if node.area > best {
            stack.extend(&node.children);
        }
    }
    best
}

/// Stability score of every node.
///
/// For a component `R` active at level `t`, `q(t) = (|R(t+Δ)| - |R(t-Δ)|) / |R|`
/// where `R(t+Δ)` is the enclosing component at `t+Δ` and `R(t-Δ)` the largest
/// component nested in `R` at `t-Δ`. A node's variation is the minimum of
/// `q` over the levels where it is active.
pub fn node_variations(tree: &ComponentTree, delta: u8) -> Vec<f64> {
    let d = delta as i32;
    (0..tree.len())
        .map(|id| {
            let node = &tree.nodes[id];
            let start = node.level as i32;
            let end = tree.end_level(id) as i32;
            if end - start > 2 * d {
                return 0.0;
            }
            let area = node.area as f64;
            (start..end)
                .map(|t| {
                    let up = area_above(tree, id, (t + d) as u16) as f64;
                    let down = largest_below(tree, id, t - d) as f64;
                    (up - down) / area
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Nodes whose variation is a local minimum along the tree path (no greater
/// than the parent's and the largest child's), below `max_variation`, and
/// with area inside the configured fractions.
pub fn stable_nodes(tree: &ComponentTree, params: &MserParams) -> Vec<(NodeId, f64)> {
    let var = node_variations(tree, params.delta);
    let total = (tree.width * tree.height) as f64;
    let mut out = Vec::new();
    for (id, node) in tree.nodes.iter().enumerate() {
        let frac = node.area as f64 / total;
        if frac < params.min_area || frac > params.max_area || var[id] >= params.max_variation {
            continue;
        }
        if let Some(p) = node.parent {
            if var[id] > var[p] {
                continue;
            }
        }
        let largest_child = node
            .children
            .iter()
            .copied()
            .max_by(|&a, &b| tree.nodes[a].area.cmp(&tree.nodes[b].area).then(b.cmp(&a)));
        if let Some(c) = largest_child {
            if var[id] > var[c] {
                continue;
            }
        }
        out.push((id, var[id]));
    }
    out
}

/// Maximally stable extremal regions of a tree, tagged with their origin.
pub fn select_msers(
    tree: &ComponentTree,
    params: &MserParams,
    source: MapSource,
    polarity: Polarity,
) -> Vec<ExtremalComponent> {
    let stable = stable_nodes(tree, params);
    let ids: Vec<NodeId> = stable.iter().map(|(id, _)| *id).collect();
    let pixel_lists = tree.pixels_of(&ids);
    stable
        .into_iter()
        .zip(pixel_lists)
        .map(|((id, variation), pix)| {
            let node = &tree.nodes[id];
            ExtremalComponent {
                pixels: pix
                    .into_iter()
                    .map(|p| ((p % tree.width) as u32, (p / tree.width) as u32))
                    .collect(),
                level: node.level,
                area: node.area,
                variation,
                bbox: node.bbox,
                source,
                polarity,
            }
        })
        .collect()
}
