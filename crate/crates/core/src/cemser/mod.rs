//! Contrast-enhanced maximally stable extremal regions.

pub mod contrast;
pub mod detect;
pub mod kmeans;
pub mod mser;
pub mod tree;

pub use contrast::{
    bin_contrast, contrast_cue, contrast_map_stage1, contrast_map_stage2, quantize_bin, smooth_bin_values, spatial_cue,
};
pub use detect::{ce_mser_detect, dedupe, msers_of_map, source_maps, CeMserConfig};
pub use kmeans::{kmeans_lab, ClusterSet};
pub use mser::{node_variations, select_msers, stable_nodes, ExtremalComponent, MapSource, MserParams, Polarity};
pub use tree::{ComponentTree, NodeId, TreeNode};
