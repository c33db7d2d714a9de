use super::contrast::{contrast_map_stage1, contrast_map_stage2};
use super::mser::{select_msers, ExtremalComponent, MapSource, MserParams, Polarity};
use super::tree::ComponentTree;
use crate::error::{Error, Result};
use crate::raster::{to_gray, GrayMap, RasterImage};

/// Parameters for the full contrast-enhanced detector.
#[derive(Clone, Debug, PartialEq)]
pub struct CeMserConfig {
    /// Stability window in gray levels.
    pub delta: u8,
    pub min_area: f64,
    pub max_area: f64,
    pub max_variation: f64,
    /// Cluster count for the stage-one map.
    pub k: usize,
    pub dominant_coverage: f64,
    pub dedupe_iou: f64,
    pub seed: u64,
    /// When false only the original gray image is searched.
    pub contrast_maps: bool,
}

impl Default for CeMserConfig {
    fn default() -> Self {
        let p = MserParams::default();
        Self {
            delta: p.delta,
            min_area: p.min_area,
            max_area: p.max_area,
            max_variation: p.max_variation,
            k: 6,
            dominant_coverage: 0.95,
            dedupe_iou: 0.7,
            seed: 0,
            contrast_maps: true,
        }
    }
}

impl CeMserConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.delta == 0 {
            return bad("delta must be at least 1");
        }
        if !(self.min_area > 0.0 && self.min_area < self.max_area && self.max_area <= 1.0) {
            return bad("area bounds must satisfy 0 < min_area < max_area <= 1");
        }
        if self.max_variation.is_nan() || self.max_variation <= 0.0 {
            return bad("max_variation must be positive");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if !(self.dominant_coverage > 0.0 && self.dominant_coverage <= 1.0) {
            return bad("dominant_coverage must lie in (0, 1]");
        }
        if !(self.dedupe_iou > 0.0 && self.dedupe_iou < 1.0) {
            return bad("dedupe_iou must lie in (0, 1)");
        }
        Ok(())
    }

    pub fn mser_params(&self) -> MserParams {
        MserParams {
            delta: self.delta,
            min_area: self.min_area,
            max_area: self.max_area,
            max_variation: self.max_variation,
        }
    }
}

/// Stable regions of one map in one polarity.
pub fn msers_of_map(
    map: &GrayMap,
    params: &MserParams,
    source: MapSource,
    polarity: Polarity,
) -> Vec<ExtremalComponent> {
    let oriented = match polarity {
        Polarity::DarkOnLight => map.clone(),
        Polarity::LightOnDark => map.inverted(),
    };
    let tree = ComponentTree::build(&oriented.to_levels(), map.width, map.height);
    select_msers(&tree, params, source, polarity)
}

/// The maps searched by [`ce_mser_detect`], in priority order.
pub fn source_maps(img: &RasterImage, cfg: &CeMserConfig) -> Vec<(MapSource, GrayMap)> {
    let gray = to_gray(img);
    let mut maps = vec![(MapSource::Original, gray)];
    if cfg.contrast_maps {
        let s1 = contrast_map_stage1(img, cfg.k, cfg.seed);
        let s2 = contrast_map_stage2(img, &s1, cfg.dominant_coverage);
        maps.push((MapSource::ContrastMap1, s1));
        maps.push((MapSource::ContrastMap2, s2));
    }
    maps
}

/// Keeps one component per overlap cluster: candidates are visited by
/// ascending variation (ties by input order) and dropped when their box
/// overlaps an already kept box by more than `iou`.
pub fn dedupe(components: Vec<ExtremalComponent>, iou: f64) -> Vec<ExtremalComponent> {
    let mut order: Vec<usize> = (0..components.len()).collect();
    order.sort_by(|&a, &b| {
        components[a]
            .variation
            .total_cmp(&components[b].variation)
            .then(a.cmp(&b))
    });
    let mut keep = vec![false; components.len()];
    let mut kept_boxes = Vec::new();
    for i in order {
        let b = components[i].bbox;
        if kept_boxes.iter().all(|k: &crate::raster::BoundingBox| k.iou(&b) <= iou) {
            keep[i] = true;
            kept_boxes.push(b);
        }
    }
    components
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}

/// Stable regions of the gray image and both contrast maps, each in both
/// polarities, with overlapping duplicates removed.
pub fn ce_mser_detect(img: &RasterImage, cfg: &CeMserConfig) -> Result<Vec<ExtremalComponent>> {
    cfg.validate()?;
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::InvalidImage("image has no pixels".into()));
    }
    let params = cfg.mser_params();
    let mut all = Vec::new();
    for (source, map) in source_maps(img, cfg) {
        for polarity in [Polarity::DarkOnLight, Polarity::LightOnDark] {
            all.extend(msers_of_map(&map, &params, source, polarity));
        }
    }
    Ok(dedupe(all, cfg.dedupe_iou))
}

impl ExtremalComponent {
    /// One tab-separated debug record: source, polarity, level, area,
    /// variation and box.
    pub fn dump_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{:.6}\t{},{},{},{}",
            self.source,
            self.polarity,
            self.level,
            self.area,
            self.variation,
            self.bbox.x,
            self.bbox.y,
            self.bbox.w,
            self.bbox.h
        )
    }
}
