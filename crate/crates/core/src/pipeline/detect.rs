use super::grouping::{merge_pairs, pair_components, split_words, GroupingConfig, WordBox};
use super::patch::{filter_components, prepare_candidates, CandidatePatch};
use crate::cemser::{ce_mser_detect, CeMserConfig};
use crate::error::Result;
use crate::raster::{BoundingBox, RasterImage};
use crate::textcnn::TextCnnModel;

/// Overlapping words above this IoU are collapsed to the best-scoring one.
pub const WORD_NMS_IOU: f64 = 0.5;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DetectConfig {
    pub cemser: CeMserConfig,
    pub grouping: GroupingConfig,
}

impl DetectConfig {
    pub fn validate(&self) -> Result<()> {
        self.cemser.validate()?;
        self.grouping.validate()
    }
}

/// Resolves nesting among survivors. A box containing two or more
/// non-overlapping survivors spans several characters and is dropped; then
/// any box inside a remaining one (a counter or a duplicate) is dropped.
pub fn suppress_nested(survivors: Vec<CandidatePatch>) -> Vec<CandidatePatch> {
    let boxes: Vec<BoundingBox> = survivors.iter().map(|c| c.component.bbox).collect();
    let inside = |outer: usize| -> Vec<usize> {
        (0..boxes.len())
            .filter(|&j| j != outer && boxes[outer].contains(&boxes[j]) && boxes[j] != boxes[outer])
            .collect()
    };
    let spans_many = |outer: usize| {
        let inner = inside(outer);
        inner.iter().enumerate().any(|(a, &i)| {
            inner[a + 1..]
                .iter()
                .any(|&j| boxes[i].intersection(&boxes[j]).is_none())
        })
    };
    let kept: Vec<usize> = (0..boxes.len()).filter(|&i| !spans_many(i)).collect();
    let nested = |i: usize| {
        kept.iter()
            .any(|&o| o != i && boxes[o].contains(&boxes[i]) && (boxes[o] != boxes[i] || o < i))
    };
    let drop: Vec<bool> = (0..boxes.len()).map(|i| !kept.contains(&i) || nested(i)).collect();
    survivors
        .into_iter()
        .zip(drop)
        .filter_map(|(c, d)| (!d).then_some(c))
        .collect()
}

/// Greedy suppression in descending score order (ties keep the earlier word).
pub fn word_nms(mut words: Vec<WordBox>, iou: f64) -> Vec<WordBox> {
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| words[b].score.total_cmp(&words[a].score).then(a.cmp(&b)));
    let mut keep = vec![false; words.len()];
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| words[k].bbox.iou(&words[i].bbox) <= iou) {
            kept.push(i);
            keep[i] = true;
        }
    }
    let mut i = 0;
    words.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    words
}

/// Everything the detector produced for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    /// Candidates that passed the classifier and nesting suppression; word
    /// members index into this list.
    pub survivors: Vec<CandidatePatch>,
    pub words: Vec<WordBox>,
}

/// Full detector: CE-MSER candidates, classifier filter, line construction
/// and word splitting.
pub fn detect_full(img: &RasterImage, model: &TextCnnModel, cfg: &DetectConfig) -> Result<Detection> {
    cfg.validate()?;
    let components = ce_mser_detect(img, &cfg.cemser)?;
    let candidates = prepare_candidates(img, components);
    let survivors = suppress_nested(filter_components(model, candidates, cfg.grouping.score_threshold)?);
    let boxes: Vec<BoundingBox> = survivors.iter().map(|c| c.component.bbox).collect();
    let scores: Vec<f32> = survivors.iter().map(|c| c.score).collect();
    let pairs = pair_components(&boxes, &cfg.grouping);
    let words = merge_pairs(&boxes, &pairs, &cfg.grouping)
        .iter()
        .flat_map(|line| split_words(line, &boxes, &scores, &cfg.grouping))
        .collect();
    Ok(Detection {
        words: word_nms(words, WORD_NMS_IOU),
        survivors,
    })
}

/// Detected words for one image.
pub fn detect(img: &RasterImage, model: &TextCnnModel, cfg: &DetectConfig) -> Result<Vec<WordBox>> {
    Ok(detect_full(img, model, cfg)?.words)
}
