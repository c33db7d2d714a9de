//! End-to-end detection: patch preparation, classifier filtering, line
//! construction and word splitting.

pub mod detect;
pub mod grouping;
pub mod patch;

pub use detect::{detect, detect_full, suppress_nested, word_nms, DetectConfig, Detection, WORD_NMS_IOU};
pub use grouping::{
    fit_orientation, horizontal_gap, is_pair, merge_pairs, orientation_diff, pair_components, split_words,
    GroupingConfig, TextLine, WordBox,
};
pub use patch::{filter_components, prepare_candidates, prepare_patch, square_box, CandidatePatch};
