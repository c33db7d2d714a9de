//! Detection metrics, ground-truth files and detection records.

pub mod io;
pub mod metrics;

pub use io::{
    evaluate_records, parse_box_line, read_box_file, read_records, read_truth_dir, write_box_file, write_records,
    DetectionRecord, GroundTruth, ImageTruth, WordRecord,
};
pub use metrics::{
    component_recall, greedy_match, match_boxes, match_counts, recall_counts, report, MatchCounts, Metrics, MATCH_IOU,
};
