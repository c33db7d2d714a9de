use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{match_counts, MatchCounts};
use crate::error::{Error, Result};
use crate::pipeline::WordBox;
use crate::raster::BoundingBox;

/// Truth boxes of one image.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImageTruth {
    pub words: Vec<BoundingBox>,
    pub chars: Option<Vec<BoundingBox>>,
}

/// Truth keyed by image id (the image file stem).
pub type GroundTruth = BTreeMap<String, ImageTruth>;

/// Parses one annotation line: comma- or space-separated integer
/// coordinates optionally followed by a transcription. Eight or more leading
/// integers are read as a quadrilateral and replaced by its bounding box;
/// four to seven as inclusive `left, top, right, bottom`. Blank lines give
/// `None`.
pub fn parse_box_line(line: &str) -> Option<std::result::Result<BoundingBox, String>> {
    let line = line.trim_start_matches('\u{feff}').trim();
    if line.is_empty() {
        return None;
    }
    let nums: Vec<i32> = line
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map_while(|t| t.parse().ok())
        .collect();
    Some(match nums.len() {
        n if n >= 8 => {
            let xs = nums[..8].iter().step_by(2);
            let ys = nums[1..8].iter().step_by(2);
            let (x0, x1) = (*xs.clone().min().unwrap(), *xs.max().unwrap());
            let (y0, y1) = (*ys.clone().min().unwrap(), *ys.max().unwrap());
            Ok(BoundingBox::from_corners(x0, y0, x1, y1))
        }
        n if n >= 4 => Ok(BoundingBox::from_corners(nums[0], nums[1], nums[2], nums[3])),
        n => Err(format!("expected 4 or 8 coordinates, found {n}")),
    })
}

/// Reads every box in an annotation file.
pub fn read_box_file(path: &Path) -> Result<Vec<BoundingBox>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(b) = parse_box_line(line) {
            out.push(b.map_err(|message| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            })?);
        }
    }
    Ok(out)
}

/// Writes boxes as inclusive `left,top,right,bottom[,label]` lines.
pub fn write_box_file(path: &Path, boxes: &[BoundingBox], labels: Option<&[String]>) -> Result<()> {
    let mut s = String::new();
    for (i, b) in boxes.iter().enumerate() {
        s.push_str(&format!("{},{},{},{}", b.x, b.y, b.right() - 1, b.bottom() - 1));
        if let Some(l) = labels.and_then(|l| l.get(i)) {
            s.push(',');
            s.push_str(l);
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Loads `gt_<id>.txt` word files, and `chars_<id>.txt` character files
/// where present, from `dir`.
pub fn read_truth_dir(dir: &Path) -> Result<GroundTruth> {
    let mut truth = GroundTruth::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names: Vec<String> = entries
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| Error::io(dir, e))?;
    names.sort();
    for name in names {
        if let Some(id) = name.strip_prefix("gt_").and_then(|n| n.strip_suffix(".txt")) {
            let entry = truth.entry(id.to_string()).or_default();
            entry.words = read_box_file(&dir.join(&name))?;
        } else if let Some(id) = name.strip_prefix("chars_").and_then(|n| n.strip_suffix(".txt")) {
            let entry = truth.entry(id.to_string()).or_default();
            entry.chars = Some(read_box_file(&dir.join(&name))?);
        }
    }
    Ok(truth)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordRecord {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
    pub score: f32,
}

impl WordRecord {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox::new(self.x, self.y, self.w, self.h)
    }
}

impl From<&WordBox> for WordRecord {
    fn from(w: &WordBox) -> Self {
        Self {
            x: w.bbox.x,
            y: w.bbox.y,
            w: w.bbox.w,
            h: w.bbox.h,
            score: w.score,
        }
    }
}

/// Detected words of one image; serialized as one JSON line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image: String,
    pub words: Vec<WordRecord>,
}

impl DetectionRecord {
    pub fn new(image: impl Into<String>, words: &[WordBox]) -> Self {
        Self {
            image: image.into(),
            words: words.iter().map(WordRecord::from).collect(),
        }
    }

    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.words.iter().map(WordRecord::bbox).collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("records always serialize")
    }
}

pub fn write_records(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(f, "{}", r.to_json_line()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<DetectionRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Word-level match counts over all images. Every record needs a truth
/// entry and vice versa; otherwise the unmatched ids are reported.
pub fn evaluate_records(records: &[DetectionRecord], truth: &GroundTruth, iou_min: f64) -> Result<MatchCounts> {
    let pred_ids: BTreeSet<&str> = records.iter().map(|r| r.image.as_str()).collect();
    let truth_ids: BTreeSet<&str> = truth.keys().map(String::as_str).collect();
    let unmatched: Vec<&str> = pred_ids.symmetric_difference(&truth_ids).copied().collect();
    if !unmatched.is_empty() {
        return Err(Error::InvalidData(format!(
            "image ids without a counterpart: {}",
            unmatched.join(", ")
        )));
    }
    Ok(records
        .iter()
        .map(|r| match_counts(&r.boxes(), &truth[&r.image].words, iou_min))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icdar_lines() {
        let b = parse_box_line("\u{feff}38, 43, 920, 215, \"Tiredness\"")
            .unwrap()
            .unwrap();
        assert_eq!(b, BoundingBox::new(38, 43, 883, 173));
        let q = parse_box_line("377,117,463,117,465,130,378,130,Genaxis")
            .unwrap()
            .unwrap();
        assert_eq!(q, BoundingBox::from_corners(377, 117, 465, 130));
        let n = parse_box_line("10 20 30 40 \"2011\"").unwrap().unwrap();
        assert_eq!(n, BoundingBox::from_corners(10, 20, 30, 40));
        assert!(parse_box_line("   ").is_none());
        assert!(parse_box_line("1,2,x").unwrap().is_err());
    }

    #[test]
    fn record_json_roundtrip() {
        let r = DetectionRecord {
            image: "img_1".into(),
            words: vec![WordRecord {
                x: 1,
                y: 2,
                w: 3,
                h: 4,
                score: 0.5,
            }],
        };
        let line = r.to_json_line();
        assert_eq!(
            line,
            r#"{"image":"img_1","words":[{"x":1,"y":2,"w":3,"h":4,"score":0.5}]}"#
        );
        assert_eq!(serde_json::from_str::<DetectionRecord>(&line).unwrap(), r);
    }
}
