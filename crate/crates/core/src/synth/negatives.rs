//! Non-text patches cropped away from ground-truth text.

use rand::Rng;

use super::render::sample_rng;
use crate::raster::{crop_resize, BoundingBox, RasterImage};
use crate::textcnn::{MultiTaskSample, PATCH_SIDE};

/// Crops may overlap a truth box by at most this IoU.
pub const MAX_TEXT_IOU: f64 = 0.1;
pub const ATTEMPTS_PER_IMAGE: usize = 1000;

/// An image together with the boxes that must be avoided.
#[derive(Clone, Debug)]
pub struct AnnotatedImage {
    pub image: RasterImage,
    pub truth: Vec<BoundingBox>,
}

/// Whether `crop` is far enough from every truth box to count as background.
pub fn is_background(crop: &BoundingBox, truth: &[BoundingBox]) -> bool {
    truth.iter().all(|t| crop.iou(t) < MAX_TEXT_IOU)
}

/// Random square crops with IoU below [`MAX_TEXT_IOU`] against every truth
/// box, resized to 32×32 and labelled non-text.
///
/// Images are visited round-robin. An image that yields no valid crop in
/// [`ATTEMPTS_PER_IMAGE`] tries is dropped with a warning; fewer than `count`
/// patches come back only when every image has been dropped.
pub fn harvest_negatives(images: &[AnnotatedImage], count: usize, seed: u64) -> Vec<MultiTaskSample> {
    let mut out = Vec::with_capacity(count);
    let mut live: Vec<usize> = (0..images.len())
        .filter(|&i| images[i].image.width().min(images[i].image.height()) >= 8)
        .collect();
    let mut rng = sample_rng(seed, 0);
    let mut turn = 0;
    while out.len() < count && !live.is_empty() {
        let slot = turn % live.len();
        let ann = &images[live[slot]];
        let (w, h) = (ann.image.width() as i32, ann.image.height() as i32);
        let max_side = (w.min(h) / 2).max(8);
        let mut found = None;
        for _ in 0..ATTEMPTS_PER_IMAGE {
            let side = rng.random_range(8..=max_side);
            let x = rng.random_range(0..=w - side);
            let y = rng.random_range(0..=h - side);
            let crop = BoundingBox::new(x, y, side, side);
            if is_background(&crop, &ann.truth) {
                found = Some(crop);
                break;
            }
        }
        match found {
            Some(crop) => {
                let patch = crop_resize(&ann.image, crop, PATCH_SIDE).expect("crop inside image");
                out.push(MultiTaskSample::from_image(&patch, None, None, Some(0)).expect("patch is 32x32"));
                turn += 1;
            }
            None => {
                log::warn!(
                    "no text-free crop found in image {} after {ATTEMPTS_PER_IMAGE} attempts; skipping it",
                    live[slot]
                );
                live.remove(slot);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_threshold() {
        let truth = [BoundingBox::new(0, 0, 10, 10)];
        assert!(!is_background(&BoundingBox::new(0, 0, 10, 5), &truth));
        assert!(is_background(&BoundingBox::new(20, 20, 10, 10), &truth));
    }

    #[test]
    fn exact_count_without_text() {
        let img = AnnotatedImage {
            image: RasterImage::filled(40, 30, [9, 9, 9]),
            truth: vec![],
        };
        let n = harvest_negatives(&[img.clone(), img], 25, 4);
        assert_eq!(n.len(), 25);
        assert!(n.iter().all(|s| s.binary_label == Some(0) && s.mask.is_none()));
    }

    #[test]
    fn fully_covered_image_is_skipped() {
        let img = AnnotatedImage {
            image: RasterImage::filled(8, 8, [0, 0, 0]),
            truth: vec![BoundingBox::new(0, 0, 8, 8)],
        };
        assert!(harvest_negatives(&[img], 3, 0).is_empty());
    }
}
