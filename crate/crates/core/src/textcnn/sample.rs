use crate::error::{Error, Result};
use crate::raster::RasterImage;

use super::model::PATCH_SIDE;

/// One training record: a 32×32×3 patch with any subset of the three targets.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiTaskSample {
    /// Channel-interleaved RGB in [0, 1].
    pub patch: Vec<f32>,
    /// Binary text-pixel mask, 32×32 row-major.
    pub mask: Option<Vec<f32>>,
    pub char_label: Option<usize>,
    /// 1 for text, 0 for background.
    pub binary_label: Option<u8>,
}

impl MultiTaskSample {
    pub fn from_image(
        img: &RasterImage,
        mask: Option<&[u8]>,
        char_label: Option<usize>,
        binary_label: Option<u8>,
    ) -> Result<Self> {
        if img.width() != PATCH_SIDE || img.height() != PATCH_SIDE {
            return Err(Error::ShapeMismatch {
                expected: vec![PATCH_SIDE, PATCH_SIDE, 3],
                actual: vec![img.height(), img.width(), 3],
            });
        }
        let sample = Self {
            patch: img.to_unit_f32(),
            mask: mask.map(|m| m.iter().map(|&v| if v > 0 { 1.0 } else { 0.0 }).collect()),
            char_label,
            binary_label,
        };
        sample.validate()?;
        Ok(sample)
    }

    pub fn validate(&self) -> Result<()> {
        let plane = PATCH_SIDE * PATCH_SIDE;
        if self.patch.len() != plane * 3 {
            return Err(Error::InvalidData(format!(
                "patch has {} values, expected {}",
                self.patch.len(),
                plane * 3
            )));
        }
        if self.mask.is_none() && self.char_label.is_none() && self.binary_label.is_none() {
            return Err(Error::InvalidData("sample carries no label".into()));
        }
        if let Some(m) = &self.mask {
            if m.len() != plane || m.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidData("mask must be a binary 32x32 map".into()));
            }
        }
        if matches!(self.binary_label, Some(b) if b > 1) {
            return Err(Error::InvalidData("binary label must be 0 or 1".into()));
        }
        Ok(())
    }

    /// The patch as an 8-bit image.
    pub fn to_image(&self) -> RasterImage {
        let data = self
            .patch
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        RasterImage::new(PATCH_SIDE, PATCH_SIDE, data).expect("patch length validated")
    }
}
