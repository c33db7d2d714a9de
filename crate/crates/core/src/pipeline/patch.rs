use crate::cemser::ExtremalComponent;
use crate::error::{Error, Result};
use crate::raster::{crop_resize, BoundingBox, RasterImage};
use crate::textcnn::{TextCnnModel, PATCH_SIDE};

/// A component ready for classification.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePatch {
    pub component: ExtremalComponent,
    /// Square crop region, clamped to the image.
    pub square: BoundingBox,
    /// Text probability; 0 until scored.
    pub score: f32,
}

/// Square box of side `max(w, h)` sharing the box's center (rounded down to
/// whole pixels), before clamping.
pub fn square_box(bbox: &BoundingBox) -> BoundingBox {
    let side = bbox.w.max(bbox.h);
    BoundingBox::new(
        bbox.x + (bbox.w - side).div_euclid(2),
        bbox.y + (bbox.h - side).div_euclid(2),
        side,
        side,
    )
}

/// Crops the square around `bbox`, clamped to the image, and resizes it to
/// the 32×32 network input.
pub fn prepare_patch(img: &RasterImage, bbox: &BoundingBox) -> Result<(BoundingBox, RasterImage)> {
    if bbox.w <= 0 || bbox.h <= 0 {
        return Err(Error::DegenerateRegion(format!("{bbox:?}")));
    }
    let square = square_box(bbox)
        .clamp_to(img.width(), img.height())
        .ok_or_else(|| Error::DegenerateRegion(format!("{bbox:?}")))?;
    Ok((square, crop_resize(img, square, PATCH_SIDE)?))
}

/// Candidates for every component with a usable box; degenerate ones are
/// skipped.
pub fn prepare_candidates(img: &RasterImage, components: Vec<ExtremalComponent>) -> Vec<(CandidatePatch, RasterImage)> {
    components
        .into_iter()
        .filter_map(|component| {
            let (square, patch) = prepare_patch(img, &component.bbox).ok()?;
            Some((
                CandidatePatch {
                    component,
                    square,
                    score: 0.0,
                },
                patch,
            ))
        })
        .collect()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Scores every candidate and keeps those with text probability at least
/// `threshold`.
///
/// The comparison runs on the logit margin, `l_text - l_bg >= logit(threshold)`,
/// so a threshold of 1 rejects every finite output and 0 accepts all of them
/// even where the probability itself would round to 0 or 1.
pub fn filter_components(
    model: &TextCnnModel,
    candidates: Vec<(CandidatePatch, RasterImage)>,
    threshold: f64,
) -> Result<Vec<CandidatePatch>> {
    let floats: Vec<Vec<f32>> = candidates.iter().map(|(_, p)| p.to_unit_f32()).collect();
    let refs: Vec<&[f32]> = floats.iter().map(Vec::as_slice).collect();
    let logits = model.binary_logits(&refs)?;
    let cut = logit(threshold);
    Ok(candidates
        .into_iter()
        .zip(logits)
        .filter_map(|((mut c, _), l)| {
            let margin = l[1] as f64 - l[0] as f64;
            c.score = (1.0 / (1.0 + (-margin).exp())) as f32;
            (margin >= cut).then_some(c)
        })
        .collect())
}
