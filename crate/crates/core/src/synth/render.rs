//! Character patch rendering with exact pre-noise masks.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::atlas::{GlyphAtlas, CLASS_COUNT, GLYPH_SIDE};
use crate::error::{Error, Result};
use crate::raster::{crop_resize, luma, BoundingBox, RasterImage};
use crate::textcnn::{MultiTaskSample, PATCH_SIDE};

#[derive(Clone, Debug, PartialEq)]
pub enum BackgroundSource {
    Flat,
    Gradient,
    /// Random crops from every PNG/JPEG in the directory.
    ImageDir(PathBuf),
}

/// Rendering distribution. Ranges are inclusive `[min, max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub seed: u64,
    pub rotation_deg: [f32; 2],
    /// Side of the 16×16 glyph cell as a fraction of the patch side.
    pub scale: [f32; 2],
    /// Per-channel value range of the glyph color.
    pub foreground: [u8; 2],
    /// Per-channel value range of the background colors.
    pub background: [u8; 2],
    /// Minimum luma difference (in [0, 1]) between glyph and background.
    pub min_contrast: f32,
    /// Upper bound of the per-sample Gaussian noise stddev, in 8-bit units.
    pub noise_std: f32,
    pub blur_radius: [u32; 2],
    /// Maximum glyph offset from the patch center, in pixels.
    pub jitter: f32,
    pub background_source: BackgroundSource,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            count: 6200,
            seed: 7,
            rotation_deg: [-10.0, 10.0],
            scale: [0.75, 1.0],
            foreground: [0, 255],
            background: [0, 255],
            min_contrast: 0.25,
            noise_std: 8.0,
            blur_radius: [0, 1],
            jitter: 2.0,
            background_source: BackgroundSource::Gradient,
        }
    }
}

impl SynthConfig {
    /// Noise-free, unrotated, centered glyphs on flat backgrounds.
    pub fn clean() -> Self {
        Self {
            rotation_deg: [0.0, 0.0],
            noise_std: 0.0,
            blur_radius: [0, 0],
            jitter: 0.0,
            background_source: BackgroundSource::Flat,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f32; 2]| r[0] <= r[1] && r.iter().all(|v| v.is_finite());
        if self.count == 0 {
            return Err(Error::InvalidConfig("count must be at least 1".into()));
        }
        if !ordered(self.rotation_deg) || !ordered(self.scale) || self.scale[0] <= 0.0 {
            return Err(Error::InvalidConfig("rotation/scale ranges must be ordered".into()));
        }
        if self.foreground[0] > self.foreground[1]
            || self.background[0] > self.background[1]
            || self.blur_radius[0] > self.blur_radius[1]
        {
            return Err(Error::InvalidConfig("color/blur ranges must be ordered".into()));
        }
        if self.noise_std < 0.0 || self.jitter < 0.0 || !(0.0..=1.0).contains(&self.min_contrast) {
            return Err(Error::InvalidConfig(
                "noise, jitter and contrast must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A rendered patch before conversion to training floats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderedChar {
    pub image: RasterImage,
    /// 0/1 per pixel, row-major.
    pub mask: Vec<u8>,
    pub class: usize,
}

impl RenderedChar {
    pub fn to_sample(&self) -> MultiTaskSample {
        MultiTaskSample::from_image(&self.image, Some(&self.mask), Some(self.class), None)
            .expect("rendered patches are 32x32")
    }
}

/// Deterministic per-sample generator for stream `index` of `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn uniform<R: Rng>(rng: &mut R, r: [f32; 2]) -> f32 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

fn color<R: Rng>(rng: &mut R, r: [u8; 2]) -> [u8; 3] {
    [(); 3].map(|_| rng.random_range(r[0]..=r[1]))
}

pub(crate) fn load_images(dir: &Path) -> Result<Vec<RasterImage>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no PNG/JPEG backgrounds in {}",
            dir.display()
        )));
    }
    paths.iter().map(RasterImage::load).collect()
}

/// Separable box blur with clamped borders.
pub fn box_blur(img: &RasterImage, radius: u32) -> RasterImage {
    if radius == 0 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let r = radius as i64;
    let pass = |src: &RasterImage, horizontal: bool| {
        let mut out = src.clone();
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0u32; 3];
                for d in -r..=r {
                    let (sx, sy) = if horizontal {
                        ((x as i64 + d).clamp(0, w as i64 - 1) as usize, y)
                    } else {
                        (x, (y as i64 + d).clamp(0, h as i64 - 1) as usize)
                    };
                    let p = src.pixel(sx, sy);
                    for c in 0..3 {
                        acc[c] += p[c] as u32;
                    }
                }
                let n = (2 * r + 1) as u32;
                out.set_pixel(x, y, acc.map(|a| ((a + n / 2) / n) as u8));
            }
        }
        out
    };
    pass(&pass(img, true), false)
}

/// Adds zero-mean Gaussian noise with the given stddev (8-bit units).
pub fn add_noise<R: Rng>(img: &RasterImage, std: f32, rng: &mut R) -> RasterImage {
    if std <= 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0f32, std).expect("finite std");
    let data = img
        .data()
        .iter()
        .map(|&v| (v as f32 + normal.sample(rng)).round().clamp(0.0, 255.0) as u8)
        .collect();
    RasterImage::new(img.width(), img.height(), data).expect("same dimensions")
}

/// Picks a glyph color at least `min_contrast` away (in luma) from `bg`.
pub(crate) fn contrasting_color<R: Rng>(rng: &mut R, range: [u8; 2], bg: [u8; 3], min_contrast: f32) -> [u8; 3] {
    for _ in 0..64 {
        let c = color(rng, range);
        if (luma(c) - luma(bg)).abs() >= min_contrast {
            return c;
        }
    }
    if luma(bg) > 0.5 {
        [0; 3]
    } else {
        [255; 3]
    }
}

pub struct CharRenderer {
    config: SynthConfig,
    atlas: GlyphAtlas,
    backgrounds: Vec<RasterImage>,
}

impl CharRenderer {
    pub fn new(config: SynthConfig) -> Result<Self> {
        config.validate()?;
        let backgrounds = match &config.background_source {
            BackgroundSource::ImageDir(dir) => load_images(dir)?,
            _ => Vec::new(),
        };
        Ok(Self {
            config,
            atlas: GlyphAtlas::embedded(),
            backgrounds,
        })
    }

    pub fn config(&self) -> &SynthConfig {
        &self.config
    }

    fn background<R: Rng>(&self, rng: &mut R) -> (RasterImage, [u8; 3]) {
        let side = PATCH_SIDE;
        match &self.config.background_source {
            BackgroundSource::Flat => {
                let c = color(rng, self.config.background);
                (RasterImage::filled(side, side, c), c)
            }
            BackgroundSource::Gradient => {
                let c0 = color(rng, self.config.background);
                let c1 = color(rng, self.config.background);
                let angle = rng.random_range(0.0..std::f32::consts::TAU);
                let (dx, dy) = (angle.cos(), angle.sin());
                let mut img = RasterImage::filled(side, side, c0);
                let half = side as f32 / 2.0;
                for y in 0..side {
                    for x in 0..side {
                        let t = (((x as f32 - half) * dx + (y as f32 - half) * dy) / side as f32 + 0.5).clamp(0.0, 1.0);
                        let px = [0, 1, 2].map(|c| (c0[c] as f32 * (1.0 - t) + c1[c] as f32 * t).round() as u8);
                        img.set_pixel(x, y, px);
                    }
                }
                let mean = [0, 1, 2].map(|c| ((c0[c] as u16 + c1[c] as u16) / 2) as u8);
                (img, mean)
            }
            BackgroundSource::ImageDir(_) => {
                let src = &self.backgrounds[rng.random_range(0..self.backgrounds.len())];
                let max_side = src.width().min(src.height()) as i32;
                let crop = rng.random_range(max_side.min(16)..=max_side);
                let x = rng.random_range(0..=src.width() as i32 - crop);
                let y = rng.random_range(0..=src.height() as i32 - crop);
                let img =
                    crop_resize(src, BoundingBox::new(x, y, crop, crop), side).expect("crop lies inside the image");
                let n = (side * side) as u64;
                let mut sum = [0u64; 3];
                for p in img.pixels() {
                    for c in 0..3 {
                        sum[c] += p[c] as u64;
                    }
                }
                let mean = sum.map(|s| (s / n) as u8);
                (img, mean)
            }
        }
    }

    /// Renders `class` using the generator stream selected by `seed`.
    pub fn render(&self, class: usize, seed: u64) -> RenderedChar {
        assert!(class < CLASS_COUNT, "class {class} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.render_with(class, &mut rng)
    }

    pub fn render_with<R: Rng>(&self, class: usize, rng: &mut R) -> RenderedChar {
        let cfg = &self.config;
        let side = PATCH_SIDE;
        let (mut img, bg_mean) = self.background(rng);
        let fg = contrasting_color(rng, cfg.foreground, bg_mean, cfg.min_contrast);
        let theta = uniform(rng, cfg.rotation_deg).to_radians();
        let cell = uniform(rng, cfg.scale) * side as f32;
        let jx = uniform(rng, [-cfg.jitter, cfg.jitter]);
        let jy = uniform(rng, [-cfg.jitter, cfg.jitter]);
        let (cx, cy) = (side as f32 / 2.0 + jx, side as f32 / 2.0 + jy);
        let unit = cell / GLYPH_SIDE as f32;
        let (sin, cos) = theta.sin_cos();
        let half = GLYPH_SIDE as f32 / 2.0;

        let mut mask = vec![0u8; side * side];
        for y in 0..side {
            for x in 0..side {
                let (px, py) = (x as f32 + 0.5 - cx, y as f32 + 0.5 - cy);
                let u = (cos * px + sin * py) / unit + half;
                let v = (-sin * px + cos * py) / unit + half;
                if self.atlas.covers(class, u.floor() as i32, v.floor() as i32) {
                    mask[y * side + x] = 1;
                    img.set_pixel(x, y, fg);
                }
            }
        }
        // A glyph scaled off the patch entirely still needs a non-empty mask.
        if !mask.contains(&1) {
            let c = side / 2 * side + side / 2;
            mask[c] = 1;
            img.set_pixel(side / 2, side / 2, fg);
        }

        let radius = rng.random_range(cfg.blur_radius[0]..=cfg.blur_radius[1]);
        let img = box_blur(&img, radius);
        let std = uniform(rng, [0.0, cfg.noise_std]);
        let image = add_noise(&img, std, rng);
        RenderedChar { image, mask, class }
    }
}

/// Convenience wrapper building a renderer for one sample.
pub fn render_char(class: usize, config: &SynthConfig, seed: u64) -> Result<MultiTaskSample> {
    if class >= CLASS_COUNT {
        return Err(Error::InvalidData(format!("class {class} out of range")));
    }
    Ok(CharRenderer::new(config.clone())?.render(class, seed).to_sample())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_render_mask_is_scaled_bitmap() {
        let cfg = SynthConfig {
            scale: [1.0, 1.0],
            ..SynthConfig::clean()
        };
        let r = CharRenderer::new(cfg).unwrap();
        let atlas = GlyphAtlas::embedded();
        for class in [0, 10, 36, 61] {
            let s = r.render(class, 3);
            for y in 0..PATCH_SIDE {
                for x in 0..PATCH_SIDE {
                    let expect = atlas.bitmap(class)[y / 2][x / 2] as u8;
                    assert_eq!(s.mask[y * PATCH_SIDE + x], expect, "class {class} ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn clean_mask_matches_glyph_colored_pixels() {
        let r = CharRenderer::new(SynthConfig::clean()).unwrap();
        for class in 0..CLASS_COUNT {
            let s = r.render(class, class as u64);
            let bg_index = s.mask.iter().position(|&m| m == 0).unwrap();
            let bg = s.image.pixels().nth(bg_index).unwrap();
            for (i, p) in s.image.pixels().enumerate() {
                assert_eq!(s.mask[i] == 1, p != bg, "class {class} pixel {i}");
            }
        }
    }

    #[test]
    fn deterministic_and_mask_bounds() {
        let r = CharRenderer::new(SynthConfig::default()).unwrap();
        for class in 0..CLASS_COUNT {
            let a = r.render(class, 99 + class as u64);
            assert_eq!(a, r.render(class, 99 + class as u64));
            let ink = a.mask.iter().filter(|&&m| m == 1).count();
            assert!((1..PATCH_SIDE * PATCH_SIDE).contains(&ink));
        }
    }

    #[test]
    fn invalid_class_is_error() {
        assert!(render_char(62, &SynthConfig::default(), 0).is_err());
        assert!(render_char(5, &SynthConfig::default(), 0).is_ok());
    }
}
