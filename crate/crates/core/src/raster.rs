//! Pixel containers, color conversion, patch extraction and overlay drawing.
//!
//! All operations are pure functions on immutable inputs.

use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major and channel-interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidImage(format!(
                "expected {} bytes for {width}x{height} RGB, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// An image filled with one color.
    ///
    /// # Panics
    ///
    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn pixels(&self) -> impl Iterator<Item = [u8; 3]> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }

    /// Loads a PNG or JPEG file, dropping any alpha channel.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        Self::new(w as usize, h as usize, rgb.into_raw())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Samples normalized to [0, 1] in the same interleaved order.
    pub fn to_unit_f32(&self) -> Vec<f32> {
        self.data.iter().map(|&v| v as f32 / 255.0).collect()
    }
}

/// CIELAB planes (D65 white point, 2° observer).
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f32>,
    pub a: Vec<f32>,
    pub b: Vec<f32>,
}

impl LabImage {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn color(&self, i: usize) -> [f32; 3] {
        [self.l[i], self.a[i], self.b[i]]
    }
}

/// Single-channel map with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GrayMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
}

impl GrayMap {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::ShapeMismatch {
                expected: vec![height, width],
                actual: vec![values.len()],
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// `1 - v` per pixel; turns light-on-dark structure into dark-on-light.
    pub fn inverted(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
        }
    }

    /// Quantizes to 256 levels by rounding.
    pub fn to_levels(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }
}

/// Axis-aligned box covering pixels `x..x+w`, `y..y+h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl BoundingBox {
    pub const fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Self { x, y, w, h }
    }

    /// Box spanning the inclusive corners `(x0, y0)`–`(x1, y1)`.
    pub fn from_corners(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        let (xa, xb) = (x0.min(x1), x0.max(x1));
        let (ya, yb) = (y0.min(y1), y0.max(y1));
        Self::new(xa, ya, xb - xa + 1, yb - ya + 1)
    }

    pub fn right(&self) -> i32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> i32 {
        self.y + self.h
    }

    pub fn area(&self) -> i64 {
        if self.w <= 0 || self.h <= 0 {
            0
        } else {
            self.w as i64 * self.h as i64
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Self::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn union(&self, other: &Self) -> Self {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        Self::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn iou(&self, other: &Self) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union <= 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Clips to `[0, width) x [0, height)`; `None` when nothing is left.
    pub fn clamp_to(&self, width: usize, height: usize) -> Option<Self> {
        self.intersection(&Self::new(0, 0, width as i32, height as i32))
    }

    pub fn contains(&self, other: &Self) -> bool {
        other.x >= self.x && other.y >= self.y && other.right() <= self.right() && other.bottom() <= self.bottom()
    }

    pub fn expanded(&self, margin: i32) -> Self {
        Self::new(
            self.x - margin,
            self.y - margin,
            self.w + 2 * margin,
            self.h + 2 * margin,
        )
    }
}

const WHITE_D65: [f64; 3] = [0.950_47, 1.0, 1.088_83];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        c * 12.92
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    const EPS: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    if t > EPS {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    const EPS: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    let f3 = f * f * f;
    if f3 > EPS {
        f3
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

/// Converts one sRGB color to CIELAB.
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| srgb_to_linear(c as f64 / 255.0));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE_D65[0]);
    let fy = lab_f(y / WHITE_D65[1]);
    let fz = lab_f(z / WHITE_D65[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`rgb_to_lab`], rounding and saturating to 8 bits.
pub fn lab_to_rgb(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let x = lab_f_inv(fx) * WHITE_D65[0];
    let y = lab_f_inv(fy) * WHITE_D65[1];
    let z = lab_f_inv(fz) * WHITE_D65[2];
    let r = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let g = -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z;
    let b = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;
    [r, g, b].map(|c| (linear_to_srgb(c.clamp(0.0, 1.0)) * 255.0).round() as u8)
}

pub fn to_lab(img: &RasterImage) -> LabImage {
    let n = img.width * img.height;
    let mut out = LabImage {
        width: img.width,
        height: img.height,
        l: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
    };
    for px in img.pixels() {
        let [l, a, b] = rgb_to_lab(px);
        out.l.push(l.clamp(0.0, 100.0) as f32);
        out.a.push(a as f32);
        out.b.push(b as f32);
    }
    out
}

/// Rec. 601 luma scaled to [0, 1].
pub fn luma(rgb: [u8; 3]) -> f32 {
    ((0.299 * rgb[0] as f64 + 0.587 * rgb[1] as f64 + 0.114 * rgb[2] as f64) / 255.0) as f32
}

pub fn to_gray(img: &RasterImage) -> GrayMap {
    GrayMap {
        width: img.width,
        height: img.height,
        values: img.pixels().map(|p| luma(p).clamp(0.0, 1.0)).collect(),
    }
}

/// Clamps `bbox` to the image and bilinearly resamples it to a `side`×`side` patch.
///
/// Sample positions use pixel centers, so a box resized to its own size is an
/// exact copy.
pub fn crop_resize(img: &RasterImage, bbox: BoundingBox, side: usize) -> Result<RasterImage> {
    if side == 0 {
        return Err(Error::InvalidConfig("patch side must be at least 1".into()));
    }
    let b = bbox
        .clamp_to(img.width, img.height)
        .ok_or_else(|| Error::DegenerateRegion(format!("{bbox:?}")))?;
    let sx = b.w as f64 / side as f64;
    let sy = b.h as f64 / side as f64;
    let (x_max, y_max) = ((b.w - 1) as f64, (b.h - 1) as f64);
    let mut data = Vec::with_capacity(side * side * 3);
    for oy in 0..side {
        let fy = ((oy as f64 + 0.5) * sy - 0.5).clamp(0.0, y_max);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(b.h as usize - 1);
        let ty = fy - y0 as f64;
        for ox in 0..side {
            let fx = ((ox as f64 + 0.5) * sx - 0.5).clamp(0.0, x_max);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(b.w as usize - 1);
            let tx = fx - x0 as f64;
            let px = |x: usize, y: usize| img.pixel(b.x as usize + x, b.y as usize + y);
            let (p00, p01, p10, p11) = (px(x0, y0), px(x1, y0), px(x0, y1), px(x1, y1));
            for c in 0..3 {
                let top = p00[c] as f64 * (1.0 - tx) + p01[c] as f64 * tx;
                let bot = p10[c] as f64 * (1.0 - tx) + p11[c] as f64 * tx;
                let v = top * (1.0 - ty) + bot * ty;
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    RasterImage::new(side, side, data)
}

/// Outline color used by [`draw_overlay`].
pub const OVERLAY_COLOR: [u8; 3] = [255, 0, 0];

/// Draws one-pixel box outlines in order, so later boxes cover earlier ones.
///
/// `scores[i]`, when present, is printed above box `i` (or just inside its top
/// edge when there is no room above).
pub fn draw_overlay(img: &RasterImage, boxes: &[BoundingBox], scores: &[f32]) -> RasterImage {
    let mut out = img.clone();
    for (i, b) in boxes.iter().enumerate() {
        let Some(c) = b.clamp_to(img.width, img.height) else {
            continue;
        };
        for x in c.x..c.right() {
            for y in [b.y, b.bottom() - 1] {
                if y >= c.y && y < c.bottom() {
                    out.set_pixel(x as usize, y as usize, OVERLAY_COLOR);
                }
            }
        }
        for y in c.y..c.bottom() {
            for x in [b.x, b.right() - 1] {
                if x >= c.x && x < c.right() {
                    out.set_pixel(x as usize, y as usize, OVERLAY_COLOR);
                }
            }
        }
        if let Some(score) = scores.get(i) {
            let text = format!("{score:.2}");
            let ty = if c.y >= 9 { c.y - 9 } else { c.y + 1 };
            draw_text(&mut out, c.x, ty, &text, OVERLAY_COLOR);
        }
    }
    out
}

/// Burns ASCII text into the image with the embedded 8×8 font.
pub fn draw_text(img: &mut RasterImage, x: i32, y: i32, text: &str, rgb: [u8; 3]) {
    for (k, ch) in text.chars().enumerate() {
        let Some(glyph) = font8x8::legacy::BASIC_LEGACY.get(ch as usize) else {
            continue;
        };
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..8 {
                if bits >> col & 1 == 0 {
                    continue;
                }
                let px = x + (k * 8 + col) as i32;
                let py = y + row as i32;
                if px >= 0 && py >= 0 && (px as usize) < img.width && (py as usize) < img.height {
                    img.set_pixel(px as usize, py as usize, rgb);
                }
            }
        }
    }
}
