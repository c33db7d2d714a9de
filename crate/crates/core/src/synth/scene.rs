//! Synthetic word scenes with exact character and word boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::atlas::{GlyphAtlas, CLASS_COUNT, GLYPH_SIDE};
use super::render::{add_noise, sample_rng};
use crate::raster::{luma, rgb_to_lab, BoundingBox, RasterImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SceneKind {
    /// High-contrast words on a flat background.
    Easy,
    /// Words whose gray level nearly matches the background while the hue
    /// differs.
    LowContrast,
    /// Words over a gradient strewn with non-text shapes.
    Clutter,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub kind: SceneKind,
    /// Inclusive range of words per scene.
    pub words: [usize; 2],
    /// Inclusive range of characters per word.
    pub word_len: [usize; 2],
    /// Inclusive range of glyph cell side in pixels.
    pub char_size: [usize; 2],
    pub noise_std: f32,
}

impl SceneConfig {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            width: 320,
            height: 240,
            kind,
            words: [2, 4],
            word_len: [3, 6],
            char_size: [20, 36],
            noise_std: match kind {
                SceneKind::Easy => 0.0,
                SceneKind::LowContrast => 1.0,
                SceneKind::Clutter => 4.0,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneChar {
    pub bbox: BoundingBox,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneWord {
    pub bbox: BoundingBox,
    pub text: String,
    pub chars: Vec<SceneChar>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub image: RasterImage,
    pub kind: SceneKind,
    pub words: Vec<SceneWord>,
}

impl Scene {
    pub fn word_boxes(&self) -> Vec<BoundingBox> {
        self.words.iter().map(|w| w.bbox).collect()
    }

    pub fn char_boxes(&self) -> Vec<BoundingBox> {
        self.words.iter().flat_map(|w| w.chars.iter().map(|c| c.bbox)).collect()
    }
}

fn random_color<R: Rng>(rng: &mut R) -> [u8; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn lab_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    let (a, b) = (rgb_to_lab(a), rgb_to_lab(b));
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Background and text colors for a scene kind.
fn palette<R: Rng>(kind: SceneKind, rng: &mut R) -> ([u8; 3], [u8; 3]) {
    match kind {
        SceneKind::Easy | SceneKind::Clutter => loop {
            let (bg, fg) = (random_color(rng), random_color(rng));
            if (luma(bg) - luma(fg)).abs() >= 0.45 {
                return (bg, fg);
            }
        },
        SceneKind::LowContrast => {
            let mut best = ([128, 128, 128], [128, 128, 128], f64::MIN);
            for _ in 0..4000 {
                let (bg, fg) = (random_color(rng), random_color(rng));
                let (lb, lf) = (luma(bg), luma(fg));
                if !(0.25..=0.75).contains(&lb) || (lb - lf).abs() > 0.008 {
                    continue;
                }
                let d = lab_distance(bg, fg);
                if d > best.2 {
                    best = (bg, fg, d);
                }
                if d >= 45.0 {
                    break;
                }
            }
            (best.0, best.1)
        }
    }
}

/// Horizontal extent of the inked columns of a glyph drawn in a cell of
/// side `size`: `(first, last)` cell columns, inclusive.
fn ink_columns(atlas: &GlyphAtlas, class: usize, size: usize) -> (usize, usize) {
    let (x0, _, x1, _) = atlas.ink_bounds(class);
    (
        (x0 * size).div_ceil(GLYPH_SIDE),
        ((x1 + 1) * size).div_ceil(GLYPH_SIDE) - 1,
    )
}

/// Draws a glyph scaled to a `size`-pixel cell at `(ox, oy)`, returning the
/// tight box of the pixels drawn.
fn draw_glyph(
    img: &mut RasterImage,
    atlas: &GlyphAtlas,
    class: usize,
    ox: i32,
    oy: i32,
    size: usize,
    color: [u8; 3],
) -> Option<BoundingBox> {
    let mut bounds: Option<BoundingBox> = None;
    for cy in 0..size {
        for cx in 0..size {
            let gx = (cx * GLYPH_SIDE / size) as i32;
            let gy = (cy * GLYPH_SIDE / size) as i32;
            if !atlas.covers(class, gx, gy) {
                continue;
            }
            let (x, y) = (ox + cx as i32, oy + cy as i32);
            if x < 0 || y < 0 || x >= img.width() as i32 || y >= img.height() as i32 {
                continue;
            }
            img.set_pixel(x as usize, y as usize, color);
            let px = BoundingBox::new(x, y, 1, 1);
            bounds = Some(bounds.map_or(px, |b| b.union(&px)));
        }
    }
    bounds
}

fn gradient_background<R: Rng>(w: usize, h: usize, base: [u8; 3], rng: &mut R) -> RasterImage {
    let other: [u8; 3] = base.map(|c| (c as i32 + rng.random_range(-40..=40)).clamp(0, 255) as u8);
    let mut img = RasterImage::filled(w, h, base);
    let horizontal = rng.random::<bool>();
    for y in 0..h {
        for x in 0..w {
            let t = if horizontal {
                x as f32 / w.max(2) as f32
            } else {
                y as f32 / h.max(2) as f32
            };
            let px = [0, 1, 2].map(|c| (base[c] as f32 * (1.0 - t) + other[c] as f32 * t).round() as u8);
            img.set_pixel(x, y, px);
        }
    }
    img
}

/// Rectangles, discs and bars in random colors.
fn scatter_shapes<R: Rng>(img: &mut RasterImage, count: usize, rng: &mut R) {
    let (w, h) = (img.width() as i32, img.height() as i32);
    for _ in 0..count {
        let color = random_color(rng);
        let (cx, cy) = (rng.random_range(0..w), rng.random_range(0..h));
        let (rw, rh) = (rng.random_range(3..30), rng.random_range(3..30));
        let shape = rng.random_range(0..3);
        for y in (cy - rh).max(0)..(cy + rh).min(h) {
            for x in (cx - rw).max(0)..(cx + rw).min(w) {
                let (dx, dy) = ((x - cx) as f32 / rw as f32, (y - cy) as f32 / rh as f32);
                let inside = match shape {
                    0 => true,
                    1 => dx * dx + dy * dy <= 1.0,
                    _ => dy.abs() < 0.2,
                };
                if inside {
                    img.set_pixel(x as usize, y as usize, color);
                }
            }
        }
    }
}

/// Renders one scene from generator stream `index` of `seed`.
///
/// Words sit on non-overlapping rows; characters within a word are spaced
/// so that no two glyphs touch.
pub fn render_scene(config: &SceneConfig, seed: u64, index: u64) -> Scene {
    let mut rng: ChaCha8Rng = sample_rng(seed, index);
    let atlas = GlyphAtlas::embedded();
    let (w, h) = (config.width, config.height);
    let (bg, fg) = palette(config.kind, &mut rng);
    let mut img = match config.kind {
        SceneKind::Clutter => gradient_background(w, h, bg, &mut rng),
        _ => RasterImage::filled(w, h, bg),
    };

    let mut words: Vec<SceneWord> = Vec::new();
    let mut occupied: Vec<BoundingBox> = Vec::new();
    let n_words = rng.random_range(config.words[0]..=config.words[1]);
    for _ in 0..n_words {
        for _attempt in 0..50 {
            let size = rng.random_range(config.char_size[0]..=config.char_size[1]);
            let len = rng.random_range(config.word_len[0]..=config.word_len[1]);
            let classes: Vec<usize> = (0..len).map(|_| rng.random_range(0..CLASS_COUNT)).collect();
            let gap = (size / 6).max(2);
            let widths: Vec<(usize, usize)> = classes.iter().map(|&c| ink_columns(&atlas, c, size)).collect();
            let total: usize = widths.iter().map(|(a, b)| b - a + 1).sum::<usize>() + gap * (len - 1);
            if total + 8 >= w || size + 8 >= h {
                continue;
            }
            let x0 = rng.random_range(4..(w - total - 4)) as i32;
            let y0 = rng.random_range(4..(h - size - 4)) as i32;
            let reserve = BoundingBox::new(x0, y0, total as i32, size as i32).expanded(size as i32 / 3);
            if occupied.iter().any(|o| o.intersection(&reserve).is_some()) {
                continue;
            }
            let mut chars = Vec::with_capacity(len);
            let mut cursor = x0;
            for (&class, &(c0, c1)) in classes.iter().zip(&widths) {
                if let Some(bbox) = draw_glyph(&mut img, &atlas, class, cursor - c0 as i32, y0, size, fg) {
                    chars.push(SceneChar { bbox, class });
                }
                cursor += (c1 - c0 + 1 + gap) as i32;
            }
            let bbox = chars
                .iter()
                .map(|c| c.bbox)
                .reduce(|a, b| a.union(&b))
                .expect("words have at least one glyph");
            let text = chars
                .iter()
                .map(|c| super::atlas::class_char(c.class).expect("valid class"))
                .collect();
            occupied.push(reserve);
            words.push(SceneWord { bbox, text, chars });
            break;
        }
    }

    if config.kind == SceneKind::Clutter {
        // Shapes go on top of the gradient but never over the words.
        let mut layer = img.clone();
        scatter_shapes(&mut layer, 12, &mut rng);
        for y in 0..h {
            for x in 0..w {
                let p = BoundingBox::new(x as i32, y as i32, 1, 1);
                if !occupied.iter().any(|o| o.contains(&p)) {
                    img.set_pixel(x, y, layer.pixel(x, y));
                }
            }
        }
    }
    if config.noise_std > 0.0 {
        img = add_noise(&img, config.noise_std, &mut rng);
    }
    Scene {
        image: img,
        kind: config.kind,
        words,
    }
}

/// `count` scenes of one kind, scene `i` drawn from stream `i` of `seed`.
pub fn scene_set(config: &SceneConfig, count: usize, seed: u64) -> Vec<Scene> {
    (0..count).map(|i| render_scene(config, seed, i as u64)).collect()
}

/// The 50-scene recall suite: 25 ordinary-contrast scenes followed by 25
/// low-contrast ones.
pub fn low_contrast_suite(seed: u64) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.random();
    let b = rng.random();
    let mut out = scene_set(&SceneConfig::new(SceneKind::Easy), 25, a);
    out.extend(scene_set(&SceneConfig::new(SceneKind::LowContrast), 25, b));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_deterministic_and_boxed() {
        for kind in [SceneKind::Easy, SceneKind::LowContrast, SceneKind::Clutter] {
            let cfg = SceneConfig::new(kind);
            let a = render_scene(&cfg, 5, 2);
            assert_eq!(a, render_scene(&cfg, 5, 2));
            assert!(!a.words.is_empty());
            for word in &a.words {
                assert_eq!(word.text.len(), word.chars.len());
                for c in &word.chars {
                    assert!(word.bbox.contains(&c.bbox));
                }
            }
        }
    }

    #[test]
    fn characters_never_touch() {
        let cfg = SceneConfig::new(SceneKind::Easy);
        for i in 0..10 {
            let scene = render_scene(&cfg, 1, i);
            let boxes = scene.char_boxes();
            for (i, a) in boxes.iter().enumerate() {
                for b in &boxes[i + 1..] {
                    assert!(a.expanded(0).intersection(b).is_none());
                }
            }
        }
    }

    #[test]
    fn low_contrast_palette_hides_in_gray() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (bg, fg) = palette(SceneKind::LowContrast, &mut rng);
            assert!((luma(bg) - luma(fg)).abs() <= 0.008);
            assert!(lab_distance(bg, fg) > 20.0);
        }
    }
}
