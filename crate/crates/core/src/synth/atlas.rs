//! Embedded glyph bitmaps for the 62 character classes.
//!
//! Source glyphs are the public-domain 8×8 `font8x8` set, doubled to a 16×16
//! grid.

/// Side of each atlas bitmap.
pub const GLYPH_SIDE: usize = 16;
pub const CLASS_COUNT: usize = 62;

const CLASS_CHARS: &[u8; CLASS_COUNT] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

/// Character for a class index in `0..62`.
pub fn class_char(class: usize) -> Option<char> {
    CLASS_CHARS.get(class).map(|&b| b as char)
}

pub fn class_index(ch: char) -> Option<usize> {
    CLASS_CHARS.iter().position(|&b| b as char == ch)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlyphAtlas {
    bitmaps: Vec<[[bool; GLYPH_SIDE]; GLYPH_SIDE]>,
}

impl Default for GlyphAtlas {
    fn default() -> Self {
        Self::embedded()
    }
}

impl GlyphAtlas {
    pub fn embedded() -> Self {
        let bitmaps = CLASS_CHARS
            .iter()
            .map(|&c| {
                let rows = font8x8::legacy::BASIC_LEGACY[c as usize];
                let mut bm = [[false; GLYPH_SIDE]; GLYPH_SIDE];
                for (y, row) in bm.iter_mut().enumerate() {
                    for (x, px) in row.iter_mut().enumerate() {
                        *px = rows[y / 2] >> (x / 2) & 1 == 1;
                    }
                }
                bm
            })
            .collect();
        Self { bitmaps }
    }

    pub fn len(&self) -> usize {
        self.bitmaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bitmaps.is_empty()
    }

    /// Whether glyph `class` covers grid cell `(x, y)`; false outside the grid.
    pub fn covers(&self, class: usize, x: i32, y: i32) -> bool {
        if x < 0 || y < 0 || x >= GLYPH_SIDE as i32 || y >= GLYPH_SIDE as i32 {
            return false;
        }
        self.bitmaps[class][y as usize][x as usize]
    }

    pub fn bitmap(&self, class: usize) -> &[[bool; GLYPH_SIDE]; GLYPH_SIDE] {
        &self.bitmaps[class]
    }

    /// Tight `(x0, y0, x1, y1)` extent of the inked cells, inclusive.
    pub fn ink_bounds(&self, class: usize) -> (usize, usize, usize, usize) {
        let bm = &self.bitmaps[class];
        let (mut x0, mut y0, mut x1, mut y1) = (GLYPH_SIDE, GLYPH_SIDE, 0, 0);
        for (y, row) in bm.iter().enumerate() {
            for (x, &on) in row.iter().enumerate() {
                if on {
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x);
                    y1 = y1.max(y);
                }
            }
        }
        (x0, y0, x1, y1)
    }
}
