//! Synthetic training data and test scenes.

pub mod atlas;
pub mod binary;
pub mod dataset;
pub mod negatives;
pub mod render;
pub mod scene;

pub use atlas::{class_char, class_index, GlyphAtlas, CLASS_COUNT, GLYPH_SIDE};
pub use binary::{binary_dataset, scene_char_patches};
pub use dataset::{
    generate_dataset, load_samples, read_manifest, render_dataset, save_samples, ManifestEntry, MANIFEST_NAME,
};
pub use negatives::{harvest_negatives, is_background, AnnotatedImage, ATTEMPTS_PER_IMAGE, MAX_TEXT_IOU};
pub use render::{render_char, BackgroundSource, CharRenderer, RenderedChar, SynthConfig};
pub use scene::{low_contrast_suite, render_scene, scene_set, Scene, SceneChar, SceneConfig, SceneKind, SceneWord};
