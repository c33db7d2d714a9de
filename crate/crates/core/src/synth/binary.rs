//! Text/non-text patch sets cut from synthetic scenes.

use super::negatives::{harvest_negatives, AnnotatedImage};
use super::scene::{render_scene, Scene, SceneConfig, SceneKind};
use crate::pipeline::prepare_patch;
use crate::textcnn::MultiTaskSample;

const KINDS: [SceneKind; 3] = [SceneKind::Easy, SceneKind::LowContrast, SceneKind::Clutter];

/// Character crops from scenes `0, 1, ...` of `seed` (kinds cycling Easy,
/// LowContrast, Clutter) until `count` are collected. Each carries binary
/// label 1 and its character class.
pub fn scene_char_patches(count: usize, seed: u64) -> (Vec<MultiTaskSample>, Vec<Scene>) {
    let mut out = Vec::with_capacity(count);
    let mut scenes = Vec::new();
    let mut index = 0u64;
    while out.len() < count {
        let kind = KINDS[index as usize % KINDS.len()];
        let scene = render_scene(&SceneConfig::new(kind), seed, index);
        index += 1;
        for c in scene.words.iter().flat_map(|w| &w.chars) {
            if out.len() == count {
                break;
            }
            if let Ok((_, patch)) = prepare_patch(&scene.image, &c.bbox) {
                out.push(MultiTaskSample::from_image(&patch, None, Some(c.class), Some(1)).expect("patch is 32x32"));
            }
        }
        scenes.push(scene);
    }
    (out, scenes)
}

/// A balanced binary set of `count` samples: `count / 2` rounded up character
/// crops, followed by background crops harvested from the same scenes away
/// from every character and word box.
pub fn binary_dataset(count: usize, seed: u64) -> Vec<MultiTaskSample> {
    let positives = count.div_ceil(2);
    let (mut out, scenes) = scene_char_patches(positives, seed);
    let annotated: Vec<AnnotatedImage> = scenes
        .into_iter()
        .map(|s| {
            let mut truth = s.char_boxes();
            truth.extend(s.word_boxes());
            AnnotatedImage { image: s.image, truth }
        })
        .collect();
    out.extend(harvest_negatives(&annotated, count - positives, seed));
    out
}
