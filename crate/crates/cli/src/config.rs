//! Run configuration: a TOML file whose every key is optional, with command
//! line flags applied on top.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;
use textdet::cemser::CeMserConfig;
use textdet::nn::TrainConfig;
use textdet::pipeline::{DetectConfig, GroupingConfig};
use textdet::synth::SynthConfig;
use textdet::textcnn::StageSchedule;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub synth: SynthSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub cemser: CeMserSection,
    #[serde(default)]
    pub grouping: GroupingSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub count: Option<usize>,
    pub binary_count: Option<usize>,
    pub scenes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: Option<f32>,
    pub momentum: Option<f32>,
    pub weight_decay: Option<f32>,
    pub batch_size: Option<usize>,
    pub stage1_iters: Option<usize>,
    pub stage2_iters: Option<usize>,
    pub lambda_label_stage1: Option<f32>,
    pub lambda_mask_stage1: Option<f32>,
    pub lambda_label_stage2: Option<f32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeMserSection {
    pub delta: Option<u8>,
    pub min_area: Option<f64>,
    pub max_area: Option<f64>,
    pub max_variation: Option<f64>,
    pub k: Option<usize>,
    pub dominant_coverage: Option<f64>,
    pub dedupe_iou: Option<f64>,
    pub contrast_maps: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupingSection {
    pub max_height_ratio: Option<f64>,
    pub max_gap_factor: Option<f64>,
    pub max_center_offset: Option<f64>,
    pub max_orientation_diff_deg: Option<f64>,
    pub score_threshold: Option<f64>,
    pub word_gap_factor: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// The `--seed` flag wins over the file, which wins over the default.
    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    pub fn synth(&self, seed: u64) -> SynthConfig {
        let mut c = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        set(&mut c.count, self.synth.count);
        c
    }

    pub fn train(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        let mut c = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        set(&mut c.learning_rate, t.learning_rate);
        set(&mut c.momentum, t.momentum);
        set(&mut c.weight_decay, t.weight_decay);
        set(&mut c.batch_size, t.batch_size);
        c
    }

    pub fn schedule(&self) -> StageSchedule {
        let t = &self.train;
        let mut s = StageSchedule::default();
        set(&mut s.stage1_iters, t.stage1_iters);
        set(&mut s.stage2_iters, t.stage2_iters);
        set(&mut s.lambda_label_stage1, t.lambda_label_stage1);
        set(&mut s.lambda_mask_stage1, t.lambda_mask_stage1);
        set(&mut s.lambda_label_stage2, t.lambda_label_stage2);
        s
    }

    pub fn detect(&self, seed: u64) -> DetectConfig {
        let m = &self.cemser;
        let mut cemser = CeMserConfig {
            seed,
            ..CeMserConfig::default()
        };
        set(&mut cemser.delta, m.delta);
        set(&mut cemser.min_area, m.min_area);
        set(&mut cemser.max_area, m.max_area);
        set(&mut cemser.max_variation, m.max_variation);
        set(&mut cemser.k, m.k);
        set(&mut cemser.dominant_coverage, m.dominant_coverage);
        set(&mut cemser.dedupe_iou, m.dedupe_iou);
        set(&mut cemser.contrast_maps, m.contrast_maps);

        let g = &self.grouping;
        let mut grouping = GroupingConfig::default();
        set(&mut grouping.max_height_ratio, g.max_height_ratio);
        set(&mut grouping.max_gap_factor, g.max_gap_factor);
        set(&mut grouping.max_center_offset, g.max_center_offset);
        set(
            &mut grouping.max_orientation_diff,
            g.max_orientation_diff_deg.map(f64::to_radians),
        );
        set(&mut grouping.score_threshold, g.score_threshold);
        set(&mut grouping.word_gap_factor, g.word_gap_factor);
        DetectConfig { cemser, grouping }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_flag_precedence() {
        let cfg: RunConfig =
            toml::from_str("seed = 3\n[train]\nstage1_iters = 10\n[grouping]\nmax_orientation_diff_deg = 90.0\n")
                .unwrap();
        assert_eq!(cfg.seed(None), 3);
        assert_eq!(cfg.seed(Some(5)), 5);
        assert_eq!(cfg.schedule().stage1_iters, 10);
        assert_eq!(cfg.schedule().stage2_iters, StageSchedule::default().stage2_iters);
        let d = cfg.detect(1);
        assert!((d.grouping.max_orientation_diff - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(RunConfig::default().seed(None), DEFAULT_SEED);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nlr = 1.0\n").is_err());
    }
}
