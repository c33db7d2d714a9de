//! Acceptance run: prints one pass/fail line per criterion and exits non-zero
//! when any fails. Criterion 8 reuses the model trained for criterion 4.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textdet::cemser::{ce_mser_detect, CeMserConfig};
use textdet::eval::{
    evaluate_records, match_counts, read_truth_dir, recall_counts, write_box_file, DetectionRecord, MatchCounts,
    MATCH_IOU,
};
use textdet::nn::{Tensor, TrainConfig};
use textdet::pipeline::{detect, DetectConfig};
use textdet::raster::{BoundingBox, RasterImage};
use textdet::synth::{
    binary_dataset, generate_dataset, load_samples, low_contrast_suite, render_dataset, scene_set, SceneConfig,
    SceneKind, SynthConfig,
};
use textdet::textcnn::{
    evaluate, train_staged, EvalTask, ModelConfig, MultiTaskSample, Stage, StageSchedule, TaskWeights, TextCnnModel,
    Trainer,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn gradients() -> Verdict {
    let t = Instant::now();
    let results = common::suite();
    let elapsed = t.elapsed();
    let (worst, err) = results
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("suite is non-empty");
    let failing: Vec<&str> = results
        .iter()
        .filter(|(_, e)| *e >= common::TOL)
        .map(|(n, _)| n.as_str())
        .collect();
    verdict(
        failing.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "{} checks x {} seeds, worst {worst} at {err:.2e}, failing {failing:?}, {:.1}s",
            results.len(),
            common::SEEDS.len(),
            secs(elapsed)
        ),
    )
}

fn geometry() -> Verdict {
    let model = TextCnnModel::new(ModelConfig::default(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let input = Tensor::new(&[2, 3, 32, 32], (0..2 * 3 * 32 * 32).map(|_| rng.random()).collect()).unwrap();
    let c = model.forward(&input, true).unwrap();
    let side = |t: &Tensor| t.shape()[2..].to_vec();
    let main = [
        side(&c.input),
        side(&c.conv1),
        side(&c.conv2),
        side(&c.pooled),
        side(&c.conv3),
    ];
    let mask = [
        side(&c.conv2),
        side(c.deconv1.as_ref().unwrap()),
        side(c.mask.as_ref().unwrap()),
    ];
    let main_ok = main
        .iter()
        .map(|s| s.as_slice())
        .eq([[32, 32], [24, 24], [18, 18], [6, 6], [2, 2]]
            .iter()
            .map(|s| s.as_slice()));
    let mask_ok = mask
        .iter()
        .map(|s| s.as_slice())
        .eq([[18, 18], [24, 24], [32, 32]].iter().map(|s| s.as_slice()));
    let channels_ok = c.mask.as_ref().unwrap().shape() == [2, 1, 32, 32];
    verdict(
        main_ok && mask_ok && channels_ok,
        format!("main {main:?}, mask {mask:?}"),
    )
}

fn component_tree() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = Vec::new();
    for case in 0..200 {
        let (levels, w, h) = common::random_levels(&mut rng, case);
        if let Some(msg) = common::tree_mismatch(&levels, w, h) {
            mismatches.push(format!("case {case}: {msg}"));
        }
    }
    let elapsed = t.elapsed();
    verdict(
        mismatches.is_empty() && elapsed < Duration::from_secs(60),
        format!(
            "200 images, {} mismatches {:?}, {:.1}s",
            mismatches.len(),
            mismatches.first(),
            secs(elapsed)
        ),
    )
}

fn staged_training(model_out: &mut Option<TextCnnModel>) -> Verdict {
    let train = render_dataset(&SynthConfig {
        count: 6200,
        seed: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let held_out = render_dataset(&SynthConfig {
        count: 1240,
        seed: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let binary = binary_dataset(2000, 3);
    let schedule = StageSchedule::default();
    let mut model = TextCnnModel::new(ModelConfig::default(), 7);

    let t = Instant::now();
    let mut d_mask = vec![evaluate(&model, &held_out, EvalTask::Mask).unwrap()];
    let mut trainer = Trainer::new(&mut model, TrainConfig::default(), schedule.total_iters()).unwrap();
    trainer
        .run(&train, schedule.stage1_iters, &schedule.weights(Stage::One), |_, m| {
            d_mask.push(evaluate(m, &held_out, EvalTask::Mask)?);
            Ok(())
        })
        .unwrap();
    let accuracy = 1.0 - evaluate(trainer.model(), &held_out, EvalTask::Label).unwrap();
    trainer
        .run(&binary, schedule.stage2_iters, &schedule.weights(Stage::Two), |_, _| {
            Ok(())
        })
        .unwrap();
    let elapsed = t.elapsed();
    *model_out = Some(model);

    let decreasing = d_mask.windows(2).all(|w| w[1] < w[0]);
    let curve: Vec<String> = d_mask.iter().map(|d| format!("{d:.2}")).collect();
    verdict(
        accuracy >= 0.70 && decreasing && elapsed < Duration::from_secs(30 * 60),
        format!(
            "stage-1 accuracy {accuracy:.3}, D_mask by epoch [{}], {:.0}s",
            curve.join(", "),
            secs(elapsed)
        ),
    )
}

/// Stage-1 label accuracy after `iters` steps with the given mask weight.
fn stage_one_accuracy(
    train: &[MultiTaskSample],
    held_out: &[MultiTaskSample],
    weights: TaskWeights,
    iters: usize,
    seed: u64,
) -> f64 {
    let mut model = TextCnnModel::new(ModelConfig::default(), seed);
    let config = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(&mut model, config, iters).unwrap();
    trainer.run(train, iters, &weights, |_, _| Ok(())).unwrap();
    1.0 - evaluate(&model, held_out, EvalTask::Label).unwrap()
}

fn lambda_divergence() -> Verdict {
    const ITERS: usize = 600;
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in [11u64, 12] {
        let train = render_dataset(&SynthConfig {
            count: 6200,
            seed: seed * 100,
            ..SynthConfig::default()
        })
        .unwrap();
        let held_out = render_dataset(&SynthConfig {
            count: 1240,
            seed: seed * 100 + 1,
            ..SynthConfig::default()
        })
        .unwrap();
        let acc = |mask| {
            let weights = TaskWeights {
                binary: 0.0,
                label: 1.0,
                mask,
            };
            stage_one_accuracy(&train, &held_out, weights, ITERS, seed)
        };
        let (low, high) = (acc(0.3), acc(0.9));
        pass &= high <= 0.5 * low;
        parts.push(format!("seed {seed}: 0.3 -> {low:.3}, 0.9 -> {high:.3}"));
    }
    verdict(pass, format!("{ITERS} iterations; {}", parts.join("; ")))
}

fn ablation() -> Verdict {
    const STAGE1: usize = 300;
    const STAGE2: usize = 700;
    let (mut full_bin, mut base_bin, mut pre_label, mut plain_label) = (0.0, 0.0, 0.0, 0.0);
    let seeds = [1u64, 2, 3];
    for &seed in &seeds {
        let synth = |count, offset| {
            render_dataset(&SynthConfig {
                count,
                seed: seed * 10 + offset,
                ..SynthConfig::default()
            })
            .unwrap()
        };
        let (train, held_out) = (synth(6200, 0), synth(1240, 1));
        let binary = binary_dataset(2000, seed * 10 + 2);
        let binary_held_out = binary_dataset(1000, seed * 10 + 3);
        let schedule = StageSchedule {
            stage1_iters: STAGE1,
            stage2_iters: STAGE2,
            ..StageSchedule::default()
        };
        let config = TrainConfig {
            seed,
            ..TrainConfig::default()
        };

        let mut full = TextCnnModel::new(ModelConfig::default(), seed);
        let mut trainer = Trainer::new(&mut full, config.clone(), STAGE1 + STAGE2).unwrap();
        trainer
            .run(&train, STAGE1, &schedule.weights(Stage::One), |_, _| Ok(()))
            .unwrap();
        pre_label += evaluate(trainer.model(), &held_out, EvalTask::Label).unwrap();
        trainer
            .run(&binary, STAGE2, &schedule.weights(Stage::Two), |_, _| Ok(()))
            .unwrap();
        full_bin += evaluate(&full, &binary_held_out, EvalTask::Binary).unwrap();

        let label_only = TaskWeights {
            binary: 0.0,
            label: 1.0,
            mask: 0.0,
        };
        plain_label += 1.0 - stage_one_accuracy(&train, &held_out, label_only, STAGE1, seed);

        let mut base = TextCnnModel::new(ModelConfig::default(), seed);
        let binary_only = TaskWeights {
            binary: 1.0,
            label: 0.0,
            mask: 0.0,
        };
        Trainer::new(&mut base, config, STAGE2)
            .unwrap()
            .run(&binary, STAGE2, &binary_only, |_, _| Ok(()))
            .unwrap();
        base_bin += evaluate(&base, &binary_held_out, EvalTask::Binary).unwrap();
    }
    let n = seeds.len() as f64;
    let (full_bin, base_bin, pre_label, plain_label) = (full_bin / n, base_bin / n, pre_label / n, plain_label / n);
    verdict(
        full_bin <= base_bin && pre_label <= plain_label,
        format!(
            "mean binary error full {full_bin:.3} vs binary-only {base_bin:.3}; \
             mean 62-class error mask-pretrained {pre_label:.3} vs label-only {plain_label:.3}"
        ),
    )
}

fn contrast_recall() -> Verdict {
    let suite = low_contrast_suite(1);
    // [method][subset] as (hit, total); subset 1 is the low-contrast half.
    let mut counts = [[(0usize, 0usize); 2]; 2];
    for scene in &suite {
        let subset = usize::from(scene.kind == SceneKind::LowContrast);
        for (method, maps) in [false, true].into_iter().enumerate() {
            let cfg = CeMserConfig {
                contrast_maps: maps,
                ..CeMserConfig::default()
            };
            let boxes: Vec<BoundingBox> = ce_mser_detect(&scene.image, &cfg)
                .unwrap()
                .iter()
                .map(|c| c.bbox)
                .collect();
            let (hit, total) = recall_counts(&boxes, &scene.char_boxes());
            counts[method][subset].0 += hit;
            counts[method][subset].1 += total;
        }
    }
    let rate = |(h, t): (usize, usize)| h as f64 / t.max(1) as f64;
    let overall = |m: usize| rate((counts[m][0].0 + counts[m][1].0, counts[m][0].1 + counts[m][1].1));
    let (mser, ce) = (overall(0), overall(1));
    let (mser_low, ce_low) = (rate(counts[0][1]), rate(counts[1][1]));
    verdict(
        ce >= mser && ce_low > mser_low,
        format!(
            "{} scenes; recall MSER {mser:.3} vs CE-MSER {ce:.3}; low-contrast MSER {mser_low:.3} vs CE-MSER {ce_low:.3}",
            suite.len()
        ),
    )
}

fn easy_scenes(model: Option<&TextCnnModel>) -> Verdict {
    let Some(model) = model else {
        return verdict(false, "no trained model from criterion 4");
    };
    let t = Instant::now();
    let mut total = MatchCounts::default();
    for scene in scene_set(&SceneConfig::new(SceneKind::Easy), 20, 1) {
        let words: Vec<BoundingBox> = detect(&scene.image, model, &DetectConfig::default())
            .unwrap()
            .iter()
            .map(|w| w.bbox)
            .collect();
        total += match_counts(&words, &scene.word_boxes(), MATCH_IOU);
    }
    let elapsed = t.elapsed();
    let m = total.metrics();
    verdict(
        m.fmeasure >= 0.7 && elapsed < Duration::from_secs(120),
        format!(
            "P {:.3} R {:.3} F {:.3} ({} matched, {} predicted, {} truth), {:.1}s",
            m.precision,
            m.recall,
            m.fmeasure,
            total.matched,
            total.predicted,
            total.truth,
            secs(elapsed)
        ),
    )
}

/// Synth, train, detect and evaluate under `dir`; returns the model file and
/// the detection records.
fn pipeline_run(dir: &Path) -> (Vec<u8>, String, f64) {
    let manifest = generate_dataset(
        &SynthConfig {
            count: 310,
            seed: 5,
            ..SynthConfig::default()
        },
        &dir.join("chars"),
    )
    .unwrap();
    let synthetic = load_samples(&manifest).unwrap();
    let binary = binary_dataset(100, 6);
    let schedule = StageSchedule {
        stage1_iters: 20,
        stage2_iters: 20,
        ..StageSchedule::default()
    };
    let mut model = TextCnnModel::new(ModelConfig::default(), 5);
    train_staged(&mut model, &synthetic, &binary, &schedule, &TrainConfig::default()).unwrap();
    let model_path = dir.join("model.tcnn");
    model.save(&model_path).unwrap();
    let model = TextCnnModel::load(&model_path).unwrap();

    let truth_dir = dir.join("gt");
    fs::create_dir_all(&truth_dir).unwrap();
    let mut records = Vec::new();
    for (i, scene) in scene_set(&SceneConfig::new(SceneKind::Easy), 3, 5)
        .into_iter()
        .enumerate()
    {
        let id = format!("scene{i}");
        let path = dir.join(format!("{id}.png"));
        scene.image.save_png(&path).unwrap();
        write_box_file(&truth_dir.join(format!("gt_{id}.txt")), &scene.word_boxes(), None).unwrap();
        let image = RasterImage::load(&path).unwrap();
        let cfg = DetectConfig::default();
        records.push(DetectionRecord::new(id, &detect(&image, &model, &cfg).unwrap()));
    }
    let truth = read_truth_dir(&truth_dir).unwrap();
    let f = evaluate_records(&records, &truth, MATCH_IOU)
        .unwrap()
        .metrics()
        .fmeasure;
    let lines: String = records.iter().map(|r| r.to_json_line() + "\n").collect();
    (fs::read(&model_path).unwrap(), lines, f)
}

fn determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (model_a, records_a, f_a) = pipeline_run(a.path());
    let (model_b, records_b, f_b) = pipeline_run(b.path());
    verdict(
        model_a == model_b && records_a == records_b && f_a == f_b,
        format!(
            "model {} bytes identical: {}; records {} bytes identical: {}",
            model_a.len(),
            model_a == model_b,
            records_a.len(),
            records_a == records_b
        ),
    )
}

fn serialization(model: Option<&TextCnnModel>) -> Verdict {
    let fresh = TextCnnModel::new(ModelConfig::default(), 10);
    let model = model.unwrap_or(&fresh);
    let first = model.to_bytes();
    let second = TextCnnModel::read_from(&mut first.as_slice()).unwrap().to_bytes();
    verdict(
        first == second && first.starts_with(b"TCNN1"),
        format!("{} bytes, identical: {}", first.len(), first == second),
    )
}

fn run(n: usize, f: impl FnOnce() -> Verdict) -> bool {
    let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    });
    println!("criterion {n}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    v.pass
}

fn main() -> ExitCode {
    let mut trained = None;
    let results = [
        run(1, gradients),
        run(2, geometry),
        run(3, component_tree),
        run(4, || staged_training(&mut trained)),
        run(5, lambda_divergence),
        run(6, ablation),
        run(7, contrast_recall),
        run(8, || easy_scenes(trained.as_ref())),
        run(9, determinism),
        run(10, || serialization(trained.as_ref())),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!(
        "acceptance: {} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
