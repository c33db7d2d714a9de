//! Multi-task losses, the two-stage schedule and task metrics.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{patch_tensor, OutputGrads, TextCnnModel, PATCH_SIDE};
use super::sample::MultiTaskSample;
use crate::error::{Error, Result};
use crate::nn::{l2_mask_loss, sgd_step, softmax_xent, Tensor, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Binary,
    Label,
    Mask,
    Total,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Label => "label",
            Task::Mask => "mask",
            Task::Total => "total",
        })
    }
}

/// Loss weights for the three heads. A zero weight disables the task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaskWeights {
    pub binary: f32,
    pub label: f32,
    pub mask: f32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Character label and mask regression on synthetic characters.
    One,
    /// Text/non-text plus character label; the mask task is stopped.
    Two,
}

/// Iteration counts and loss weights of the staged schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSchedule {
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    pub lambda_label_stage1: f32,
    pub lambda_mask_stage1: f32,
    pub lambda_label_stage2: f32,
}

impl Default for StageSchedule {
    fn default() -> Self {
        Self {
            stage1_iters: 3000,
            stage2_iters: 7000,
            lambda_label_stage1: 1.0,
            lambda_mask_stage1: 0.3,
            lambda_label_stage2: 0.3,
        }
    }
}

impl StageSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.stage1_iters == 0 {
            return Err(Error::InvalidConfig(
                "stage 1 is required: stage1_iters must be at least 1".into(),
            ));
        }
        if self.stage2_iters == 0 {
            return Err(Error::InvalidConfig("stage2_iters must be at least 1".into()));
        }
        let lambdas = [
            self.lambda_label_stage1,
            self.lambda_mask_stage1,
            self.lambda_label_stage2,
        ];
        if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidConfig("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    pub fn weights(&self, stage: Stage) -> TaskWeights {
        match stage {
            Stage::One => TaskWeights {
                binary: 0.0,
                label: self.lambda_label_stage1,
                mask: self.lambda_mask_stage1,
            },
            Stage::Two => TaskWeights {
                binary: 1.0,
                label: self.lambda_label_stage2,
                mask: 0.0,
            },
        }
    }

    pub fn total_iters(&self) -> usize {
        self.stage1_iters + self.stage2_iters
    }
}

/// One point of a loss curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub task: Task,
    pub loss: f32,
}

impl fmt::Display for LossRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}", self.iteration, self.task, self.loss)
    }
}

/// Batch-mean losses of one step, per task and weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepLosses {
    pub binary: Option<f32>,
    pub label: Option<f32>,
    pub mask: Option<f32>,
    pub total: f32,
}

fn check_stage_labels(batch: &[&MultiTaskSample], weights: &TaskWeights) -> Result<()> {
    if weights.binary > 0.0 {
        if let Some(i) = batch.iter().position(|s| s.binary_label.is_none()) {
            return Err(Error::InvalidData(format!(
                "sample {i} lacks the binary label its stage requires"
            )));
        }
    }
    Ok(())
}

struct Computed {
    losses: StepLosses,
    grads: OutputGrads,
}

/// Forward losses and output gradients of the weighted batch-mean objective.
fn compute(
    model: &TextCnnModel,
    batch: &[&MultiTaskSample],
    weights: &TaskWeights,
) -> Result<(super::model::ForwardCache, Computed)> {
    if batch.is_empty() {
        return Err(Error::InvalidData("empty batch".into()));
    }
    check_stage_labels(batch, weights)?;
    let n = batch.len();
    let patches: Vec<&[f32]> = batch.iter().map(|s| s.patch.as_slice()).collect();
    let with_mask = weights.mask > 0.0;
    let cache = model.forward(&patch_tensor(&patches)?, with_mask)?;
    let scale = 1.0 / n as f32;
    let classes = model.config.classes;

    let mut losses = StepLosses::default();
    let mut grads = OutputGrads::default();

    if weights.binary > 0.0 {
        let mut g = Tensor::zeros(&[n, 2]);
        let mut sum = 0.0f64;
        for (i, s) in batch.iter().enumerate() {
            let label = s.binary_label.expect("checked above") as usize;
            let logits = &cache.binary_logits.data()[i * 2..i * 2 + 2];
            let (loss, d) = softmax_xent(logits, label);
            sum += loss as f64;
            for (dst, v) in g.data_mut()[i * 2..i * 2 + 2].iter_mut().zip(d) {
                *dst = v * scale * weights.binary;
            }
        }
        let mean = (sum / n as f64) as f32;
        losses.binary = Some(mean);
        losses.total += weights.binary * mean;
        grads.binary = Some(g);
    }

    if weights.label > 0.0 {
        let mut g = Tensor::zeros(&[n, classes]);
        let mut sum = 0.0f64;
        let mut any = false;
        for (i, s) in batch.iter().enumerate() {
            let Some(label) = s.char_label else { continue };
            if label >= classes {
                return Err(Error::InvalidData(format!(
                    "character label {label} exceeds {classes} classes"
                )));
            }
            any = true;
            let logits = &cache.label_logits.data()[i * classes..(i + 1) * classes];
            let (loss, d) = softmax_xent(logits, label);
            sum += loss as f64;
            for (dst, v) in g.data_mut()[i * classes..(i + 1) * classes].iter_mut().zip(d) {
                *dst = v * scale * weights.label;
            }
        }
        if any {
            let mean = (sum / n as f64) as f32;
            losses.label = Some(mean);
            losses.total += weights.label * mean;
            grads.label = Some(g);
        }
    }

    if with_mask {
        let plane = PATCH_SIDE * PATCH_SIDE;
        let pred = cache.mask.as_ref().expect("mask branch ran");
        let mut g = Tensor::zeros(pred.shape());
        let mut sum = 0.0f64;
        let mut any = false;
        for (i, s) in batch.iter().enumerate() {
            let Some(mask) = &s.mask else { continue };
            any = true;
            let p = Tensor::new(&[plane], pred.data()[i * plane..(i + 1) * plane].to_vec())?;
            let t = Tensor::new(&[plane], mask.clone())?;
            let (loss, d) = l2_mask_loss(&p, &t)?;
            sum += loss as f64;
            for (dst, v) in g.data_mut()[i * plane..(i + 1) * plane].iter_mut().zip(d.data()) {
                *dst = v * scale * weights.mask;
            }
        }
        if any {
            let mean = (sum / n as f64) as f32;
            losses.mask = Some(mean);
            losses.total += weights.mask * mean;
            grads.mask = Some(g);
        }
    }

    if !losses.total.is_finite() {
        return Err(Error::NonFinite("multi-task loss"));
    }
    Ok((cache, Computed { losses, grads }))
}

/// Weighted batch-mean loss of one stage without touching the parameters.
///
/// Stage 1 is `λ_label·L_label + λ_mask·L_mask`; stage 2 is
/// `L_binary + λ_label·L_label`. Samples missing an optional target
/// contribute zero to that term.
pub fn multitask_loss(
    model: &TextCnnModel,
    batch: &[&MultiTaskSample],
    stage: Stage,
    schedule: &StageSchedule,
) -> Result<f32> {
    let weights = schedule.weights(stage);
    Ok(compute(model, batch, &weights)?.1.losses.total)
}

/// Sequential momentum-SGD driver over one model.
pub struct Trainer<'m> {
    model: &'m mut TextCnnModel,
    config: TrainConfig,
    total_iters: usize,
    iteration: usize,
    rng: ChaCha8Rng,
    curve: Vec<LossRecord>,
}

impl<'m> Trainer<'m> {
    /// `total_iters` positions the ×0.1 learning-rate drop at two thirds of
    /// the run.
    pub fn new(model: &'m mut TextCnnModel, config: TrainConfig, total_iters: usize) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            model,
            config,
            total_iters,
            iteration: 0,
            rng,
            curve: Vec::new(),
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn model(&self) -> &TextCnnModel {
        self.model
    }

    pub fn curve(&self) -> &[LossRecord] {
        &self.curve
    }

    pub fn into_curve(self) -> Vec<LossRecord> {
        self.curve
    }

    pub fn learning_rate(&self) -> f32 {
        if 3 * self.iteration >= 2 * self.total_iters {
            self.config.learning_rate * 0.1
        } else {
            self.config.learning_rate
        }
    }

    /// One SGD step on `batch`.
    pub fn step(&mut self, batch: &[&MultiTaskSample], weights: &TaskWeights) -> Result<StepLosses> {
        let (cache, computed) = compute(self.model, batch, weights)?;
        self.model.backward(&cache, &computed.grads)?;
        let lr = self.learning_rate();
        for p in self.model.params_mut() {
            sgd_step(p, lr, &self.config);
        }
        self.iteration += 1;
        let l = computed.losses;
        let it = self.iteration;
        for (task, v) in [
            (Task::Binary, l.binary),
            (Task::Label, l.label),
            (Task::Mask, l.mask),
            (Task::Total, Some(l.total)),
        ] {
            if let Some(loss) = v {
                self.curve.push(LossRecord {
                    iteration: it,
                    task,
                    loss,
                });
            }
        }
        Ok(l)
    }

    /// Runs `iters` steps over shuffled epochs of `data`, calling `on_epoch`
    /// with the completed epoch count after every full pass.
    pub fn run(
        &mut self,
        data: &[MultiTaskSample],
        iters: usize,
        weights: &TaskWeights,
        mut on_epoch: impl FnMut(usize, &TextCnnModel) -> Result<()>,
    ) -> Result<()> {
        if data.is_empty() {
            return Err(Error::InvalidData("training set is empty".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut cursor = 0;
        let mut epoch = 0;
        for _ in 0..iters {
            let mut batch = Vec::with_capacity(self.config.batch_size);
            while batch.len() < self.config.batch_size {
                if cursor == order.len() {
                    epoch += 1;
                    on_epoch(epoch, self.model)?;
                    order.shuffle(&mut self.rng);
                    cursor = 0;
                }
                batch.push(&data[order[cursor]]);
                cursor += 1;
            }
            self.step(&batch, weights)?;
        }
        Ok(())
    }
}

/// Output of [`train_staged`].
#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub curve: Vec<LossRecord>,
    /// Iteration at which stage 2 began.
    pub stage_boundary: usize,
}

/// Stage 1 (label + mask) on `synthetic`, then stage 2 (binary + label) on
/// `binary_set`.
pub fn train_staged(
    model: &mut TextCnnModel,
    synthetic: &[MultiTaskSample],
    binary_set: &[MultiTaskSample],
    schedule: &StageSchedule,
    config: &TrainConfig,
) -> Result<TrainReport> {
    train_staged_monitored(model, synthetic, binary_set, schedule, config, |_, _, _| Ok(()))
}

/// [`train_staged`], calling `on_epoch(stage, epoch, model)` after every full
/// pass over the current stage's data. An error from the callback aborts
/// training.
pub fn train_staged_monitored(
    model: &mut TextCnnModel,
    synthetic: &[MultiTaskSample],
    binary_set: &[MultiTaskSample],
    schedule: &StageSchedule,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(Stage, usize, &TextCnnModel) -> Result<()>,
) -> Result<TrainReport> {
    schedule.validate()?;
    if synthetic.is_empty() || binary_set.is_empty() {
        return Err(Error::InvalidData(
            "both the synthetic and the binary training sets must be non-empty".into(),
        ));
    }
    if let Some(i) = binary_set.iter().position(|s| s.binary_label.is_none()) {
        return Err(Error::InvalidData(format!("binary set sample {i} has no binary label")));
    }
    let mut trainer = Trainer::new(model, config.clone(), schedule.total_iters())?;
    log::info!("stage 1: {} iterations", schedule.stage1_iters);
    trainer.run(
        synthetic,
        schedule.stage1_iters,
        &schedule.weights(Stage::One),
        |e, m| on_epoch(Stage::One, e, m),
    )?;
    let stage_boundary = trainer.iteration();
    log::info!("stage 2: {} iterations", schedule.stage2_iters);
    trainer.run(
        binary_set,
        schedule.stage2_iters,
        &schedule.weights(Stage::Two),
        |e, m| on_epoch(Stage::Two, e, m),
    )?;
    Ok(TrainReport {
        curve: trainer.into_curve(),
        stage_boundary,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalTask {
    Binary,
    Label,
    Mask,
}

/// Binary and label tasks give the error rate over samples carrying that
/// target; the mask task gives the mean squared-distance sum per sample.
pub fn evaluate(model: &TextCnnModel, set: &[MultiTaskSample], task: EvalTask) -> Result<f64> {
    let relevant: Vec<&MultiTaskSample> = set
        .iter()
        .filter(|s| match task {
            EvalTask::Binary => s.binary_label.is_some(),
            EvalTask::Label => s.char_label.is_some(),
            EvalTask::Mask => s.mask.is_some(),
        })
        .collect();
    if relevant.is_empty() {
        return Err(Error::InvalidData(format!("no samples carry the target for {task:?}")));
    }
    let mut acc = 0.0f64;
    for chunk in relevant.chunks(64) {
        let patches: Vec<&[f32]> = chunk.iter().map(|s| s.patch.as_slice()).collect();
        let cache = model.forward(&patch_tensor(&patches)?, task == EvalTask::Mask)?;
        for (i, s) in chunk.iter().enumerate() {
            acc += match task {
                EvalTask::Binary => {
                    let l = &cache.binary_logits.data()[i * 2..i * 2 + 2];
                    let pred = usize::from(l[1] > l[0]);
                    f64::from(pred != s.binary_label.expect("filtered") as usize)
                }
                EvalTask::Label => {
                    let c = model.config.classes;
                    let l = &cache.label_logits.data()[i * c..(i + 1) * c];
                    f64::from(argmax(l) != s.char_label.expect("filtered"))
                }
                EvalTask::Mask => {
                    let plane = PATCH_SIDE * PATCH_SIDE;
                    let pred = &cache.mask.as_ref().expect("mask ran").data()[i * plane..(i + 1) * plane];
                    pred.iter()
                        .zip(s.mask.as_ref().expect("filtered"))
                        .map(|(&p, &t)| ((p - t) as f64).powi(2))
                        .sum()
                }
            };
        }
    }
    Ok(acc / relevant.len() as f64)
}

fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
