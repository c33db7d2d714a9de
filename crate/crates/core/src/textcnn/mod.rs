//! The multi-task text CNN: architecture, losses, staged training and metrics.

pub mod model;
pub mod sample;
pub mod train;

pub use model::{
    patch_tensor, ForwardCache, ModelConfig, OutputGrads, TextCnnModel, DEFAULT_CLASSES, FINAL_MAP_SIDE, INPUT_MEAN,
    PATCH_SIDE,
};
pub use sample::MultiTaskSample;
pub use train::{
    evaluate, multitask_loss, train_staged, train_staged_monitored, EvalTask, LossRecord, Stage, StageSchedule,
    StepLosses, Task, TaskWeights, TrainReport, Trainer,
};
