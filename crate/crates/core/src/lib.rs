//! Scene text detection from contrast-enhanced MSER candidates filtered by a
//! multi-task text CNN.
//!
//! The pipeline runs in four layers:
//!
//! * [`cemser`] proposes character candidates: maximally stable extremal
//!   regions on the intensity image and on two color-contrast maps.
//! * [`textcnn`] scores each candidate patch with a CNN trained jointly on
//!   text/non-text, character label and pixel-mask targets ([`nn`] holds the
//!   layer engine).
//! * [`pipeline`] groups surviving candidates into lines and words.
//! * [`eval`] scores detections against ground truth.
//!
//! [`synth`] renders the training data and test scenes.

pub mod cemser;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod raster;
pub mod synth;
pub mod textcnn;

pub use error::{Error, Result};
pub use raster::{BoundingBox, GrayMap, LabImage, RasterImage};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/candidates.md")]
    mod candidates {}
    #[doc = include_str!("../../../book/src/textcnn.md")]
    mod textcnn {}
    #[doc = include_str!("../../../book/src/synthesis.md")]
    mod synthesis {}
    #[doc = include_str!("../../../book/src/grouping.md")]
    mod grouping {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
}
