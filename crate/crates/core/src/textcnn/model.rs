use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::io::{read_records, write_records, LayerKind};
use crate::nn::{
    relu, relu_backward, sigmoid, sigmoid_backward, softmax, ArgMax, Conv2d, Deconv2d, LayerParams, Linear, MaxPool,
    Tensor,
};
use crate::raster::GrayMap;

/// Side of the square input patch.
pub const PATCH_SIDE: usize = 32;
/// Character classes `0-9A-Za-z`.
pub const DEFAULT_CLASSES: usize = 62;

/// Layer widths. Kernel sizes, pooling and the patch side are fixed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub conv_channels: [usize; 3],
    pub fc_width: usize,
    pub classes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_channels: [32, 48, 64],
            fc_width: 1024,
            classes: DEFAULT_CLASSES,
        }
    }
}

pub(crate) const KERNELS: [usize; 3] = [9, 7, 5];
pub(crate) const POOL: MaxPool = MaxPool { window: 3, stride: 3 };
/// Main-branch map side after conv3: 32 -> 24 -> 18 -> 6 -> 2.
pub const FINAL_MAP_SIDE: usize = 2;
/// Subtracted from every input value so the first layer sees zero-centered data.
pub const INPUT_MEAN: f32 = 0.5;

/// Multi-task text CNN.
///
/// The main branch is conv9 → conv7 → pool3/3 → conv5 → fc → fc with a
/// two-way text/non-text head and a character-label head. The mask branch
/// taps conv2 before pooling and runs two transposed convolutions (7×7 then
/// 9×9) back up to a 32×32 sigmoid map.
#[derive(Clone, Debug, PartialEq)]
pub struct TextCnnModel {
    pub config: ModelConfig,
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub conv3: Conv2d,
    pub fc1: Linear,
    pub fc2: Linear,
    pub head_binary: Linear,
    pub head_label: Linear,
    pub deconv1: Deconv2d,
    pub deconv2: Deconv2d,
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// The batch after mean subtraction.
    pub input: Tensor,
    pub conv1: Tensor,
    pub conv2: Tensor,
    pub pooled: Tensor,
    argmax: ArgMax,
    pub conv3: Tensor,
    pub fc1: Tensor,
    pub fc2: Tensor,
    pub binary_logits: Tensor,
    pub label_logits: Tensor,
    pub deconv1: Option<Tensor>,
    pub mask: Option<Tensor>,
}

/// Upstream gradients for each task output; `None` means the task is inactive.
#[derive(Default)]
pub struct OutputGrads {
    pub binary: Option<Tensor>,
    pub label: Option<Tensor>,
    pub mask: Option<Tensor>,
}

impl ForwardCache {
    /// Flat conv2 index that won each pooling window.
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

impl TextCnnModel {
    fn flat_features(config: &ModelConfig) -> usize {
        config.conv_channels[2] * FINAL_MAP_SIDE * FINAL_MAP_SIDE
    }

    /// All-zero parameters; every head then predicts a uniform distribution.
    pub fn zeros(config: ModelConfig) -> Self {
        let [c1, c2, c3] = config.conv_channels;
        let f = config.fc_width;
        Self {
            conv1: Conv2d::zeros(3, c1, KERNELS[0]),
            conv2: Conv2d::zeros(c1, c2, KERNELS[1]),
            conv3: Conv2d::zeros(c2, c3, KERNELS[2]),
            fc1: Linear::zeros(Self::flat_features(&config), f),
            fc2: Linear::zeros(f, f),
            head_binary: Linear::zeros(f, 2),
            head_label: Linear::zeros(f, config.classes),
            deconv1: Deconv2d::zeros(c2, c1, KERNELS[1]),
            deconv2: Deconv2d::zeros(c1, 1, KERNELS[0]),
            config,
        }
    }

    /// He-initialized model. The transposed convolutions start as copies of
    /// conv2 and conv1 (the latter averaged over RGB for the one-channel mask)
    /// and are trained independently afterwards.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [c1, c2, c3] = config.conv_channels;
        let f = config.fc_width;
        let conv1 = Conv2d::he_init(3, c1, KERNELS[0], &mut rng);
        let conv2 = Conv2d::he_init(c1, c2, KERNELS[1], &mut rng);
        let conv3 = Conv2d::he_init(c2, c3, KERNELS[2], &mut rng);
        let fc1 = Linear::he_init(Self::flat_features(&config), f, &mut rng);
        let fc2 = Linear::he_init(f, f, &mut rng);
        let head_binary = Linear::he_init(f, 2, &mut rng);
        let head_label = Linear::he_init(f, config.classes, &mut rng);

        let mut deconv1 = Deconv2d::zeros(c2, c1, KERNELS[1]);
        deconv1
            .params
            .weights
            .data_mut()
            .copy_from_slice(conv2.params.weights.data());

        let mut deconv2 = Deconv2d::zeros(c1, 1, KERNELS[0]);
        let kk = KERNELS[0] * KERNELS[0];
        let w1 = conv1.params.weights.data();
        for (o, dst) in deconv2.params.weights.data_mut().chunks_exact_mut(kk).enumerate() {
            for (i, d) in dst.iter_mut().enumerate() {
                *d = (0..3).map(|ch| w1[(o * 3 + ch) * kk + i]).sum::<f32>() / 3.0;
            }
        }

        Self {
            config,
            conv1,
            conv2,
            conv3,
            fc1,
            fc2,
            head_binary,
            head_label,
            deconv1,
            deconv2,
        }
    }

    fn records(&self) -> [(LayerKind, &LayerParams); 9] {
        [
            (LayerKind::Conv, &self.conv1.params),
            (LayerKind::Conv, &self.conv2.params),
            (LayerKind::Conv, &self.conv3.params),
            (LayerKind::Linear, &self.fc1.params),
            (LayerKind::Linear, &self.fc2.params),
            (LayerKind::Linear, &self.head_binary.params),
            (LayerKind::Linear, &self.head_label.params),
            (LayerKind::Deconv, &self.deconv1.params),
            (LayerKind::Deconv, &self.deconv2.params),
        ]
    }

    pub(crate) fn params_mut(&mut self) -> [&mut LayerParams; 9] {
        [
            &mut self.conv1.params,
            &mut self.conv2.params,
            &mut self.conv3.params,
            &mut self.fc1.params,
            &mut self.fc2.params,
            &mut self.head_binary.params,
            &mut self.head_label.params,
            &mut self.deconv1.params,
            &mut self.deconv2.params,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.records().iter().map(|(_, p)| p.param_count()).sum()
    }

    /// Serializes to the "TCNN1" format.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        write_records(w, &self.records())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let recs = read_records(r)?;
        let kinds: Vec<LayerKind> = recs.iter().map(|(k, _)| *k).collect();
        let expected_kinds: Vec<LayerKind> = TextCnnModel::zeros(ModelConfig::default())
            .records()
            .iter()
            .map(|(k, _)| *k)
            .collect();
        if kinds != expected_kinds {
            return Err(Error::ModelFormat(format!("unexpected layer sequence {kinds:?}")));
        }
        let shape = |i: usize| recs[i].1.weights.shape().to_vec();
        let config = ModelConfig {
            conv_channels: [shape(0)[0], shape(1)[0], shape(2)[0]],
            fc_width: shape(3)[0],
            classes: shape(6)[0],
        };
        let mut model = Self::zeros(config);
        for ((_, src), dst) in recs.into_iter().zip(model.params_mut()) {
            if src.weights.shape() != dst.weights.shape() || src.biases.shape() != dst.biases.shape() {
                return Err(Error::ModelFormat(format!(
                    "layer shape {:?} does not fit the architecture (expected {:?})",
                    src.weights.shape(),
                    dst.weights.shape()
                )));
            }
            *dst = src;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut &bytes[..])
    }

    /// Runs the main branch, and the mask branch when `with_mask` is set, on
    /// an N×3×32×32 batch.
    pub fn forward(&self, input: &Tensor, with_mask: bool) -> Result<ForwardCache> {
        let s = input.shape();
        if s.len() != 4 || s[1..] != [3, PATCH_SIDE, PATCH_SIDE] {
            return Err(Error::ShapeMismatch {
                expected: vec![s.first().copied().unwrap_or(1), 3, PATCH_SIDE, PATCH_SIDE],
                actual: s.to_vec(),
            });
        }
        let n = s[0];
        let mut input = input.clone();
        input.data_mut().iter_mut().for_each(|v| *v -= INPUT_MEAN);
        let conv1 = relu(&self.conv1.forward(&input)?);
        let conv2 = relu(&self.conv2.forward(&conv1)?);
        let (pooled, argmax) = POOL.forward(&conv2)?;
        let conv3 = relu(&self.conv3.forward(&pooled)?);
        let flat = conv3.clone().reshape(&[n, Self::flat_features(&self.config)])?;
        let fc1 = relu(&self.fc1.forward(&flat)?);
        let fc2 = relu(&self.fc2.forward(&fc1)?);
        let binary_logits = self.head_binary.forward(&fc2)?;
        let label_logits = self.head_label.forward(&fc2)?;
        let (deconv1, mask) = if with_mask {
            let d1 = relu(&self.deconv1.forward(&conv2)?);
            let m = sigmoid(&self.deconv2.forward(&d1)?);
            (Some(d1), Some(m))
        } else {
            (None, None)
        };
        Ok(ForwardCache {
            input,
            conv1,
            conv2,
            pooled,
            argmax,
            conv3,
            fc1,
            fc2,
            binary_logits,
            label_logits,
            deconv1,
            mask,
        })
    }

    /// Backpropagates the active task gradients, accumulating into every
    /// layer the tasks reach.
    pub fn backward(&mut self, cache: &ForwardCache, grads: &OutputGrads) -> Result<()> {
        let n = cache.input.shape()[0];
        let mut d_fc2: Option<Tensor> = None;
        let add = |acc: &mut Option<Tensor>, g: Tensor| match acc {
            Some(a) => a.add_assign(&g),
            None => *acc = Some(g),
        };
        if let Some(g) = &grads.binary {
            let d = self.head_binary.backward(&cache.fc2, g, true)?.expect("input grad");
            add(&mut d_fc2, d);
        }
        if let Some(g) = &grads.label {
            let d = self.head_label.backward(&cache.fc2, g, true)?.expect("input grad");
            add(&mut d_fc2, d);
        }

        let mut d_conv2: Option<Tensor> = None;
        if let Some(d) = d_fc2 {
            let dz2 = relu_backward(&cache.fc2, &d);
            let d_fc1 = self.fc2.backward(&cache.fc1, &dz2, true)?.expect("input grad");
            let dz1 = relu_backward(&cache.fc1, &d_fc1);
            let flat = cache.conv3.clone().reshape(&[n, Self::flat_features(&self.config)])?;
            let d_flat = self.fc1.backward(&flat, &dz1, true)?.expect("input grad");
            let d_conv3 = d_flat.reshape(cache.conv3.shape())?;
            let dz3 = relu_backward(&cache.conv3, &d_conv3);
            let d_pooled = self.conv3.backward(&cache.pooled, &dz3, true)?.expect("input grad");
            add(
                &mut d_conv2,
                MaxPool::backward(&d_pooled, &cache.argmax, cache.conv2.shape()),
            );
        }

        if let Some(g) = &grads.mask {
            let (Some(d1), Some(mask)) = (&cache.deconv1, &cache.mask) else {
                return Err(Error::InvalidData(
                    "mask gradient given but forward ran without the mask branch".into(),
                ));
            };
            let dz = sigmoid_backward(mask, g);
            let d_d1 = self.deconv2.backward(d1, &dz, true)?.expect("input grad");
            let dz1 = relu_backward(d1, &d_d1);
            let d = self.deconv1.backward(&cache.conv2, &dz1, true)?.expect("input grad");
            add(&mut d_conv2, d);
        }

        if let Some(d) = d_conv2 {
            let dz2 = relu_backward(&cache.conv2, &d);
            let d_conv1 = self.conv2.backward(&cache.conv1, &dz2, true)?.expect("input grad");
            let dz1 = relu_backward(&cache.conv1, &d_conv1);
            self.conv1.backward(&cache.input, &dz1, false)?;
        }
        Ok(())
    }

    /// Binary and label logits for one 32×32×3 patch (values in [0, 1],
    /// channel-interleaved).
    pub fn forward_main(&self, patch: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
        let cache = self.forward(&patch_tensor(&[patch])?, false)?;
        Ok((cache.binary_logits.into_data(), cache.label_logits.into_data()))
    }

    /// Text probability `softmax(binary)[1]` for each patch.
    pub fn text_probabilities(&self, patches: &[&[f32]]) -> Result<Vec<f32>> {
        Ok(self
            .binary_logits(patches)?
            .iter()
            .map(|l| softmax(l)[1] as f32)
            .collect())
    }

    pub fn binary_logits(&self, patches: &[&[f32]]) -> Result<Vec<[f32; 2]>> {
        let mut out = Vec::with_capacity(patches.len());
        for chunk in patches.chunks(64) {
            let cache = self.forward(&patch_tensor(chunk)?, false)?;
            out.extend(cache.binary_logits.data().chunks_exact(2).map(|c| [c[0], c[1]]));
        }
        Ok(out)
    }

    /// Pixel-level text probability map for one patch.
    pub fn forward_mask(&self, patch: &[f32]) -> Result<GrayMap> {
        let cache = self.forward(&patch_tensor(&[patch])?, true)?;
        GrayMap::new(PATCH_SIDE, PATCH_SIDE, cache.mask.expect("mask branch ran").into_data())
    }
}

/// Packs interleaved 32×32×3 patches into an N×3×32×32 tensor.
pub fn patch_tensor(patches: &[&[f32]]) -> Result<Tensor> {
    let plane = PATCH_SIDE * PATCH_SIDE;
    let mut data = vec![0.0; patches.len() * 3 * plane];
    for (s, p) in patches.iter().enumerate() {
        if p.len() != 3 * plane {
            return Err(Error::ShapeMismatch {
                expected: vec![PATCH_SIDE, PATCH_SIDE, 3],
                actual: vec![p.len()],
            });
        }
        let dst = &mut data[s * 3 * plane..(s + 1) * 3 * plane];
        for (i, px) in p.chunks_exact(3).enumerate() {
            for c in 0..3 {
                dst[c * plane + i] = px[c];
            }
        }
    }
    Tensor::new(&[patches.len(), 3, PATCH_SIDE, PATCH_SIDE], data)
}
