//! A small tensor and layer engine with exact gradients for the layers a
//! patch classifier needs: convolution, transposed convolution, max pooling,
//! dense layers, ReLU/sigmoid, softmax cross-entropy and L2 regression.

pub mod io;
pub mod layers;
pub mod loss;
pub mod sgd;
pub mod tensor;

pub use layers::{
    relu, relu_backward, sigmoid, sigmoid_backward, ArgMax, Conv2d, Deconv2d, LayerParams, Linear, MaxPool,
};
pub use loss::{l2_mask_loss, softmax, softmax_xent};
pub use sgd::{sgd_step, TrainConfig};
pub use tensor::Tensor;
