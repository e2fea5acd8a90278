//! QuadNet: seven 1-D conv layers and three dense layers regressing the
//! change in distance or height over one window.

pub mod checkpoint;
pub mod layers;
pub mod model;
pub mod network;
pub mod tensor;
pub mod train;

pub use layers::{conv1d_forward, dense_forward, relu, Activation, ConvLayer, DenseLayer};
pub use model::{InputScaling, QuadNet};
pub use network::{grad_check, mse_loss, window_to_input, ArchSpec, ConvSpec, GradCheckReport, Gradients, Network};
pub use tensor::Tensor;
pub use train::{train, Optimizer, TrainConfig, TrainHistory};
