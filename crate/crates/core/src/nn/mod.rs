//! Framework-free inference primitives.
//!
//! Everything runs in `f32` on [`Tensor4`] values laid out
//! `[batch][channel][time][freq]`. The functions are pure; recurrent state is
//! passed explicitly.

mod conv;
mod gru;
mod ops;
mod tensor;

pub use conv::{conv2d, conv_transpose2d, conv_transpose_out_len, ConvOptions, ConvParams};
pub use gru::{gru_sequence, Direction, GruCell, GruParams};
pub use ops::{batch_norm_infer, channel_shuffle, layer_norm, prelu, shuffle_source, sigmoid_act, tanh_act, BatchNorm};
pub use tensor::{FeatureTensor, Tensor4};

pub(crate) use gru::{affine, sigmoid};
