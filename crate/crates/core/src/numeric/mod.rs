//! Dense linear algebra, activations, backpropagation, RMSProp and seeded
//! randomness shared by every network in the crate.

mod layer;
mod matrix;
mod mlp;
mod rmsprop;
mod rng;

pub use layer::{
    elu, linear_forward, sigmoid, softmax_in_place, Activation, DenseLayer, HiddenActivation,
};
pub use matrix::Matrix;
pub use mlp::{LayerShape, Mlp};
pub use rmsprop::{rmsprop_update, RmsProp, RmsPropConfig, DEFAULT_DECAY, DEFAULT_EPSILON};
pub use rng::{mix_seed, sample_standard_normal, SeededRng};

/// Values are clamped into `[LOG_CLAMP, 1 − LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}
