//! Reverse-mode differentiation core and the three learned models: the
//! periodicity compensator, the link surrogate and a toy image codec.

mod compensator;
mod gradcheck;
mod graph;
mod jscc;
mod layers;
mod ops;
mod params;
mod proxy;
pub mod reshape;
mod tensor;

use serde::{Deserialize, Serialize};

pub use compensator::{Compensator, PeriodSpec};
pub use gradcheck::{evaluate, grad_check, relative_error, GradCheckReport};
pub use graph::{Activation, Gradients, Graph, LinearOp, Var, ZERO};
pub use jscc::{glyph_images, image_variance, pair_latent, ToyJscc};
pub use layers::{ConvStack, DenseStack};
pub use ops::{complex_to_reals, reals_to_complex, AnalyzeOp, SynthOp};
pub use params::{param_grads, ParamSet, Sgd, PARAM_MAGIC};
pub use proxy::{calibrate_distortion, calibrate_noise_ratio, ProxyChannel, ProxyModel};
pub use tensor::Tensor;

/// Architecture of all three models. Every field is part of the
/// checkpoint fingerprint of the model that uses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub activation: Activation,
    pub comp_channels: usize,
    pub comp_layers: usize,
    pub comp_kernel: usize,
    pub comp_residual: bool,
    /// Overrides the default JSCC-symbol period in samples.
    pub period_j: Option<usize>,
    pub proxy_channels: usize,
    pub proxy_layers: usize,
    pub proxy_kernel: usize,
    pub proxy_channel: ProxyChannel,
    pub image_side: usize,
    /// Complex symbols per image.
    pub latent_symbols: usize,
    /// Hidden widths of encoder and decoder; empty means linear.
    pub jscc_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            activation: Activation::Relu,
            comp_channels: 8,
            comp_layers: 2,
            comp_kernel: 3,
            comp_residual: true,
            period_j: None,
            proxy_channels: 8,
            proxy_layers: 3,
            proxy_kernel: 5,
            proxy_channel: ProxyChannel::Projected,
            image_side: 8,
            latent_symbols: 12,
            jscc_hidden: Vec::new(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |m: &str| Err(crate::Error::config(m.to_string()));
        if self.comp_layers == 0 || self.proxy_layers == 0 {
            return bad("layer counts must be at least 1");
        }
        if self.comp_channels == 0 || self.proxy_channels == 0 {
            return bad("channel widths must be at least 1");
        }
        if self.comp_kernel % 2 == 0 || self.proxy_kernel % 2 == 0 {
            return bad("kernel sizes must be odd");
        }
        if self.image_side == 0 || self.latent_symbols == 0 {
            return bad("image side and latent size must be at least 1");
        }
        if self.period_j == Some(0) {
            return bad("period_j must be at least 1");
        }
        if self.jscc_hidden.contains(&0) {
            return bad("hidden widths must be at least 1");
        }
        Ok(())
    }

    fn act_name(&self) -> &'static str {
        match self.activation {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

/// Channel widths `[c_in, hidden × (layers − 1), c_out]`.
fn widths(c_in: usize, hidden: usize, layers: usize, c_out: usize) -> Vec<usize> {
    let mut w = vec![c_in];
    w.extend(std::iter::repeat_n(hidden, layers - 1));
    w.push(c_out);
    w
}
