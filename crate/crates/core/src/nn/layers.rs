use rand::Rng;

use super::graph::{Activation, Graph, Var};
use super::params::ParamSet;

/// Stack of same-padded 2D convolutions with an activation between layers
/// and none after the last. Input and output are `[channels, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStack {
    layers: Vec<(usize, usize)>,
    activation: Activation,
}

impl ConvStack {
    /// `channels = [c_in, hidden..., c_out]`. With `zero_final` the last
    /// layer starts at zero so the stack initially outputs 0.
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        channels: &[usize],
        kernel: (usize, usize),
        activation: Activation,
        zero_final: bool,
        rng: &mut R,
    ) -> Self {
        assert!(channels.len() >= 2, "need input and output channels");
        let (kh, kw) = kernel;
        let last = channels.len() - 2;
        let layers = channels
            .windows(2)
            .enumerate()
            .map(|(i, c)| {
                let shape = [c[1], c[0], kh, kw];
                let w = if zero_final && i == last {
                    params.add_zeros(&format!("{prefix}.conv{i}.w"), &shape)
                } else {
                    params.add_glorot(&format!("{prefix}.conv{i}.w"), &shape, c[0] * kh * kw, c[1] * kh * kw, rng)
                };
                let b = params.add_zeros(&format!("{prefix}.conv{i}.b"), &[c[1]]);
                (w, b)
            })
            .collect();
        ConvStack { layers, activation }
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], mut x: Var) -> Var {
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            x = g.conv2d(x, p[w], p[b]);
            if i + 1 < self.layers.len() {
                x = g.activation(x, self.activation);
            }
        }
        x
    }
}

/// Stack of dense layers on `[n, features]` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStack {
    layers: Vec<(usize, usize)>,
    activation: Activation,
}

impl DenseStack {
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        widths: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let w = params.add_glorot(&format!("{prefix}.dense{i}.w"), &[d[1], d[0]], d[0], d[1], rng);
                let b = params.add_zeros(&format!("{prefix}.dense{i}.b"), &[d[1]]);
                (w, b)
            })
            .collect();
        DenseStack { layers, activation }
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], mut x: Var) -> Var {
        for (i, &(w, b)) in self.layers.iter().enumerate() {
            x = g.dense(x, p[w], p[b]);
            if i + 1 < self.layers.len() {
                x = g.activation(x, self.activation);
            }
        }
        x
    }
}
