use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer};
use super::matrix::Matrix;
use super::rng::SeededRng;
use crate::error::{Error, Result};

/// Architecture of one dense layer, as persisted in model manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

/// Stack of dense layers trained by manual backpropagation.
#[derive(Clone, Debug)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// `widths` = [input, hidden..., output]. Hidden layers use `hidden`,
    /// the final layer uses `output`.
    pub fn new(
        widths: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "MLP widths must have at least two positive entries, got {widths:?}"
            )));
        }
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n {
                    output.clone()
                } else {
                    hidden.clone()
                };
                DenseLayer::glorot(widths[i], widths[i + 1], act, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_width() != pair[1].in_width() {
                return Err(Error::shape(
                    "Mlp::from_layers",
                    format!("layer {i} out {}", pair[0].out_width()),
                    format!("layer {} in {}", i + 1, pair[1].in_width()),
                ));
            }
        }
        if layers.is_empty() {
            return Err(Error::InvalidArgument(
                "MLP needs at least one layer".into(),
            ));
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width()
    }

    pub fn shapes(&self) -> Vec<LayerShape> {
        self.layers
            .iter()
            .map(|l| LayerShape {
                inputs: l.in_width(),
                outputs: l.out_width(),
                activation: l.activation.clone(),
            })
            .collect()
    }

    pub fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        let mut x = self.layers[0].forward(input)?;
        for layer in &mut self.layers[1..] {
            x = layer.forward(&x)?;
        }
        Ok(x)
    }

    /// Forward pass without caching; usable on a shared reference.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        let mut x = self.layers[0].infer(input)?;
        for layer in &self.layers[1..] {
            x = layer.infer(&x)?;
        }
        Ok(x)
    }

    /// Backpropagates `∂L/∂output`, accumulating into every layer's grad
    /// buffers, and returns `∂L/∂input`.
    pub fn backward(&mut self, loss_grad: &Matrix) -> Result<Matrix> {
        let mut g = loss_grad.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            g = layer.backward(&g, i)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(DenseLayer::zero_grad);
    }

    pub fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(DenseLayer::clear_cache);
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    fn locate(&self, mut index: usize) -> (usize, bool, usize) {
        for (li, layer) in self.layers.iter().enumerate() {
            let nw = layer.weights.as_slice().len();
            if index < nw {
                return (li, true, index);
            }
            index -= nw;
            if index < layer.bias.len() {
                return (li, false, index);
            }
            index -= layer.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Flat parameter access in layer order (weights row-major, then bias).
    pub fn param(&self, index: usize) -> f64 {
        let (l, is_w, i) = self.locate(index);
        if is_w {
            self.layers[l].weights.as_slice()[i]
        } else {
            self.layers[l].bias[i]
        }
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, is_w, i) = self.locate(index);
        if is_w {
            self.layers[l].weights.as_mut_slice()[i] = value;
        } else {
            self.layers[l].bias[i] = value;
        }
    }

    pub fn grad(&self, index: usize) -> f64 {
        let (l, is_w, i) = self.locate(index);
        if is_w {
            self.layers[l].grad_weights.as_slice()[i]
        } else {
            self.layers[l].grad_bias[i]
        }
    }

    pub fn gradients(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.grad_weights.as_slice());
            out.extend_from_slice(&layer.grad_bias);
        }
        out
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.as_slice());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    pub fn load_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Model(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.as_slice().len();
            layer
                .weights
                .as_mut_slice()
                .copy_from_slice(&values[offset..offset + nw]);
            offset += nw;
            let nb = layer.bias.len();
            layer.bias.copy_from_slice(&values[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    /// Builds a zero-initialized network with the given architecture.
    pub fn from_shapes(shapes: &[LayerShape]) -> Result<Self> {
        let layers = shapes
            .iter()
            .map(|s| {
                DenseLayer::new(
                    Matrix::zeros(s.outputs, s.inputs),
                    vec![0.0; s.outputs],
                    s.activation.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Mlp::from_layers(layers)
    }

    /// Mutable (parameter, gradient) slice pairs, in layer order.
    pub fn param_groups_mut(&mut self) -> Vec<(&mut [f64], &mut [f64])> {
        let mut groups = Vec::with_capacity(self.layers.len() * 2);
        for layer in &mut self.layers {
            groups.push((
                layer.weights.as_mut_slice(),
                layer.grad_weights.as_mut_slice(),
            ));
            groups.push((layer.bias.as_mut_slice(), layer.grad_bias.as_mut_slice()));
        }
        groups
    }

    pub fn params_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}
