use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::rng::SeededRng;
use crate::error::{Error, Result};

/// ELU with α = 1.
#[inline]
pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Relu,
    Sigmoid,
    Identity,
    /// Independent softmax over consecutive column blocks of the given widths.
    SoftmaxBlocks {
        blocks: Vec<usize>,
    },
}

/// Hidden-layer nonlinearity choices exposed to configs and grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HiddenActivation {
    #[default]
    Elu,
    Relu,
    Sigmoid,
}

impl From<HiddenActivation> for Activation {
    fn from(h: HiddenActivation) -> Self {
        match h {
            HiddenActivation::Elu => Activation::Elu,
            HiddenActivation::Relu => Activation::Relu,
            HiddenActivation::Sigmoid => Activation::Sigmoid,
        }
    }
}

impl Activation {
    pub fn softmax_blocks(blocks: Vec<usize>) -> Self {
        Activation::SoftmaxBlocks { blocks }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if let Activation::SoftmaxBlocks { blocks } = self {
            let total: usize = blocks.iter().sum();
            if total != width || blocks.contains(&0) {
                return Err(Error::shape(
                    "softmax blocks",
                    format!("blocks {blocks:?} (sum {total})"),
                    format!("layer width {width}"),
                ));
            }
        }
        Ok(())
    }

    pub fn apply(&self, pre: &Matrix) -> Matrix {
        match self {
            Activation::Elu => pre.map(elu),
            Activation::Relu => pre.map(|x| x.max(0.0)),
            Activation::Sigmoid => pre.map(sigmoid),
            Activation::Identity => pre.clone(),
            Activation::SoftmaxBlocks { blocks } => {
                let mut out = pre.clone();
                for r in 0..out.rows() {
                    let row = out.row_mut(r);
                    let mut start = 0;
                    for &len in blocks {
                        softmax_in_place(&mut row[start..start + len]);
                        start += len;
                    }
                }
                out
            }
        }
    }

    /// Maps `∂L/∂output` to `∂L/∂pre-activation`.
    pub fn backward(&self, grad_out: &Matrix, pre: &Matrix, out: &Matrix) -> Matrix {
        match self {
            Activation::Identity => grad_out.clone(),
            Activation::Elu => {
                zip_map(
                    grad_out,
                    pre,
                    out,
                    |g, p, o| {
                        if p >= 0.0 {
                            g
                        } else {
                            g * (o + 1.0)
                        }
                    },
                )
            }
            Activation::Relu => {
                zip_map(grad_out, pre, out, |g, p, _| if p > 0.0 { g } else { 0.0 })
            }
            Activation::Sigmoid => zip_map(grad_out, pre, out, |g, _, o| g * o * (1.0 - o)),
            Activation::SoftmaxBlocks { blocks } => {
                let mut grad = Matrix::zeros(out.rows(), out.cols());
                for r in 0..out.rows() {
                    let y = out.row(r);
                    let g = grad_out.row(r);
                    let dst = grad.row_mut(r);
                    let mut start = 0;
                    for &len in blocks {
                        let end = start + len;
                        let dot: f64 = y[start..end]
                            .iter()
                            .zip(&g[start..end])
                            .map(|(a, b)| a * b)
                            .sum();
                        for i in start..end {
                            dst[i] = y[i] * (g[i] - dot);
                        }
                        start = end;
                    }
                }
                grad
            }
        }
    }
}

fn zip_map(g: &Matrix, p: &Matrix, o: &Matrix, f: impl Fn(f64, f64, f64) -> f64) -> Matrix {
    let data = g
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .zip(o.as_slice())
        .map(|((&g, &p), &o)| f(g, p, o))
        .collect();
    Matrix::from_vec(g.rows(), g.cols(), data).expect("same shape")
}

/// Max-shifted softmax over a slice.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

#[derive(Clone, Debug)]
struct ForwardCache {
    input: Matrix,
    pre: Matrix,
    output: Matrix,
}

/// Fully connected layer `y = act(x·Wᵀ + b)`.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    pub grad_weights: Matrix,
    pub grad_bias: Vec<f64>,
    cache: Option<ForwardCache>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape(
                "DenseLayer::new",
                format!("weights {}", weights.shape_str()),
                format!("bias {}", bias.len()),
            ));
        }
        activation.check_width(weights.rows())?;
        let (out, inp) = weights.shape();
        Ok(DenseLayer {
            grad_weights: Matrix::zeros(out, inp),
            grad_bias: vec![0.0; out],
            weights,
            bias,
            activation,
            cache: None,
        })
    }

    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    pub fn glorot(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        DenseLayer::new(
            Matrix::from_vec(outputs, inputs, data)?,
            vec![0.0; outputs],
            activation,
        )
    }

    pub fn in_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_width(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weights.as_slice().len() + self.bias.len()
    }

    fn pre_activation(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_width() {
            return Err(Error::shape(
                "linear_forward",
                format!("input {}", input.shape_str()),
                format!("weights {}", self.weights.shape_str()),
            ));
        }
        let mut pre = input.matmul_t(&self.weights)?;
        pre.add_row_vector(&self.bias);
        Ok(pre)
    }

    /// Forward pass without touching the backward cache.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        Ok(self.activation.apply(&self.pre_activation(input)?))
    }

    /// Forward pass that caches what `backward` needs.
    pub fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        let pre = self.pre_activation(input)?;
        let output = self.activation.apply(&pre);
        self.cache = Some(ForwardCache {
            input: input.clone(),
            pre,
            output: output.clone(),
        });
        Ok(output)
    }

    /// Accumulates parameter gradients and returns `∂L/∂input`.
    /// `index` only labels the error.
    pub fn backward(&mut self, grad_out: &Matrix, index: usize) -> Result<Matrix> {
        let cache = self
            .cache
            .take()
            .ok_or(Error::NoForwardCache { layer: index })?;
        if grad_out.shape() != cache.output.shape() {
            return Err(Error::shape(
                "backward",
                format!("grad {}", grad_out.shape_str()),
                format!("output {}", cache.output.shape_str()),
            ));
        }
        let grad_pre = self
            .activation
            .backward(grad_out, &cache.pre, &cache.output);
        grad_pre.t_matmul_acc(&cache.input, &mut self.grad_weights)?;
        grad_pre.col_sums_acc(&mut self.grad_bias);
        grad_pre.matmul(&self.weights)
    }

    pub fn zero_grad(&mut self) {
        self.grad_weights.fill(0.0);
        self.grad_bias.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Stateless `linear_forward` over a layer.
pub fn linear_forward(layer: &DenseLayer, input: &Matrix) -> Result<Matrix> {
    layer.infer(input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_values() {
        assert_eq!(elu(0.0), 0.0);
        assert_eq!(elu(2.5), 2.5);
        assert!((elu(-1.0) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((elu(-1.0) + 0.6321).abs() < 1e-4);
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let layer =
            DenseLayer::new(Matrix::identity(2), vec![0.0, 0.0], Activation::Identity).unwrap();
        let out = linear_forward(&layer, &Matrix::from_rows(&[vec![3.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn relu_of_zero_input_is_zero() {
        let w = Matrix::from_rows(&[vec![0.3, -2.0], vec![1.5, 0.7], vec![-0.1, 0.2]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.0; 3], Activation::Relu).unwrap();
        let out = layer.infer(&Matrix::zeros(4, 2)).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_multiplied_forward() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.0, 0.0], Activation::Identity).unwrap();
        let out = layer
            .infer(&Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap())
            .unwrap();
        assert_eq!(out.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn dimension_mismatch_names_both_shapes() {
        let layer =
            DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Identity).unwrap();
        let msg = layer.infer(&Matrix::zeros(1, 3)).unwrap_err().to_string();
        assert!(msg.contains("1x3") && msg.contains("2x2"), "{msg}");
    }

    #[test]
    fn softmax_block_widths_validated() {
        let err = DenseLayer::new(
            Matrix::zeros(5, 2),
            vec![0.0; 5],
            Activation::softmax_blocks(vec![2, 2]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn identity_layer_gradient_with_sum_loss() {
        // loss = Σ outputs of a 1-output identity layer
        let w = Matrix::from_rows(&[vec![0.5, -1.0, 2.0]]).unwrap();
        let mut layer = DenseLayer::new(w, vec![0.0], Activation::Identity).unwrap();
        let x = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        layer.forward(&x).unwrap();
        layer.backward(&Matrix::filled(1, 1, 1.0), 0).unwrap();
        assert_eq!(layer.grad_weights.as_slice(), x.as_slice());
        assert_eq!(layer.grad_bias, vec![1.0]);
    }

    #[test]
    fn backward_without_forward_is_state_error() {
        let mut layer =
            DenseLayer::new(Matrix::identity(2), vec![0.0; 2], Activation::Identity).unwrap();
        let err = layer.backward(&Matrix::zeros(1, 2), 4).unwrap_err();
        assert!(matches!(err, Error::NoForwardCache { layer: 4 }));
    }

    #[test]
    fn softmax_blocks_normalize_each_block() {
        let act = Activation::softmax_blocks(vec![2, 3]);
        let pre = Matrix::from_rows(&[vec![1.0, -1.0, 800.0, 799.0, -5.0]]).unwrap();
        let out = act.apply(&pre);
        let row = out.row(0);
        assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
        assert!((row[2] + row[3] + row[4] - 1.0).abs() < 1e-12);
        assert!(out.is_finite());
    }
}
