//! Conditional variational auto-encoder.
//!
//! The encoder maps `(x ‖ c)` to a mean and log-variance of width `D_z`,
//! the latent is drawn as `z = μ + σ ⊙ ε`, and the decoder maps `(z ‖ c)` to
//! one softmax block per output feature. The objective is element-wise
//! binary cross-entropy over the concatenated one-hot vector plus a
//! β-weighted KL term towards `N(0, I)`, averaged over the batch.

use serde::{Deserialize, Serialize};

use crate::data::{EncodedSet, Schema};
use crate::error::{Error, Result};
use crate::eval::pooled_marginal_srmse;
use crate::generative::{layer_widths, sample_from_noise};
use crate::numeric::{
    clamp_prob, Activation, HiddenActivation, Matrix, Mlp, RmsProp, RmsPropConfig, SeededRng,
};
use crate::sampler::{synthesize_for, PopulationSampler};

/// Validation metrics are computed every this many iterations.
pub const VALIDATION_INTERVAL: usize = 100;

/// `z = μ + σ ⊙ ε`
pub fn reparameterize(mu: &[f64], sigma: &[f64], epsilon: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != sigma.len() || mu.len() != epsilon.len() {
        return Err(Error::shape(
            "reparameterize",
            format!("mu {} / sigma {}", mu.len(), sigma.len()),
            format!("epsilon {}", epsilon.len()),
        ));
    }
    Ok(mu
        .iter()
        .zip(sigma)
        .zip(epsilon)
        .map(|((m, s), e)| m + s * e)
        .collect())
}

/// `−Σ [xᵢ ln x̂ᵢ + (1 − xᵢ) ln(1 − x̂ᵢ)]` with `x̂` clamped away from 0 and 1.
pub fn cross_entropy(x: &[f64], x_hat: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), x_hat.len());
    x.iter()
        .zip(x_hat)
        .map(|(&t, &p)| {
            let p = clamp_prob(p);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum()
}

/// `∂CE/∂x̂`; zero where the clamp is active.
fn cross_entropy_grad(t: f64, p: f64) -> f64 {
    let c = clamp_prob(p);
    if c != p {
        0.0
    } else {
        -t / p + (1.0 - t) / (1.0 - p)
    }
}

/// `−½ Σ (1 + ln σₖ − μₖ² − σₖ)` with `σₖ` the latent variance.
pub fn kl_divergence(mu: &[f64], variance: &[f64]) -> f64 {
    debug_assert_eq!(mu.len(), variance.len());
    -0.5 * mu
        .iter()
        .zip(variance)
        .map(|(m, v)| 1.0 + v.ln() - m * m - v)
        .sum::<f64>()
}

fn kl_from_log_variance(mu: &[f64], log_var: &[f64]) -> f64 {
    -0.5 * mu
        .iter()
        .zip(log_var)
        .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
        .sum::<f64>()
}

/// Batch mean of `CE(x, x̂) + β·KL`, one row per example.
pub fn cvae_loss(
    x: &Matrix,
    x_hat: &Matrix,
    mu: &Matrix,
    variance: &Matrix,
    beta: f64,
) -> Result<f64> {
    if x.shape() != x_hat.shape() || mu.shape() != variance.shape() || x.rows() != mu.rows() {
        return Err(Error::shape(
            "cvae_loss",
            format!("x {} / x̂ {}", x.shape_str(), x_hat.shape_str()),
            format!("mu {} / var {}", mu.shape_str(), variance.shape_str()),
        ));
    }
    let n = x.rows().max(1) as f64;
    let total: f64 = (0..x.rows())
        .map(|r| {
            cross_entropy(x.row(r), x_hat.row(r)) + beta * kl_divergence(mu.row(r), variance.row(r))
        })
        .sum();
    Ok(total / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvaeTrainConfig {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub bottleneck_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta: f64,
    pub epochs: usize,
    pub seed: u64,
    pub activation: HiddenActivation,
    /// With a validation set, return the checkpoint with the lowest
    /// validation SRMSE instead of the final weights.
    pub keep_best: bool,
}

impl Default for CvaeTrainConfig {
    fn default() -> Self {
        CvaeTrainConfig {
            hidden_layers: 1,
            hidden_units: 50,
            bottleneck_dim: 25,
            batch_size: 32,
            learning_rate: 0.001,
            beta: 0.5,
            epochs: 500,
            seed: 0,
            activation: HiddenActivation::Elu,
            keep_best: true,
        }
    }
}

impl CvaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("cvae config: {what}")));
        if self.hidden_layers == 0 || self.hidden_units == 0 {
            return bad("hidden_layers and hidden_units must be positive");
        }
        if self.bottleneck_dim == 0 || self.batch_size == 0 {
            return bad("bottleneck_dim and batch_size must be positive");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if self.beta < 0.0 || !self.beta.is_finite() {
            return bad("beta must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CvaeModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub latent_dim: usize,
    pub beta: f64,
    pub output_blocks: Vec<usize>,
    pub conditional_blocks: Vec<usize>,
}

/// Pieces of one batch objective, each a batch mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub cross_entropy: f64,
    pub kl: f64,
}

impl CvaeModel {
    pub fn new(schema: &Schema, config: &CvaeTrainConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let x_w = schema.output_width();
        let c_w = schema.conditional_width();
        let hidden: Activation = config.activation.into();
        let encoder = Mlp::new(
            &layer_widths(
                x_w + c_w,
                config.hidden_layers,
                config.hidden_units,
                2 * config.bottleneck_dim,
            ),
            hidden.clone(),
            Activation::Identity,
            rng,
        )?;
        let decoder = Mlp::new(
            &layer_widths(
                config.bottleneck_dim + c_w,
                config.hidden_layers,
                config.hidden_units,
                x_w,
            ),
            hidden,
            Activation::softmax_blocks(schema.output_blocks()),
            rng,
        )?;
        Ok(CvaeModel {
            encoder,
            decoder,
            latent_dim: config.bottleneck_dim,
            beta: config.beta,
            output_blocks: schema.output_blocks(),
            conditional_blocks: schema.conditional_blocks(),
        })
    }

    /// Encoder head split into `(μ, log σ²)`.
    pub fn encode(&self, x: &Matrix, c: &Matrix) -> Result<(Matrix, Matrix)> {
        let h = self.encoder.infer(&x.hconcat(c)?)?;
        let d = self.latent_dim;
        Ok((h.columns(0, d), h.columns(d, 2 * d)))
    }

    pub fn decode(&self, z: &Matrix, c: &Matrix) -> Result<Matrix> {
        self.decoder.infer(&z.hconcat(c)?)
    }

    /// Objective for fixed noise, without touching gradients.
    pub fn loss(&self, x: &Matrix, c: &Matrix, epsilon: &Matrix) -> Result<LossParts> {
        let (mu, log_var) = self.encode(x, c)?;
        let z = latent(&mu, &log_var, epsilon)?;
        let x_hat = self.decode(&z, c)?;
        Ok(self.assemble_loss(x, &x_hat, &mu, &log_var))
    }

    fn assemble_loss(
        &self,
        x: &Matrix,
        x_hat: &Matrix,
        mu: &Matrix,
        log_var: &Matrix,
    ) -> LossParts {
        let n = x.rows().max(1) as f64;
        let mut ce = 0.0;
        let mut kl = 0.0;
        for r in 0..x.rows() {
            ce += cross_entropy(x.row(r), x_hat.row(r));
            kl += kl_from_log_variance(mu.row(r), log_var.row(r));
        }
        LossParts {
            total: (ce + self.beta * kl) / n,
            cross_entropy: ce / n,
            kl: kl / n,
        }
    }

    /// Forward and backward pass for one batch with the given noise.
    /// Gradients accumulate into both networks.
    pub fn accumulate_gradients(
        &mut self,
        x: &Matrix,
        c: &Matrix,
        epsilon: &Matrix,
    ) -> Result<LossParts> {
        let d = self.latent_dim;
        let h = self.encoder.forward(&x.hconcat(c)?)?;
        let mu = h.columns(0, d);
        let log_var = h.columns(d, 2 * d);
        let z = latent(&mu, &log_var, epsilon)?;
        let x_hat = self.decoder.forward(&z.hconcat(c)?)?;
        let parts = self.assemble_loss(x, &x_hat, &mu, &log_var);

        let n = x.rows().max(1) as f64;
        let mut grad_x_hat = Matrix::zeros(x_hat.rows(), x_hat.cols());
        for ((g, &t), &p) in grad_x_hat
            .as_mut_slice()
            .iter_mut()
            .zip(x.as_slice())
            .zip(x_hat.as_slice())
        {
            *g = cross_entropy_grad(t, p) / n;
        }
        let grad_dec_in = self.decoder.backward(&grad_x_hat)?;

        let mut grad_h = Matrix::zeros(h.rows(), h.cols());
        for r in 0..h.rows() {
            let gz = &grad_dec_in.row(r)[..d];
            let eps = epsilon.row(r);
            let (m, lv) = (mu.row(r), log_var.row(r));
            let row = grad_h.row_mut(r);
            for k in 0..d {
                let sigma = (0.5 * lv[k]).exp();
                row[k] = gz[k] + self.beta * m[k] / n;
                row[d + k] =
                    gz[k] * eps[k] * 0.5 * sigma + self.beta * 0.5 * (lv[k].exp() - 1.0) / n;
            }
        }
        self.encoder.backward(&grad_h)?;
        Ok(parts)
    }

    pub fn zero_grad(&mut self) {
        self.encoder.zero_grad();
        self.decoder.zero_grad();
    }

    pub fn params_finite(&self) -> bool {
        self.encoder.params_finite() && self.decoder.params_finite()
    }
}

fn latent(mu: &Matrix, log_var: &Matrix, epsilon: &Matrix) -> Result<Matrix> {
    if epsilon.shape() != mu.shape() {
        return Err(Error::shape(
            "latent noise",
            epsilon.shape_str(),
            mu.shape_str(),
        ));
    }
    let data = mu
        .as_slice()
        .iter()
        .zip(log_var.as_slice())
        .zip(epsilon.as_slice())
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect();
    Matrix::from_vec(mu.rows(), mu.cols(), data)
}

/// Decodes `z ~ N(0, I)` with the given conditionals and draws each output
/// feature from its softmax block.
impl PopulationSampler for CvaeModel {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        sample_from_noise(
            &self.decoder,
            self.latent_dim,
            &self.output_blocks,
            &self.conditional_blocks,
            conditionals,
            rng,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub epoch: usize,
    pub validation_loss: f64,
    pub validation_srmse: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CvaeTrace {
    pub batch_loss: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    /// Iteration of the returned weights when a checkpoint was kept.
    pub kept_iteration: Option<usize>,
}

/// RMSProp over shuffled mini-batches. With `validation`, loss and pooled
/// marginal SRMSE on it are recorded every [`VALIDATION_INTERVAL`]
/// iterations.
pub fn train_cvae(
    schema: &Schema,
    train: &EncodedSet,
    validation: Option<&EncodedSet>,
    config: &CvaeTrainConfig,
) -> Result<(CvaeModel, CvaeTrace)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    let mut rng = SeededRng::new(config.seed);
    let mut model = CvaeModel::new(schema, config, &mut rng.derive(1))?;
    let opt_config = RmsPropConfig::new(config.learning_rate);
    let mut enc_opt = RmsProp::new(opt_config);
    let mut dec_opt = RmsProp::new(opt_config);
    let mut trace = CvaeTrace::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut iteration = 0;
    let mut best: Option<(f64, CvaeModel)> = None;

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let x = train.x.select_rows(batch);
            let c = train.c.select_rows(batch);
            let mut eps = Matrix::zeros(batch.len(), model.latent_dim);
            rng.fill_standard_normal(eps.as_mut_slice());
            let parts = model.accumulate_gradients(&x, &c, &eps)?;
            if !parts.total.is_finite() {
                return Err(Error::Diverged {
                    iteration,
                    detail: format!(
                        "CVAE loss {} (cross-entropy {}, KL {})",
                        parts.total, parts.cross_entropy, parts.kl
                    ),
                });
            }
            enc_opt.step(&mut model.encoder);
            dec_opt.step(&mut model.decoder);
            trace.batch_loss.push(parts.total);
            iteration += 1;

            if let Some(val) = validation.filter(|_| iteration % VALIDATION_INTERVAL == 0) {
                let cp = checkpoint(&model, schema, val, iteration, epoch)?;
                if config.keep_best && best.as_ref().is_none_or(|(b, _)| cp.validation_srmse < *b) {
                    best = Some((cp.validation_srmse, model.clone()));
                    trace.kept_iteration = Some(iteration);
                }
                trace.checkpoints.push(cp);
            }
        }
        if !model.params_finite() {
            return Err(Error::Diverged {
                iteration,
                detail: "non-finite CVAE parameters".into(),
            });
        }
    }
    if let Some((_, kept)) = best {
        model = kept;
    }
    model.encoder.clear_cache();
    model.decoder.clear_cache();
    Ok((model, trace))
}

fn checkpoint(
    model: &CvaeModel,
    schema: &Schema,
    val: &EncodedSet,
    iteration: usize,
    epoch: usize,
) -> Result<Checkpoint> {
    let mut rng = SeededRng::new(iteration as u64);
    let mut eps = Matrix::zeros(val.len(), model.latent_dim);
    rng.fill_standard_normal(eps.as_mut_slice());
    let loss = model.loss(&val.x, &val.c, &eps)?.total;
    let generated = synthesize_for(model, &val.records, schema, &mut rng)?;
    Ok(Checkpoint {
        iteration,
        epoch,
        validation_loss: loss,
        validation_srmse: pooled_marginal_srmse(&generated, &val.records, schema)?,
    })
}
