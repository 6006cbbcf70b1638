//! Conditional GAN over one-hot output blocks.
//!
//! The generator maps `(z ‖ c)` to softmax blocks; the discriminator maps
//! `(x ‖ c)` to a sigmoid score. Real rows are exact one-hot vectors while
//! fake rows are the generator's continuous block probabilities, which
//! keeps the generator step differentiable.

use serde::{Deserialize, Serialize};

use crate::data::{EncodedSet, Schema};
use crate::error::{Error, Result};
use crate::eval::pooled_marginal_srmse;
use crate::generative::{layer_widths, sample_from_noise};
use crate::numeric::{
    clamp_prob, Activation, HiddenActivation, Matrix, Mlp, RmsProp, RmsPropConfig, SeededRng,
};
use crate::sampler::{synthesize_for, PopulationSampler};

pub const VALIDATION_INTERVAL: usize = 100;

/// Batch mean of `−[ln D(x) + ln(1 − D(G(z)))]`.
pub fn discriminator_loss(d_real: &[f64], d_fake: &[f64]) -> f64 {
    debug_assert_eq!(d_real.len(), d_fake.len());
    let n = d_real.len().max(1) as f64;
    d_real
        .iter()
        .zip(d_fake)
        .map(|(&r, &f)| -(clamp_prob(r).ln() + (1.0 - clamp_prob(f)).ln()))
        .sum::<f64>()
        / n
}

/// Batch mean of `ln(1 − D(G(z)))`, the saturating form.
pub fn generator_loss(d_fake: &[f64]) -> f64 {
    let n = d_fake.len().max(1) as f64;
    d_fake
        .iter()
        .map(|&f| (1.0 - clamp_prob(f)).ln())
        .sum::<f64>()
        / n
}

/// Batch mean of `−ln D(G(z))`.
pub fn generator_loss_non_saturating(d_fake: &[f64]) -> f64 {
    let n = d_fake.len().max(1) as f64;
    d_fake.iter().map(|&f| -clamp_prob(f).ln()).sum::<f64>() / n
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CganTrainConfig {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub noise_dim: usize,
    pub seed: u64,
    pub activation: HiddenActivation,
    /// Use `−ln D(G(z))` for the generator instead of `ln(1 − D(G(z)))`.
    pub non_saturating: bool,
    /// With a validation set, return the checkpoint with the lowest
    /// validation SRMSE instead of the final weights.
    pub keep_best: bool,
}

impl Default for CganTrainConfig {
    fn default() -> Self {
        CganTrainConfig {
            hidden_layers: 1,
            hidden_units: 1200,
            batch_size: 64,
            learning_rate: 0.001,
            epochs: 51,
            noise_dim: 25,
            seed: 0,
            activation: HiddenActivation::Elu,
            non_saturating: false,
            keep_best: true,
        }
    }
}

impl CganTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("cgan config: {what}")));
        if self.hidden_layers == 0 || self.hidden_units == 0 {
            return bad("hidden_layers and hidden_units must be positive");
        }
        if self.noise_dim == 0 || self.batch_size == 0 {
            return bad("noise_dim and batch_size must be positive");
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CganModel {
    pub generator: Mlp,
    pub discriminator: Mlp,
    pub noise_dim: usize,
    pub non_saturating: bool,
    pub output_blocks: Vec<usize>,
    pub conditional_blocks: Vec<usize>,
}

fn clamped_grad(p: f64, grad: f64) -> f64 {
    if clamp_prob(p) != p {
        0.0
    } else {
        grad
    }
}

impl CganModel {
    pub fn new(schema: &Schema, config: &CganTrainConfig, rng: &mut SeededRng) -> Result<Self> {
        config.validate()?;
        let x_w = schema.output_width();
        let c_w = schema.conditional_width();
        let hidden: Activation = config.activation.into();
        let generator = Mlp::new(
            &layer_widths(
                config.noise_dim + c_w,
                config.hidden_layers,
                config.hidden_units,
                x_w,
            ),
            hidden.clone(),
            Activation::softmax_blocks(schema.output_blocks()),
            rng,
        )?;
        let discriminator = Mlp::new(
            &layer_widths(x_w + c_w, config.hidden_layers, config.hidden_units, 1),
            hidden,
            Activation::Sigmoid,
            rng,
        )?;
        Ok(CganModel {
            generator,
            discriminator,
            noise_dim: config.noise_dim,
            non_saturating: config.non_saturating,
            output_blocks: schema.output_blocks(),
            conditional_blocks: schema.conditional_blocks(),
        })
    }

    pub fn output_width(&self) -> usize {
        self.generator.output_width()
    }

    /// Generator block probabilities for noise `z` and conditionals `c`.
    pub fn generate(&self, z: &Matrix, c: &Matrix) -> Result<Matrix> {
        self.generator.infer(&z.hconcat(c)?)
    }

    /// Discriminator scores, one per row.
    pub fn score(&self, x: &Matrix, c: &Matrix) -> Result<Vec<f64>> {
        Ok(self.discriminator.infer(&x.hconcat(c)?)?.into_vec())
    }

    /// `L_D` for a real batch and fixed noise.
    pub fn discriminator_objective(&self, x_real: &Matrix, c: &Matrix, z: &Matrix) -> Result<f64> {
        let fake = self.generate(z, c)?;
        Ok(discriminator_loss(
            &self.score(x_real, c)?,
            &self.score(&fake, c)?,
        ))
    }

    /// `L_G` (or its non-saturating variant) for fixed noise.
    pub fn generator_objective(&self, c: &Matrix, z: &Matrix) -> Result<f64> {
        let d_fake = self.score(&self.generate(z, c)?, c)?;
        Ok(self.generator_loss_of(&d_fake))
    }

    fn generator_loss_of(&self, d_fake: &[f64]) -> f64 {
        if self.non_saturating {
            generator_loss_non_saturating(d_fake)
        } else {
            generator_loss(d_fake)
        }
    }

    /// Accumulates `∂L_D` into the discriminator only. Returns
    /// `(L_D, mean D(real), mean D(fake))`.
    pub fn accumulate_discriminator_gradients(
        &mut self,
        x_real: &Matrix,
        c: &Matrix,
        z: &Matrix,
    ) -> Result<(f64, f64, f64)> {
        let b = x_real.rows();
        let fake = self.generate(z, c)?;
        let input = x_real.hconcat(c)?.vconcat(&fake.hconcat(c)?)?;
        let d = self.discriminator.forward(&input)?.into_vec();
        let (d_real, d_fake) = d.split_at(b);
        let loss = discriminator_loss(d_real, d_fake);
        let n = b.max(1) as f64;
        let grad: Vec<f64> = d_real
            .iter()
            .map(|&r| clamped_grad(r, -1.0 / (n * r)))
            .chain(
                d_fake
                    .iter()
                    .map(|&f| clamped_grad(f, 1.0 / (n * (1.0 - f)))),
            )
            .collect();
        self.discriminator
            .backward(&Matrix::from_vec(2 * b, 1, grad)?)?;
        Ok((loss, mean(d_real), mean(d_fake)))
    }

    /// Accumulates `∂L_G` into the generator only; gradients flow through
    /// the discriminator, whose own gradients are discarded. Returns
    /// `(L_G, mean D(fake))`.
    pub fn accumulate_generator_gradients(&mut self, c: &Matrix, z: &Matrix) -> Result<(f64, f64)> {
        let x_w = self.output_width();
        let fake = self.generator.forward(&z.hconcat(c)?)?;
        let d_fake = self.discriminator.forward(&fake.hconcat(c)?)?.into_vec();
        let loss = self.generator_loss_of(&d_fake);
        let n = d_fake.len().max(1) as f64;
        let non_saturating = self.non_saturating;
        let grad: Vec<f64> = d_fake
            .iter()
            .map(|&f| {
                let g = if non_saturating {
                    -1.0 / (n * f)
                } else {
                    -1.0 / (n * (1.0 - f))
                };
                clamped_grad(f, g)
            })
            .collect();
        let saved: Vec<(Vec<f64>, Vec<f64>)> = self
            .discriminator
            .layers()
            .iter()
            .map(|l| (l.grad_weights.as_slice().to_vec(), l.grad_bias.clone()))
            .collect();
        let grad_in = self
            .discriminator
            .backward(&Matrix::from_vec(d_fake.len(), 1, grad)?)?;
        for (layer, (gw, gb)) in self.discriminator.layers_mut().iter_mut().zip(saved) {
            layer.grad_weights.as_mut_slice().copy_from_slice(&gw);
            layer.grad_bias = gb;
        }
        self.generator.backward(&grad_in.columns(0, x_w))?;
        Ok((loss, mean(&d_fake)))
    }

    pub fn zero_grad(&mut self) {
        self.generator.zero_grad();
        self.discriminator.zero_grad();
    }

    pub fn params_finite(&self) -> bool {
        self.generator.params_finite() && self.discriminator.params_finite()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

impl PopulationSampler for CganModel {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        sample_from_noise(
            &self.generator,
            self.noise_dim,
            &self.output_blocks,
            &self.conditional_blocks,
            conditionals,
            rng,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CganCheckpoint {
    pub iteration: usize,
    pub epoch: usize,
    pub validation_srmse: f64,
}

/// Per-iteration losses and discriminator batch means.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CganTrace {
    pub d_loss: Vec<f64>,
    pub g_loss: Vec<f64>,
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
    pub iterations_per_epoch: usize,
    pub checkpoints: Vec<CganCheckpoint>,
    /// Iteration of the returned weights when a checkpoint was kept.
    pub kept_iteration: Option<usize>,
}

impl CganTrace {
    /// Mean `D(real)` and `D(fake)` over the last epoch's batches.
    pub fn final_discriminator_means(&self) -> Option<(f64, f64)> {
        let k = self.iterations_per_epoch.min(self.d_real.len());
        if k == 0 {
            return None;
        }
        let tail = |v: &[f64]| mean(&v[v.len() - k..]);
        Some((tail(&self.d_real), tail(&self.d_fake)))
    }
}

/// Alternating RMSProp training: per mini-batch one discriminator step,
/// then one generator step on fresh noise.
pub fn train_cgan(
    schema: &Schema,
    train: &EncodedSet,
    validation: Option<&EncodedSet>,
    config: &CganTrainConfig,
) -> Result<(CganModel, CganTrace)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    let mut rng = SeededRng::new(config.seed);
    let mut model = CganModel::new(schema, config, &mut rng.derive(1))?;
    let opt_config = RmsPropConfig::new(config.learning_rate);
    let mut g_opt = RmsProp::new(opt_config);
    let mut d_opt = RmsProp::new(opt_config);
    let mut trace = CganTrace {
        iterations_per_epoch: train.len().div_ceil(config.batch_size),
        ..CganTrace::default()
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut iteration = 0;
    let mut best: Option<(f64, CganModel)> = None;

    for epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let x = train.x.select_rows(batch);
            let c = train.c.select_rows(batch);

            let mut z = Matrix::zeros(batch.len(), model.noise_dim);
            rng.fill_standard_normal(z.as_mut_slice());
            let (d_loss, d_real, d_fake) = model.accumulate_discriminator_gradients(&x, &c, &z)?;
            d_opt.step(&mut model.discriminator);

            rng.fill_standard_normal(z.as_mut_slice());
            let (g_loss, _) = model.accumulate_generator_gradients(&c, &z)?;
            model.discriminator.zero_grad();
            g_opt.step(&mut model.generator);

            if !(d_loss.is_finite() && g_loss.is_finite()) {
                return Err(Error::Diverged {
                    iteration,
                    detail: format!("CGAN losses D {d_loss}, G {g_loss}"),
                });
            }
            trace.d_loss.push(d_loss);
            trace.g_loss.push(g_loss);
            trace.d_real.push(d_real);
            trace.d_fake.push(d_fake);
            iteration += 1;

            if let Some(val) = validation.filter(|_| iteration % VALIDATION_INTERVAL == 0) {
                let mut vrng = SeededRng::new(iteration as u64);
                let generated = synthesize_for(&model, &val.records, schema, &mut vrng)?;
                let srmse = pooled_marginal_srmse(&generated, &val.records, schema)?;
                if config.keep_best && best.as_ref().is_none_or(|(b, _)| srmse < *b) {
                    best = Some((srmse, model.clone()));
                    trace.kept_iteration = Some(iteration);
                }
                trace.checkpoints.push(CganCheckpoint {
                    iteration,
                    epoch,
                    validation_srmse: srmse,
                });
            }
        }
        if !model.params_finite() {
            return Err(Error::Diverged {
                iteration,
                detail: "non-finite CGAN parameters".into(),
            });
        }
    }
    if let Some((_, kept)) = best {
        model = kept;
    }
    model.generator.clear_cache();
    model.discriminator.clear_cache();
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_values() {
        assert!((discriminator_loss(&[0.5; 3], &[0.5; 3]) - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((discriminator_loss(&[0.9], &[0.1]) - (-2.0 * 0.9f64.ln())).abs() < 1e-12);
        assert!(discriminator_loss(&[1.0 - 1e-12], &[1e-12]) < 1e-10);
        assert!((generator_loss(&[0.5]) + 2f64.ln()).abs() < 1e-12);
        assert!((generator_loss(&[1.0]) - (1e-12f64).ln()).abs() < 1e-3);
        assert!(generator_loss(&[1e-12]).abs() < 1e-10);
    }

    #[test]
    fn trace_tail_means() {
        let t = CganTrace {
            d_real: vec![0.9, 0.9, 0.5, 0.7],
            d_fake: vec![0.1, 0.1, 0.3, 0.5],
            iterations_per_epoch: 2,
            ..CganTrace::default()
        };
        let (r, f) = t.final_discriminator_means().unwrap();
        assert!((r - 0.6).abs() < 1e-12 && (f - 0.4).abs() < 1e-12);
    }
}
