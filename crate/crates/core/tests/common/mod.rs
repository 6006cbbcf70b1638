//! Finite-difference gradient checks on toy networks, shared by the gradient
//! tests and the acceptance target.

#![allow(dead_code)]

use popsynth_core::cgan::{CganModel, CganTrainConfig};
use popsynth_core::cvae::{CvaeModel, CvaeTrainConfig};
use popsynth_core::data::{FeatureSpec, Role, Schema, Variant};
use popsynth_core::numeric::{HiddenActivation, Matrix, Mlp, SeededRng};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

pub const ACTIVATIONS: [HiddenActivation; 3] = [
    HiddenActivation::Elu,
    HiddenActivation::Sigmoid,
    HiddenActivation::Relu,
];

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

pub fn toy_schema() -> Schema {
    let cats = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
    Schema::new(
        Variant::Custom,
        vec![
            FeatureSpec::new("a", Role::Output, cats(3)),
            FeatureSpec::new("b", Role::Output, cats(2)),
            FeatureSpec::new("c", Role::Conditional, cats(3)),
        ],
    )
    .unwrap()
}

pub fn one_hot_batch(rng: &mut SeededRng, blocks: &[usize], rows: usize) -> Matrix {
    let width: usize = blocks.iter().sum();
    let mut m = Matrix::zeros(rows, width);
    for r in 0..rows {
        let mut offset = 0;
        for &b in blocks {
            m.set(r, offset + rng.below(b), 1.0);
            offset += b;
        }
    }
    m
}

pub fn normal(rng: &mut SeededRng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    rng.fill_standard_normal(m.as_mut_slice());
    m
}

/// Worst relative error over every parameter of `net`, perturbing through
/// `net` and evaluating `loss`.
pub fn check<M>(
    model: &mut M,
    net: impl Fn(&mut M) -> &mut Mlp,
    loss: impl Fn(&M) -> f64,
    analytic: &[f64],
) -> f64 {
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = net(model).param(i);
        net(model).set_param(i, orig + STEP);
        let up = loss(model);
        net(model).set_param(i, orig - STEP);
        let down = loss(model);
        net(model).set_param(i, orig);
        let numeric = (up - down) / (2.0 * STEP);
        if a.abs() < 1e-9 && numeric.abs() < 1e-9 {
            continue;
        }
        worst = worst.max(relative_error(a, numeric));
    }
    worst
}

/// Glorot init leaves biases at zero, which parks stacked ReLU units on
/// their kink; random biases make every parameter random.
pub fn randomize_biases(net: &mut Mlp, rng: &mut SeededRng) {
    for layer in net.layers_mut() {
        for b in &mut layer.bias {
            *b = rng.uniform_range(-0.5, 0.5);
        }
    }
}

/// Toy network shape for one seed.
#[derive(Clone, Copy, Debug)]
pub struct ToyShape {
    pub hidden_layers: usize,
    pub hidden_units: usize,
    pub latent: usize,
    pub batch: usize,
    pub activation: HiddenActivation,
}

impl ToyShape {
    /// At most two hidden layers, so at most three weight layers, and at
    /// most 16 units.
    pub fn for_seed(seed: u64) -> Self {
        let s = seed as usize;
        ToyShape {
            hidden_layers: 1 + s % 2,
            hidden_units: [3, 8, 16][(s / 2) % 3],
            latent: 2 + s % 3,
            batch: 2 + s % 4,
            activation: ACTIVATIONS[s % 3],
        }
    }
}

/// Worst relative error of the CVAE loss gradient over (encoder, decoder).
pub fn cvae_gradient_error(seed: u64, shape: ToyShape) -> (f64, f64) {
    let schema = toy_schema();
    let mut rng = SeededRng::new(seed);
    let config = CvaeTrainConfig {
        hidden_layers: shape.hidden_layers,
        hidden_units: shape.hidden_units,
        bottleneck_dim: shape.latent,
        beta: 0.5,
        activation: shape.activation,
        ..CvaeTrainConfig::default()
    };
    let mut model = CvaeModel::new(&schema, &config, &mut rng).unwrap();
    randomize_biases(&mut model.encoder, &mut rng);
    randomize_biases(&mut model.decoder, &mut rng);
    let x = one_hot_batch(&mut rng, &schema.output_blocks(), shape.batch);
    let c = one_hot_batch(&mut rng, &schema.conditional_blocks(), shape.batch);
    let eps = normal(&mut rng, shape.batch, shape.latent);
    model.accumulate_gradients(&x, &c, &eps).unwrap();
    let loss = |m: &CvaeModel| m.loss(&x, &c, &eps).unwrap().total;
    let enc = model.encoder.gradients();
    let dec = model.decoder.gradients();
    let e = check(&mut model, |m| &mut m.encoder, loss, &enc);
    let d = check(&mut model, |m| &mut m.decoder, loss, &dec);
    (e, d)
}

/// CGAN gradient check for one generator loss form.
#[derive(Clone, Copy, Debug)]
pub struct CganCheck {
    pub discriminator: f64,
    pub generator: f64,
    /// Each step left the other network's gradients at zero.
    pub isolated: bool,
}

pub fn cgan_gradient_error(seed: u64, shape: ToyShape, non_saturating: bool) -> CganCheck {
    let schema = toy_schema();
    let mut rng = SeededRng::new(seed);
    let config = CganTrainConfig {
        hidden_layers: shape.hidden_layers,
        hidden_units: shape.hidden_units,
        noise_dim: shape.latent,
        activation: shape.activation,
        non_saturating,
        ..CganTrainConfig::default()
    };
    let mut model = CganModel::new(&schema, &config, &mut rng).unwrap();
    randomize_biases(&mut model.generator, &mut rng);
    randomize_biases(&mut model.discriminator, &mut rng);
    let x = one_hot_batch(&mut rng, &schema.output_blocks(), shape.batch);
    let c = one_hot_batch(&mut rng, &schema.conditional_blocks(), shape.batch);
    let z = normal(&mut rng, shape.batch, shape.latent);

    model
        .accumulate_discriminator_gradients(&x, &c, &z)
        .unwrap();
    let mut isolated = model.generator.gradients().iter().all(|&g| g == 0.0);
    let dg = model.discriminator.gradients();
    let d = check(
        &mut model,
        |m| &mut m.discriminator,
        |m| m.discriminator_objective(&x, &c, &z).unwrap(),
        &dg,
    );
    model.zero_grad();

    model.accumulate_generator_gradients(&c, &z).unwrap();
    isolated &= model.discriminator.gradients().iter().all(|&g| g == 0.0);
    let gg = model.generator.gradients();
    let g = check(
        &mut model,
        |m| &mut m.generator,
        |m| m.generator_objective(&c, &z).unwrap(),
        &gg,
    );
    CganCheck {
        discriminator: d,
        generator: g,
        isolated,
    }
}
