//! Population synthesis with conditional generative models.
//!
//! Agents are records of categorical output features (who buys) and
//! conditional features (what is bought). A conditional VAE, a conditional
//! GAN and an empirical-table baseline learn `P(outputs | conditionals)`
//! and are compared with SRMSE over marginal and partial joint
//! distributions. A planted synthetic generator with closed-form
//! conditionals stands in for real data.

pub mod baseline;
pub mod cgan;
pub mod cvae;
pub mod data;
pub mod error;
pub mod eval;
mod generative;
pub mod harness;
pub mod numeric;
pub mod persist;
pub mod sampler;

pub use baseline::{fit_empirical, EmpiricalTable, IndependentMarginalSampler, UniformSampler};
pub use cgan::{train_cgan, CganModel, CganTrainConfig};
pub use cvae::{train_cvae, CvaeModel, CvaeTrainConfig};
pub use data::{AgentRecord, EncodedSet, Schema, Variant};
pub use error::{Error, Result};
pub use numeric::{Matrix, SeededRng};
pub use persist::{load_model, ModelKind, TrainedModel};
pub use sampler::{synthesize, synthesize_for, PopulationSampler};
