//! Experiment orchestration: grid search with K-fold selection and the
//! end-to-end benchmark protocol.

mod grid;
mod protocol;

pub use grid::{run_grid, ExperimentRecord, GridResult, GridSpec};
pub use protocol::{
    run_protocol, run_variant_protocol, write_protocol_outputs, FoldSummaryRow, ProtocolConfig,
    ProtocolReport, SetScoreRow, VariantReport,
};

use serde::{Deserialize, Serialize};

use crate::baseline::fit_empirical;
use crate::cgan::{train_cgan, CganTrainConfig};
use crate::cvae::{train_cvae, CvaeTrainConfig};
use crate::data::{select, AgentRecord, EncodedSet, Fold, Schema};
use crate::error::Result;
use crate::eval::{pooled_marginal_srmse, zero_sample_pct};
use crate::numeric::SeededRng;
use crate::persist::{ModelKind, TrainedModel};
use crate::sampler::{synthesize_for, PopulationSampler};

/// Training config for either generative model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelConfig {
    Cvae(CvaeTrainConfig),
    Cgan(CganTrainConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Cvae(_) => ModelKind::Cvae,
            ModelConfig::Cgan(_) => ModelKind::Cgan,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Cvae => ModelConfig::Cvae(CvaeTrainConfig::default()),
            ModelKind::Cgan => ModelConfig::Cgan(CganTrainConfig::default()),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelConfig::Cvae(c) => c.seed,
            ModelConfig::Cgan(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ModelConfig::Cvae(c) => c.seed = seed,
            ModelConfig::Cgan(c) => c.seed = seed,
        }
        out
    }
}

/// Trains either model; `validation` feeds the periodic checkpoints.
pub fn train_model(
    config: &ModelConfig,
    schema: &Schema,
    train: &EncodedSet,
    validation: Option<&EncodedSet>,
) -> Result<(TrainedModel, serde_json::Value)> {
    Ok(match config {
        ModelConfig::Cvae(c) => {
            let (m, trace) = train_cvae(schema, train, validation, c)?;
            (
                TrainedModel::Cvae(m, c.clone()),
                serde_json::to_value(trace)?,
            )
        }
        ModelConfig::Cgan(c) => {
            let (m, trace) = train_cgan(schema, train, validation, c)?;
            (
                TrainedModel::Cgan(m, c.clone()),
                serde_json::to_value(trace)?,
            )
        }
    })
}

/// Validation SRMSE and zero-sample rate of one sampler on one fold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct FoldScore {
    pub srmse: f64,
    pub zero_sample_pct: f64,
}

pub(crate) fn score_fold<S: PopulationSampler + ?Sized>(
    sampler: &S,
    schema: &Schema,
    train: &[AgentRecord],
    validation: &[AgentRecord],
    rng: &mut SeededRng,
) -> Result<FoldScore> {
    let generated = synthesize_for(sampler, validation, schema, rng)?;
    Ok(FoldScore {
        srmse: pooled_marginal_srmse(&generated, validation, schema)?,
        zero_sample_pct: zero_sample_pct(&generated, train, schema)?,
    })
}

/// Encoded fold training set and the raw validation records.
pub(crate) fn fold_data(
    records: &[AgentRecord],
    schema: &Schema,
    fold: &Fold,
) -> Result<(EncodedSet, Vec<AgentRecord>)> {
    Ok((
        EncodedSet::new(schema, select(records, &fold.train))?,
        select(records, &fold.validation),
    ))
}

/// A fitted sampler of any of the three compared kinds.
pub(crate) enum FittedSampler {
    Model(TrainedModel),
    Baseline(crate::baseline::EmpiricalTable),
}

impl PopulationSampler for FittedSampler {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        match self {
            FittedSampler::Model(m) => m.sample_outputs(conditionals, rng),
            FittedSampler::Baseline(b) => b.sample_outputs(conditionals, rng),
        }
    }
}

pub(crate) fn fit_baseline(train: &[AgentRecord], schema: &Schema) -> Result<FittedSampler> {
    Ok(FittedSampler::Baseline(fit_empirical(train, schema)?))
}
