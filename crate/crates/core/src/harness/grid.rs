use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{fold_data, score_fold, train_model, ModelConfig};
use crate::cgan::CganTrainConfig;
use crate::cvae::CvaeTrainConfig;
use crate::data::{AgentRecord, Schema, SplitPlan, K_FOLDS};
use crate::error::{Error, Result};
use crate::eval::FoldStats;
use crate::numeric::{mix_seed, HiddenActivation, SeededRng};
use crate::persist::ModelKind;

/// Candidate values per hyperparameter. For the CGAN, `bottleneck_dims`
/// supplies the noise dimension and `betas` is ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub batch_sizes: Vec<usize>,
    pub hidden_layers: Vec<usize>,
    pub hidden_units: Vec<usize>,
    pub bottleneck_dims: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub betas: Vec<f64>,
    pub activations: Vec<HiddenActivation>,
    pub epochs: Vec<usize>,
}

impl GridSpec {
    /// A small grid around the default configuration, which it
    /// always contains.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Cvae => GridSpec {
                batch_sizes: vec![32],
                hidden_layers: vec![1],
                hidden_units: vec![50, 100],
                bottleneck_dims: vec![10, 25],
                learning_rates: vec![0.001],
                betas: vec![0.5, 1.0],
                activations: vec![HiddenActivation::Elu],
                epochs: vec![500],
            },
            ModelKind::Cgan => GridSpec {
                batch_sizes: vec![64],
                hidden_layers: vec![1],
                hidden_units: vec![600, 1200],
                bottleneck_dims: vec![25],
                learning_rates: vec![0.001, 0.0005],
                betas: vec![0.5],
                activations: vec![HiddenActivation::Elu],
                epochs: vec![51],
            },
        }
    }

    /// A single-point grid.
    pub fn single(config: &ModelConfig) -> Self {
        match config {
            ModelConfig::Cvae(c) => GridSpec {
                batch_sizes: vec![c.batch_size],
                hidden_layers: vec![c.hidden_layers],
                hidden_units: vec![c.hidden_units],
                bottleneck_dims: vec![c.bottleneck_dim],
                learning_rates: vec![c.learning_rate],
                betas: vec![c.beta],
                activations: vec![c.activation],
                epochs: vec![c.epochs],
            },
            ModelConfig::Cgan(c) => GridSpec {
                batch_sizes: vec![c.batch_size],
                hidden_layers: vec![c.hidden_layers],
                hidden_units: vec![c.hidden_units],
                bottleneck_dims: vec![c.noise_dim],
                learning_rates: vec![c.learning_rate],
                betas: vec![0.5],
                activations: vec![c.activation],
                epochs: vec![c.epochs],
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axes = [
            ("batch_sizes", self.batch_sizes.len()),
            ("hidden_layers", self.hidden_layers.len()),
            ("hidden_units", self.hidden_units.len()),
            ("bottleneck_dims", self.bottleneck_dims.len()),
            ("learning_rates", self.learning_rates.len()),
            ("betas", self.betas.len()),
            ("activations", self.activations.len()),
            ("epochs", self.epochs.len()),
        ];
        match axes.iter().find(|(_, n)| *n == 0) {
            Some((name, _)) => Err(Error::InvalidArgument(format!("grid axis {name} is empty"))),
            None => Ok(()),
        }
    }

    /// Cartesian size.
    pub fn size(&self) -> usize {
        self.batch_sizes.len()
            * self.hidden_layers.len()
            * self.hidden_units.len()
            * self.bottleneck_dims.len()
            * self.learning_rates.len()
            * self.betas.len()
            * self.activations.len()
            * self.epochs.len()
    }

    /// Every configuration, in a fixed order. CGAN grids skip the beta axis.
    pub fn configs(&self, kind: ModelKind) -> Result<Vec<ModelConfig>> {
        self.validate()?;
        let betas: &[f64] = match kind {
            ModelKind::Cvae => &self.betas,
            ModelKind::Cgan => &self.betas[..1],
        };
        let mut out = Vec::new();
        for &batch_size in &self.batch_sizes {
            for &hidden_layers in &self.hidden_layers {
                for &hidden_units in &self.hidden_units {
                    for &dim in &self.bottleneck_dims {
                        for &learning_rate in &self.learning_rates {
                            for &beta in betas {
                                for &activation in &self.activations {
                                    for &epochs in &self.epochs {
                                        out.push(match kind {
                                            ModelKind::Cvae => ModelConfig::Cvae(CvaeTrainConfig {
                                                hidden_layers,
                                                hidden_units,
                                                bottleneck_dim: dim,
                                                batch_size,
                                                learning_rate,
                                                beta,
                                                epochs,
                                                seed: 0,
                                                activation,
                                                ..CvaeTrainConfig::default()
                                            }),
                                            ModelKind::Cgan => ModelConfig::Cgan(CganTrainConfig {
                                                hidden_layers,
                                                hidden_units,
                                                batch_size,
                                                learning_rate,
                                                epochs,
                                                noise_dim: dim,
                                                seed: 0,
                                                activation,
                                                ..CganTrainConfig::default()
                                            }),
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One configuration trained on every fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub index: usize,
    pub config: ModelConfig,
    pub seed: u64,
    pub folds: Option<FoldStats>,
    /// Zero-sample rate of the best fold's validation samples.
    pub zero_sample_pct: Option<f64>,
    pub failure: Option<String>,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl ExperimentRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub kind: ModelKind,
    pub size: usize,
    /// Successful records, best first.
    pub ranked: Vec<ExperimentRecord>,
    pub failures: Vec<ExperimentRecord>,
}

impl GridResult {
    pub fn best(&self) -> Option<&ExperimentRecord> {
        self.ranked.first()
    }

    /// `(index, seconds)` per experiment, in index order.
    pub fn timings(&self) -> Vec<(usize, f64)> {
        let mut t: Vec<(usize, f64)> = self
            .ranked
            .iter()
            .chain(&self.failures)
            .map(|r| (r.index, r.wall_time_secs))
            .collect();
        t.sort_by_key(|&(i, _)| i);
        t
    }
}

pub(crate) fn fold_seed(master: u64, config_index: usize, fold: usize) -> u64 {
    mix_seed(master, (config_index * K_FOLDS + fold) as u64)
}

fn run_one(
    index: usize,
    config: &ModelConfig,
    records: &[AgentRecord],
    schema: &Schema,
    split: &SplitPlan,
    seed: u64,
) -> Result<(FoldStats, f64)> {
    let mut per_fold = Vec::with_capacity(split.folds.len());
    let mut zero = Vec::with_capacity(split.folds.len());
    for (f, fold) in split.folds.iter().enumerate() {
        let s = fold_seed(seed, index, f);
        let (train, val) = fold_data(records, schema, fold)?;
        let (model, _) = train_model(&config.with_seed(s), schema, &train, None)?;
        let score = score_fold(
            &model,
            schema,
            &train.records,
            &val,
            &mut SeededRng::new(s).derive(2),
        )?;
        if !score.srmse.is_finite() {
            return Err(Error::Diverged {
                iteration: 0,
                detail: format!("non-finite validation SRMSE on fold {f}"),
            });
        }
        per_fold.push(score.srmse);
        zero.push(score.zero_sample_pct);
    }
    let stats = FoldStats::from_values(per_fold)?;
    let z = zero[stats.best_fold];
    Ok((stats, z))
}

/// Trains every configuration on all folds and ranks by best-fold
/// validation SRMSE, then mean, then configuration index. A configuration
/// that diverges is recorded as a failure.
pub fn run_grid(
    kind: ModelKind,
    grid: &GridSpec,
    records: &[AgentRecord],
    schema: &Schema,
    split: &SplitPlan,
    seed: u64,
) -> Result<GridResult> {
    split.check(records.len())?;
    let configs = grid.configs(kind)?;
    let mut ranked = Vec::new();
    let mut failures = Vec::new();
    for (index, config) in configs.iter().enumerate() {
        let start = Instant::now();
        let outcome = run_one(index, config, records, schema, split, seed);
        let mut record = ExperimentRecord {
            index,
            config: config.clone(),
            seed,
            folds: None,
            zero_sample_pct: None,
            failure: None,
            wall_time_secs: 0.0,
        };
        match outcome {
            Ok((stats, zero)) => {
                record.folds = Some(stats);
                record.zero_sample_pct = Some(zero);
            }
            Err(e @ (Error::Diverged { .. } | Error::InvalidArgument(_))) => {
                record.failure = Some(e.to_string())
            }
            Err(e) => return Err(e),
        }
        record.wall_time_secs = start.elapsed().as_secs_f64();
        if record.failed() {
            failures.push(record);
        } else {
            ranked.push(record);
        }
    }
    ranked.sort_by(|a, b| {
        let (fa, fb) = (a.folds.as_ref().unwrap(), b.folds.as_ref().unwrap());
        fa.best
            .total_cmp(&fb.best)
            .then(fa.mean.total_cmp(&fb.mean))
            .then(a.index.cmp(&b.index))
    });
    Ok(GridResult {
        kind,
        size: configs.len(),
        ranked,
        failures,
    })
}
