use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::fold_seed;
use super::{
    fit_baseline, fold_data, run_grid, score_fold, train_model, FittedSampler, GridResult,
    GridSpec, ModelConfig,
};
use crate::cgan::CganTrainConfig;
use crate::cvae::CvaeTrainConfig;
use crate::data::{
    make_split, select, AgentRecord, ApplicationSelector, PlantedGenerator, Schema, Variant,
};
use crate::error::{Error, Result};
use crate::eval::{joint_scatter_csv, marginal_bars_csv, srmse_suite, FoldStats};
use crate::numeric::{mix_seed, SeededRng};
use crate::persist::ModelKind;
use crate::sampler::synthesize_for;

/// Smallest dataset the protocol accepts.
pub const MIN_PROTOCOL_RECORDS: usize = 1000;

pub const MODEL_NAMES: [&str; 3] = ["cvae", "cgan", "baseline"];

/// Benchmark run over planted synthetic data, one dataset per variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub seed: u64,
    pub n_records: usize,
    pub variants: Vec<Variant>,
    #[serde(default)]
    pub cvae: CvaeTrainConfig,
    #[serde(default)]
    pub cgan: CganTrainConfig,
    /// When set, the CVAE config is chosen by grid search per variant.
    #[serde(default)]
    pub cvae_grid: Option<GridSpec>,
    #[serde(default)]
    pub cgan_grid: Option<GridSpec>,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_records < MIN_PROTOCOL_RECORDS {
            return Err(Error::InvalidArgument(format!(
                "n_records must be at least {MIN_PROTOCOL_RECORDS}, got {}",
                self.n_records
            )));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidArgument("variants must not be empty".into()));
        }
        if self.variants.contains(&Variant::Custom) {
            return Err(Error::InvalidArgument(
                "protocol runs on the original or extended variant".into(),
            ));
        }
        self.cvae.validate()?;
        self.cgan.validate()
    }
}

/// Validation performance across the folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummaryRow {
    pub model: String,
    pub marginal_best: f64,
    pub mean: f64,
    pub std: f64,
    pub zero_sample_pct: f64,
    pub folds: FoldStats,
}

/// Held-out performance of the best-fold models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetScoreRow {
    pub model: String,
    pub set: String,
    pub marginal: f64,
    pub bivariate: f64,
    pub trivariate_1: f64,
    pub trivariate_2: f64,
    pub r_squared: Option<f64>,
    pub pearson: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub variant: Variant,
    pub n_records: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_application: usize,
    pub cvae_config: CvaeTrainConfig,
    pub cgan_config: CganTrainConfig,
    pub fold_summary: Vec<FoldSummaryRow>,
    pub set_scores: Vec<SetScoreRow>,
    pub cvae_grid: Option<GridResult>,
    pub cgan_grid: Option<GridResult>,
    /// `(file name, CSV body)` for the plot-ready figure data.
    #[serde(skip)]
    pub figures: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub seed: u64,
    pub variants: Vec<VariantReport>,
}

struct FoldOutcome {
    stats: FoldStats,
    zero_sample_pct: f64,
    best: FittedSampler,
}

fn cross_validate(
    records: &[AgentRecord],
    schema: &Schema,
    split: &crate::data::SplitPlan,
    seed: u64,
    model_index: usize,
    fit: &dyn Fn(&crate::data::EncodedSet, u64) -> Result<FittedSampler>,
) -> Result<FoldOutcome> {
    let mut per_fold = Vec::new();
    let mut zero = Vec::new();
    let mut best: Option<(f64, FittedSampler)> = None;
    for (f, fold) in split.folds.iter().enumerate() {
        let s = fold_seed(seed, model_index, f);
        let (train, val) = fold_data(records, schema, fold)?;
        let sampler = fit(&train, s)?;
        let score = score_fold(
            &sampler,
            schema,
            &train.records,
            &val,
            &mut SeededRng::new(s).derive(2),
        )?;
        per_fold.push(score.srmse);
        zero.push(score.zero_sample_pct);
        if best.as_ref().is_none_or(|(b, _)| score.srmse < *b) {
            best = Some((score.srmse, sampler));
        }
    }
    let stats = FoldStats::from_values(per_fold)?;
    Ok(FoldOutcome {
        zero_sample_pct: zero[stats.best_fold],
        stats,
        best: best.expect("at least one fold").1,
    })
}

/// The full protocol on one dataset: split, per-fold training and
/// validation of both generative models and the baseline, then sampling on
/// the test and application conditionals with each best-fold model.
pub fn run_variant_protocol(
    records: &[AgentRecord],
    schema: &Schema,
    selector: &ApplicationSelector,
    config: &ProtocolConfig,
    seed: u64,
) -> Result<VariantReport> {
    if records.len() < MIN_PROTOCOL_RECORDS {
        return Err(Error::InvalidArgument(format!(
            "protocol needs at least {MIN_PROTOCOL_RECORDS} records, got {}",
            records.len()
        )));
    }
    let split = make_split(
        records,
        schema,
        selector,
        &mut SeededRng::new(mix_seed(seed, 1)),
    )?;

    let mut cvae_config = config.cvae.clone();
    let mut cgan_config = config.cgan.clone();
    let cvae_grid = match &config.cvae_grid {
        Some(g) => {
            let r = run_grid(
                ModelKind::Cvae,
                g,
                records,
                schema,
                &split,
                mix_seed(seed, 2),
            )?;
            if let Some(ModelConfig::Cvae(c)) = r.best().map(|b| &b.config) {
                cvae_config = c.clone();
            }
            Some(r)
        }
        None => None,
    };
    let cgan_grid = match &config.cgan_grid {
        Some(g) => {
            let r = run_grid(
                ModelKind::Cgan,
                g,
                records,
                schema,
                &split,
                mix_seed(seed, 3),
            )?;
            if let Some(ModelConfig::Cgan(c)) = r.best().map(|b| &b.config) {
                cgan_config = c.clone();
            }
            Some(r)
        }
        None => None,
    };

    let cv_seed = mix_seed(seed, 4);
    let cvae_model = ModelConfig::Cvae(cvae_config.clone());
    let cgan_model = ModelConfig::Cgan(cgan_config.clone());
    let outcomes = [
        cross_validate(records, schema, &split, cv_seed, 0, &|train, s| {
            Ok(FittedSampler::Model(
                train_model(&cvae_model.with_seed(s), schema, train, None)?.0,
            ))
        })?,
        cross_validate(records, schema, &split, cv_seed, 1, &|train, s| {
            Ok(FittedSampler::Model(
                train_model(&cgan_model.with_seed(s), schema, train, None)?.0,
            ))
        })?,
        cross_validate(records, schema, &split, cv_seed, 2, &|train, _| {
            fit_baseline(&train.records, schema)
        })?,
    ];

    let test = select(records, &split.test_ids);
    let application = select(records, &split.application_ids);
    let mut fold_summary = Vec::new();
    let mut set_scores = Vec::new();
    let mut figures = Vec::new();
    for (m, (name, outcome)) in MODEL_NAMES.iter().zip(&outcomes).enumerate() {
        fold_summary.push(FoldSummaryRow {
            model: name.to_string(),
            marginal_best: outcome.stats.best,
            mean: outcome.stats.mean,
            std: outcome.stats.std,
            zero_sample_pct: outcome.zero_sample_pct,
            folds: outcome.stats.clone(),
        });
        let mut rng = SeededRng::new(mix_seed(seed, 10 + m as u64));
        for (set, truth) in [("test", &test), ("application", &application)] {
            let generated = synthesize_for(&outcome.best, truth, schema, &mut rng)?;
            let suite = srmse_suite(&generated, truth, schema)?;
            set_scores.push(SetScoreRow {
                model: name.to_string(),
                set: set.to_string(),
                marginal: suite.marginal,
                bivariate: suite.bivariate,
                trivariate_1: suite.trivariate_1,
                trivariate_2: suite.trivariate_2,
                r_squared: suite.r_squared,
                pearson: suite.pearson,
            });
            if set == "test" {
                figures.push((
                    format!("marginals_{name}.csv"),
                    marginal_bars_csv(&generated, truth, schema)?,
                ));
                figures.push((
                    format!("test_scatter_{name}.csv"),
                    joint_scatter_csv(&generated, truth, schema)?,
                ));
            } else {
                figures.push((
                    format!("application_scatter_{name}.csv"),
                    joint_scatter_csv(&generated, truth, schema)?,
                ));
            }
        }
    }

    Ok(VariantReport {
        variant: schema.variant,
        n_records: records.len(),
        n_train: split.train_ids.len(),
        n_test: split.test_ids.len(),
        n_application: split.application_ids.len(),
        cvae_config,
        cgan_config,
        fold_summary,
        set_scores,
        cvae_grid,
        cgan_grid,
        figures,
    })
}

/// Generates a planted dataset per variant and runs the protocol on each.
pub fn run_protocol(config: &ProtocolConfig) -> Result<ProtocolReport> {
    config.validate()?;
    let mut variants = Vec::new();
    for (i, &variant) in config.variants.iter().enumerate() {
        let generator = PlantedGenerator::new(variant)?;
        let variant_seed = mix_seed(config.seed, 100 + i as u64);
        let records = generator.generate(config.n_records, &mut SeededRng::new(variant_seed));
        variants.push(run_variant_protocol(
            &records,
            generator.schema(),
            &generator.application_selector(),
            config,
            variant_seed,
        )?);
    }
    Ok(ProtocolReport {
        seed: config.seed,
        variants,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn fold_summary_csv(report: &ProtocolReport) -> String {
    let mut out = String::from("variant,model,marginal_best,mean,std,zero_sample_pct\n");
    for v in &report.variants {
        for r in &v.fold_summary {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                v.variant.as_str(),
                r.model,
                r.marginal_best,
                r.mean,
                r.std,
                r.zero_sample_pct
            )
            .unwrap();
        }
    }
    out
}

pub fn set_scores_csv(report: &ProtocolReport) -> String {
    let mut out = String::from(
        "variant,set,model,marginal,bivariate,trivariate_1,trivariate_2,r_squared,pearson\n",
    );
    for v in &report.variants {
        for r in &v.set_scores {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                v.variant.as_str(),
                r.set,
                r.model,
                r.marginal,
                r.bivariate,
                r.trivariate_1,
                r.trivariate_2,
                opt(r.r_squared),
                opt(r.pearson)
            )
            .unwrap();
        }
    }
    out
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, `fold_summary.csv`, `set_scores.csv` and one directory of
/// figure CSVs per variant.
pub fn write_protocol_outputs(report: &ProtocolReport, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write(
        &out.join("report.json"),
        &(serde_json::to_string_pretty(report)? + "\n"),
    )?;
    write(&out.join("fold_summary.csv"), &fold_summary_csv(report))?;
    write(&out.join("set_scores.csv"), &set_scores_csv(report))?;
    for v in &report.variants {
        let dir = out.join(v.variant.as_str());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (name, body) in &v.figures {
            write(&dir.join(name), body)?;
        }
    }
    Ok(())
}
