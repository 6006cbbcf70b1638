use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use popsynth_core::cgan::{train_cgan, CganTrace};
use popsynth_core::cvae::{train_cvae, CvaeTrace};
use popsynth_core::data::{
    generate_synthetic_dataset, make_split, read_conditionals, read_dataset, write_dataset,
    ApplicationSelector, PlantedGenerator,
};
use popsynth_core::eval::{evaluate, joint_scatter_csv, marginal_bars_csv};
use popsynth_core::harness::{
    run_grid, run_protocol, write_protocol_outputs, GridResult, GridSpec, ModelConfig,
    ProtocolConfig,
};
use popsynth_core::numeric::mix_seed;
use popsynth_core::{
    load_model, synthesize, EncodedSet, ModelKind, Schema, SeededRng, TrainedModel, Variant,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{
    parse, take_path, write_effective, write_file, write_json, CliError, CliResult,
};

pub const DATA_FILE: &str = "data.csv";
pub const SCHEMA_FILE: &str = "schema.json";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const LOSS_TRACE_FILE: &str = "loss_trace.csv";
pub const CHECKPOINTS_FILE: &str = "checkpoints.csv";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataConfig {
    pub variant: Variant,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
}

pub fn gen_data(value: Value) -> CliResult<()> {
    let cfg: GenDataConfig = parse(value)?;
    let (schema, records) =
        generate_synthetic_dataset(cfg.variant, cfg.n, &mut SeededRng::new(cfg.seed))?;
    write_effective(&cfg.out, &cfg)?;
    write_dataset(&cfg.out.join(DATA_FILE), &schema, &records)?;
    schema.save(&cfg.out.join(SCHEMA_FILE))?;
    println!(
        "wrote {} records ({} columns, output width {}, conditional width {}) to {}",
        records.len(),
        schema.len(),
        schema.output_width(),
        schema.conditional_width(),
        cfg.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
    /// Enables periodic checkpoints and best-checkpoint selection.
    #[serde(default)]
    pub validation: Option<PathBuf>,
    pub training: ModelConfig,
}

fn load_encoded(path: &Path, schema: &Schema) -> CliResult<EncodedSet> {
    Ok(EncodedSet::new(schema, read_dataset(path, schema)?)?)
}

fn cvae_trace_csvs(trace: &CvaeTrace) -> (String, String) {
    let mut loss = String::from("iteration,loss\n");
    for (i, l) in trace.batch_loss.iter().enumerate() {
        writeln!(loss, "{},{l}", i + 1).unwrap();
    }
    let mut checks = String::from("iteration,epoch,validation_loss,validation_srmse\n");
    for c in &trace.checkpoints {
        writeln!(
            checks,
            "{},{},{},{}",
            c.iteration, c.epoch, c.validation_loss, c.validation_srmse
        )
        .unwrap();
    }
    (loss, checks)
}

fn cgan_trace_csvs(trace: &CganTrace) -> (String, String) {
    let mut loss = String::from("iteration,d_loss,g_loss,d_real,d_fake\n");
    for i in 0..trace.d_loss.len() {
        writeln!(
            loss,
            "{},{},{},{},{}",
            i + 1,
            trace.d_loss[i],
            trace.g_loss[i],
            trace.d_real[i],
            trace.d_fake[i]
        )
        .unwrap();
    }
    let mut checks = String::from("iteration,epoch,validation_srmse\n");
    for c in &trace.checkpoints {
        writeln!(checks, "{},{},{}", c.iteration, c.epoch, c.validation_srmse).unwrap();
    }
    (loss, checks)
}

pub fn train(value: Value) -> CliResult<()> {
    let cfg: TrainRunConfig = parse(value)?;
    let schema = Schema::load(&cfg.schema)?;
    let train = load_encoded(&cfg.data, &schema)?;
    let validation = cfg
        .validation
        .as_deref()
        .map(|p| load_encoded(p, &schema))
        .transpose()?;
    write_effective(&cfg.out, &cfg)?;
    let (model, (loss, checks), kept) = match &cfg.training {
        ModelConfig::Cvae(c) => {
            let (m, trace) = train_cvae(&schema, &train, validation.as_ref(), c)?;
            (
                TrainedModel::Cvae(m, c.clone()),
                cvae_trace_csvs(&trace),
                trace.kept_iteration,
            )
        }
        ModelConfig::Cgan(c) => {
            let (m, trace) = train_cgan(&schema, &train, validation.as_ref(), c)?;
            if let Some((r, f)) = trace.final_discriminator_means() {
                println!("final epoch mean D(real) {r:.4}, D(fake) {f:.4}");
            }
            (
                TrainedModel::Cgan(m, c.clone()),
                cgan_trace_csvs(&trace),
                trace.kept_iteration,
            )
        }
    };
    model.save(&cfg.out, &schema)?;
    write_file(&cfg.out.join(LOSS_TRACE_FILE), &loss)?;
    write_file(&cfg.out.join(CHECKPOINTS_FILE), &checks)?;
    match kept {
        Some(it) => println!("kept checkpoint at iteration {it}"),
        None => println!("kept final weights"),
    }
    println!(
        "trained {:?} on {} records, saved to {}",
        model.kind(),
        train.len(),
        cfg.out.display()
    );
    Ok(())
}

fn one() -> usize {
    1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    /// Directory of a saved model.
    pub model: PathBuf,
    pub conditionals: PathBuf,
    #[serde(default = "one")]
    pub n_per_row: usize,
    #[serde(default)]
    pub seed: u64,
    pub out: PathBuf,
}

pub fn sample(value: Value) -> CliResult<()> {
    let cfg: SampleConfig = parse(value)?;
    let (model, schema) = load_model(&cfg.model)?;
    let rows = read_conditionals(&cfg.conditionals, &schema)?;
    let repeated: Vec<&[usize]> = rows
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.as_slice(), cfg.n_per_row))
        .collect();
    let agents = if repeated.is_empty() {
        Vec::new()
    } else {
        synthesize(&model, &repeated, &mut SeededRng::new(cfg.seed))?
    };
    write_effective(&cfg.out, &cfg)?;
    write_dataset(&cfg.out.join(SAMPLES_FILE), &schema, &agents)?;
    println!(
        "sampled {} agents for {} conditional rows into {}",
        agents.len(),
        rows.len(),
        cfg.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub samples: PathBuf,
    pub truth: PathBuf,
    #[serde(default)]
    pub train: Option<PathBuf>,
    pub schema: PathBuf,
    pub out: PathBuf,
}

pub const REPORT_FILE: &str = "report.json";
pub const MARGINALS_FILE: &str = "marginals.csv";
pub const SCATTER_FILE: &str = "joint_scatter.csv";

pub fn evaluate_cmd(value: Value) -> CliResult<()> {
    let cfg: EvaluateConfig = parse(value)?;
    let schema = Schema::load(&cfg.schema)?;
    let samples = read_dataset(&cfg.samples, &schema)?;
    let truth = read_dataset(&cfg.truth, &schema)?;
    let train = cfg
        .train
        .as_deref()
        .map(|p| read_dataset(p, &schema))
        .transpose()?;
    let report = evaluate(&samples, &truth, train.as_deref(), &schema)?;
    write_effective(&cfg.out, &cfg)?;
    write_json(&cfg.out.join(REPORT_FILE), &report)?;
    write_file(
        &cfg.out.join(MARGINALS_FILE),
        &marginal_bars_csv(&samples, &truth, &schema)?,
    )?;
    write_file(
        &cfg.out.join(SCATTER_FILE),
        &joint_scatter_csv(&samples, &truth, &schema)?,
    )?;
    let s = &report.srmse;
    println!(
        "SRMSE marginal {:.4}, bivariate {:.4}, trivariate {:.4} / {:.4}",
        s.marginal, s.bivariate, s.trivariate_1, s.trivariate_2
    );
    if let Some(z) = report.zero_sample_pct {
        println!("zero-sample rate {z:.2}%");
    }
    Ok(())
}

#[derive(Serialize)]
struct EffectiveProtocol<'a> {
    out: &'a Path,
    #[serde(flatten)]
    protocol: &'a ProtocolConfig,
}

pub fn protocol(mut value: Value) -> CliResult<()> {
    let out = take_path(&mut value, "out")?;
    let cfg: ProtocolConfig = parse(value)?;
    cfg.validate()?;
    write_effective(
        &out,
        &EffectiveProtocol {
            out: &out,
            protocol: &cfg,
        },
    )?;
    let report = run_protocol(&cfg)?;
    write_protocol_outputs(&report, &out)?;
    for v in &report.variants {
        println!("{} ({} records)", v.variant.as_str(), v.n_records);
        for r in &v.fold_summary {
            println!(
                "  {:8} validation marginal SRMSE best {:.4}, mean {:.4} ± {:.4}",
                r.model, r.marginal_best, r.mean, r.std
            );
        }
    }
    println!("wrote protocol outputs to {}", out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRunConfig {
    pub model: ModelKind,
    pub data: PathBuf,
    pub schema: PathBuf,
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to a small grid around the best known configuration.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// `(conditional feature, value)` pairs selecting the application set.
    /// Defaults to the planted generator's held-out project.
    #[serde(default)]
    pub application: Option<Vec<(String, usize)>>,
}

pub const GRID_JSON_FILE: &str = "grid.json";
pub const GRID_CSV_FILE: &str = "grid.csv";

fn grid_csv(result: &GridResult) -> String {
    let mut out = String::from("rank,index,best,mean,std,zero_sample_pct,failure,config\n");
    let rows = result
        .ranked
        .iter()
        .enumerate()
        .map(|(i, r)| (Some(i + 1), r));
    for (rank, r) in rows.chain(result.failures.iter().map(|r| (None, r))) {
        let stats = r.folds.as_ref();
        let config = serde_json::to_string(&r.config)
            .expect("config serializes")
            .replace('"', "\"\"");
        writeln!(
            out,
            "{},{},{},{},{},{},{},\"{config}\"",
            rank.map_or(String::new(), |k| k.to_string()),
            r.index,
            stats.map_or(String::new(), |s| s.best.to_string()),
            stats.map_or(String::new(), |s| s.mean.to_string()),
            stats.map_or(String::new(), |s| s.std.to_string()),
            r.zero_sample_pct.map_or(String::new(), |z| z.to_string()),
            r.failure.as_deref().unwrap_or("").replace(',', ";"),
        )
        .unwrap();
    }
    out
}

pub fn grid(value: Value) -> CliResult<()> {
    let mut cfg: GridRunConfig = parse(value)?;
    let schema = Schema::load(&cfg.schema)?;
    let records = read_dataset(&cfg.data, &schema)?;
    let selector = match (&cfg.application, schema.variant) {
        (Some(conds), _) => ApplicationSelector::new(conds.clone()),
        (None, Variant::Custom) => {
            return Err(CliError::Usage(
                "config: missing field `application` (required for custom schemas)".into(),
            ))
        }
        (None, v) => PlantedGenerator::new(v)?.application_selector(),
    };
    let spec = cfg
        .grid
        .clone()
        .unwrap_or_else(|| GridSpec::default_for(cfg.model));
    spec.validate()?;
    cfg.application = Some(selector.conditions.clone());
    cfg.grid = Some(spec.clone());
    write_effective(&cfg.out, &cfg)?;

    let split = make_split(
        &records,
        &schema,
        &selector,
        &mut SeededRng::new(mix_seed(cfg.seed, 1)),
    )?;
    let result = run_grid(
        cfg.model,
        &spec,
        &records,
        &schema,
        &split,
        mix_seed(cfg.seed, 2),
    )?;
    write_json(&cfg.out.join(GRID_JSON_FILE), &result)?;
    write_file(&cfg.out.join(GRID_CSV_FILE), &grid_csv(&result))?;
    println!(
        "{} configurations, {} failed",
        result.size,
        result.failures.len()
    );
    if let Some(best) = result.best() {
        let stats = best.folds.as_ref().expect("ranked records have fold stats");
        println!(
            "best #{}: validation marginal SRMSE best {:.4}, mean {:.4}",
            best.index, stats.best, stats.mean
        );
    }
    Ok(())
}
