//! Model persistence: a JSON manifest describing architecture, schema and
//! training config, next to a flat little-endian `f64` weight file holding
//! every network in manifest order (per layer: weights row-major, then
//! bias).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cgan::{CganModel, CganTrainConfig};
use crate::cvae::{CvaeModel, CvaeTrainConfig};
use crate::data::Schema;
use crate::error::{Error, Result};
use crate::numeric::{LayerShape, Mlp, SeededRng};
use crate::sampler::PopulationSampler;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "model.json";
pub const WEIGHTS_FILE: &str = "weights.bin";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cvae,
    Cgan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub component: String,
    pub layers: Vec<LayerShape>,
    pub param_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: ModelKind,
    pub format_version: u32,
    pub schema_fingerprint: String,
    pub schema: Schema,
    pub config: serde_json::Value,
    pub networks: Vec<NetworkManifest>,
    pub weights_file: String,
}

/// A loaded model of either kind.
#[derive(Clone, Debug)]
pub enum TrainedModel {
    Cvae(CvaeModel, CvaeTrainConfig),
    Cgan(CganModel, CganTrainConfig),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Cvae(..) => ModelKind::Cvae,
            TrainedModel::Cgan(..) => ModelKind::Cgan,
        }
    }

    pub fn save(&self, dir: &Path, schema: &Schema) -> Result<()> {
        match self {
            TrainedModel::Cvae(m, c) => save_cvae(dir, m, c, schema),
            TrainedModel::Cgan(m, c) => save_cgan(dir, m, c, schema),
        }
    }
}

impl PopulationSampler for TrainedModel {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        match self {
            TrainedModel::Cvae(m, _) => m.sample_outputs(conditionals, rng),
            TrainedModel::Cgan(m, _) => m.sample_outputs(conditionals, rng),
        }
    }
}

fn network(component: &str, net: &Mlp) -> NetworkManifest {
    NetworkManifest {
        component: component.to_string(),
        layers: net.shapes(),
        param_count: net.param_count(),
    }
}

fn write_files(dir: &Path, manifest: &Manifest, nets: &[&Mlp]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bytes = Vec::with_capacity(nets.iter().map(|n| n.param_count()).sum::<usize>() * 8);
    for net in nets {
        for v in net.flat_params() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let weights = dir.join(&manifest.weights_file);
    fs::write(&weights, bytes).map_err(|e| Error::io(&weights, e))?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn save_cvae(
    dir: &Path,
    model: &CvaeModel,
    config: &CvaeTrainConfig,
    schema: &Schema,
) -> Result<()> {
    let manifest = Manifest {
        kind: ModelKind::Cvae,
        format_version: FORMAT_VERSION,
        schema_fingerprint: schema.fingerprint(),
        schema: schema.clone(),
        config: serde_json::to_value(config)?,
        networks: vec![
            network("encoder", &model.encoder),
            network("decoder", &model.decoder),
        ],
        weights_file: WEIGHTS_FILE.into(),
    };
    write_files(dir, &manifest, &[&model.encoder, &model.decoder])
}

pub fn save_cgan(
    dir: &Path,
    model: &CganModel,
    config: &CganTrainConfig,
    schema: &Schema,
) -> Result<()> {
    let manifest = Manifest {
        kind: ModelKind::Cgan,
        format_version: FORMAT_VERSION,
        schema_fingerprint: schema.fingerprint(),
        schema: schema.clone(),
        config: serde_json::to_value(config)?,
        networks: vec![
            network("generator", &model.generator),
            network("discriminator", &model.discriminator),
        ],
        weights_file: WEIGHTS_FILE.into(),
    };
    write_files(dir, &manifest, &[&model.generator, &model.discriminator])
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Model(format!(
            "unsupported model format version {} (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    manifest.schema.validate()?;
    if manifest.schema.fingerprint() != manifest.schema_fingerprint {
        return Err(Error::Model(
            "schema fingerprint does not match embedded schema".into(),
        ));
    }
    Ok(manifest)
}

/// Loads a saved model and the schema it was trained on.
pub fn load_model(dir: &Path) -> Result<(TrainedModel, Schema)> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(&manifest.weights_file);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Model(format!(
            "weight file length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
        .collect();
    let expected: usize = manifest.networks.iter().map(|n| n.param_count).sum();
    if values.len() != expected {
        return Err(Error::Model(format!(
            "weight file holds {} values, manifest expects {expected}",
            values.len()
        )));
    }
    let mut nets = Vec::with_capacity(manifest.networks.len());
    let mut offset = 0;
    for n in &manifest.networks {
        let mut net = Mlp::from_shapes(&n.layers)?;
        if net.param_count() != n.param_count {
            return Err(Error::Model(format!(
                "{}: layer shapes disagree with param_count",
                n.component
            )));
        }
        net.load_flat_params(&values[offset..offset + n.param_count])?;
        offset += n.param_count;
        nets.push((n.component.as_str(), net));
    }
    let take = |nets: &mut Vec<(&str, Mlp)>, name: &str| -> Result<Mlp> {
        let i = nets
            .iter()
            .position(|(c, _)| *c == name)
            .ok_or_else(|| Error::Model(format!("manifest has no {name} network")))?;
        Ok(nets.remove(i).1)
    };
    let schema = manifest.schema.clone();
    let model = match manifest.kind {
        ModelKind::Cvae => {
            let config: CvaeTrainConfig = serde_json::from_value(manifest.config.clone())?;
            let encoder = take(&mut nets, "encoder")?;
            let decoder = take(&mut nets, "decoder")?;
            if encoder.output_width() != 2 * config.bottleneck_dim {
                return Err(Error::Model(
                    "encoder width disagrees with bottleneck_dim".into(),
                ));
            }
            TrainedModel::Cvae(
                CvaeModel {
                    encoder,
                    decoder,
                    latent_dim: config.bottleneck_dim,
                    beta: config.beta,
                    output_blocks: schema.output_blocks(),
                    conditional_blocks: schema.conditional_blocks(),
                },
                config,
            )
        }
        ModelKind::Cgan => {
            let config: CganTrainConfig = serde_json::from_value(manifest.config.clone())?;
            TrainedModel::Cgan(
                CganModel {
                    generator: take(&mut nets, "generator")?,
                    discriminator: take(&mut nets, "discriminator")?,
                    noise_dim: config.noise_dim,
                    non_saturating: config.non_saturating,
                    output_blocks: schema.output_blocks(),
                    conditional_blocks: schema.conditional_blocks(),
                },
                config,
            )
        }
    };
    Ok((model, schema))
}
