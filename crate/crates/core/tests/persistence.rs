use std::fs;
use std::path::Path;

use popsynth_core::data::PlantedGenerator;
use popsynth_core::persist::{MANIFEST_FILE, WEIGHTS_FILE};
use popsynth_core::{
    load_model, synthesize_for, train_cgan, train_cvae, CganTrainConfig, CvaeTrainConfig,
    EncodedSet, ModelKind, SeededRng, TrainedModel, Variant,
};
use serde_json::Value;

fn trained_pair() -> (Vec<TrainedModel>, EncodedSet, popsynth_core::Schema) {
    let g = PlantedGenerator::new(Variant::Extended).unwrap();
    let schema = g.schema().clone();
    let set = EncodedSet::new(&schema, g.generate(200, &mut SeededRng::new(1))).unwrap();
    let cvae = CvaeTrainConfig {
        hidden_units: 16,
        bottleneck_dim: 3,
        epochs: 2,
        ..CvaeTrainConfig::default()
    };
    let cgan = CganTrainConfig {
        hidden_units: 16,
        noise_dim: 4,
        epochs: 2,
        ..CganTrainConfig::default()
    };
    let models = vec![
        TrainedModel::Cvae(train_cvae(&schema, &set, None, &cvae).unwrap().0, cvae),
        TrainedModel::Cgan(train_cgan(&schema, &set, None, &cgan).unwrap().0, cgan),
    ];
    (models, set, schema)
}

fn edit_manifest(dir: &Path, edit: impl Fn(&mut Value)) {
    let path = dir.join(MANIFEST_FILE);
    let mut manifest: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    edit(&mut manifest);
    fs::write(&path, manifest.to_string()).unwrap();
}

#[test]
fn round_trip_reproduces_samples() {
    let (models, set, schema) = trained_pair();
    let tmp = tempfile::tempdir().unwrap();
    for (i, model) in models.iter().enumerate() {
        let dir = tmp.path().join(i.to_string());
        model.save(&dir, &schema).unwrap();
        let (loaded, loaded_schema) = load_model(&dir).unwrap();
        assert_eq!(loaded.kind(), model.kind());
        assert_eq!(loaded_schema, schema);
        let draw = |m: &TrainedModel| {
            synthesize_for(m, &set.records, &schema, &mut SeededRng::new(7)).unwrap()
        };
        assert_eq!(draw(&loaded), draw(model));
    }
    assert_eq!(models[0].kind(), ModelKind::Cvae);
}

#[test]
fn corrupt_files_are_rejected() {
    let (models, _, schema) = trained_pair();
    let tmp = tempfile::tempdir().unwrap();
    let fresh = |name: &str| {
        let dir = tmp.path().join(name);
        models[0].save(&dir, &schema).unwrap();
        dir
    };

    let truncated = fresh("truncated");
    let weights = truncated.join(WEIGHTS_FILE);
    let bytes = fs::read(&weights).unwrap();
    fs::write(&weights, &bytes[..bytes.len() - 8]).unwrap();
    assert!(load_model(&truncated)
        .unwrap_err()
        .to_string()
        .contains("weight file"));
    fs::write(&weights, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_model(&truncated).is_err());

    let version = fresh("version");
    edit_manifest(&version, |m| m["format_version"] = 99.into());
    assert!(load_model(&version)
        .unwrap_err()
        .to_string()
        .contains("version"));

    let fingerprint = fresh("fingerprint");
    edit_manifest(&fingerprint, |m| m["schema_fingerprint"] = "0000".into());
    assert!(load_model(&fingerprint)
        .unwrap_err()
        .to_string()
        .contains("fingerprint"));

    let missing = fresh("missing");
    fs::remove_file(missing.join(WEIGHTS_FILE)).unwrap();
    assert!(load_model(&missing).is_err());
}
