use popsynth_core::cvae::kl_divergence;
use popsynth_core::data::PlantedGenerator;
use popsynth_core::eval::{build_table, DistributionTable};
use popsynth_core::{
    synthesize, train_cgan, train_cvae, AgentRecord, CganTrainConfig, CvaeTrainConfig, EncodedSet,
    Matrix, PopulationSampler, Schema, SeededRng, Variant,
};

fn planted(variant: Variant, n: usize, seed: u64) -> (Schema, Vec<AgentRecord>) {
    let g = PlantedGenerator::new(variant).unwrap();
    let records = g.generate(n, &mut SeededRng::new(seed));
    (g.schema().clone(), records)
}

fn small_cvae(epochs: usize, seed: u64) -> CvaeTrainConfig {
    CvaeTrainConfig {
        hidden_units: 32,
        bottleneck_dim: 4,
        epochs,
        seed,
        ..CvaeTrainConfig::default()
    }
}

fn small_cgan(epochs: usize, seed: u64) -> CganTrainConfig {
    CganTrainConfig {
        hidden_units: 64,
        noise_dim: 8,
        epochs,
        seed,
        ..CganTrainConfig::default()
    }
}

fn sample_n<S: PopulationSampler>(
    model: &S,
    cond: &[usize],
    n: usize,
    seed: u64,
) -> Vec<AgentRecord> {
    let conds: Vec<&[usize]> = vec![cond; n];
    synthesize(model, &conds, &mut SeededRng::new(seed)).unwrap()
}

fn assert_valid(records: &[AgentRecord], schema: &Schema) {
    for r in records {
        r.validate(schema).unwrap();
    }
}

fn share_of(records: &[AgentRecord], target: &AgentRecord) -> f64 {
    records.iter().filter(|r| *r == target).count() as f64 / records.len() as f64
}

#[test]
fn cvae_overfits_a_single_record() {
    let (schema, records) = planted(Variant::Original, 1, 4);
    let target = records[0].clone();
    let set = EncodedSet::new(&schema, records).unwrap();
    let config = CvaeTrainConfig {
        learning_rate: 0.01,
        ..small_cvae(200, 1)
    };
    let (model, _) = train_cvae(&schema, &set, None, &config).unwrap();

    // Probability of the record under the decoder at the prior mean.
    let probs = model
        .decode(&Matrix::zeros(1, model.latent_dim), &set.c)
        .unwrap();
    let recon: f64 = set
        .x
        .row(0)
        .iter()
        .zip(probs.row(0))
        .filter(|(&x, _)| x == 1.0)
        .map(|(_, &p)| p)
        .product();
    assert!(recon > 0.9, "reconstruction probability {recon}");

    let samples = sample_n(&model, target.conditionals(&schema), 1000, 2);
    assert!(share_of(&samples, &target) >= 0.9);
}

#[test]
fn cvae_is_deterministic_per_seed() {
    let (schema, records) = planted(Variant::Extended, 300, 6);
    let set = EncodedSet::new(&schema, records.clone()).unwrap();
    let (a, _) = train_cvae(&schema, &set, None, &small_cvae(3, 9)).unwrap();
    let (b, _) = train_cvae(&schema, &set, None, &small_cvae(3, 9)).unwrap();
    let (c, _) = train_cvae(&schema, &set, None, &small_cvae(3, 10)).unwrap();
    assert_eq!(a.encoder.flat_params(), b.encoder.flat_params());
    assert_eq!(a.decoder.flat_params(), b.decoder.flat_params());
    assert_ne!(a.decoder.flat_params(), c.decoder.flat_params());

    let cond = records[0].conditionals(&schema);
    assert_eq!(sample_n(&a, cond, 50, 1), sample_n(&b, cond, 50, 1));
    assert!(synthesize(&a, &[], &mut SeededRng::new(1))
        .unwrap()
        .is_empty());
}

#[test]
fn cvae_samples_depend_on_conditionals() {
    let g = PlantedGenerator::new(Variant::Original).unwrap();
    let schema = g.schema().clone();
    let records = g.generate(3000, &mut SeededRng::new(12));
    let set = EncodedSet::new(&schema, records).unwrap();
    let (model, _) = train_cvae(&schema, &set, None, &small_cvae(60, 3)).unwrap();

    // The two supported conditionals whose true age laws differ most.
    let support: Vec<Vec<usize>> = g
        .conditional_support()
        .into_iter()
        .map(|(c, _)| c)
        .collect();
    let laws: Vec<DistributionTable> = support
        .iter()
        .map(|c| g.true_conditional_distribution(c, &[0]).unwrap())
        .collect();
    let mut best = (0.0, 0, 0);
    for i in 0..laws.len() {
        for j in i + 1..laws.len() {
            let tv = laws[i].total_variation(&laws[j]).unwrap();
            if tv > best.0 {
                best = (tv, i, j);
            }
        }
    }
    let (true_tv, i, j) = best;
    assert!(true_tv > 0.3, "planted laws are too similar: {true_tv}");
    let a = sample_n(&model, &support[i], 5000, 4);
    let b = sample_n(&model, &support[j], 5000, 5);
    assert_valid(&a, &schema);
    let tv = build_table(&a, &schema, &[0])
        .unwrap()
        .total_variation(&build_table(&b, &schema, &[0]).unwrap())
        .unwrap();
    assert!(tv > 0.1, "sampled age laws differ by only {tv}");
}

#[test]
fn kl_is_nonnegative_and_zero_at_the_prior() {
    let mut rng = SeededRng::new(21);
    for _ in 0..2000 {
        let d = 1 + rng.below(8);
        let mu: Vec<f64> = (0..d).map(|_| rng.uniform_range(-5.0, 5.0)).collect();
        let var: Vec<f64> = (0..d)
            .map(|_| (rng.uniform_range(-6.0, 4.0)).exp())
            .collect();
        assert!(kl_divergence(&mu, &var) >= 0.0);
    }
    assert_eq!(kl_divergence(&[0.0; 5], &[1.0; 5]), 0.0);
}

#[test]
fn decoder_blocks_are_distributions() {
    let (schema, records) = planted(Variant::Extended, 64, 2);
    let set = EncodedSet::new(&schema, records).unwrap();
    let (model, _) = train_cvae(&schema, &set, None, &small_cvae(1, 0)).unwrap();
    let mut z = Matrix::zeros(set.len(), model.latent_dim);
    SeededRng::new(3).fill_standard_normal(z.as_mut_slice());
    let probs = model.decode(&z, &set.c).unwrap();
    for r in 0..probs.rows() {
        let mut start = 0;
        for &len in &schema.output_blocks() {
            let block = &probs.row(r)[start..start + len];
            assert!(block.iter().all(|&p| p > 0.0));
            assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            start += len;
        }
    }
}

#[test]
fn cgan_is_deterministic_and_samples_are_valid() {
    let (schema, records) = planted(Variant::Extended, 300, 6);
    let set = EncodedSet::new(&schema, records.clone()).unwrap();
    let (a, ta) = train_cgan(&schema, &set, None, &small_cgan(2, 5)).unwrap();
    let (b, tb) = train_cgan(&schema, &set, None, &small_cgan(2, 5)).unwrap();
    assert_eq!(a.generator.flat_params(), b.generator.flat_params());
    assert_eq!(a.discriminator.flat_params(), b.discriminator.flat_params());
    assert_eq!(ta, tb);

    let cond = records[0].conditionals(&schema);
    let samples = sample_n(&a, cond, 500, 1);
    assert_eq!(samples, sample_n(&b, cond, 500, 1));
    assert_valid(&samples, &schema);
    assert!(samples.iter().all(|r| r.conditionals(&schema) == cond));

    let scores = a.score(&set.x, &set.c).unwrap();
    assert!(scores.iter().all(|&d| d > 0.0 && d < 1.0));
}

#[test]
fn cgan_on_a_single_record_reaches_equilibrium() {
    let (schema, records) = planted(Variant::Original, 1, 4);
    let target = records[0].clone();
    let set = EncodedSet::new(&schema, records).unwrap();
    let (model, trace) = train_cgan(&schema, &set, None, &small_cgan(300, 2)).unwrap();
    let (real, fake) = trace.final_discriminator_means().unwrap();
    assert!(
        (real - 0.5).abs() <= 0.15 && (fake - 0.5).abs() <= 0.15,
        "D(real) {real}, D(fake) {fake}"
    );
    let samples = sample_n(&model, target.conditionals(&schema), 1000, 3);
    assert!(share_of(&samples, &target) > 0.5);
}

#[test]
fn empty_training_set_is_rejected() {
    let (schema, _) = planted(Variant::Original, 1, 0);
    let empty = EncodedSet::new(&schema, Vec::new()).unwrap();
    assert!(train_cvae(&schema, &empty, None, &small_cvae(1, 0)).is_err());
    assert!(train_cgan(&schema, &empty, None, &small_cgan(1, 0)).is_err());
}
