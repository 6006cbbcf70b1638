use criterion::{black_box, criterion_group, criterion_main, Criterion};
use popsynth_core::data::PlantedGenerator;
use popsynth_core::eval::{build_table, srmse_suite};
use popsynth_core::{train_cvae, CvaeTrainConfig, EncodedSet, SeededRng, Variant};

fn cvae_epoch(c: &mut Criterion) {
    let g = PlantedGenerator::new(Variant::Extended).unwrap();
    let schema = g.schema();
    let set = EncodedSet::new(schema, g.generate(6893, &mut SeededRng::new(1))).unwrap();
    let config = CvaeTrainConfig {
        epochs: 1,
        ..CvaeTrainConfig::default()
    };
    let mut group = c.benchmark_group("cvae");
    group.sample_size(10);
    group.bench_function("epoch_6893", |b| {
        b.iter(|| black_box(train_cvae(schema, &set, None, &config).unwrap()))
    });
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let g = PlantedGenerator::new(Variant::Extended).unwrap();
    let schema = g.schema();
    let truth = g.generate(6893, &mut SeededRng::new(2));
    let generated = g.generate(6893, &mut SeededRng::new(3));
    c.bench_function("build_table_trivariate", |b| {
        b.iter(|| black_box(build_table(&generated, schema, &[0, 2, 4]).unwrap()))
    });
    c.bench_function("srmse_suite", |b| {
        b.iter(|| black_box(srmse_suite(&generated, &truth, schema).unwrap()))
    });
}

criterion_group!(benches, cvae_epoch, evaluation);
criterion_main!(benches);
