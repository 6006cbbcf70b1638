use popsynth_core::data::{make_split, select, PlantedGenerator, SplitPlan};
use popsynth_core::harness::{run_grid, GridSpec, ModelConfig};
use popsynth_core::{AgentRecord, CvaeTrainConfig, ModelKind, SeededRng, Variant};

fn dataset(n: usize) -> (PlantedGenerator, Vec<AgentRecord>, SplitPlan) {
    let g = PlantedGenerator::new(Variant::Original).unwrap();
    let records = g.generate(n, &mut SeededRng::new(3));
    let split = make_split(
        &records,
        g.schema(),
        &g.application_selector(),
        &mut SeededRng::new(4),
    )
    .unwrap();
    (g, records, split)
}

fn cvae_grid(epochs: Vec<usize>, hidden_units: Vec<usize>) -> GridSpec {
    let base = ModelConfig::Cvae(CvaeTrainConfig {
        hidden_units: 16,
        bottleneck_dim: 4,
        ..CvaeTrainConfig::default()
    });
    GridSpec {
        epochs,
        hidden_units,
        ..GridSpec::single(&base)
    }
}

#[test]
fn single_point_grid_gives_one_record() {
    let (g, records, split) = dataset(800);
    let result = run_grid(
        ModelKind::Cvae,
        &cvae_grid(vec![2], vec![16]),
        &records,
        g.schema(),
        &split,
        1,
    )
    .unwrap();
    assert_eq!(result.size, 1);
    assert_eq!(result.ranked.len(), 1);
    assert!(result.failures.is_empty());
    let folds = result.best().unwrap().folds.as_ref().unwrap();
    assert_eq!(folds.per_fold.len(), 5);
    assert!(folds.best <= folds.mean);
    assert!(folds.per_fold.iter().all(|v| v.is_finite() && *v >= 0.0));
}

#[test]
fn training_beats_an_untrained_network() {
    let (g, records, split) = dataset(1200);
    let result = run_grid(
        ModelKind::Cvae,
        &cvae_grid(vec![0, 40], vec![16]),
        &records,
        g.schema(),
        &split,
        2,
    )
    .unwrap();
    assert_eq!(result.ranked.len(), 2);
    let best = result.best().unwrap();
    match &best.config {
        ModelConfig::Cvae(c) => assert_eq!(c.epochs, 40),
        other => panic!("unexpected config {other:?}"),
    }
    let [a, b] = [&result.ranked[0], &result.ranked[1]].map(|r| r.folds.as_ref().unwrap().best);
    assert!(a < b, "trained {a} vs untrained {b}");
    assert_eq!(result.timings().len(), 2);
}

#[test]
fn invalid_configuration_becomes_a_failure_record() {
    let (g, records, split) = dataset(800);
    let result = run_grid(
        ModelKind::Cvae,
        &cvae_grid(vec![1], vec![0, 8]),
        &records,
        g.schema(),
        &split,
        3,
    )
    .unwrap();
    assert_eq!(result.size, 2);
    assert_eq!(result.ranked.len(), 1);
    assert_eq!(result.failures.len(), 1);
    let failure = &result.failures[0];
    assert_eq!(failure.index, 0);
    assert!(failure.failure.as_ref().unwrap().contains("hidden_units"));
    assert!(failure.folds.is_none());
}

#[test]
fn empty_grid_axis_is_an_error() {
    let (g, records, split) = dataset(800);
    let grid = cvae_grid(vec![], vec![16]);
    assert!(run_grid(ModelKind::Cvae, &grid, &records, g.schema(), &split, 0).is_err());
}

#[test]
fn split_keeps_the_application_set_apart() {
    let (g, records, split) = dataset(3000);
    let schema = g.schema();
    split.check(records.len()).unwrap();
    let selector = g.application_selector();
    let selected = |ids: &[usize]| {
        select(&records, ids)
            .iter()
            .filter(|r| selector.matches(r, schema).unwrap())
            .count()
    };
    assert_eq!(
        selected(&split.application_ids),
        split.application_ids.len()
    );
    assert!(!split.application_ids.is_empty());
    assert_eq!(selected(&split.test_ids), 0);
    assert_eq!(selected(&split.train_ids), 0);
    for fold in &split.folds {
        assert!(fold.validation.iter().all(|i| !fold.train.contains(i)));
    }
    let again = make_split(&records, schema, &selector, &mut SeededRng::new(4)).unwrap();
    assert_eq!(again, split);
}
