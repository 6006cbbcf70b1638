use popsynth_core::data::{PlantedGenerator, Variant};
use popsynth_core::eval::{build_table, DistributionTable};
use popsynth_core::{AgentRecord, SeededRng};

const TV_BOUND: f64 = 0.01;

/// Expected TV of an `n`-draw empirical table from `p`, using
/// `E|p̂ − p| ≈ √(2/π) · √(p(1 − p)/n)` per bin.
fn expected_sampling_tv(p: &[f64], n: f64) -> f64 {
    0.5 * (2.0 / std::f64::consts::PI).sqrt()
        * p.iter().map(|q| (q * (1.0 - q) / n).sqrt()).sum::<f64>()
}

#[test]
fn single_conditional_laws_match_closed_form() {
    for variant in [Variant::Original, Variant::Extended] {
        let g = PlantedGenerator::new(variant).unwrap();
        let schema = g.schema();
        let records = g.generate(200_000, &mut SeededRng::new(11));
        let n_out = schema.n_outputs();
        let mut checked = 0;
        for j in n_out..schema.len() {
            for v in 0..schema.features[j].len() {
                if g.conditional_value_probability(j, v) == 0.0 {
                    continue;
                }
                let subset: Vec<AgentRecord> =
                    records.iter().filter(|r| r.0[j] == v).cloned().collect();
                for out in 0..n_out {
                    let truth = g.output_given_single_conditional(j, v, out).unwrap();
                    // Values too rare for sampling noise to sit well below
                    // the bound are skipped.
                    if expected_sampling_tv(&truth.probs, subset.len() as f64) > TV_BOUND / 2.0 {
                        continue;
                    }
                    let empirical = build_table(&subset, schema, &[out]).unwrap();
                    let tv = empirical.total_variation(&truth).unwrap();
                    assert!(
                        tv <= TV_BOUND,
                        "{variant:?} feature {j} = {v}, output {out}: TV {tv}"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked >= 40, "{variant:?}: only {checked} laws checked");
    }
}

#[test]
fn conditional_truth_matches_monte_carlo() {
    let g = PlantedGenerator::new(Variant::Extended).unwrap();
    let schema = g.schema();
    let mut rng = SeededRng::new(5);
    let cond = g.sample_conditionals(&mut rng);
    let draws: Vec<AgentRecord> = (0..1_000_000)
        .map(|_| AgentRecord::from_parts(&g.sample_outputs(&cond, &mut rng).unwrap(), &cond))
        .collect();
    let subsets: [&[usize]; 6] = [&[0], &[1], &[2], &[3], &[4], &[1, 3]];
    for subset in subsets {
        let truth = g.true_conditional_distribution(&cond, subset).unwrap();
        let tv = build_table(&draws, schema, subset)
            .unwrap()
            .total_variation(&truth)
            .unwrap();
        assert!(tv <= 0.005, "subset {subset:?}: TV {tv}");
    }
}

#[test]
fn planted_pair_is_dependent() {
    // Age and nationality are coupled through the latent class, so their
    // joint differs from the product of its marginals.
    let g = PlantedGenerator::new(Variant::Extended).unwrap();
    let schema = g.schema();
    let records = g.generate(100_000, &mut SeededRng::new(8));
    let joint = build_table(&records, schema, &[0, 2]).unwrap();
    let age = build_table(&records, schema, &[0]).unwrap();
    let nat = build_table(&records, schema, &[2]).unwrap();
    let product: Vec<f64> = (0..joint.n_bins())
        .map(|i| {
            let t = joint.tuple_of(i);
            age.get(&t[..1]) * nat.get(&t[1..])
        })
        .collect();
    let independent = DistributionTable::new(
        joint.features.clone(),
        joint.names.clone(),
        joint.dims.clone(),
        product,
    )
    .unwrap();
    let tv = joint.total_variation(&independent).unwrap();
    assert!(tv > 0.1, "age x nationality TV from independence {tv}");
}

#[test]
fn class_law_is_a_distribution_everywhere() {
    let g = PlantedGenerator::new(Variant::Original).unwrap();
    for (cond, p) in g.conditional_support() {
        assert!(p > 0.0);
        let classes = g.class_probabilities(&cond).unwrap();
        assert!((classes.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(classes.iter().all(|&c| c > 0.0));
    }
}
