use std::collections::HashSet;

use super::table::{build_table, DistributionTable};
use crate::data::{AgentRecord, Schema};
use crate::error::{Error, Result};

/// SRMSE over two aligned probability vectors: `√(N_c · Σ (π̂ − π)²)`,
/// i.e. the RMSE divided by the mean cell probability `1/N_c`.
pub fn srmse_values(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(Error::shape(
            "srmse",
            format!("{} bins", estimate.len()),
            format!("{} bins", truth.len()),
        ));
    }
    let sq: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((truth.len() as f64 * sq).sqrt())
}

pub fn srmse(estimate: &DistributionTable, truth: &DistributionTable) -> Result<f64> {
    if !estimate.same_support(truth) {
        return Err(Error::InvalidArgument(format!(
            "SRMSE over different feature subsets: {:?} vs {:?}",
            estimate.names, truth.names
        )));
    }
    srmse_values(&estimate.probs, &truth.probs)
}

/// Coefficient of determination of `estimate` as a predictor of `truth`.
pub fn r_squared_values(estimate: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(Error::shape(
            "r_squared",
            estimate.len().to_string(),
            truth.len().to_string(),
        ));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    let ss_res: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (t - e).powi(2))
        .sum();
    if ss_tot == 0.0 {
        return Ok(None);
    }
    Ok(Some(1.0 - ss_res / ss_tot))
}

/// Pearson correlation; `None` when either side is constant.
pub fn pearson_values(estimate: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(Error::shape(
            "pearson",
            estimate.len().to_string(),
            truth.len().to_string(),
        ));
    }
    let n = truth.len() as f64;
    let me = estimate.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let (mut cov, mut ve, mut vt) = (0.0, 0.0, 0.0);
    for (e, t) in estimate.iter().zip(truth) {
        cov += (e - me) * (t - mt);
        ve += (e - me).powi(2);
        vt += (t - mt).powi(2);
    }
    if ve == 0.0 || vt == 0.0 {
        return Ok(None);
    }
    Ok(Some((cov / (ve.sqrt() * vt.sqrt())).clamp(-1.0, 1.0)))
}

pub fn r_squared(estimate: &DistributionTable, truth: &DistributionTable) -> Result<Option<f64>> {
    if !estimate.same_support(truth) {
        return Err(Error::InvalidArgument(
            "R² over different feature subsets".into(),
        ));
    }
    r_squared_values(&estimate.probs, &truth.probs)
}

pub fn pearson(estimate: &DistributionTable, truth: &DistributionTable) -> Result<Option<f64>> {
    if !estimate.same_support(truth) {
        return Err(Error::InvalidArgument(
            "Pearson over different feature subsets".into(),
        ));
    }
    pearson_values(&estimate.probs, &truth.probs)
}

/// Concatenation of every output feature's marginal distribution.
pub fn marginal_vector(agents: &[AgentRecord], schema: &Schema) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(schema.output_width());
    for i in 0..schema.n_outputs() {
        out.extend(build_table(agents, schema, &[i])?.probs);
    }
    Ok(out)
}

/// Pooled marginal SRMSE: all per-feature marginal bins concatenated, with
/// `N_c` equal to the total marginal bin count.
pub fn pooled_marginal_srmse(
    generated: &[AgentRecord],
    truth: &[AgentRecord],
    schema: &Schema,
) -> Result<f64> {
    srmse_values(
        &marginal_vector(generated, schema)?,
        &marginal_vector(truth, schema)?,
    )
}

/// Percentage of generated agents whose full output tuple never occurs in
/// `train`.
pub fn zero_sample_pct(
    generated: &[AgentRecord],
    train: &[AgentRecord],
    schema: &Schema,
) -> Result<f64> {
    if generated.is_empty() || train.is_empty() {
        return Err(Error::InvalidArgument(
            "zero-sample rate needs nonempty generated and training sets".into(),
        ));
    }
    let seen: HashSet<&[usize]> = train.iter().map(|r| r.outputs(schema)).collect();
    let novel = generated
        .iter()
        .filter(|g| !seen.contains(g.outputs(schema)))
        .count();
    Ok(100.0 * novel as f64 / generated.len() as f64)
}

/// Number of distinct output tuples in a population.
pub fn distinct_output_tuples(agents: &[AgentRecord], schema: &Schema) -> usize {
    agents
        .iter()
        .map(|r| r.outputs(schema))
        .collect::<HashSet<_>>()
        .len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSpec, Role, Variant};

    fn table(probs: Vec<f64>) -> DistributionTable {
        let n = probs.len();
        DistributionTable::new(vec![0], vec!["a".into()], vec![n], probs).unwrap()
    }

    #[test]
    fn srmse_hand_values() {
        assert_eq!(
            srmse(&table(vec![0.2, 0.8]), &table(vec![0.2, 0.8])).unwrap(),
            0.0
        );
        let v = srmse(&table(vec![1.0, 0.0]), &table(vec![0.5, 0.5])).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let v = srmse(&table(vec![1.0, 0.0, 0.0, 0.0]), &table(vec![0.25; 4])).unwrap();
        assert!((v - 3f64.sqrt()).abs() < 1e-15);
        assert!((v - 1.7321).abs() < 1e-4);
    }

    #[test]
    fn srmse_rejects_mismatched_subsets() {
        let a = table(vec![0.5, 0.5]);
        let mut b = table(vec![0.5, 0.5]);
        b.features = vec![1];
        assert!(srmse(&a, &b).is_err());
        assert!(srmse(&a, &table(vec![1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn doubling_bins_scales_by_sqrt_two() {
        // same per-bin squared error spread over twice as many bins
        let a = srmse_values(&[0.6, 0.4], &[0.5, 0.5]).unwrap();
        let b = srmse_values(&[0.35, 0.15, 0.35, 0.15], &[0.25, 0.25, 0.25, 0.25]).unwrap();
        // Σd² is 0.02 for a and 0.04 for b, N_c doubles: ratio √(4·0.04)/√(2·0.02) = 2
        assert!((b / a - 2.0).abs() < 1e-12);
        let c = srmse_values(&[0.35, 0.25, 0.15, 0.25], &[0.25; 4]).unwrap();
        // Σd² equal to a's, N_c doubled → √2
        assert!((c / a - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn r2_and_pearson_identities() {
        let t = table(vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(r_squared(&t, &t).unwrap(), Some(1.0));
        assert!((pearson(&t, &t).unwrap().unwrap() - 1.0).abs() < 1e-15);
        let p = pearson(&table(vec![0.3, 0.7]), &table(vec![0.7, 0.3]))
            .unwrap()
            .unwrap();
        assert!((p + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&t, &table(vec![0.25; 4])).unwrap(), None);
    }

    #[test]
    fn four_bin_hand_least_squares() {
        // truth π = [0.1, 0.2, 0.3, 0.4], estimate π̂ = [0.15, 0.15, 0.35, 0.35]
        // mean π = 0.25, SS_tot = 0.0225+0.0025+0.0025+0.0225 = 0.05
        // SS_res = 4 · 0.0025 = 0.01 → R² = 0.8
        // cov = (−0.1)(−0.15)+(−0.1)(−0.05)+(0.1)(0.05)+(0.1)(0.15) = 0.04
        // var π̂ = 4·0.01 = 0.04 → r = 0.04 / √(0.04·0.05) = 0.894427191
        let est = table(vec![0.15, 0.15, 0.35, 0.35]);
        let truth = table(vec![0.1, 0.2, 0.3, 0.4]);
        assert!((r_squared(&est, &truth).unwrap().unwrap() - 0.8).abs() < 1e-12);
        let r = pearson(&est, &truth).unwrap().unwrap();
        assert!((r - 0.894_427_191).abs() < 1e-9);
    }

    fn tiny_schema() -> Schema {
        Schema::new(
            Variant::Custom,
            vec![
                FeatureSpec::new("a", Role::Output, vec!["0".into(), "1".into(), "2".into()]),
                FeatureSpec::new("b", Role::Output, vec!["0".into(), "1".into()]),
                FeatureSpec::new("c", Role::Conditional, vec!["0".into(), "1".into()]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_sample_counting() {
        let s = tiny_schema();
        let rec = |a, b, c| AgentRecord::new(vec![a, b, c]);
        let train = vec![rec(0, 0, 0), rec(1, 1, 1), rec(2, 0, 0)];
        assert_eq!(zero_sample_pct(&train, &train, &s).unwrap(), 0.0);
        // conditionals do not matter
        assert_eq!(zero_sample_pct(&[rec(0, 0, 1)], &train, &s).unwrap(), 0.0);
        assert_eq!(
            zero_sample_pct(&[rec(0, 1, 0), rec(2, 1, 1)], &train, &s).unwrap(),
            100.0
        );
        let mut generated = vec![rec(0, 0, 0); 7];
        generated.extend([rec(0, 1, 0), rec(1, 0, 0), rec(2, 1, 0)]);
        assert_eq!(zero_sample_pct(&generated, &train, &s).unwrap(), 30.0);
        assert!(zero_sample_pct(&[], &train, &s).is_err());
    }

    #[test]
    fn pooled_marginal_uses_total_bin_count() {
        let s = tiny_schema();
        let rec = |a, b| AgentRecord::new(vec![a, b, 0]);
        let truth = vec![rec(0, 0), rec(1, 1)];
        let generated = vec![rec(0, 0), rec(0, 0)];
        // truth marginals: a=[.5,.5,0], b=[.5,.5]; generated: a=[1,0,0], b=[1,0]
        // Σd² = .25+.25+0+.25+.25 = 1, N_c = 5 → √5
        let v = pooled_marginal_srmse(&generated, &truth, &s).unwrap();
        assert!((v - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(distinct_output_tuples(&generated, &s), 1);
    }
}
