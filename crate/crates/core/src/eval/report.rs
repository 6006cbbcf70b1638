use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{
    marginal_vector, pearson_values, r_squared_values, srmse, srmse_values, zero_sample_pct,
};
use super::table::build_table_named;
use crate::data::schema::{AGE, INVESTOR, NATIONALITY, PRIOR_HOME};
use crate::data::{AgentRecord, Schema};
use crate::error::{Error, Result};

/// The joint distributions evaluated beside the pooled marginal.
pub const BIVARIATE: [&str; 2] = [AGE, NATIONALITY];
pub const TRIVARIATE_1: [&str; 3] = [AGE, NATIONALITY, PRIOR_HOME];
pub const TRIVARIATE_2: [&str; 3] = [AGE, PRIOR_HOME, INVESTOR];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSrmse {
    pub feature: String,
    pub srmse: f64,
}

/// SRMSE over the pooled marginal, one bivariate and two trivariate
/// distributions, plus R² and Pearson on the pooled marginal vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub marginal: f64,
    pub bivariate: f64,
    pub trivariate_1: f64,
    pub trivariate_2: f64,
    pub per_feature_marginal: Vec<FeatureSrmse>,
    pub r_squared: Option<f64>,
    pub pearson: Option<f64>,
}

impl SuiteReport {
    /// The four headline SRMSE values in column order.
    pub fn srmse_columns(&self) -> [f64; 4] {
        [
            self.marginal,
            self.bivariate,
            self.trivariate_1,
            self.trivariate_2,
        ]
    }
}

pub fn srmse_suite(
    generated: &[AgentRecord],
    truth: &[AgentRecord],
    schema: &Schema,
) -> Result<SuiteReport> {
    for name in BIVARIATE.iter().chain(&TRIVARIATE_1).chain(&TRIVARIATE_2) {
        schema.index_of(name)?;
    }
    let est_m = marginal_vector(generated, schema)?;
    let true_m = marginal_vector(truth, schema)?;
    let mut per_feature = Vec::with_capacity(schema.n_outputs());
    let mut offset = 0;
    for f in schema.outputs() {
        let end = offset + f.len();
        per_feature.push(FeatureSrmse {
            feature: f.name.clone(),
            srmse: srmse_values(&est_m[offset..end], &true_m[offset..end])?,
        });
        offset = end;
    }
    let joint = |names: &[&str]| -> Result<f64> {
        srmse(
            &build_table_named(generated, schema, names)?,
            &build_table_named(truth, schema, names)?,
        )
    };
    Ok(SuiteReport {
        marginal: srmse_values(&est_m, &true_m)?,
        bivariate: joint(&BIVARIATE)?,
        trivariate_1: joint(&TRIVARIATE_1)?,
        trivariate_2: joint(&TRIVARIATE_2)?,
        per_feature_marginal: per_feature,
        r_squared: r_squared_values(&est_m, &true_m)?,
        pearson: pearson_values(&est_m, &true_m)?,
    })
}

/// Mean and spread of validation SRMSE across folds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldStats {
    pub per_fold: Vec<f64>,
    pub best_fold: usize,
    pub best: f64,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
}

impl FoldStats {
    pub fn from_values(per_fold: Vec<f64>) -> Result<Self> {
        if per_fold.is_empty() {
            return Err(Error::InvalidArgument("no folds".into()));
        }
        let n = per_fold.len() as f64;
        let mean = per_fold.iter().sum::<f64>() / n;
        let std = if per_fold.len() > 1 {
            (per_fold.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let (best_fold, best) = per_fold
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        Ok(FoldStats {
            per_fold,
            best_fold,
            best,
            mean,
            std,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_generated: usize,
    pub n_truth: usize,
    pub srmse: SuiteReport,
    /// Against the training set, when one was supplied.
    pub zero_sample_pct: Option<f64>,
    pub folds: Option<FoldStats>,
}

pub fn evaluate(
    generated: &[AgentRecord],
    truth: &[AgentRecord],
    train: Option<&[AgentRecord]>,
    schema: &Schema,
) -> Result<EvalReport> {
    let zero = match train {
        Some(t) => Some(zero_sample_pct(generated, t, schema)?),
        None => None,
    };
    Ok(EvalReport {
        n_generated: generated.len(),
        n_truth: truth.len(),
        srmse: srmse_suite(generated, truth, schema)?,
        zero_sample_pct: zero,
        folds: None,
    })
}

/// Marginal bars: one row per (output feature, category).
pub fn marginal_bars_csv(
    generated: &[AgentRecord],
    truth: &[AgentRecord],
    schema: &Schema,
) -> Result<String> {
    let est = marginal_vector(generated, schema)?;
    let tru = marginal_vector(truth, schema)?;
    let mut out = String::from("feature,category,label,sampled,true\n");
    let mut k = 0;
    for f in schema.outputs() {
        for (c, label) in f.categories.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                f.name,
                c,
                csv_field(label),
                est[k],
                tru[k]
            )
            .unwrap();
            k += 1;
        }
    }
    Ok(out)
}

/// Scatter pairs of bin frequencies for the bivariate and both trivariate
/// distributions.
pub fn joint_scatter_csv(
    generated: &[AgentRecord],
    truth: &[AgentRecord],
    schema: &Schema,
) -> Result<String> {
    let mut out = String::from("distribution,bin,labels,sampled,true\n");
    for (tag, names) in [
        ("bivariate", &BIVARIATE[..]),
        ("trivariate_1", &TRIVARIATE_1[..]),
        ("trivariate_2", &TRIVARIATE_2[..]),
    ] {
        let est = build_table_named(generated, schema, names)?;
        let tru = build_table_named(truth, schema, names)?;
        for i in 0..tru.n_bins() {
            let labels: Vec<&str> = tru
                .tuple_of(i)
                .iter()
                .zip(&tru.features)
                .map(|(&v, &f)| schema.features[f].categories[v].as_str())
                .collect();
            writeln!(
                out,
                "{tag},{i},{},{},{}",
                csv_field(&labels.join("|")),
                est.probs[i],
                tru.probs[i]
            )
            .unwrap();
        }
    }
    Ok(out)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PlantedGenerator;
    use crate::data::Variant;
    use crate::eval::{build_table_named, srmse};
    use crate::numeric::SeededRng;

    #[test]
    fn identical_sets_score_zero() {
        let g = PlantedGenerator::new(Variant::Extended).unwrap();
        let truth = g.generate(300, &mut SeededRng::new(1));
        let r = srmse_suite(&truth, &truth, g.schema()).unwrap();
        assert_eq!(r.srmse_columns(), [0.0; 4]);
        assert_eq!(r.r_squared, Some(1.0));
    }

    #[test]
    fn suite_matches_recomputation() {
        let g = PlantedGenerator::new(Variant::Original).unwrap();
        let truth = g.generate(400, &mut SeededRng::new(1));
        let generated = g.generate(400, &mut SeededRng::new(2));
        let s = g.schema();
        let r = srmse_suite(&generated, &truth, s).unwrap();
        let direct = |names: &[&str]| {
            srmse(
                &build_table_named(&generated, s, names).unwrap(),
                &build_table_named(&truth, s, names).unwrap(),
            )
            .unwrap()
        };
        assert_eq!(r.bivariate, direct(&["age", "nationality"]));
        assert_eq!(
            r.trivariate_1,
            direct(&["age", "nationality", "prior_home"])
        );
        assert_eq!(r.trivariate_2, direct(&["age", "prior_home", "investor"]));
        assert_eq!(r.srmse_columns().len(), 4);
        assert_eq!(r.per_feature_marginal.len(), 5);
    }

    #[test]
    fn missing_named_feature_errors() {
        use crate::data::{FeatureSpec, Role};
        let s = Schema::new(
            Variant::Custom,
            vec![
                FeatureSpec::new("age", Role::Output, vec!["a".into(), "b".into()]),
                FeatureSpec::new("c", Role::Conditional, vec!["a".into(), "b".into()]),
            ],
        )
        .unwrap();
        let a = vec![AgentRecord::new(vec![0, 0])];
        assert!(matches!(
            srmse_suite(&a, &a, &s),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn fold_stats() {
        let s = FoldStats::from_values(vec![0.5, 0.3, 0.4, 0.6, 0.7]).unwrap();
        assert_eq!(s.best_fold, 1);
        assert_eq!(s.best, 0.3);
        assert!((s.mean - 0.5).abs() < 1e-12);
        assert!((s.std - 0.025f64.sqrt()).abs() < 1e-12);
        assert!(s.best <= s.mean);
    }

    #[test]
    fn marginal_csv_has_one_row_per_bin() {
        let g = PlantedGenerator::new(Variant::Extended).unwrap();
        let a = g.generate(50, &mut SeededRng::new(1));
        let csv = marginal_bars_csv(&a, &a, g.schema()).unwrap();
        assert_eq!(csv.lines().count(), 1 + 45);
        let scatter = joint_scatter_csv(&a, &a, g.schema()).unwrap();
        assert_eq!(
            scatter.lines().count(),
            1 + 17 * 12 + 17 * 12 * 12 + 17 * 12 * 2
        );
    }
}
