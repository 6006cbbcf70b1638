use serde::{Deserialize, Serialize};

use super::record::AgentRecord;
use super::schema::Schema;
use crate::error::{Error, Result};
use crate::numeric::SeededRng;

pub const K_FOLDS: usize = 5;
pub const TEST_FRACTION: f64 = 0.10;
/// Selectors matching more than this fraction of records are rejected.
pub const MAX_APPLICATION_FRACTION: f64 = 0.15;
pub const MIN_SPLIT_RECORDS: usize = 100;

/// Chooses the application set: every record whose conditional features
/// take all of the listed values (a whole unseen building or project).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicationSelector {
    pub conditions: Vec<(String, usize)>,
}

impl ApplicationSelector {
    pub fn new(conditions: Vec<(String, usize)>) -> Self {
        ApplicationSelector { conditions }
    }

    fn resolve(&self, schema: &Schema) -> Result<Vec<(usize, usize)>> {
        self.conditions
            .iter()
            .map(|(name, v)| Ok((schema.index_of(name)?, *v)))
            .collect()
    }

    pub fn matches(&self, record: &AgentRecord, schema: &Schema) -> Result<bool> {
        let resolved = self.resolve(schema)?;
        Ok(resolved.iter().all(|&(i, v)| record.0[i] == v))
    }

    /// The group key of a record: its values on the selector's features.
    pub fn group_key(&self, record: &AgentRecord, schema: &Schema) -> Result<Vec<usize>> {
        let resolved = self.resolve(schema)?;
        Ok(resolved.iter().map(|&(i, _)| record.0[i]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Index sets into the full dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub application_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub train_ids: Vec<usize>,
    pub folds: Vec<Fold>,
}

/// Application hold-out by group, then a 90/10 train/test split of the rest,
/// then `K_FOLDS` validation folds over the training pool.
pub fn make_split(
    records: &[AgentRecord],
    schema: &Schema,
    selector: &ApplicationSelector,
    rng: &mut SeededRng,
) -> Result<SplitPlan> {
    let n = records.len();
    if n < MIN_SPLIT_RECORDS {
        return Err(Error::Split(format!(
            "need at least {MIN_SPLIT_RECORDS} records, got {n}"
        )));
    }
    let mut application_ids = Vec::new();
    let mut pool = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if selector.matches(r, schema)? {
            application_ids.push(i);
        } else {
            pool.push(i);
        }
    }
    if application_ids.is_empty() {
        return Err(Error::Split(
            "application selector matches no records".into(),
        ));
    }
    let fraction = application_ids.len() as f64 / n as f64;
    if fraction > MAX_APPLICATION_FRACTION {
        return Err(Error::Split(format!(
            "application selector matches {:.1}% of records (limit {:.0}%)",
            100.0 * fraction,
            100.0 * MAX_APPLICATION_FRACTION
        )));
    }

    rng.shuffle(&mut pool);
    let n_test = (TEST_FRACTION * pool.len() as f64).round() as usize;
    let mut test_ids = pool[..n_test].to_vec();
    let mut shuffled_train = pool[n_test..].to_vec();
    test_ids.sort_unstable();

    rng.shuffle(&mut shuffled_train);
    let folds = k_folds(&shuffled_train, K_FOLDS);
    let mut train_ids = shuffled_train;
    train_ids.sort_unstable();

    Ok(SplitPlan {
        application_ids,
        test_ids,
        train_ids,
        folds,
    })
}

/// Partitions an already shuffled id list into `k` contiguous validation
/// chunks whose sizes differ by at most one.
fn k_folds(shuffled: &[usize], k: usize) -> Vec<Fold> {
    let n = shuffled.len();
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        let mut validation = shuffled[start..start + len].to_vec();
        let mut train: Vec<usize> = shuffled[..start]
            .iter()
            .chain(&shuffled[start + len..])
            .copied()
            .collect();
        validation.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, validation });
        start += len;
    }
    folds
}

impl SplitPlan {
    /// Checks the partition invariants against a dataset of size `n`.
    pub fn check(&self, n: usize) -> Result<()> {
        let mut owner = vec![0u8; n];
        for (tag, ids) in [
            (1u8, &self.application_ids),
            (2, &self.test_ids),
            (3, &self.train_ids),
        ] {
            for &i in ids {
                if i >= n || owner[i] != 0 {
                    return Err(Error::Split(format!("id {i} duplicated or out of range")));
                }
                owner[i] = tag;
            }
        }
        if owner.contains(&0) {
            return Err(Error::Split("split does not cover every record".into()));
        }
        if self.folds.len() != K_FOLDS {
            return Err(Error::Split(format!("expected {K_FOLDS} folds")));
        }
        let mut covered = vec![0usize; n];
        for fold in &self.folds {
            let mut union: Vec<usize> =
                fold.train.iter().chain(&fold.validation).copied().collect();
            union.sort_unstable();
            if union != self.train_ids {
                return Err(Error::Split(
                    "fold does not partition the training pool".into(),
                ));
            }
            for &i in &fold.validation {
                covered[i] += 1;
            }
        }
        if self.train_ids.iter().any(|&i| covered[i] != 1) {
            return Err(Error::Split(
                "validation folds do not partition training ids".into(),
            ));
        }
        Ok(())
    }
}

pub fn select<T: Clone>(items: &[T], ids: &[usize]) -> Vec<T> {
    ids.iter().map(|&i| items[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{FeatureSpec, Role, Variant};
    use proptest::prelude::*;

    fn fixture(n: usize, n_selected: usize) -> (Schema, Vec<AgentRecord>) {
        let schema = Schema::new(
            Variant::Custom,
            vec![
                FeatureSpec::new("o", Role::Output, vec!["a".into(), "b".into()]),
                FeatureSpec::new("building", Role::Conditional, vec!["x".into(), "y".into()]),
            ],
        )
        .unwrap();
        let records = (0..n)
            .map(|i| AgentRecord::new(vec![i % 2, usize::from(i < n_selected)]))
            .collect();
        (schema, records)
    }

    fn selector() -> ApplicationSelector {
        ApplicationSelector::new(vec![("building".into(), 1)])
    }

    #[test]
    fn ratio_arithmetic_on_thousand_records() {
        let (schema, records) = fixture(1000, 50);
        let plan = make_split(&records, &schema, &selector(), &mut SeededRng::new(1)).unwrap();
        plan.check(1000).unwrap();
        assert_eq!(plan.application_ids.len(), 50);
        assert_eq!(plan.test_ids.len(), 95);
        assert_eq!(plan.train_ids.len(), 855);
        for fold in &plan.folds {
            assert_eq!(fold.validation.len(), 171);
            assert_eq!(fold.train.len(), 684);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (schema, records) = fixture(400, 20);
        let a = make_split(&records, &schema, &selector(), &mut SeededRng::new(9)).unwrap();
        let b = make_split(&records, &schema, &selector(), &mut SeededRng::new(9)).unwrap();
        let c = make_split(&records, &schema, &selector(), &mut SeededRng::new(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn selector_bounds() {
        let (schema, records) = fixture(1000, 0);
        assert!(matches!(
            make_split(&records, &schema, &selector(), &mut SeededRng::new(1)),
            Err(Error::Split(_))
        ));
        let (schema, records) = fixture(1000, 151);
        assert!(make_split(&records, &schema, &selector(), &mut SeededRng::new(1)).is_err());
        let (schema, records) = fixture(99, 5);
        assert!(make_split(&records, &schema, &selector(), &mut SeededRng::new(1)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn partition_holds_for_any_seed(seed in any::<u64>(), n in 100usize..600) {
            let (schema, records) = fixture(n, n / 20);
            let plan = make_split(&records, &schema, &selector(), &mut SeededRng::new(seed)).unwrap();
            prop_assert!(plan.check(n).is_ok());
        }
    }
}
