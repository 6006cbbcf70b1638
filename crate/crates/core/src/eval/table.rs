use serde::{Deserialize, Serialize};

use crate::data::{AgentRecord, Role, Schema};
use crate::error::{Error, Result};
use crate::numeric::SeededRng;

/// Largest feature subset [`build_table`] accepts; evaluation stops at
/// trivariate distributions.
pub const MAX_TABLE_ORDER: usize = 3;

/// Probabilities over the full Cartesian product of a feature subset,
/// zero-probability bins included. Bins are stored densely in mixed-radix
/// order with the first feature most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    /// Schema indices of the features.
    pub features: Vec<usize>,
    pub names: Vec<String>,
    pub dims: Vec<usize>,
    pub probs: Vec<f64>,
}

impl DistributionTable {
    pub fn new(
        features: Vec<usize>,
        names: Vec<String>,
        dims: Vec<usize>,
        probs: Vec<f64>,
    ) -> Result<Self> {
        let n: usize = dims.iter().product();
        if features.len() != dims.len() || names.len() != dims.len() || probs.len() != n {
            return Err(Error::shape(
                "DistributionTable::new",
                format!("dims {dims:?}"),
                format!("{} probabilities", probs.len()),
            ));
        }
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::InvalidArgument(
                "negative or non-finite probability".into(),
            ));
        }
        Ok(DistributionTable {
            features,
            names,
            dims,
            probs,
        })
    }

    /// Empty (all-zero) table over `subset` of `schema`.
    pub fn zeros(schema: &Schema, subset: &[usize]) -> Self {
        let dims: Vec<usize> = subset.iter().map(|&i| schema.features[i].len()).collect();
        let n = dims.iter().product();
        DistributionTable {
            features: subset.to_vec(),
            names: subset
                .iter()
                .map(|&i| schema.features[i].name.clone())
                .collect(),
            dims,
            probs: vec![0.0; n],
        }
    }

    /// Total theoretical bin count N_c.
    pub fn n_bins(&self) -> usize {
        self.probs.len()
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn flat_index(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.dims.len());
        tuple
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&v, &d)| acc * d + v)
    }

    pub fn tuple_of(&self, mut index: usize) -> Vec<usize> {
        let mut t = vec![0; self.dims.len()];
        for (slot, &d) in t.iter_mut().zip(&self.dims).rev() {
            *slot = index % d;
            index /= d;
        }
        t
    }

    pub fn get(&self, tuple: &[usize]) -> f64 {
        self.probs[self.flat_index(tuple)]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn normalize(&mut self) {
        let total = self.total();
        if total > 0.0 {
            self.probs.iter_mut().for_each(|p| *p /= total);
        }
    }

    pub fn same_support(&self, other: &DistributionTable) -> bool {
        self.features == other.features && self.dims == other.dims
    }

    /// Draws `n` bin tuples.
    pub fn sample(&self, n: usize, rng: &mut SeededRng) -> Vec<Vec<usize>> {
        let cdf: Vec<f64> = self
            .probs
            .iter()
            .scan(0.0, |acc, &p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let total = *cdf.last().unwrap_or(&0.0);
        (0..n)
            .map(|_| {
                let u = rng.uniform() * total;
                let idx = cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1);
                self.tuple_of(idx)
            })
            .collect()
    }

    /// Total-variation distance ½ Σ |p − q|.
    pub fn total_variation(&self, other: &DistributionTable) -> Result<f64> {
        if !self.same_support(other) {
            return Err(Error::shape(
                "total_variation",
                format!("{:?}", self.names),
                format!("{:?}", other.names),
            ));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

fn check_subset(schema: &Schema, subset: &[usize]) -> Result<()> {
    if subset.is_empty() || subset.len() > MAX_TABLE_ORDER {
        return Err(Error::InvalidArgument(format!(
            "distribution tables cover 1 to {MAX_TABLE_ORDER} features, got {}",
            subset.len()
        )));
    }
    for &i in subset {
        let f = schema
            .features
            .get(i)
            .ok_or_else(|| Error::UnknownFeature(format!("#{i}")))?;
        if f.role != Role::Output {
            return Err(Error::InvalidArgument(format!(
                "`{}` is not an output feature",
                f.name
            )));
        }
    }
    Ok(())
}

/// Normalized frequency table of `agents` over an output-feature subset.
pub fn build_table(
    agents: &[AgentRecord],
    schema: &Schema,
    subset: &[usize],
) -> Result<DistributionTable> {
    check_subset(schema, subset)?;
    if agents.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot build a table from zero agents".into(),
        ));
    }
    let mut table = DistributionTable::zeros(schema, subset);
    let mut tuple = vec![0; subset.len()];
    for a in agents {
        for (slot, &i) in tuple.iter_mut().zip(subset) {
            *slot = a.0[i];
        }
        let idx = table.flat_index(&tuple);
        table.probs[idx] += 1.0;
    }
    let n = agents.len() as f64;
    table.probs.iter_mut().for_each(|p| *p /= n);
    Ok(table)
}

/// [`build_table`] addressed by feature names.
pub fn build_table_named(
    agents: &[AgentRecord],
    schema: &Schema,
    names: &[&str],
) -> Result<DistributionTable> {
    let subset = names
        .iter()
        .map(|n| schema.index_of(n))
        .collect::<Result<Vec<_>>>()?;
    build_table(agents, schema, &subset)
}
