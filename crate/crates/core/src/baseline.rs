//! Empirical distribution tables: the observed joint of output tuples for
//! every conditional combination seen in training, falling back to the
//! overall training distribution for unseen combinations.
//!
//! Also hosts the two naive reference samplers used in evaluation.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{AgentRecord, Schema};
use crate::error::{Error, Result};
use crate::numeric::SeededRng;
use crate::sampler::PopulationSampler;

/// Exact integer counts of output tuples; normalized only when read.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountTable {
    counts: BTreeMap<Vec<usize>, u64>,
    total: u64,
}

impl CountTable {
    fn add(&mut self, tuple: &[usize]) {
        *self.counts.entry(tuple.to_vec()).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn probability(&self, tuple: &[usize]) -> f64 {
        self.counts
            .get(tuple)
            .map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    pub fn probabilities(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        let total = self.total as f64;
        self.counts
            .iter()
            .map(move |(k, &c)| (k.as_slice(), c as f64 / total))
    }

    fn sample(&self, rng: &mut SeededRng) -> &[usize] {
        let mut target = rng.below_u64(self.total);
        for (tuple, &c) in &self.counts {
            if target < c {
                return tuple;
            }
            target -= c;
        }
        unreachable!("target below total count")
    }
}

#[derive(Clone, Debug)]
pub struct EmpiricalTable {
    n_outputs: usize,
    n_conditionals: usize,
    by_conditionals: BTreeMap<Vec<usize>, CountTable>,
    overall: CountTable,
}

pub fn fit_empirical(train: &[AgentRecord], schema: &Schema) -> Result<EmpiricalTable> {
    if train.is_empty() {
        return Err(Error::InvalidArgument(
            "empirical table needs training data".into(),
        ));
    }
    let mut by_conditionals: BTreeMap<Vec<usize>, CountTable> = BTreeMap::new();
    let mut overall = CountTable::default();
    for r in train {
        r.validate(schema)?;
        let out = r.outputs(schema);
        by_conditionals
            .entry(r.conditionals(schema).to_vec())
            .or_default()
            .add(out);
        overall.add(out);
    }
    Ok(EmpiricalTable {
        n_outputs: schema.n_outputs(),
        n_conditionals: schema.n_conditionals(),
        by_conditionals,
        overall,
    })
}

impl EmpiricalTable {
    pub fn n_combinations(&self) -> usize {
        self.by_conditionals.len()
    }

    pub fn overall(&self) -> &CountTable {
        &self.overall
    }

    pub fn for_conditionals(&self, conditionals: &[usize]) -> Option<&CountTable> {
        self.by_conditionals.get(conditionals)
    }

    /// The table a draw for `conditionals` uses: its own if seen, else the
    /// overall table.
    pub fn table_for(&self, conditionals: &[usize]) -> &CountTable {
        self.by_conditionals
            .get(conditionals)
            .unwrap_or(&self.overall)
    }

    pub fn sample_baseline(
        &self,
        conditionals: &[usize],
        rng: &mut SeededRng,
    ) -> Result<Vec<usize>> {
        if conditionals.len() != self.n_conditionals {
            return Err(Error::Validation(format!(
                "expected {} conditional values, got {}",
                self.n_conditionals,
                conditionals.len()
            )));
        }
        let out = self.table_for(conditionals).sample(rng).to_vec();
        debug_assert_eq!(out.len(), self.n_outputs);
        Ok(out)
    }

    /// JSON dump: conditional combination → {output tuple: probability}.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Entry {
            conditionals: Vec<usize>,
            outputs: BTreeMap<String, f64>,
        }
        let dump = |t: &CountTable| -> BTreeMap<String, f64> {
            t.probabilities()
                .map(|(k, p)| {
                    let key: Vec<String> = k.iter().map(usize::to_string).collect();
                    (key.join(","), p)
                })
                .collect()
        };
        let combos: Vec<Entry> = self
            .by_conditionals
            .iter()
            .map(|(c, t)| Entry {
                conditionals: c.clone(),
                outputs: dump(t),
            })
            .collect();
        serde_json::json!({
            "combinations": combos,
            "overall": dump(&self.overall),
        })
    }
}

impl PopulationSampler for EmpiricalTable {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        conditionals
            .iter()
            .map(|c| self.sample_baseline(c, rng))
            .collect()
    }
}

/// Draws every output feature uniformly over its categories.
#[derive(Clone, Debug)]
pub struct UniformSampler {
    sizes: Vec<usize>,
}

impl UniformSampler {
    pub fn new(schema: &Schema) -> Self {
        UniformSampler {
            sizes: schema.output_blocks(),
        }
    }
}

impl PopulationSampler for UniformSampler {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        Ok(conditionals
            .iter()
            .map(|_| self.sizes.iter().map(|&n| rng.below(n)).collect())
            .collect())
    }
}

/// Draws each output feature independently from its training marginal,
/// ignoring conditionals.
#[derive(Clone, Debug)]
pub struct IndependentMarginalSampler {
    marginals: Vec<Vec<f64>>,
}

impl IndependentMarginalSampler {
    pub fn fit(train: &[AgentRecord], schema: &Schema) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument(
                "independence sampler needs training data".into(),
            ));
        }
        let mut marginals: Vec<Vec<f64>> = schema
            .output_blocks()
            .iter()
            .map(|&n| vec![0.0; n])
            .collect();
        for r in train {
            for (m, &v) in marginals.iter_mut().zip(r.outputs(schema)) {
                m[v] += 1.0;
            }
        }
        Ok(IndependentMarginalSampler { marginals })
    }
}

impl PopulationSampler for IndependentMarginalSampler {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        Ok(conditionals
            .iter()
            .map(|_| self.marginals.iter().map(|m| rng.categorical(m)).collect())
            .collect())
    }
}
