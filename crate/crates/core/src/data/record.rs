use serde::{Deserialize, Serialize};

use super::schema::Schema;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// One agent: a category index per schema feature, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentRecord(pub Vec<usize>);

impl AgentRecord {
    pub fn new(values: Vec<usize>) -> Self {
        AgentRecord(values)
    }

    /// Joins generated outputs with the conditionals they were drawn for.
    pub fn from_parts(outputs: &[usize], conditionals: &[usize]) -> Self {
        let mut v = Vec::with_capacity(outputs.len() + conditionals.len());
        v.extend_from_slice(outputs);
        v.extend_from_slice(conditionals);
        AgentRecord(v)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn outputs<'a>(&'a self, schema: &Schema) -> &'a [usize] {
        &self.0[..schema.n_outputs()]
    }

    pub fn conditionals<'a>(&'a self, schema: &Schema) -> &'a [usize] {
        &self.0[schema.n_outputs()..]
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.0.len() != schema.len() {
            return Err(Error::Validation(format!(
                "record has {} values, schema has {} features",
                self.0.len(),
                schema.len()
            )));
        }
        for (v, f) in self.0.iter().zip(&schema.features) {
            if *v >= f.len() {
                return Err(Error::Encoding {
                    feature: f.name.clone(),
                    detail: format!("index {v} out of range 0..{}", f.len()),
                });
            }
        }
        Ok(())
    }
}

/// Concatenated one-hot blocks: `(output_vector, conditional_vector)`.
pub fn encode_one_hot(record: &AgentRecord, schema: &Schema) -> Result<(Vec<f64>, Vec<f64>)> {
    record.validate(schema)?;
    let mut x = vec![0.0; schema.output_width()];
    let mut c = vec![0.0; schema.conditional_width()];
    write_one_hot(
        record.outputs(schema),
        schema.outputs().iter().map(|f| f.len()),
        &mut x,
    );
    write_one_hot(
        record.conditionals(schema),
        schema.conditionals().iter().map(|f| f.len()),
        &mut c,
    );
    Ok((x, c))
}

fn write_one_hot(values: &[usize], sizes: impl Iterator<Item = usize>, out: &mut [f64]) {
    let mut offset = 0;
    for (v, size) in values.iter().zip(sizes) {
        out[offset + v] = 1.0;
        offset += size;
    }
}

/// Inverse of [`encode_one_hot`]; every block must hold exactly one 1.
pub fn decode_one_hot(output: &[f64], conditional: &[f64], schema: &Schema) -> Result<AgentRecord> {
    if output.len() != schema.output_width() || conditional.len() != schema.conditional_width() {
        return Err(Error::shape(
            "decode_one_hot",
            format!("vectors {}+{}", output.len(), conditional.len()),
            format!(
                "schema widths {}+{}",
                schema.output_width(),
                schema.conditional_width()
            ),
        ));
    }
    let mut values = Vec::with_capacity(schema.len());
    let mut decode = |vec: &[f64], features: &[super::schema::FeatureSpec]| -> Result<()> {
        let mut offset = 0;
        for f in features {
            let block = &vec[offset..offset + f.len()];
            let ones: Vec<usize> = block
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(i, _)| i)
                .collect();
            let zeros = block.iter().filter(|&&v| v == 0.0).count();
            if ones.len() != 1 || zeros != f.len() - 1 {
                return Err(Error::Encoding {
                    feature: f.name.clone(),
                    detail: "block is not one-hot".into(),
                });
            }
            values.push(ones[0]);
            offset += f.len();
        }
        Ok(())
    };
    decode(output, schema.outputs())?;
    decode(conditional, schema.conditionals())?;
    Ok(AgentRecord(values))
}

/// Records together with their one-hot matrices.
#[derive(Clone, Debug)]
pub struct EncodedSet {
    pub records: Vec<AgentRecord>,
    /// outputs, `n × output_width`
    pub x: Matrix,
    /// conditionals, `n × conditional_width`
    pub c: Matrix,
}

impl EncodedSet {
    pub fn new(schema: &Schema, records: Vec<AgentRecord>) -> Result<Self> {
        let n = records.len();
        let mut x = Matrix::zeros(n, schema.output_width());
        let mut c = Matrix::zeros(n, schema.conditional_width());
        for (i, r) in records.iter().enumerate() {
            let (xo, co) = encode_one_hot(r, schema)?;
            x.row_mut(i).copy_from_slice(&xo);
            c.row_mut(i).copy_from_slice(&co);
        }
        Ok(EncodedSet { records, x, c })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// One-hot matrix of the conditional parts of `records`.
pub fn encode_conditionals(schema: &Schema, conditionals: &[&[usize]]) -> Result<Matrix> {
    let n_out = schema.n_outputs();
    let mut c = Matrix::zeros(conditionals.len(), schema.conditional_width());
    for (i, cond) in conditionals.iter().enumerate() {
        if cond.len() != schema.n_conditionals() {
            return Err(Error::Validation(format!(
                "expected {} conditional values, got {}",
                schema.n_conditionals(),
                cond.len()
            )));
        }
        let row = c.row_mut(i);
        let mut offset = 0;
        for (j, &v) in cond.iter().enumerate() {
            let f = &schema.features[n_out + j];
            if v >= f.len() {
                return Err(Error::Encoding {
                    feature: f.name.clone(),
                    detail: format!("index {v} out of range 0..{}", f.len()),
                });
            }
            row[offset + v] = 1.0;
            offset += f.len();
        }
    }
    Ok(c)
}
