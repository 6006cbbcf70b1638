use crate::data::{AgentRecord, Schema};
use crate::error::Result;
use crate::numeric::SeededRng;

/// Anything that can draw output features for given conditionals.
pub trait PopulationSampler {
    /// One output tuple per conditional row.
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>>;
}

/// Synthesizes one agent per row of `source`, reusing its conditionals.
pub fn synthesize_for<S: PopulationSampler + ?Sized>(
    sampler: &S,
    source: &[AgentRecord],
    schema: &Schema,
    rng: &mut SeededRng,
) -> Result<Vec<AgentRecord>> {
    let conds: Vec<&[usize]> = source.iter().map(|r| r.conditionals(schema)).collect();
    synthesize(sampler, &conds, rng)
}

/// Synthesizes one agent per conditional row.
pub fn synthesize<S: PopulationSampler + ?Sized>(
    sampler: &S,
    conditionals: &[&[usize]],
    rng: &mut SeededRng,
) -> Result<Vec<AgentRecord>> {
    let outputs = sampler.sample_outputs(conditionals, rng)?;
    Ok(outputs
        .iter()
        .zip(conditionals)
        .map(|(o, c)| AgentRecord::from_parts(o, c))
        .collect())
}
