//! Planted-structure generator standing in for a real resident dataset.
//!
//! Conditional (property) features come from a small catalogue of projects:
//! each project fixes the property type and the three distances, then size,
//! price and floor are drawn from smooth kernels over the bin positions.
//! A latent household class is drawn from the conditionals through a fixed
//! logit table, and each output feature is drawn independently from a
//! class-conditional table. Every table is a constant below, so the exact
//! conditional law of the outputs is available in closed form.
//!
//! Kernels are defined over normalized bin positions `i / (n − 1)`, which
//! lets one set of constants drive both the original and the extended
//! discretization.

use std::collections::BTreeMap;

use super::record::AgentRecord;
use super::schema::{self, bin_of, edges, Role, Schema, Variant};
use super::split::ApplicationSelector;
use crate::error::{Error, Result};
use crate::eval::DistributionTable;
use crate::numeric::SeededRng;
use crate::sampler::PopulationSampler;

/// Bumped whenever any constant table below changes.
pub const GENERATOR_VERSION: u32 = 2;

pub const N_CLASSES: usize = 4;
pub const CLASS_NAMES: [&str; N_CLASSES] = ["young_local", "family", "investor", "expatriate"];

const VILLA: usize = 0;
const TOWNHOUSE: usize = 1;
const APARTMENT: usize = 2;

#[derive(Clone, Copy, Debug)]
pub struct Project {
    pub name: &'static str,
    pub property_type: usize,
    /// Distances to centre 1, centre 2 and the greenfield school, in km.
    pub km: [f64; 3],
    pub weight: f64,
    /// Price premium in [0, 1], shifts the price kernel upwards.
    pub premium: f64,
}

pub const PROJECTS: [Project; 10] = [
    Project {
        name: "Aqua Bay",
        property_type: APARTMENT,
        km: [0.3, 1.8, 1.2],
        weight: 0.20,
        premium: 0.50,
    },
    Project {
        name: "Rung Co",
        property_type: APARTMENT,
        km: [2.2, 0.7, 0.4],
        weight: 0.055,
        premium: 0.55,
    },
    Project {
        name: "Sky Oasis",
        property_type: APARTMENT,
        km: [1.3, 2.8, 2.0],
        weight: 0.14,
        premium: 0.35,
    },
    Project {
        name: "West Bay",
        property_type: APARTMENT,
        km: [0.8, 1.2, 3.0],
        weight: 0.12,
        premium: 0.40,
    },
    Project {
        name: "Park River",
        property_type: APARTMENT,
        km: [1.7, 0.2, 1.4],
        weight: 0.09,
        premium: 0.45,
    },
    Project {
        name: "Vuon Tung",
        property_type: VILLA,
        km: [0.4, 2.6, 0.8],
        weight: 0.06,
        premium: 0.90,
    },
    Project {
        name: "Dao Dao",
        property_type: VILLA,
        km: [1.1, 3.1, 0.3],
        weight: 0.045,
        premium: 1.00,
    },
    Project {
        name: "Hoa Phuong",
        property_type: TOWNHOUSE,
        km: [0.6, 1.6, 2.2],
        weight: 0.11,
        premium: 0.60,
    },
    Project {
        name: "Thao Nguyen",
        property_type: TOWNHOUSE,
        km: [1.9, 0.4, 1.1],
        weight: 0.10,
        premium: 0.55,
    },
    Project {
        name: "Chi Lang",
        property_type: TOWNHOUSE,
        km: [2.8, 1.1, 2.7],
        weight: 0.08,
        premium: 0.50,
    },
];

/// Index into [`PROJECTS`] of the held-out high-rise project.
pub const APPLICATION_PROJECT: usize = 1;

const SIZE_CENTER: [f64; 3] = [0.9, 0.6, 0.25];
const SIZE_WIDTH: f64 = 0.18;
const PRICE_SIZE_WEIGHT: f64 = 0.6;
const PRICE_PREMIUM_WEIGHT: f64 = 0.4;
const PRICE_WIDTH: f64 = 0.12;
const FLOOR_CENTER: f64 = 0.45;
const FLOOR_WIDTH: f64 = 0.35;

const CLASS_BIAS: [f64; N_CLASSES] = [0.5, 0.3, -1.5, -0.2];
/// Per class, per property type (villa, townhouse, apartment).
const CLASS_TYPE_LOGIT: [[f64; 3]; N_CLASSES] = [
    [-2.0, 0.0, 1.0],
    [0.0, 1.5, 0.0],
    [2.5, 0.5, 0.0],
    [-0.5, -0.5, 0.8],
];
/// Per class, slope on the normalized position of
/// (distance_phase1, distance_phase2, distance_greenfield, price, size, floor).
const CLASS_POSITION_LOGIT: [[f64; 6]; N_CLASSES] = [
    [0.0, 0.0, 0.0, -2.5, -1.0, 0.0],
    [0.0, 0.0, -0.5, 0.0, 1.0, 0.0],
    [-1.5, 0.0, 0.0, 3.0, 0.5, 0.0],
    [0.0, 0.0, -2.5, 1.0, 0.0, 1.5],
];

const AGE_CENTER: [f64; N_CLASSES] = [0.15, 0.45, 0.75, 0.30];
const AGE_WIDTH: [f64; N_CLASSES] = [0.08, 0.10, 0.10, 0.07];

const GENDER: [[f64; 2]; N_CLASSES] = [[0.52, 0.48], [0.45, 0.55], [0.35, 0.65], [0.40, 0.60]];

/// Order follows [`schema::NATIONALITIES`].
const NATIONALITY: [[f64; 12]; N_CLASSES] = [
    [
        0.965, 0.008, 0.004, 0.006, 0.004, 0.001, 0.002, 0.002, 0.002, 0.002, 0.001, 0.003,
    ],
    [
        0.93, 0.02, 0.01, 0.01, 0.005, 0.002, 0.004, 0.004, 0.003, 0.004, 0.002, 0.006,
    ],
    [
        0.82, 0.05, 0.02, 0.05, 0.02, 0.005, 0.005, 0.005, 0.005, 0.01, 0.002, 0.008,
    ],
    [
        0.05, 0.32, 0.16, 0.10, 0.07, 0.05, 0.06, 0.05, 0.04, 0.05, 0.02, 0.03,
    ],
];

const INVESTOR: [[f64; 2]; N_CLASSES] = [[0.95, 0.05], [0.85, 0.15], [0.40, 0.60], [0.75, 0.25]];

/// Order follows [`schema::PRIOR_HOMES`].
const PRIOR_HOME: [[f64; 12]; N_CLASSES] = [
    [
        0.22, 0.18, 0.15, 0.08, 0.07, 0.03, 0.06, 0.06, 0.02, 0.01, 0.08, 0.04,
    ],
    [
        0.18, 0.12, 0.12, 0.10, 0.10, 0.06, 0.08, 0.07, 0.04, 0.03, 0.05, 0.05,
    ],
    [
        0.08, 0.04, 0.06, 0.14, 0.12, 0.14, 0.10, 0.06, 0.12, 0.10, 0.01, 0.03,
    ],
    [
        0.10, 0.03, 0.04, 0.08, 0.06, 0.10, 0.18, 0.08, 0.20, 0.06, 0.01, 0.06,
    ],
];

/// Discretized Gaussian bump over normalized positions of `n` bins.
fn kernel(n: usize, center: f64, width: f64) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let pos = position(i, n);
            (-(pos - center).powi(2) / (2.0 * width * width)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn position(i: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        i as f64 / (n - 1) as f64
    }
}

fn normalized(row: &[f64]) -> Vec<f64> {
    let s: f64 = row.iter().sum();
    row.iter().map(|v| v / s).collect()
}

/// Indices of conditional values inside a conditional slice.
const D1: usize = 0;
const D2: usize = 1;
const DG: usize = 2;
const PRICE: usize = 3;
const SIZE: usize = 4;
const FLOOR: usize = 5;
const TYPE: usize = 6;

#[derive(Clone, Debug)]
pub struct PlantedGenerator {
    schema: Schema,
    dims: [usize; 7],
    /// `output_tables[class][output feature]`
    output_tables: Vec<Vec<Vec<f64>>>,
    project_bins: Vec<[usize; 3]>,
}

impl PlantedGenerator {
    pub fn new(variant: Variant) -> Result<Self> {
        let schema = Schema::for_variant(variant)?;
        let ext = variant == Variant::Extended;
        let dist_edges = if ext {
            edges::DISTANCE_EXTENDED
        } else {
            edges::DISTANCE_ORIGINAL
        };
        let cond = schema.conditionals();
        let dims = std::array::from_fn(|i| cond[i].len());
        let n_age = schema.feature(schema::AGE)?.len();
        let output_tables = (0..N_CLASSES)
            .map(|k| {
                vec![
                    kernel(n_age, AGE_CENTER[k], AGE_WIDTH[k]),
                    normalized(&GENDER[k]),
                    normalized(&NATIONALITY[k]),
                    normalized(&INVESTOR[k]),
                    normalized(&PRIOR_HOME[k]),
                ]
            })
            .collect();
        let project_bins = PROJECTS
            .iter()
            .map(|p| p.km.map(|km| bin_of(km, dist_edges)))
            .collect();
        Ok(PlantedGenerator {
            schema,
            dims,
            output_tables,
            project_bins,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    fn size_table(&self, property_type: usize) -> Vec<f64> {
        kernel(self.dims[SIZE], SIZE_CENTER[property_type], SIZE_WIDTH)
    }

    fn price_table(&self, size_bin: usize, premium: f64) -> Vec<f64> {
        let center = PRICE_SIZE_WEIGHT * position(size_bin, self.dims[SIZE])
            + PRICE_PREMIUM_WEIGHT * premium;
        kernel(self.dims[PRICE], center, PRICE_WIDTH)
    }

    fn floor_table(&self, property_type: usize) -> Vec<f64> {
        let n = self.dims[FLOOR];
        let mut t = vec![0.0; n];
        if property_type == APARTMENT {
            t[1..].copy_from_slice(&kernel(n - 1, FLOOR_CENTER, FLOOR_WIDTH));
        } else {
            t[0] = 1.0;
        }
        t
    }

    fn floor_position(&self, floor_bin: usize) -> f64 {
        if floor_bin == 0 {
            0.0
        } else {
            position(floor_bin - 1, self.dims[FLOOR] - 1)
        }
    }

    /// Posterior-free class law `P(class | conditionals)`.
    pub fn class_probabilities(&self, conditionals: &[usize]) -> Result<[f64; N_CLASSES]> {
        self.check_conditionals(conditionals)?;
        let positions = [
            position(conditionals[D1], self.dims[D1]),
            position(conditionals[D2], self.dims[D2]),
            position(conditionals[DG], self.dims[DG]),
            position(conditionals[PRICE], self.dims[PRICE]),
            position(conditionals[SIZE], self.dims[SIZE]),
            self.floor_position(conditionals[FLOOR]),
        ];
        let mut logits = [0.0; N_CLASSES];
        for (k, logit) in logits.iter_mut().enumerate() {
            *logit = CLASS_BIAS[k]
                + CLASS_TYPE_LOGIT[k][conditionals[TYPE]]
                + CLASS_POSITION_LOGIT[k]
                    .iter()
                    .zip(&positions)
                    .map(|(w, p)| w * p)
                    .sum::<f64>();
        }
        crate::numeric::softmax_in_place(&mut logits);
        Ok(logits)
    }

    fn check_conditionals(&self, conditionals: &[usize]) -> Result<()> {
        if conditionals.len() != self.dims.len() {
            return Err(Error::Validation(format!(
                "expected {} conditional values, got {}",
                self.dims.len(),
                conditionals.len()
            )));
        }
        for (j, (&v, &d)) in conditionals.iter().zip(&self.dims).enumerate() {
            if v >= d {
                return Err(Error::Encoding {
                    feature: self.schema.conditionals()[j].name.clone(),
                    detail: format!("index {v} out of range 0..{d}"),
                });
            }
        }
        Ok(())
    }

    /// Class-conditional table of one output feature (index among outputs).
    pub fn output_table(&self, class: usize, output: usize) -> &[f64] {
        &self.output_tables[class][output]
    }

    /// Draws one conditional tuple (a property).
    pub fn sample_conditionals(&self, rng: &mut SeededRng) -> Vec<usize> {
        let weights: Vec<f64> = PROJECTS.iter().map(|p| p.weight).collect();
        let p = rng.categorical(&weights);
        let project = &PROJECTS[p];
        let size = rng.categorical(&self.size_table(project.property_type));
        let price = rng.categorical(&self.price_table(size, project.premium));
        let floor = rng.categorical(&self.floor_table(project.property_type));
        let [d1, d2, dg] = self.project_bins[p];
        vec![d1, d2, dg, price, size, floor, project.property_type]
    }

    /// Draws output features given conditionals.
    pub fn sample_outputs(
        &self,
        conditionals: &[usize],
        rng: &mut SeededRng,
    ) -> Result<Vec<usize>> {
        let class = rng.categorical(&self.class_probabilities(conditionals)?);
        Ok(self.output_tables[class]
            .iter()
            .map(|t| rng.categorical(t))
            .collect())
    }

    pub fn generate(&self, n: usize, rng: &mut SeededRng) -> Vec<AgentRecord> {
        (0..n)
            .map(|_| {
                let cond = self.sample_conditionals(rng);
                let out = self
                    .sample_outputs(&cond, rng)
                    .expect("generated conditionals are valid");
                AgentRecord::from_parts(&out, &cond)
            })
            .collect()
    }

    /// Exact law of an output-feature subset given complete conditionals,
    /// with the latent class summed out.
    pub fn true_conditional_distribution(
        &self,
        conditionals: &[usize],
        subset: &[usize],
    ) -> Result<DistributionTable> {
        let n_out = self.schema.n_outputs();
        for &i in subset {
            match self.schema.features.get(i) {
                Some(f) if f.role == Role::Output => {}
                _ => return Err(Error::UnknownFeature(format!("output feature #{i}"))),
            }
        }
        if subset.is_empty() {
            return Err(Error::InvalidArgument("empty feature subset".into()));
        }
        debug_assert!(subset.iter().all(|&i| i < n_out));
        let class_p = self.class_probabilities(conditionals)?;
        let mut table = DistributionTable::zeros(&self.schema, subset);
        for idx in 0..table.n_bins() {
            let tuple = table.tuple_of(idx);
            table.probs[idx] = class_p
                .iter()
                .enumerate()
                .map(|(k, pk)| {
                    pk * subset
                        .iter()
                        .zip(&tuple)
                        .map(|(&f, &v)| self.output_tables[k][f][v])
                        .product::<f64>()
                })
                .sum();
        }
        Ok(table)
    }

    pub fn true_conditional_distribution_named(
        &self,
        conditionals: &[usize],
        names: &[&str],
    ) -> Result<DistributionTable> {
        let subset = names
            .iter()
            .map(|n| self.schema.index_of(n))
            .collect::<Result<Vec<_>>>()?;
        self.true_conditional_distribution(conditionals, &subset)
    }

    /// Every reachable conditional tuple with its probability.
    pub fn conditional_support(&self) -> Vec<(Vec<usize>, f64)> {
        let mut support: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let total_weight: f64 = PROJECTS.iter().map(|p| p.weight).sum();
        for (p, project) in PROJECTS.iter().enumerate() {
            let [d1, d2, dg] = self.project_bins[p];
            let sizes = self.size_table(project.property_type);
            let floors = self.floor_table(project.property_type);
            for (s, ps) in sizes.iter().enumerate() {
                for (q, pq) in self.price_table(s, project.premium).iter().enumerate() {
                    for (f, pf) in floors.iter().enumerate() {
                        let prob = project.weight / total_weight * ps * pq * pf;
                        if prob > 0.0 {
                            *support
                                .entry(vec![d1, d2, dg, q, s, f, project.property_type])
                                .or_insert(0.0) += prob;
                        }
                    }
                }
            }
        }
        support.into_iter().collect()
    }

    /// Exact `P(output feature | one conditional feature = value)`, with the
    /// other conditionals marginalized over the generator's property law.
    /// Feature arguments are schema indices.
    pub fn output_given_single_conditional(
        &self,
        conditional_feature: usize,
        value: usize,
        output_feature: usize,
    ) -> Result<DistributionTable> {
        let n_out = self.schema.n_outputs();
        if conditional_feature < n_out || conditional_feature >= self.schema.len() {
            return Err(Error::UnknownFeature(format!(
                "conditional feature #{conditional_feature}"
            )));
        }
        let j = conditional_feature - n_out;
        let mut table = DistributionTable::zeros(&self.schema, &[output_feature]);
        let mut mass = 0.0;
        for (cond, p) in self.conditional_support() {
            if cond[j] != value {
                continue;
            }
            mass += p;
            let class_p = self.class_probabilities(&cond)?;
            for (k, pk) in class_p.iter().enumerate() {
                for (v, pv) in self.output_tables[k][output_feature].iter().enumerate() {
                    table.probs[v] += p * pk * pv;
                }
            }
        }
        if mass == 0.0 {
            return Err(Error::InvalidArgument(format!(
                "conditional value {value} of feature #{conditional_feature} has zero probability"
            )));
        }
        table.probs.iter_mut().for_each(|v| *v /= mass);
        Ok(table)
    }

    /// Exact marginal probability of one conditional value.
    pub fn conditional_value_probability(&self, conditional_feature: usize, value: usize) -> f64 {
        let j = conditional_feature - self.schema.n_outputs();
        self.conditional_support()
            .iter()
            .filter(|(c, _)| c[j] == value)
            .map(|(_, p)| p)
            .sum()
    }

    /// Selector matching exactly the held-out high-rise project.
    pub fn application_selector(&self) -> ApplicationSelector {
        let [d1, d2, dg] = self.project_bins[APPLICATION_PROJECT];
        ApplicationSelector::new(vec![
            (
                schema::PROPERTY_TYPE.to_string(),
                PROJECTS[APPLICATION_PROJECT].property_type,
            ),
            (schema::DISTANCE_PHASE1.to_string(), d1),
            (schema::DISTANCE_PHASE2.to_string(), d2),
            (schema::DISTANCE_GREENFIELD.to_string(), dg),
        ])
    }
}

/// The generator itself as a sampler: draws from the true conditional law.
impl PopulationSampler for PlantedGenerator {
    fn sample_outputs(
        &self,
        conditionals: &[&[usize]],
        rng: &mut SeededRng,
    ) -> Result<Vec<Vec<usize>>> {
        conditionals
            .iter()
            .map(|c| PlantedGenerator::sample_outputs(self, c, rng))
            .collect()
    }
}

/// Convenience wrapper: `n` records of the given variant.
pub fn generate_synthetic_dataset(
    variant: Variant,
    n: usize,
    rng: &mut SeededRng,
) -> Result<(Schema, Vec<AgentRecord>)> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "dataset size must be at least 1".into(),
        ));
    }
    let generator = PlantedGenerator::new(variant)?;
    let records = generator.generate(n, rng);
    Ok((generator.schema().clone(), records))
}
