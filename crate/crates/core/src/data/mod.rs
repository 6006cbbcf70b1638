//! Feature schemas, one-hot encoding, dataset splitting and the planted
//! synthetic generator.

mod io;
mod record;
pub mod schema;
mod split;
pub mod synthetic;

pub use io::{read_conditionals, read_dataset, write_dataset};
pub use record::{decode_one_hot, encode_conditionals, encode_one_hot, AgentRecord, EncodedSet};
pub use schema::{FeatureSpec, Role, Schema, Variant};
pub use split::{
    make_split, select, ApplicationSelector, Fold, SplitPlan, K_FOLDS, MAX_APPLICATION_FRACTION,
    TEST_FRACTION,
};
pub use synthetic::{generate_synthetic_dataset, PlantedGenerator, GENERATOR_VERSION};
