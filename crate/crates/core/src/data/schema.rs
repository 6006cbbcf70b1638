use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Output,
    Conditional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Extended,
    /// A user-supplied schema with no fixed width contract.
    Custom,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Extended => "extended",
            Variant::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Variant::Original),
            "extended" => Ok(Variant::Extended),
            "custom" => Ok(Variant::Custom),
            other => Err(Error::InvalidArgument(format!(
                "unknown schema variant `{other}` (expected original or extended)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub role: Role,
    pub categories: Vec<String>,
}

impl FeatureSpec {
    pub fn new(name: &str, role: Role, categories: Vec<String>) -> Self {
        FeatureSpec {
            name: name.to_string(),
            role,
            categories,
        }
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

/// Ordered categorical features; output features come first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub variant: Variant,
    pub features: Vec<FeatureSpec>,
}

// Feature names used throughout the toolkit.
pub const AGE: &str = "age";
pub const GENDER: &str = "gender";
pub const NATIONALITY: &str = "nationality";
pub const INVESTOR: &str = "investor";
pub const PRIOR_HOME: &str = "prior_home";
pub const DISTANCE_PHASE1: &str = "distance_phase1";
pub const DISTANCE_PHASE2: &str = "distance_phase2";
pub const DISTANCE_GREENFIELD: &str = "distance_greenfield";
pub const SALES_PRICE: &str = "sales_price";
pub const SIZE: &str = "size";
pub const FLOOR: &str = "floor";
pub const PROPERTY_TYPE: &str = "property_type";

pub const NATIONALITIES: [&str; 12] = [
    "VN", "KR", "JP", "CN", "TW", "US", "FR", "DE", "AU", "SG", "IT", "OTHER",
];

pub const PRIOR_HOMES: [&str; 12] = [
    "Long Bien",
    "Gia Lam",
    "Hoang Mai",
    "Hai Ba Trung",
    "Dong Da",
    "Ba Dinh",
    "Cau Giay",
    "Thanh Xuan",
    "Tay Ho",
    "Hoan Kiem",
    "Van Giang",
    "Other province",
];

pub const PROPERTY_TYPES: [&str; 3] = ["villa", "townhouse", "apartment"];

/// Bin edges per variant. Each list of `k` edges defines `k + 1` bins.
pub mod edges {
    pub const AGE_ORIGINAL: &[f64] = &[25.0, 30.0, 35.0, 40.0, 45.0, 50.0, 60.0];
    pub const AGE_EXTENDED: &[f64] = &[
        22.0, 25.0, 28.0, 31.0, 34.0, 37.0, 40.0, 43.0, 46.0, 49.0, 52.0, 55.0, 58.0, 61.0, 65.0,
        70.0,
    ];
    /// km
    pub const DISTANCE_ORIGINAL: &[f64] = &[0.5, 1.0, 2.0];
    pub const DISTANCE_EXTENDED: &[f64] = &[0.25, 0.5, 1.0, 1.5, 2.5];
    /// billion VND
    pub const PRICE_ORIGINAL: &[f64] = &[1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0];
    pub const PRICE_EXTENDED: &[f64] = &[
        1.0, 1.25, 1.5, 1.75, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0,
    ];
    /// m²
    pub const SIZE_ORIGINAL: &[f64] = &[60.0, 80.0, 100.0, 150.0];
    pub const SIZE_EXTENDED: &[f64] = &[50.0, 70.0, 90.0, 120.0, 180.0];
}

pub const FLOOR_ORIGINAL: [&str; 5] = ["n/a", "1-5", "6-10", "11-20", "21+"];
pub const FLOOR_EXTENDED: [&str; 7] = ["n/a", "1-3", "4-6", "7-10", "11-15", "16-25", "26+"];

/// Locates `value` among interval bins defined by ascending `edges`.
pub fn bin_of(value: f64, edges: &[f64]) -> usize {
    edges.iter().take_while(|&&e| value >= e).count()
}

fn interval_labels(edges: &[f64], unit: &str) -> Vec<String> {
    let fmt = |v: f64| {
        if v.fract() == 0.0 {
            format!("{v:.0}")
        } else {
            format!("{v}")
        }
    };
    let mut labels = Vec::with_capacity(edges.len() + 1);
    labels.push(format!("<{}{unit}", fmt(edges[0])));
    for w in edges.windows(2) {
        labels.push(format!("{}-{}{unit}", fmt(w[0]), fmt(w[1])));
    }
    labels.push(format!(">={}{unit}", fmt(edges[edges.len() - 1])));
    labels
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Schema {
    /// Table-1 bin sizes: output width 36, conditional width 36.
    pub fn original() -> Self {
        Self::build(Variant::Original)
    }

    /// Finer age, distance, price, size and floor bins: output width 45,
    /// conditional width 49.
    pub fn extended() -> Self {
        Self::build(Variant::Extended)
    }

    pub fn for_variant(variant: Variant) -> Result<Self> {
        match variant {
            Variant::Original => Ok(Self::original()),
            Variant::Extended => Ok(Self::extended()),
            Variant::Custom => Err(Error::InvalidArgument(
                "custom schemas must be loaded from JSON".into(),
            )),
        }
    }

    fn build(variant: Variant) -> Self {
        use Role::*;
        let ext = variant == Variant::Extended;
        let pick = |o: &'static [f64], e: &'static [f64]| if ext { e } else { o };
        let age = pick(edges::AGE_ORIGINAL, edges::AGE_EXTENDED);
        let dist = pick(edges::DISTANCE_ORIGINAL, edges::DISTANCE_EXTENDED);
        let price = pick(edges::PRICE_ORIGINAL, edges::PRICE_EXTENDED);
        let size = pick(edges::SIZE_ORIGINAL, edges::SIZE_EXTENDED);
        let floor: &[&str] = if ext {
            &FLOOR_EXTENDED
        } else {
            &FLOOR_ORIGINAL
        };
        let features = vec![
            FeatureSpec::new(AGE, Output, interval_labels(age, "y")),
            FeatureSpec::new(GENDER, Output, strings(&["female", "male"])),
            FeatureSpec::new(NATIONALITY, Output, strings(&NATIONALITIES)),
            FeatureSpec::new(INVESTOR, Output, strings(&["no", "yes"])),
            FeatureSpec::new(PRIOR_HOME, Output, strings(&PRIOR_HOMES)),
            FeatureSpec::new(DISTANCE_PHASE1, Conditional, interval_labels(dist, "km")),
            FeatureSpec::new(DISTANCE_PHASE2, Conditional, interval_labels(dist, "km")),
            FeatureSpec::new(
                DISTANCE_GREENFIELD,
                Conditional,
                interval_labels(dist, "km"),
            ),
            FeatureSpec::new(SALES_PRICE, Conditional, interval_labels(price, "bn")),
            FeatureSpec::new(SIZE, Conditional, interval_labels(size, "m2")),
            FeatureSpec::new(FLOOR, Conditional, strings(floor)),
            FeatureSpec::new(PROPERTY_TYPE, Conditional, strings(&PROPERTY_TYPES)),
        ];
        Schema { variant, features }
    }

    pub fn new(variant: Variant, features: Vec<FeatureSpec>) -> Result<Self> {
        let schema = Schema { variant, features };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        let mut seen_conditional = false;
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature `{}`", f.name)));
            }
            if f.categories.len() < 2 {
                return Err(Error::Schema(format!(
                    "feature `{}` needs at least 2 categories",
                    f.name
                )));
            }
            let mut labels = HashSet::new();
            for label in &f.categories {
                if !labels.insert(label.as_str()) {
                    return Err(Error::Schema(format!(
                        "feature `{}` repeats label `{label}`",
                        f.name
                    )));
                }
            }
            match f.role {
                Role::Conditional => seen_conditional = true,
                Role::Output if seen_conditional => {
                    return Err(Error::Schema(format!(
                        "output feature `{}` follows a conditional feature",
                        f.name
                    )))
                }
                Role::Output => {}
            }
        }
        if self.n_outputs() == 0 {
            return Err(Error::Schema("schema has no output features".into()));
        }
        let expected = match self.variant {
            Variant::Original => Some((36, 36)),
            Variant::Extended => Some((45, 49)),
            Variant::Custom => None,
        };
        if let Some((out, cond)) = expected {
            let got = (self.output_width(), self.conditional_width());
            if got != (out, cond) {
                return Err(Error::Schema(format!(
                    "{} schema must have widths {out}/{cond}, got {}/{}",
                    self.variant.as_str(),
                    got.0,
                    got.1
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn n_outputs(&self) -> usize {
        self.features
            .iter()
            .take_while(|f| f.role == Role::Output)
            .count()
    }

    pub fn n_conditionals(&self) -> usize {
        self.features.len() - self.n_outputs()
    }

    pub fn outputs(&self) -> &[FeatureSpec] {
        &self.features[..self.n_outputs()]
    }

    pub fn conditionals(&self) -> &[FeatureSpec] {
        &self.features[self.n_outputs()..]
    }

    pub fn output_blocks(&self) -> Vec<usize> {
        self.outputs().iter().map(FeatureSpec::len).collect()
    }

    pub fn conditional_blocks(&self) -> Vec<usize> {
        self.conditionals().iter().map(FeatureSpec::len).collect()
    }

    pub fn output_width(&self) -> usize {
        self.outputs().iter().map(FeatureSpec::len).sum()
    }

    pub fn conditional_width(&self) -> usize {
        self.conditionals().iter().map(FeatureSpec::len).sum()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.features
            .iter()
            .position(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn feature(&self, name: &str) -> Result<&FeatureSpec> {
        Ok(&self.features[self.index_of(name)?])
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_widths() {
        let o = Schema::original();
        assert_eq!((o.output_width(), o.conditional_width()), (36, 36));
        let e = Schema::extended();
        assert_eq!((e.output_width(), e.conditional_width()), (45, 49));
        assert_eq!(o.len(), 12);
        assert_eq!(e.n_outputs(), 5);
        o.validate().unwrap();
        e.validate().unwrap();
    }

    #[test]
    fn original_matches_table_one_bin_counts() {
        let o = Schema::original();
        let counts: Vec<usize> = o.features.iter().map(FeatureSpec::len).collect();
        assert_eq!(counts, vec![8, 2, 12, 2, 12, 4, 4, 4, 11, 5, 5, 3]);
    }

    #[test]
    fn rejects_bad_schemas() {
        let single = Schema {
            variant: Variant::Custom,
            features: vec![FeatureSpec::new("a", Role::Output, vec!["x".into()])],
        };
        assert!(single.validate().is_err());
        let dup = Schema {
            variant: Variant::Custom,
            features: vec![FeatureSpec::new(
                "a",
                Role::Output,
                vec!["x".into(), "x".into()],
            )],
        };
        assert!(dup.validate().is_err());
        let order = Schema {
            variant: Variant::Custom,
            features: vec![
                FeatureSpec::new("c", Role::Conditional, vec!["x".into(), "y".into()]),
                FeatureSpec::new("o", Role::Output, vec!["x".into(), "y".into()]),
            ],
        };
        assert!(order.validate().is_err());
        let mut wrong_width = Schema::original();
        wrong_width.features[0].categories.pop();
        assert!(wrong_width.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_fingerprint() {
        let s = Schema::extended();
        let back = Schema::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.fingerprint(), s.fingerprint());
        assert_ne!(Schema::original().fingerprint(), s.fingerprint());
        assert!(s.to_json().contains("\"variant\": \"extended\""));
    }

    #[test]
    fn binning() {
        assert_eq!(bin_of(0.1, edges::DISTANCE_ORIGINAL), 0);
        assert_eq!(bin_of(0.5, edges::DISTANCE_ORIGINAL), 1);
        assert_eq!(bin_of(5.0, edges::DISTANCE_ORIGINAL), 3);
    }
}
