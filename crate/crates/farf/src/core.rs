//! Stream vocabulary shared by every module: schemas, instances, the four
//! fairness cells, and deterministic randomness.

use std::convert::TryFrom;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FarfError, Result};
use crate::scalar::Scalar;

/// Membership in the sensitive-attribute partition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Protected,
    Unprotected,
}

/// Binary class outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    /// Index into `[negative, positive]` score arrays.
    pub fn index(self) -> usize {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn from_index(idx: usize) -> Label {
        if idx == 0 {
            Label::Negative
        } else {
            Label::Positive
        }
    }
}

/// Column kind; nominal columns carry their declared value domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttrKind {
    Numeric,
    Nominal { domain: Vec<String> },
}

/// One column of the stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttrKind,
}

impl Attribute {
    pub fn numeric(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            kind: AttrKind::Numeric,
        }
    }

    pub fn nominal(name: impl Into<String>, domain: &[&str]) -> Self {
        Attribute {
            name: name.into(),
            kind: AttrKind::Nominal {
                domain: domain.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    pub fn is_nominal(&self) -> bool {
        matches!(self.kind, AttrKind::Nominal { .. })
    }

    /// Number of declared nominal values; zero for numeric columns.
    pub fn domain_size(&self) -> usize {
        match &self.kind {
            AttrKind::Numeric => 0,
            AttrKind::Nominal { domain } => domain.len(),
        }
    }

    /// Dictionary index of a raw nominal value.
    pub fn encode(&self, raw: &str) -> Option<u32> {
        match &self.kind {
            AttrKind::Numeric => None,
            AttrKind::Nominal { domain } => {
                domain.iter().position(|v| v == raw).map(|i| i as u32)
            }
        }
    }

    pub fn decode(&self, index: u32) -> Option<&str> {
        match &self.kind {
            AttrKind::Numeric => None,
            AttrKind::Nominal { domain } => domain.get(index as usize).map(|s| s.as_str()),
        }
    }
}

/// Serialized form of [`StreamSchema`]; validation happens on conversion.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SchemaDoc {
    attributes: Vec<Attribute>,
    sensitive_attribute: String,
    sensitive_value: String,
    class_attribute: String,
    positive_label: String,
}

/// Declarative description of one stream: every column, which column is the
/// sensitive attribute (and which of its two values marks the protected
/// group), and which column is the binary class (and which value is the
/// positive outcome). Immutable once constructed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct StreamSchema {
    attributes: Vec<Attribute>,
    sensitive_attribute: String,
    sensitive_value: String,
    class_attribute: String,
    positive_label: String,
    // Derived lookups, rebuilt on deserialization.
    class_column: usize,
    sensitive_column: usize,
    feature_columns: Vec<usize>,
    sensitive_feature: usize,
    protected_code: u32,
    positive_code: u32,
}

impl TryFrom<SchemaDoc> for StreamSchema {
    type Error = FarfError;

    fn try_from(doc: SchemaDoc) -> Result<Self> {
        StreamSchema::new(
            doc.attributes,
            &doc.sensitive_attribute,
            &doc.sensitive_value,
            &doc.class_attribute,
            &doc.positive_label,
        )
    }
}

impl From<StreamSchema> for SchemaDoc {
    fn from(s: StreamSchema) -> SchemaDoc {
        SchemaDoc {
            attributes: s.attributes,
            sensitive_attribute: s.sensitive_attribute,
            sensitive_value: s.sensitive_value,
            class_attribute: s.class_attribute,
            positive_label: s.positive_label,
        }
    }
}

impl StreamSchema {
    pub fn new(
        attributes: Vec<Attribute>,
        sensitive_attribute: &str,
        sensitive_value: &str,
        class_attribute: &str,
        positive_label: &str,
    ) -> Result<Self> {
        if sensitive_attribute == class_attribute {
            return Err(FarfError::schema(
                "sensitive attribute and class attribute must be distinct",
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for attr in &attributes {
            if !seen.insert(attr.name.as_str()) {
                return Err(FarfError::schema(format!(
                    "duplicate column name '{}'",
                    attr.name
                )));
            }
            if let AttrKind::Nominal { domain } = &attr.kind {
                if domain.is_empty() {
                    return Err(FarfError::schema(format!(
                        "nominal column '{}' has an empty domain",
                        attr.name
                    )));
                }
                let mut vals = std::collections::HashSet::new();
                for v in domain {
                    if !vals.insert(v.as_str()) {
                        return Err(FarfError::schema(format!(
                            "nominal column '{}' repeats value '{}'",
                            attr.name, v
                        )));
                    }
                }
            }
        }
        let column = |name: &str| -> Result<usize> {
            attributes
                .iter()
                .position(|a| a.name == name)
                .ok_or_else(|| FarfError::schema(format!("column '{name}' not declared")))
        };
        let class_column = column(class_attribute)?;
        let sensitive_column = column(sensitive_attribute)?;

        let class_attr = &attributes[class_column];
        if class_attr.domain_size() != 2 {
            return Err(FarfError::schema(format!(
                "class column '{class_attribute}' must be nominal with exactly two values"
            )));
        }
        let positive_code = class_attr.encode(positive_label).ok_or_else(|| {
            FarfError::schema(format!(
                "positive label '{positive_label}' not in the class domain"
            ))
        })?;

        let sensitive_attr = &attributes[sensitive_column];
        if sensitive_attr.domain_size() != 2 {
            return Err(FarfError::schema(format!(
                "sensitive column '{sensitive_attribute}' must be nominal with exactly two values"
            )));
        }
        let protected_code = sensitive_attr.encode(sensitive_value).ok_or_else(|| {
            FarfError::schema(format!(
                "sensitive value '{sensitive_value}' not in the sensitive domain"
            ))
        })?;

        let feature_columns: Vec<usize> = (0..attributes.len())
            .filter(|&i| i != class_column)
            .collect();
        let sensitive_feature = feature_columns
            .iter()
            .position(|&c| c == sensitive_column)
            .expect("sensitive column is a feature");

        Ok(StreamSchema {
            attributes,
            sensitive_attribute: sensitive_attribute.to_string(),
            sensitive_value: sensitive_value.to_string(),
            class_attribute: class_attribute.to_string(),
            positive_label: positive_label.to_string(),
            class_column,
            sensitive_column,
            feature_columns,
            sensitive_feature,
            protected_code,
            positive_code,
        })
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn column_count(&self) -> usize {
        self.attributes.len()
    }

    /// Number of non-class columns.
    pub fn feature_count(&self) -> usize {
        self.feature_columns.len()
    }

    /// Attribute metadata for feature position `feature` (class excluded).
    pub fn feature(&self, feature: usize) -> &Attribute {
        &self.attributes[self.feature_columns[feature]]
    }

    /// Column index (over all columns) of feature position `feature`.
    pub fn feature_column(&self, feature: usize) -> usize {
        self.feature_columns[feature]
    }

    pub fn class_column(&self) -> usize {
        self.class_column
    }

    pub fn sensitive_column(&self) -> usize {
        self.sensitive_column
    }

    /// Feature position of the sensitive attribute.
    pub fn sensitive_feature(&self) -> usize {
        self.sensitive_feature
    }

    pub fn sensitive_attribute(&self) -> &str {
        &self.sensitive_attribute
    }

    pub fn sensitive_value(&self) -> &str {
        &self.sensitive_value
    }

    pub fn class_attribute(&self) -> &str {
        &self.class_attribute
    }

    pub fn positive_label(&self) -> &str {
        &self.positive_label
    }

    /// Dictionary code of the protected value within the sensitive domain.
    pub fn protected_code(&self) -> u32 {
        self.protected_code
    }

    /// Group of a raw sensitive-attribute value.
    pub fn group_of(&self, raw: &str) -> Result<Group> {
        let attr = &self.attributes[self.sensitive_column];
        match attr.encode(raw) {
            Some(code) if code == self.protected_code => Ok(Group::Protected),
            Some(_) => Ok(Group::Unprotected),
            None => Err(FarfError::schema(format!(
                "value '{raw}' outside the sensitive domain"
            ))),
        }
    }

    /// Label of a raw class value.
    pub fn label_of(&self, raw: &str) -> Result<Label> {
        let attr = &self.attributes[self.class_column];
        match attr.encode(raw) {
            Some(code) if code == self.positive_code => Ok(Label::Positive),
            Some(_) => Ok(Label::Negative),
            None => Err(FarfError::schema(format!(
                "value '{raw}' outside the class domain"
            ))),
        }
    }
}

/// Group of a raw sensitive-attribute value under `schema`.
pub fn group_of(value: &str, schema: &StreamSchema) -> Result<Group> {
    schema.group_of(value)
}

/// One observed feature cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureValue<F> {
    Numeric(F),
    Nominal(u32),
    Missing,
}

impl<F> FeatureValue<F> {
    pub fn is_missing(&self) -> bool {
        matches!(self, FeatureValue::Missing)
    }
}

/// One stream element: encoded feature values, derived group membership,
/// binary label and arrival index. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance<F> {
    values: Vec<FeatureValue<F>>,
    group: Group,
    label: Label,
    t: u64,
}

impl<F: Scalar> Instance<F> {
    pub fn new(
        schema: &StreamSchema,
        values: Vec<FeatureValue<F>>,
        group: Group,
        label: Label,
        t: u64,
    ) -> Result<Self> {
        if values.len() != schema.feature_count() {
            return Err(FarfError::schema(format!(
                "expected {} feature values, got {}",
                schema.feature_count(),
                values.len()
            )));
        }
        for (i, value) in values.iter().enumerate() {
            let attr = schema.feature(i);
            match (value, &attr.kind) {
                (FeatureValue::Missing, _) => {}
                (FeatureValue::Numeric(v), AttrKind::Numeric) => {
                    if !v.is_finite() {
                        return Err(FarfError::schema(format!(
                            "non-finite value in numeric column '{}'",
                            attr.name
                        )));
                    }
                }
                (FeatureValue::Nominal(code), AttrKind::Nominal { domain }) => {
                    if *code as usize >= domain.len() {
                        return Err(FarfError::schema(format!(
                            "code {} outside the domain of '{}'",
                            code, attr.name
                        )));
                    }
                }
                _ => {
                    return Err(FarfError::schema(format!(
                        "value kind does not match column '{}'",
                        attr.name
                    )));
                }
            }
        }
        if let FeatureValue::Nominal(code) = values[schema.sensitive_feature()] {
            let derived = if code == schema.protected_code() {
                Group::Protected
            } else {
                Group::Unprotected
            };
            if derived != group {
                return Err(FarfError::schema(
                    "group flag disagrees with the sensitive value",
                ));
            }
        }
        Ok(Instance {
            values,
            group,
            label,
            t,
        })
    }

    pub fn values(&self) -> &[FeatureValue<F>] {
        &self.values
    }

    pub fn value(&self, feature: usize) -> FeatureValue<F> {
        self.values[feature]
    }

    pub fn group(&self) -> Group {
        self.group
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn t(&self) -> u64 {
        self.t
    }
}

/// The four accumulated fairness cells: (group x outcome) weighted counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupCounts<F> {
    pub u_pos: F,
    pub u_neg: F,
    pub p_pos: F,
    pub p_neg: F,
}

impl<F: Scalar> GroupCounts<F> {
    pub fn new() -> Self {
        GroupCounts {
            u_pos: F::zero(),
            u_neg: F::zero(),
            p_pos: F::zero(),
            p_neg: F::zero(),
        }
    }

    /// Adds `weight` to the single cell selected by group and outcome.
    pub fn add(&mut self, group: Group, outcome: Label, weight: F) -> Result<()> {
        if weight < F::zero() {
            return Err(FarfError::argument("negative weight"));
        }
        let cell = match (group, outcome) {
            (Group::Unprotected, Label::Positive) => &mut self.u_pos,
            (Group::Unprotected, Label::Negative) => &mut self.u_neg,
            (Group::Protected, Label::Positive) => &mut self.p_pos,
            (Group::Protected, Label::Negative) => &mut self.p_neg,
        };
        *cell = *cell + weight;
        Ok(())
    }

    pub fn accumulate(&mut self, other: &GroupCounts<F>) {
        self.u_pos = self.u_pos + other.u_pos;
        self.u_neg = self.u_neg + other.u_neg;
        self.p_pos = self.p_pos + other.p_pos;
        self.p_neg = self.p_neg + other.p_neg;
    }

    pub fn total(&self) -> F {
        self.u_pos + self.u_neg + self.p_pos + self.p_neg
    }

    pub fn is_empty(&self) -> bool {
        self.total() <= F::zero()
    }

    /// Positive-class weight over both groups.
    pub fn positives(&self) -> F {
        self.u_pos + self.p_pos
    }

    /// Negative-class weight over both groups.
    pub fn negatives(&self) -> F {
        self.u_neg + self.p_neg
    }
}

/// Seedable deterministic random generator. Equal seeds yield equal draw
/// sequences; children forked from a source are themselves deterministic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        RandomSource {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independently seeded child source.
    pub fn fork(&mut self) -> RandomSource {
        RandomSource::new(self.rng.gen())
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.rng.gen()
    }

    /// Uniform index in `[0, n)`.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// `k` distinct indices sampled uniformly from `0..n`, ascending.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = self.rng.gen_range(i..n);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool.sort_unstable();
        pool
    }
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Shared immutable schema handle.
pub type SchemaRef = Arc<StreamSchema>;
