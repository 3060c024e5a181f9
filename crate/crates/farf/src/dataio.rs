//! Stream ingestion: schema-driven CSV parsing with dictionary encoding,
//! optional drift-inducing column ordering, and synthetic stream
//! generation for drift and fairness experiments.

use std::cmp::Ordering;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::core::{
    Attribute, FeatureValue, Group, Instance, Label, RandomSource, SchemaRef, StreamSchema,
};
use crate::error::{FarfError, Result};
use crate::scalar::{cast, Scalar};

/// Sort direction for the optional ordering column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderDirection {
    Asc,
    Desc,
    AsIs,
}

impl Default for OrderDirection {
    fn default() -> Self {
        OrderDirection::AsIs
    }
}

fn default_missing_token() -> String {
    "?".to_string()
}

fn default_true() -> bool {
    true
}

/// Declarative description of a CSV-backed stream.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetConfig {
    /// CSV file location; relative paths are the caller's responsibility.
    pub path: String,
    #[serde(default)]
    pub header: bool,
    #[serde(default = "default_missing_token")]
    pub missing_token: String,
    pub schema: StreamSchema,
    /// Optional column whose values group the stream, simulating drift.
    #[serde(default)]
    pub order_by: Option<String>,
    #[serde(default)]
    pub order_direction: OrderDirection,
    /// Reject undeclared nominal values and unparseable numerics instead
    /// of mapping them to missing.
    #[serde(default = "default_true")]
    pub strict: bool,
    /// Free-form note on where the file comes from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(column) = &self.order_by {
            if !self.schema.attributes().iter().any(|a| &a.name == column) {
                return Err(FarfError::config(format!(
                    "order_by column '{column}' is not declared"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: DatasetConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }
}

/// One rejected or repaired input row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIssue {
    /// 1-based data row number (headers excluded).
    pub row: usize,
    pub message: String,
}

/// A fully ingested stream: the shared schema, instances in final order,
/// and per-row rejection reports.
#[derive(Clone, Debug)]
pub struct LoadedStream<F> {
    pub schema: SchemaRef,
    pub instances: Vec<Instance<F>>,
    pub rejected: Vec<RowIssue>,
}

impl<F> LoadedStream<F> {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

/// Sort key for the ordering column; missing values sort last.
#[derive(Clone, Debug, PartialEq)]
enum OrderKey<F> {
    Numeric(F),
    Nominal(u32),
    Missing,
}

impl<F: Scalar> OrderKey<F> {
    fn compare(&self, other: &Self, direction: OrderDirection) -> Ordering {
        use OrderKey::*;
        match (self, other) {
            (Missing, Missing) => Ordering::Equal,
            (Missing, _) => Ordering::Greater,
            (_, Missing) => Ordering::Less,
            (a, b) => {
                let forward = match (a, b) {
                    (Numeric(x), Numeric(y)) => x.partial_cmp(y).unwrap_or(Ordering::Equal),
                    (Nominal(x), Nominal(y)) => x.cmp(y),
                    _ => Ordering::Equal,
                };
                if direction == OrderDirection::Desc {
                    forward.reverse()
                } else {
                    forward
                }
            }
        }
    }
}

struct ParsedRow<F> {
    values: Vec<FeatureValue<F>>,
    group: Group,
    label: Label,
    key: OrderKey<F>,
}

/// Reads, encodes and orders the configured CSV into instances. Rows with
/// an unusable class or sensitive value are rejected and reported; in
/// strict mode any other malformed cell aborts the load.
pub fn load_stream<F: Scalar>(config: &DatasetConfig) -> Result<LoadedStream<F>> {
    config.validate()?;
    let schema = Arc::new(config.schema.clone());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(config.header)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(Path::new(&config.path))?;

    // column position of every schema attribute in file order
    let columns: Vec<usize> = if config.header {
        let headers = reader.headers()?.clone();
        let mut positions = Vec::with_capacity(schema.column_count());
        for attr in schema.attributes() {
            let position = headers
                .iter()
                .position(|h| h == attr.name)
                .ok_or_else(|| {
                    FarfError::schema(format!("column '{}' absent from the header", attr.name))
                })?;
            positions.push(position);
        }
        positions
    } else {
        (0..schema.column_count()).collect()
    };

    let order_column = config
        .order_by
        .as_ref()
        .map(|name| {
            schema
                .attributes()
                .iter()
                .position(|a| &a.name == name)
                .expect("validated")
        });

    let mut rows: Vec<ParsedRow<F>> = Vec::new();
    let mut rejected = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let row = index + 1;
        let record = record?;
        if record.len() < schema.column_count()
            || (!config.header && record.len() != schema.column_count())
        {
            return Err(FarfError::row(
                row,
                format!(
                    "expected {} columns, found {}",
                    schema.column_count(),
                    record.len()
                ),
            ));
        }
        match parse_row::<F>(&record, &columns, &schema, config, row)? {
            RowOutcome::Parsed(mut parsed) => {
                if let Some(column) = order_column {
                    parsed.key = key_for(&parsed, column, &schema);
                }
                rows.push(parsed);
            }
            RowOutcome::Rejected(issue) => rejected.push(issue),
        }
    }

    if order_column.is_some() && config.order_direction != OrderDirection::AsIs {
        let direction = config.order_direction;
        rows.sort_by(|a, b| a.key.compare(&b.key, direction));
    } else if order_column.is_some() {
        rows.sort_by(|a, b| a.key.compare(&b.key, OrderDirection::Asc));
    }

    let instances = rows
        .into_iter()
        .enumerate()
        .map(|(t, row)| Instance::new(&schema, row.values, row.group, row.label, t as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedStream {
        schema,
        instances,
        rejected,
    })
}

enum RowOutcome<F> {
    Parsed(ParsedRow<F>),
    Rejected(RowIssue),
}

fn key_for<F: Scalar>(row: &ParsedRow<F>, column: usize, schema: &StreamSchema) -> OrderKey<F> {
    if column == schema.class_column() {
        return OrderKey::Nominal(match row.label {
            Label::Negative => 0,
            Label::Positive => 1,
        });
    }
    let feature = (0..schema.feature_count())
        .find(|&f| schema.feature_column(f) == column)
        .expect("non-class column is a feature");
    match row.values[feature] {
        FeatureValue::Numeric(v) => OrderKey::Numeric(v),
        FeatureValue::Nominal(code) => OrderKey::Nominal(code),
        FeatureValue::Missing => OrderKey::Missing,
    }
}

fn parse_row<F: Scalar>(
    record: &csv::StringRecord,
    columns: &[usize],
    schema: &StreamSchema,
    config: &DatasetConfig,
    row: usize,
) -> Result<RowOutcome<F>> {
    let cell = |column: usize| record.get(columns[column]).unwrap_or("");

    let class_raw = cell(schema.class_column());
    let label = match schema.label_of(class_raw) {
        Ok(label) => label,
        Err(_) => {
            return Ok(RowOutcome::Rejected(RowIssue {
                row,
                message: format!("unusable class value '{class_raw}'"),
            }))
        }
    };
    let sensitive_raw = cell(schema.sensitive_column());
    let group = match schema.group_of(sensitive_raw) {
        Ok(group) => group,
        Err(_) => {
            return Ok(RowOutcome::Rejected(RowIssue {
                row,
                message: format!("unusable sensitive value '{sensitive_raw}'"),
            }))
        }
    };

    let mut values = Vec::with_capacity(schema.feature_count());
    for feature in 0..schema.feature_count() {
        let column = schema.feature_column(feature);
        let raw = cell(column);
        let attr = schema.feature(feature);
        if raw == config.missing_token || raw.is_empty() {
            values.push(FeatureValue::Missing);
            continue;
        }
        let value = parse_cell::<F>(raw, attr);
        match value {
            Some(value) => values.push(value),
            None if config.strict => {
                return Err(FarfError::row(
                    row,
                    format!("value '{raw}' invalid for column '{}'", attr.name),
                ));
            }
            None => values.push(FeatureValue::Missing),
        }
    }
    Ok(RowOutcome::Parsed(ParsedRow {
        values,
        group,
        label,
        key: OrderKey::Missing,
    }))
}

fn parse_cell<F: Scalar>(raw: &str, attr: &Attribute) -> Option<FeatureValue<F>> {
    if attr.is_nominal() {
        attr.encode(raw).map(FeatureValue::Nominal)
    } else {
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .and_then(F::from_f64)
            .map(FeatureValue::Numeric)
    }
}

/// One homogeneous section of a synthetic stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub len: usize,
    /// Probability an instance belongs to the protected group.
    pub protected_fraction: f64,
    pub positive_rate_protected: f64,
    pub positive_rate_unprotected: f64,
    /// Probability the signal feature encodes the wrong label.
    #[serde(default)]
    pub label_noise: f64,
    /// Flip the feature-label relationship, simulating concept drift.
    #[serde(default)]
    pub inverted: bool,
}

/// Reproducible synthetic stream: concatenated segments over a fixed
/// schema with one separating signal feature plus distractors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub segments: Vec<Segment>,
    #[serde(default = "default_numeric_distractors")]
    pub numeric_distractors: usize,
    #[serde(default = "default_nominal_distractors")]
    pub nominal_distractors: usize,
}

fn default_numeric_distractors() -> usize {
    2
}

fn default_nominal_distractors() -> usize {
    1
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, segment) in self.segments.iter().enumerate() {
            for (name, value) in [
                ("protected_fraction", segment.protected_fraction),
                ("positive_rate_protected", segment.positive_rate_protected),
                ("positive_rate_unprotected", segment.positive_rate_unprotected),
                ("label_noise", segment.label_noise),
            ] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(FarfError::config(format!(
                        "segment {i}: {name} = {value} outside [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> StreamSchema {
        let mut attributes = vec![Attribute::numeric("signal")];
        for i in 0..self.numeric_distractors {
            attributes.push(Attribute::numeric(format!("noise{i}")));
        }
        for i in 0..self.nominal_distractors {
            attributes.push(Attribute::nominal(
                format!("cat{i}"),
                &["a", "b", "c", "d"],
            ));
        }
        attributes.push(Attribute::nominal("group", &["unprotected", "protected"]));
        attributes.push(Attribute::nominal("outcome", &["neg", "pos"]));
        StreamSchema::new(attributes, "group", "protected", "outcome", "pos")
            .expect("fixed synthetic schema is valid")
    }
}

/// Generates the configured stream; deterministic under the spec seed.
pub fn synth_stream<F: Scalar>(spec: &SynthSpec) -> Result<LoadedStream<F>> {
    spec.validate()?;
    let schema = Arc::new(spec.schema());
    let mut rng = RandomSource::new(spec.seed);
    let total: usize = spec.segments.iter().map(|s| s.len).sum();
    let mut instances = Vec::with_capacity(total);
    let mut t = 0u64;
    for segment in &spec.segments {
        for _ in 0..segment.len {
            instances.push(synth_instance(&schema, spec, segment, &mut rng, t)?);
            t += 1;
        }
    }
    Ok(LoadedStream {
        schema,
        instances,
        rejected: Vec::new(),
    })
}

fn synth_instance<F: Scalar>(
    schema: &SchemaRef,
    spec: &SynthSpec,
    segment: &Segment,
    rng: &mut RandomSource,
    t: u64,
) -> Result<Instance<F>> {
    let group = if rng.next_f64() < segment.protected_fraction {
        Group::Protected
    } else {
        Group::Unprotected
    };
    let positive_rate = match group {
        Group::Protected => segment.positive_rate_protected,
        Group::Unprotected => segment.positive_rate_unprotected,
    };
    let label = if rng.next_f64() < positive_rate {
        Label::Positive
    } else {
        Label::Negative
    };

    let mut encoded_positive = label == Label::Positive;
    if rng.next_f64() < segment.label_noise {
        encoded_positive = !encoded_positive;
    }
    if segment.inverted {
        encoded_positive = !encoded_positive;
    }
    let signal = if encoded_positive {
        0.05 + 0.95 * rng.next_f64()
    } else {
        -1.0 + 0.95 * rng.next_f64()
    };

    let mut values = Vec::with_capacity(schema.feature_count());
    values.push(FeatureValue::Numeric(cast::<F>(signal)));
    for _ in 0..spec.numeric_distractors {
        values.push(FeatureValue::Numeric(cast::<F>(rng.next_f64() * 2.0 - 1.0)));
    }
    for _ in 0..spec.nominal_distractors {
        values.push(FeatureValue::Nominal(rng.index(4) as u32));
    }
    values.push(FeatureValue::Nominal(match group {
        Group::Unprotected => 0,
        Group::Protected => 1,
    }));
    Instance::new(schema, values, group, label, t)
}
