//! Incremental decision tree whose split criterion combines information
//! gain with fairness gain. Splits are gated by a Hoeffding confidence
//! bound, each leaf evaluates a random feature subset, and the tree never
//! prunes.

mod criterion;
mod stats;

pub use criterion::{
    best_split_for, entropy, fair_info_gain, fairness_gain, hoeffding_bound, info_gain,
    try_split, SplitCandidate, SplitDecision, SplitSpec,
};
pub use stats::{Histogram, LeafStats};

use serde::{Deserialize, Serialize};

use crate::core::{FeatureValue, Instance, Label, RandomSource, SchemaRef};
use crate::error::{FarfError, Result};
use crate::scalar::{cast, Scalar};

/// Hyper-parameters of the incremental tree.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct SplitConfig<F> {
    /// Confidence parameter of the Hoeffding bound.
    pub delta: F,
    /// Radius below which near-ties split anyway.
    pub tie_threshold: F,
    /// Weight a leaf must accumulate between split attempts.
    pub grace_period: F,
    /// Candidate attributes per leaf; `None` means `ceil(sqrt(n))`.
    pub subspace_size: Option<usize>,
    /// Histogram resolution for numeric attributes; must be even.
    pub numeric_bins: usize,
    /// Laplace constant for leaf predictions.
    pub leaf_smoothing: F,
    /// When false, splits rank by plain information gain.
    pub use_fair_gain: bool,
}

impl<F: Scalar> Default for SplitConfig<F> {
    fn default() -> Self {
        SplitConfig {
            delta: cast(1e-7),
            tie_threshold: cast(0.05),
            grace_period: cast(200.0),
            subspace_size: None,
            numeric_bins: 32,
            leaf_smoothing: F::one(),
            use_fair_gain: true,
        }
    }
}

impl<F: Scalar> SplitConfig<F> {
    pub fn validate(&self, feature_count: usize) -> Result<()> {
        if !(self.delta > F::zero() && self.delta < F::one()) {
            return Err(FarfError::config("delta must lie in (0, 1)"));
        }
        if self.tie_threshold < F::zero() {
            return Err(FarfError::config("tie threshold must be non-negative"));
        }
        if self.grace_period < F::one() {
            return Err(FarfError::config("grace period must be at least 1"));
        }
        if self.numeric_bins < 2 || self.numeric_bins % 2 != 0 {
            return Err(FarfError::config("numeric bins must be even and >= 2"));
        }
        if self.leaf_smoothing < F::zero() {
            return Err(FarfError::config("leaf smoothing must be non-negative"));
        }
        if let Some(k) = self.subspace_size {
            if k < 1 || k > feature_count {
                return Err(FarfError::config(format!(
                    "subspace size must lie in 1..={feature_count}"
                )));
            }
        }
        Ok(())
    }

    /// Candidate attributes per leaf for a stream with `n` features.
    pub fn resolved_subspace(&self, n: usize) -> usize {
        match self.subspace_size {
            Some(k) => k.min(n).max(1),
            None => ((n as f64).sqrt().ceil() as usize).clamp(1, n.max(1)),
        }
    }
}

/// Class scores and the arg-max label; ties resolve to the negative class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction<F> {
    pub label: Label,
    /// `[negative, positive]` scores.
    pub scores: [F; 2],
}

impl<F: Scalar> Prediction<F> {
    pub(crate) fn from_scores(scores: [F; 2]) -> Self {
        let label = if scores[1] > scores[0] {
            Label::Positive
        } else {
            Label::Negative
        };
        Prediction { label, scores }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Node<F> {
    Leaf(LeafStats<F>),
    Split(SplitNode<F>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SplitNode<F> {
    feature: usize,
    spec: SplitSpec<F>,
    children: Vec<Node<F>>,
    /// Branch carrying the most training weight at split time; missing
    /// values route here.
    majority: usize,
}

impl<F: Scalar> SplitNode<F> {
    fn route(&self, x: &Instance<F>) -> usize {
        let value = x
            .values()
            .get(self.feature)
            .copied()
            .unwrap_or(FeatureValue::Missing);
        match (value, &self.spec) {
            (FeatureValue::Nominal(code), SplitSpec::Multiway) => {
                let idx = code as usize;
                if idx < self.children.len() {
                    idx
                } else {
                    self.majority
                }
            }
            (FeatureValue::Numeric(v), SplitSpec::LessThan(threshold)) => {
                if v < *threshold {
                    0
                } else {
                    1
                }
            }
            _ => self.majority,
        }
    }
}

/// Incremental fairness-aware decision tree. Grows only; prediction is
/// valid after any prefix of training updates.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct FairTree<F> {
    schema: SchemaRef,
    config: SplitConfig<F>,
    root: Node<F>,
    nodes: usize,
    weight_seen: F,
    rng: RandomSource,
}

impl<F: Scalar> FairTree<F> {
    pub fn new(schema: SchemaRef, config: SplitConfig<F>, seed: u64) -> Result<Self> {
        config.validate(schema.feature_count())?;
        let mut rng = RandomSource::new(seed);
        let root = Node::Leaf(LeafStats::sampled(&schema, &config, &[], &mut rng));
        Ok(FairTree {
            schema,
            config,
            root,
            nodes: 1,
            weight_seen: F::zero(),
            rng,
        })
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn config(&self) -> &SplitConfig<F> {
        &self.config
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn weight_seen(&self) -> F {
        self.weight_seen
    }

    /// Routes the instance to its leaf, adds the weighted counts, and
    /// attempts a split once the leaf's grace window fills. Weight zero is
    /// a no-op.
    pub fn learn_one(&mut self, x: &Instance<F>, weight: F) -> Result<()> {
        if weight < F::zero() {
            return Err(FarfError::argument("negative training weight"));
        }
        if x.values().len() != self.schema.feature_count() {
            return Err(FarfError::schema(
                "instance arity does not match the tree's schema",
            ));
        }
        if weight == F::zero() {
            return Ok(());
        }
        self.weight_seen = self.weight_seen + weight;
        let mut node = &mut self.root;
        loop {
            match node {
                Node::Split(split) => {
                    let child = split.route(x);
                    node = &mut split.children[child];
                }
                Node::Leaf(leaf) => {
                    leaf.update(x, weight);
                    if leaf.weight_since_attempt() >= self.config.grace_period {
                        leaf.reset_attempt_window();
                        if let SplitDecision::Split { feature, spec, .. } =
                            try_split(leaf, &self.config)
                        {
                            let split = make_split(
                                &self.schema,
                                &self.config,
                                leaf,
                                feature,
                                spec,
                                &mut self.rng,
                            );
                            self.nodes += split.children.len();
                            *node = Node::Split(split);
                        }
                    }
                    return Ok(());
                }
            }
        }
    }

    /// Leaf prediction with Laplace smoothing; anytime-valid.
    pub fn predict(&self, x: &Instance<F>) -> Prediction<F> {
        let mut node = &self.root;
        loop {
            match node {
                Node::Split(split) => node = &split.children[split.route(x)],
                Node::Leaf(leaf) => {
                    let counts = leaf.class_counts();
                    let smoothing = self.config.leaf_smoothing;
                    let total = counts[0] + counts[1] + smoothing + smoothing;
                    if total <= F::zero() {
                        return Prediction::from_scores([cast(0.5), cast(0.5)]);
                    }
                    return Prediction::from_scores([
                        (counts[0] + smoothing) / total,
                        (counts[1] + smoothing) / total,
                    ]);
                }
            }
        }
    }

    /// Indented textual dump of the tree structure for inspection.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "tree nodes={} weight={}\n",
            self.nodes, self.weight_seen
        ));
        dump_node(&self.root, &self.schema, 0, &mut out);
        out
    }
}

fn make_split<F: Scalar>(
    schema: &SchemaRef,
    config: &SplitConfig<F>,
    leaf: &LeafStats<F>,
    feature: usize,
    spec: SplitSpec<F>,
    rng: &mut RandomSource,
) -> SplitNode<F> {
    let mut excluded = leaf.excluded().to_vec();
    let arity = match spec {
        SplitSpec::Multiway => {
            excluded.push(feature);
            schema.feature(feature).domain_size()
        }
        SplitSpec::LessThan(_) => 2,
    };
    let majority = majority_branch(leaf, feature, &spec, arity);
    let children = (0..arity)
        .map(|_| Node::Leaf(LeafStats::sampled(schema, config, &excluded, rng)))
        .collect();
    SplitNode {
        feature,
        spec,
        children,
        majority,
    }
}

/// Index of the child that would receive the most training weight,
/// according to the leaf statistics backing the split.
fn majority_branch<F: Scalar>(
    leaf: &LeafStats<F>,
    feature: usize,
    spec: &SplitSpec<F>,
    arity: usize,
) -> usize {
    let mut weights = vec![F::zero(); arity];
    match spec {
        SplitSpec::Multiway => {
            if let Some(per_value) = leaf.nominal_value_weights(feature) {
                for (i, w) in per_value.into_iter().enumerate().take(arity) {
                    weights[i] = w;
                }
            }
        }
        SplitSpec::LessThan(threshold) => {
            if let (Some((lo, width)), Some(bins), Some(per_bin)) = (
                leaf.numeric_layout(feature),
                leaf.numeric_bins(feature),
                leaf.numeric_bin_weights(feature),
            ) {
                let edge = ((*threshold - lo) / width)
                    .round()
                    .to_usize()
                    .unwrap_or(0)
                    .clamp(1, bins - 1);
                weights[0] = per_bin[..edge].iter().copied().sum();
                weights[1] = per_bin[edge..].iter().copied().sum();
            }
        }
    }
    weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn dump_node<F: Scalar>(node: &Node<F>, schema: &SchemaRef, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match node {
        Node::Leaf(leaf) => {
            let counts = leaf.class_counts();
            let g = leaf.group_counts();
            out.push_str(&format!(
                "{pad}leaf w={} neg={} pos={} [u+:{} u-:{} p+:{} p-:{}]\n",
                leaf.total_weight(),
                counts[0],
                counts[1],
                g.u_pos,
                g.u_neg,
                g.p_pos,
                g.p_neg
            ));
        }
        Node::Split(split) => {
            let name = &schema.feature(split.feature).name;
            match &split.spec {
                SplitSpec::Multiway => {
                    out.push_str(&format!("{pad}split {name}\n"));
                    for (i, child) in split.children.iter().enumerate() {
                        let value = schema
                            .feature(split.feature)
                            .decode(i as u32)
                            .unwrap_or("?");
                        out.push_str(&format!("{pad}= {value}:\n"));
                        dump_node(child, schema, depth + 1, out);
                    }
                }
                SplitSpec::LessThan(threshold) => {
                    out.push_str(&format!("{pad}split {name} < {threshold}\n"));
                    for (i, child) in split.children.iter().enumerate() {
                        let side = if i == 0 { "<" } else { ">=" };
                        out.push_str(&format!("{pad}{side} {threshold}:\n"));
                        dump_node(child, schema, depth + 1, out);
                    }
                }
            }
        }
    }
}
