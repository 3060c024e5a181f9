//! Per-leaf sufficient statistics: joint (attribute value x group x class)
//! weighted counts for every candidate attribute.

use serde::{Deserialize, Serialize};

use crate::core::{AttrKind, FeatureValue, GroupCounts, Instance, RandomSource, StreamSchema};
use crate::error::{FarfError, Result};
use crate::fair_tree::SplitConfig;
use crate::scalar::Scalar;

/// Adaptive equal-width histogram over one numeric attribute. Bin edges sit
/// on a power-of-two lattice and the range grows by doubling, merging bin
/// pairs, so recounting raw values against the final layout reproduces the
/// accumulated cells exactly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Histogram<F> {
    bins: usize,
    state: HistState<F>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum HistState<F> {
    Empty,
    /// All mass observed at a single value so far.
    Point { value: F, cells: GroupCounts<F> },
    Binned {
        lo: F,
        width: F,
        cells: Vec<GroupCounts<F>>,
    },
}

impl<F: Scalar> Histogram<F> {
    pub fn new(bins: usize) -> Self {
        debug_assert!(bins >= 2 && bins % 2 == 0);
        Histogram {
            bins,
            state: HistState::Empty,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// `(lo, bin width)` once at least two distinct values were seen.
    pub fn layout(&self) -> Option<(F, F)> {
        match &self.state {
            HistState::Binned { lo, width, .. } => Some((*lo, *width)),
            _ => None,
        }
    }

    /// Bin index of `v` under a layout; values must lie in `[lo, hi)`.
    pub fn bin_of(lo: F, width: F, bins: usize, v: F) -> usize {
        let idx = ((v - lo) / width).floor();
        idx.to_usize().unwrap_or(0).min(bins - 1)
    }

    pub(crate) fn cells(&self) -> Option<&[GroupCounts<F>]> {
        match &self.state {
            HistState::Binned { cells, .. } => Some(cells),
            _ => None,
        }
    }

    pub(crate) fn point(&self) -> Option<&GroupCounts<F>> {
        match &self.state {
            HistState::Point { cells, .. } => Some(cells),
            _ => None,
        }
    }

    pub fn add(&mut self, v: F, counts_update: impl Fn(&mut GroupCounts<F>)) {
        match &mut self.state {
            HistState::Empty => {
                let mut cells = GroupCounts::new();
                counts_update(&mut cells);
                self.state = HistState::Point { value: v, cells };
            }
            HistState::Point { value, cells } if *value == v => {
                counts_update(cells);
            }
            HistState::Point { value, cells } => {
                let point_value = *value;
                let point_cells = *cells;
                let (lo, width) = initial_layout(self.bins, point_value, v);
                self.state = HistState::Binned {
                    lo,
                    width,
                    cells: vec![GroupCounts::new(); self.bins],
                };
                self.deposit(point_value, |c| c.accumulate(&point_cells));
                self.deposit(v, counts_update);
            }
            HistState::Binned { .. } => {
                self.deposit(v, counts_update);
            }
        }
    }

    fn deposit(&mut self, v: F, counts_update: impl Fn(&mut GroupCounts<F>)) {
        self.cover(v);
        if let HistState::Binned { lo, width, cells } = &mut self.state {
            let idx = Self::bin_of(*lo, *width, self.bins, v);
            counts_update(&mut cells[idx]);
        }
    }

    /// Doubles the range away from the far side until `v` fits, merging
    /// bin pairs so every old bin nests inside exactly one new bin.
    fn cover(&mut self, v: F) {
        let bins = self.bins;
        if let HistState::Binned { lo, width, cells } = &mut self.state {
            loop {
                let span = F::from_count(bins as u64) * *width;
                let hi = *lo + span;
                if v >= *lo && v < hi {
                    break;
                }
                if v < *lo {
                    for j in (0..bins / 2).rev() {
                        let mut merged = cells[2 * j];
                        merged.accumulate(&cells[2 * j + 1]);
                        cells[bins / 2 + j] = merged;
                    }
                    for cell in cells.iter_mut().take(bins / 2) {
                        *cell = GroupCounts::new();
                    }
                    *lo = *lo - span;
                } else {
                    for j in 0..bins / 2 {
                        let mut merged = cells[2 * j];
                        merged.accumulate(&cells[2 * j + 1]);
                        cells[j] = merged;
                    }
                    for cell in cells.iter_mut().skip(bins / 2) {
                        *cell = GroupCounts::new();
                    }
                }
                *width = *width + *width;
            }
        }
    }
}

/// Initial power-of-two-aligned layout spanning two distinct seed values.
fn initial_layout<F: Scalar>(bins: usize, a: F, b: F) -> (F, F) {
    let (mn, mx) = if a < b { (a, b) } else { (b, a) };
    let ratio = (mx - mn) / F::from_count(bins as u64);
    let mut width = ratio.log2().ceil().exp2();
    if !width.is_finite() || width <= F::zero() {
        width = ratio;
    }
    let mut lo = (mn / width).floor() * width;
    if !lo.is_finite() {
        lo = mn;
    }
    if lo > mn {
        lo = lo - width;
    }
    (lo, width)
}

/// Statistics for one candidate attribute inside a leaf.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) enum AttrStats<F> {
    /// One `(group x class)` cell per declared nominal value.
    Nominal { cells: Vec<GroupCounts<F>> },
    Numeric(Histogram<F>),
}

impl<F: Scalar> AttrStats<F> {
    fn for_kind(kind: &AttrKind, bins: usize) -> Self {
        match kind {
            AttrKind::Numeric => AttrStats::Numeric(Histogram::new(bins)),
            AttrKind::Nominal { domain } => AttrStats::Nominal {
                cells: vec![GroupCounts::new(); domain.len()],
            },
        }
    }
}

/// Sufficient statistics of one leaf: overall class/group counts plus a
/// joint table per candidate attribute. The candidate set is the leaf's
/// random feature subset; nominal attributes already split on along the
/// path are excluded.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeafStats<F> {
    features: Vec<usize>,
    excluded: Vec<usize>,
    stats: Vec<AttrStats<F>>,
    class_counts: [F; 2],
    groups: GroupCounts<F>,
    weight_since_attempt: F,
}

impl<F: Scalar> LeafStats<F> {
    /// Leaf with a freshly sampled feature subset.
    pub(crate) fn sampled(
        schema: &StreamSchema,
        config: &SplitConfig<F>,
        excluded: &[usize],
        rng: &mut RandomSource,
    ) -> Self {
        let n = schema.feature_count();
        let pool: Vec<usize> = (0..n).filter(|f| !excluded.contains(f)).collect();
        let k = config.resolved_subspace(n).min(pool.len());
        let features: Vec<usize> = rng
            .sample_indices(pool.len(), k)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        Self::with_features(schema, config.numeric_bins, features, excluded.to_vec())
    }

    /// Leaf tracking an explicit candidate set; used by tests and oracles.
    pub fn tracking(
        schema: &StreamSchema,
        numeric_bins: usize,
        features: Vec<usize>,
    ) -> Result<Self> {
        if features.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FarfError::argument(
                "candidate features must be ascending and distinct",
            ));
        }
        if features.iter().any(|&f| f >= schema.feature_count()) {
            return Err(FarfError::argument("candidate feature out of range"));
        }
        Ok(Self::with_features(schema, numeric_bins, features, vec![]))
    }

    /// Leaf tracking every feature.
    pub fn tracking_all(schema: &StreamSchema, numeric_bins: usize) -> Self {
        Self::with_features(
            schema,
            numeric_bins,
            (0..schema.feature_count()).collect(),
            vec![],
        )
    }

    fn with_features(
        schema: &StreamSchema,
        numeric_bins: usize,
        features: Vec<usize>,
        excluded: Vec<usize>,
    ) -> Self {
        let stats = features
            .iter()
            .map(|&f| AttrStats::for_kind(&schema.feature(f).kind, numeric_bins))
            .collect();
        LeafStats {
            features,
            excluded,
            stats,
            class_counts: [F::zero(); 2],
            groups: GroupCounts::new(),
            weight_since_attempt: F::zero(),
        }
    }

    /// Folds one weighted instance into the leaf. Missing attribute values
    /// skip that attribute's table; class and group counts always update.
    pub fn update(&mut self, x: &Instance<F>, weight: F) {
        if weight <= F::zero() {
            return;
        }
        let group = x.group();
        let label = x.label();
        self.class_counts[label.index()] = self.class_counts[label.index()] + weight;
        self.groups
            .add(group, label, weight)
            .expect("non-negative weight");
        self.weight_since_attempt = self.weight_since_attempt + weight;
        for (slot, &feature) in self.features.iter().enumerate() {
            match x.value(feature) {
                FeatureValue::Missing => {}
                FeatureValue::Numeric(v) => {
                    if let AttrStats::Numeric(hist) = &mut self.stats[slot] {
                        hist.add(v, |c| {
                            c.add(group, label, weight).expect("non-negative weight")
                        });
                    }
                }
                FeatureValue::Nominal(code) => {
                    if let AttrStats::Nominal { cells } = &mut self.stats[slot] {
                        cells[code as usize]
                            .add(group, label, weight)
                            .expect("non-negative weight");
                    }
                }
            }
        }
    }

    pub fn features(&self) -> &[usize] {
        &self.features
    }

    pub(crate) fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    pub fn total_weight(&self) -> F {
        self.class_counts[0] + self.class_counts[1]
    }

    /// `[negative, positive]` class weights.
    pub fn class_counts(&self) -> [F; 2] {
        self.class_counts
    }

    pub fn group_counts(&self) -> &GroupCounts<F> {
        &self.groups
    }

    pub(crate) fn weight_since_attempt(&self) -> F {
        self.weight_since_attempt
    }

    pub(crate) fn reset_attempt_window(&mut self) {
        self.weight_since_attempt = F::zero();
    }

    pub(crate) fn attr_slot(&self, feature: usize) -> Option<&AttrStats<F>> {
        self.features
            .binary_search(&feature)
            .ok()
            .map(|slot| &self.stats[slot])
    }

    /// Final histogram layout of a numeric candidate, if established.
    pub fn numeric_layout(&self, feature: usize) -> Option<(F, F)> {
        match self.attr_slot(feature)? {
            AttrStats::Numeric(hist) => hist.layout(),
            AttrStats::Nominal { .. } => None,
        }
    }

    pub fn numeric_bins(&self, feature: usize) -> Option<usize> {
        match self.attr_slot(feature)? {
            AttrStats::Numeric(hist) => Some(hist.bins()),
            AttrStats::Nominal { .. } => None,
        }
    }

    /// Observed weight per declared value of a nominal candidate.
    pub fn nominal_value_weights(&self, feature: usize) -> Option<Vec<F>> {
        match self.attr_slot(feature)? {
            AttrStats::Nominal { cells } => Some(cells.iter().map(|c| c.total()).collect()),
            AttrStats::Numeric(_) => None,
        }
    }

    /// Observed weight per histogram bin of a numeric candidate.
    pub fn numeric_bin_weights(&self, feature: usize) -> Option<Vec<F>> {
        match self.attr_slot(feature)? {
            AttrStats::Numeric(hist) => hist
                .cells()
                .map(|cells| cells.iter().map(|c| c.total()).collect()),
            AttrStats::Nominal { .. } => None,
        }
    }
}
