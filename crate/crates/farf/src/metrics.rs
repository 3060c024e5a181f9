//! Streaming decision metrics, each maintainable in O(1) per instance:
//! accumulated statistical parity, accuracy and kappa.

use serde::{Deserialize, Serialize};

use crate::core::{Group, GroupCounts, Label};
use crate::error::{FarfError, Result};
use crate::scalar::Scalar;

/// Signed statistical-parity gap of the accumulated cells: the positive
/// rate of the unprotected group minus that of the protected group. A
/// group with no weight contributes a rate of zero, so the value is total.
pub fn disc<F: Scalar>(counts: &GroupCounts<F>) -> F {
    let rate = |pos: F, neg: F| {
        let total = pos + neg;
        if total > F::zero() {
            pos / total
        } else {
            F::zero()
        }
    };
    rate(counts.u_pos, counts.u_neg) - rate(counts.p_pos, counts.p_neg)
}

/// What a tracker accumulates over: model decisions or ground-truth labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackerBasis {
    Predictions,
    Labels,
}

/// Accumulator for the four fairness cells plus the derived disc value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscTracker<F> {
    basis: TrackerBasis,
    counts: GroupCounts<F>,
}

impl<F: Scalar> DiscTracker<F> {
    pub fn new(basis: TrackerBasis) -> Self {
        DiscTracker {
            basis,
            counts: GroupCounts::new(),
        }
    }

    /// Tracker over model decisions, the default reporting flavor.
    pub fn predictions() -> Self {
        Self::new(TrackerBasis::Predictions)
    }

    /// Tracker over ground-truth labels, for dataset-bias diagnostics.
    pub fn labels() -> Self {
        Self::new(TrackerBasis::Labels)
    }

    pub fn basis(&self) -> TrackerBasis {
        self.basis
    }

    /// Adds `weight` to the cell for (group, outcome).
    pub fn record(&mut self, group: Group, outcome: Label, weight: F) -> Result<()> {
        self.counts.add(group, outcome, weight)
    }

    pub fn disc(&self) -> F {
        disc(&self.counts)
    }

    pub fn counts(&self) -> &GroupCounts<F> {
        &self.counts
    }

    pub fn total(&self) -> F {
        self.counts.total()
    }

    pub fn reset(&mut self) {
        self.counts = GroupCounts::new();
    }
}

/// Weighted binary confusion counts with accuracy and kappa.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ConfusionTracker<F> {
    tp: F,
    fp: F,
    tn: F,
    fn_: F,
}

impl<F: Scalar> ConfusionTracker<F> {
    pub fn new() -> Self {
        ConfusionTracker {
            tp: F::zero(),
            fp: F::zero(),
            tn: F::zero(),
            fn_: F::zero(),
        }
    }

    pub fn record(&mut self, truth: Label, predicted: Label, weight: F) -> Result<()> {
        if weight < F::zero() {
            return Err(FarfError::argument("negative weight"));
        }
        let cell = match (truth, predicted) {
            (Label::Positive, Label::Positive) => &mut self.tp,
            (Label::Negative, Label::Positive) => &mut self.fp,
            (Label::Negative, Label::Negative) => &mut self.tn,
            (Label::Positive, Label::Negative) => &mut self.fn_,
        };
        *cell = *cell + weight;
        Ok(())
    }

    pub fn total(&self) -> F {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn is_empty(&self) -> bool {
        self.total() <= F::zero()
    }

    pub fn cells(&self) -> (F, F, F, F) {
        (self.tp, self.fp, self.tn, self.fn_)
    }

    pub fn accuracy(&self) -> Result<F> {
        let total = self.total();
        if total <= F::zero() {
            return Err(FarfError::UndefinedStatistic(
                "accuracy of an empty tracker".into(),
            ));
        }
        Ok((self.tp + self.tn) / total)
    }

    /// Chance-corrected agreement. Defined as zero when the expected
    /// agreement from the marginals reaches one.
    pub fn kappa(&self) -> Result<F> {
        let total = self.total();
        if total <= F::zero() {
            return Err(FarfError::UndefinedStatistic(
                "kappa of an empty tracker".into(),
            ));
        }
        let observed = (self.tp + self.tn) / total;
        let pred_pos = (self.tp + self.fp) / total;
        let true_pos = (self.tp + self.fn_) / total;
        let expected =
            pred_pos * true_pos + (F::one() - pred_pos) * (F::one() - true_pos);
        if F::one() - expected <= F::epsilon() {
            return Ok(F::zero());
        }
        Ok((observed - expected) / (F::one() - expected))
    }

    pub fn reset(&mut self) {
        *self = ConfusionTracker::new();
    }
}
