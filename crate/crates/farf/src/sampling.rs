//! Per-instance training-weight policies: Poisson online bagging, the
//! discrimination-driven automatic weight, a user-tunable fixed ratio, and
//! the two over-sampling ablation modes.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::core::{Group, Label, RandomSource};
use crate::error::{FarfError, Result};
use crate::scalar::Scalar;

/// How the Poisson draw is rescaled for each instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingMode<F> {
    /// Pure Poisson online bagging.
    Plain,
    /// Down-weights unprotected-positive instances by the accumulated
    /// discrimination whenever it is positive.
    Fair,
    /// Down-weights unprotected-positive instances by a fixed factor.
    Custom { alpha: F },
    /// Ablation: boosts protected-positive instances instead.
    OversampleProtected,
    /// Ablation: boosts protected positives and also applies the automatic
    /// unprotected-positive down-weighting.
    OverAndUnder,
}

impl<F: Scalar> SamplingMode<F> {
    pub fn name(&self) -> &'static str {
        match self {
            SamplingMode::Plain => "plain",
            SamplingMode::Fair => "fair",
            SamplingMode::Custom { .. } => "custom",
            SamplingMode::OversampleProtected => "oversample_protected",
            SamplingMode::OverAndUnder => "over_and_under",
        }
    }

    pub fn alpha(&self) -> Option<F> {
        match self {
            SamplingMode::Custom { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

/// Training-weight policy: a Poisson rate plus a rescaling mode, fixed for
/// the duration of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy<F> {
    mode: SamplingMode<F>,
    lambda: f64,
}

impl<F: Scalar> SamplingPolicy<F> {
    pub const DEFAULT_LAMBDA: f64 = 6.0;

    pub fn new(mode: SamplingMode<F>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(FarfError::config("poisson rate must be positive"));
        }
        if let SamplingMode::Custom { alpha } = mode {
            if !(alpha > F::zero() && alpha.is_finite()) {
                return Err(FarfError::config("alpha must be positive"));
            }
        }
        Ok(SamplingPolicy { mode, lambda })
    }

    pub fn plain() -> Self {
        Self::new(SamplingMode::Plain, Self::DEFAULT_LAMBDA).expect("valid")
    }

    pub fn fair() -> Self {
        Self::new(SamplingMode::Fair, Self::DEFAULT_LAMBDA).expect("valid")
    }

    pub fn custom(alpha: F) -> Result<Self> {
        Self::new(SamplingMode::Custom { alpha }, Self::DEFAULT_LAMBDA)
    }

    pub fn mode(&self) -> SamplingMode<F> {
        self.mode
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// One Poisson draw of the base replication count.
    pub fn poisson_weight(&self, rng: &mut RandomSource) -> u64 {
        let dist = Poisson::new(self.lambda).expect("positive rate");
        dist.sample(rng) as u64
    }

    /// Final training weight for one instance under the policy mode.
    /// `current_disc` is the accumulated prediction discrimination up to
    /// and including the current time step.
    pub fn instance_weight(&self, group: Group, label: Label, current_disc: F, k: u64) -> F {
        match self.mode {
            SamplingMode::Plain => F::from_count(k),
            SamplingMode::Fair => fair_weight(group, label, current_disc, k),
            SamplingMode::Custom { alpha } => custom_weight(alpha, group, label, k),
            SamplingMode::OversampleProtected => {
                oversample_protected_weight(group, label, current_disc, k)
            }
            SamplingMode::OverAndUnder => over_and_under_weight(group, label, current_disc, k),
        }
    }

    /// Weight under one of the two ablation modes; usage error otherwise.
    pub fn ablation_weight(
        &self,
        group: Group,
        label: Label,
        current_disc: F,
        k: u64,
    ) -> Result<F> {
        match self.mode {
            SamplingMode::OversampleProtected | SamplingMode::OverAndUnder => {
                Ok(self.instance_weight(group, label, current_disc, k))
            }
            _ => Err(FarfError::argument(
                "ablation weight requested for a non-ablation mode",
            )),
        }
    }
}

/// Automatic under-sampling: unprotected positives receive `disc * k`
/// while the accumulated discrimination is positive, everything else the
/// plain Poisson count.
pub fn fair_weight<F: Scalar>(group: Group, label: Label, current_disc: F, k: u64) -> F {
    let k = F::from_count(k);
    if group == Group::Unprotected && label == Label::Positive && current_disc > F::zero() {
        current_disc * k
    } else {
        k
    }
}

/// Fixed-ratio under-sampling of unprotected positives.
pub fn custom_weight<F: Scalar>(alpha: F, group: Group, label: Label, k: u64) -> F {
    let k = F::from_count(k);
    if group == Group::Unprotected && label == Label::Positive {
        alpha * k
    } else {
        k
    }
}

/// Ablation: protected positives boosted by `1 + max(0, disc)`.
pub fn oversample_protected_weight<F: Scalar>(
    group: Group,
    label: Label,
    current_disc: F,
    k: u64,
) -> F {
    let k = F::from_count(k);
    if group == Group::Protected && label == Label::Positive {
        (F::one() + current_disc.max(F::zero())) * k
    } else {
        k
    }
}

/// Ablation: protected-positive boost plus the automatic
/// unprotected-positive down-weighting.
pub fn over_and_under_weight<F: Scalar>(
    group: Group,
    label: Label,
    current_disc: F,
    k: u64,
) -> F {
    if group == Group::Protected && label == Label::Positive {
        oversample_protected_weight(group, label, current_disc, k)
    } else {
        fair_weight(group, label, current_disc, k)
    }
}
