//! Fair and adaptive random forests for evolving data streams.
//!
//! The crate provides incremental decision trees whose split criterion
//! trades information gain against statistical-parity gain, an online
//! ensemble with adaptive-windowing drift detection, standby trees and
//! fairness-weighted voting, discrimination-aware instance sampling, and a
//! prequential (test-then-train) evaluation harness with CSV/JSON outputs.
//!
//! All learners are generic over the scalar type via [`scalar::Scalar`];
//! concrete `f64`/`f32` aliases live at the crate root.

pub mod core;
pub mod dataio;
pub mod drift;
pub mod ensemble;
pub mod error;
pub mod evalharness;
pub mod fair_tree;
pub mod metrics;
pub mod sampling;
pub mod scalar;

pub use crate::error::{FarfError, Result};
pub use crate::scalar::Scalar;

pub type Instance64 = crate::core::Instance<f64>;
pub type GroupCounts64 = crate::core::GroupCounts<f64>;
pub type DiscTracker64 = crate::metrics::DiscTracker<f64>;
pub type ConfusionTracker64 = crate::metrics::ConfusionTracker<f64>;
pub type FairTree64 = crate::fair_tree::FairTree<f64>;
pub type SplitConfig64 = crate::fair_tree::SplitConfig<f64>;
pub type Adwin64 = crate::drift::Adwin<f64>;
pub type SamplingPolicy64 = crate::sampling::SamplingPolicy<f64>;
pub type FarfEnsemble64 = crate::ensemble::FarfEnsemble<f64>;
pub type RunConfig64 = crate::evalharness::RunConfig<f64>;

pub type Instance32 = crate::core::Instance<f32>;
pub type FairTree32 = crate::fair_tree::FairTree<f32>;
pub type Adwin32 = crate::drift::Adwin<f32>;
pub type FarfEnsemble32 = crate::ensemble::FarfEnsemble<f32>;
