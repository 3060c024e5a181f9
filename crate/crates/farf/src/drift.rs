//! Adaptive-windowing change detection over bounded real signals.
//!
//! The detector keeps a variable-length window of recent inputs in an
//! exponential-histogram layout and drops the older portion whenever two
//! subwindows show a statistically significant mean difference.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{FarfError, Result};
use crate::scalar::{cast, Scalar};

/// Outcome of feeding one value to a detector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Detection {
    Stable,
    Change,
}

impl Detection {
    pub fn is_change(self) -> bool {
        self == Detection::Change
    }
}

/// Interface for change detectors over `[0, 1]` signals, so alternative
/// detectors can be plugged into the ensemble.
pub trait ChangeDetector<F: Scalar> {
    fn add(&mut self, value: F) -> Result<Detection>;
    fn reset(&mut self);
    fn width(&self) -> u64;
}

/// Buckets per histogram level.
const MAX_BUCKETS: usize = 5;
/// Cut points are scanned once every this many insertions.
const CHECK_INTERVAL: u32 = 32;
/// Minimum total window before any cut is considered.
const MIN_WINDOW: u64 = 10;
/// Minimum elements on each side of a candidate cut.
const MIN_SUBWINDOW: u64 = 5;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct Bucket<F> {
    sum: F,
    /// Sum of squared deviations within the bucket.
    m2: F,
}

/// Adaptive-windowing detector with an exponential-histogram memory
/// footprint of `O(MAX_BUCKETS * log(width))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adwin<F> {
    delta: F,
    /// `rows[i]` holds buckets of `2^i` elements, oldest at the front.
    rows: Vec<VecDeque<Bucket<F>>>,
    total: F,
    /// Sum of squared deviations over the whole window.
    m2: F,
    width: u64,
    inserts_since_check: u32,
}

impl<F: Scalar> Adwin<F> {
    pub fn new(delta: F) -> Result<Self> {
        if !(delta > F::zero() && delta < F::one()) {
            return Err(FarfError::config("adwin delta must lie in (0, 1)"));
        }
        Ok(Adwin {
            delta,
            rows: vec![VecDeque::new()],
            total: F::zero(),
            m2: F::zero(),
            width: 0,
            inserts_since_check: 0,
        })
    }

    /// Detector with the customary default confidence 0.002.
    pub fn default_delta() -> Self {
        Adwin::new(cast(0.002)).expect("valid default delta")
    }

    pub fn delta(&self) -> F {
        self.delta
    }

    pub fn width(&self) -> u64 {
        self.width
    }

    /// Mean of the retained window.
    pub fn mean(&self) -> Result<F> {
        if self.width == 0 {
            return Err(FarfError::UndefinedStatistic(
                "mean of an empty window".into(),
            ));
        }
        Ok(self.total / F::from_count(self.width))
    }

    /// Variance of the retained window.
    pub fn variance(&self) -> Result<F> {
        if self.width == 0 {
            return Err(FarfError::UndefinedStatistic(
                "variance of an empty window".into(),
            ));
        }
        Ok(self.m2 / F::from_count(self.width))
    }

    pub fn reset(&mut self) {
        self.rows.clear();
        self.rows.push(VecDeque::new());
        self.total = F::zero();
        self.m2 = F::zero();
        self.width = 0;
        self.inserts_since_check = 0;
    }

    /// Inserts one value and reports whether the window was cut.
    pub fn add(&mut self, value: F) -> Result<Detection> {
        if !(value >= F::zero() && value <= F::one()) {
            return Err(FarfError::argument(format!(
                "adwin input {value} outside [0, 1]"
            )));
        }
        self.insert(value);
        self.inserts_since_check += 1;
        if self.inserts_since_check >= CHECK_INTERVAL {
            self.inserts_since_check = 0;
            if self.shrink_if_changed() {
                return Ok(Detection::Change);
            }
        }
        Ok(Detection::Stable)
    }

    fn insert(&mut self, value: F) {
        if self.width > 0 {
            let mean = self.total / F::from_count(self.width);
            let delta = value - mean;
            self.m2 = self.m2
                + delta * delta * F::from_count(self.width) / F::from_count(self.width + 1);
        }
        self.total = self.total + value;
        self.width += 1;
        self.rows[0].push_back(Bucket {
            sum: value,
            m2: F::zero(),
        });
        self.compress();
    }

    fn compress(&mut self) {
        let mut level = 0;
        while level < self.rows.len() {
            if self.rows[level].len() <= MAX_BUCKETS {
                break;
            }
            if level + 1 == self.rows.len() {
                self.rows.push(VecDeque::new());
            }
            let first = self.rows[level].pop_front().expect("bucket");
            let second = self.rows[level].pop_front().expect("bucket");
            let size = F::from_count(1 << level);
            let mean_gap = first.sum / size - second.sum / size;
            let merged = Bucket {
                sum: first.sum + second.sum,
                m2: first.m2 + second.m2 + size * size * mean_gap * mean_gap / (size + size),
            };
            self.rows[level + 1].push_back(merged);
            level += 1;
        }
    }

    /// Removes the oldest bucket, maintaining total and variance.
    fn drop_oldest(&mut self) {
        let level = match self.rows.iter().rposition(|row| !row.is_empty()) {
            Some(level) => level,
            None => return,
        };
        let bucket = self.rows[level].pop_front().expect("non-empty row");
        let count = 1u64 << level;
        self.width -= count;
        self.total = self.total - bucket.sum;
        if self.width == 0 {
            self.m2 = F::zero();
            return;
        }
        let n_removed = F::from_count(count);
        let n_left = F::from_count(self.width);
        let gap = bucket.sum / n_removed - self.total / n_left;
        self.m2 = self.m2 - bucket.m2 - n_removed * n_left * gap * gap / (n_removed + n_left);
        if self.m2 < F::zero() {
            self.m2 = F::zero();
        }
    }

    /// Scans cut points oldest-to-newest and drops older buckets while any
    /// pair of subwindows differs by more than the confidence radius.
    fn shrink_if_changed(&mut self) -> bool {
        let mut dropped = false;
        loop {
            if self.width < MIN_WINDOW {
                return dropped;
            }
            let width = F::from_count(self.width);
            let variance = self.m2 / width;
            let delta_prime = self.delta / width.log2();
            let ln_term = (cast::<F>(2.0) / delta_prime).ln();

            let mut cut = false;
            let mut n0 = 0u64;
            let mut sum0 = F::zero();
            'scan: for level in (0..self.rows.len()).rev() {
                let count = 1u64 << level;
                for bucket in &self.rows[level] {
                    n0 += count;
                    sum0 = sum0 + bucket.sum;
                    let n1 = self.width - n0;
                    if n1 < MIN_SUBWINDOW {
                        break 'scan;
                    }
                    if n0 < MIN_SUBWINDOW {
                        continue;
                    }
                    let f0 = F::from_count(n0);
                    let f1 = F::from_count(n1);
                    let mean0 = sum0 / f0;
                    let mean1 = (self.total - sum0) / f1;
                    // 1/m for the harmonic mean m of the subwindow sizes
                    let inv_m = F::one() / f0 + F::one() / f1;
                    let two = cast::<F>(2.0);
                    let epsilon = (two * inv_m * variance * ln_term).sqrt()
                        + two / cast::<F>(3.0) * inv_m * ln_term;
                    if (mean0 - mean1).abs() >= epsilon {
                        cut = true;
                        break 'scan;
                    }
                }
            }
            if !cut {
                return dropped;
            }
            self.drop_oldest();
            dropped = true;
        }
    }
}

impl<F: Scalar> ChangeDetector<F> for Adwin<F> {
    fn add(&mut self, value: F) -> Result<Detection> {
        Adwin::add(self, value)
    }

    fn reset(&mut self) {
        Adwin::reset(self)
    }

    fn width(&self) -> u64 {
        Adwin::width(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::RandomSource;

    fn bernoulli(rng: &mut RandomSource, p: f64) -> f64 {
        if rng.next_f64() < p {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn constant_signal_never_cuts() {
        let mut adwin = Adwin::<f64>::default_delta();
        for _ in 0..5000 {
            assert_eq!(adwin.add(0.5).unwrap(), Detection::Stable);
        }
        assert_eq!(adwin.width(), 5000);
        assert!((adwin.mean().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range_input() {
        let mut adwin = Adwin::<f64>::default_delta();
        assert!(adwin.add(1.5).is_err());
        assert!(adwin.add(-0.1).is_err());
        assert!(Adwin::<f64>::new(0.0).is_err());
        assert!(Adwin::<f64>::new(1.0).is_err());
    }

    #[test]
    fn mean_of_mixed_bits_is_half() {
        let mut adwin = Adwin::<f64>::default_delta();
        for i in 0..1000 {
            let v = if i % 2 == 0 { 0.0 } else { 1.0 };
            adwin.add(v).unwrap();
        }
        assert!((adwin.mean().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reset_empties_the_window() {
        let mut adwin = Adwin::<f64>::default_delta();
        for _ in 0..100 {
            adwin.add(1.0).unwrap();
        }
        adwin.reset();
        assert_eq!(adwin.width(), 0);
        assert!(adwin.mean().is_err());
    }

    #[test]
    fn detects_mean_shift_and_retains_recent_data() {
        let seeds = 10u64;
        let mut detected_within = 0;
        for seed in 0..seeds {
            let mut rng = RandomSource::new(seed);
            let mut adwin = Adwin::<f64>::default_delta();
            for _ in 0..500 {
                adwin.add(bernoulli(&mut rng, 0.2)).unwrap();
            }
            let mut detected_at = None;
            for i in 0..300 {
                if adwin.add(bernoulli(&mut rng, 0.8)).unwrap().is_change()
                    && detected_at.is_none()
                {
                    detected_at = Some(i + 1);
                }
            }
            let at = detected_at.expect("shift missed entirely");
            if at <= 120 {
                detected_within += 1;
            }
            let mean = adwin.mean().unwrap();
            assert!(
                (0.6..=1.0).contains(&mean),
                "window mean {mean} still dominated by stale data"
            );
        }
        assert_eq!(detected_within, seeds, "late detections");
    }

    #[test]
    fn window_mean_tracks_exact_suffix_mean() {
        let mut rng = RandomSource::new(11);
        let mut adwin = Adwin::<f64>::default_delta();
        let mut values: Vec<f64> = Vec::new();
        // stationary first, then a shift, so drops happen mid-stream
        for i in 0..4000 {
            let p = if i < 2000 { 0.3 } else { 0.7 };
            let v = bernoulli(&mut rng, p);
            values.push(v);
            adwin.add(v).unwrap();
            let kept = adwin.width() as usize;
            let exact: f64 = values[values.len() - kept..].iter().sum::<f64>() / kept as f64;
            let tolerance = if kept == values.len() { 1e-9 } else { 0.01 };
            assert!(
                (adwin.mean().unwrap() - exact).abs() <= tolerance,
                "window mean drifted from the exact suffix mean"
            );
        }
    }

    #[test]
    fn false_positives_are_rare_on_stationary_noise() {
        let mut changes = 0u64;
        for seed in 100..105 {
            let mut rng = RandomSource::new(seed);
            let mut adwin = Adwin::<f64>::default_delta();
            for _ in 0..20_000 {
                if adwin.add(bernoulli(&mut rng, 0.5)).unwrap().is_change() {
                    changes += 1;
                }
            }
        }
        assert!(changes <= 10, "{changes} cuts on stationary noise");
    }
}
