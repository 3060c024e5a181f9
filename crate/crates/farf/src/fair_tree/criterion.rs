//! Split scoring: information gain, fairness gain, their combination, and
//! the confidence bound that gates splitting.

use serde::{Deserialize, Serialize};

use crate::core::GroupCounts;
use crate::error::{FarfError, Result};
use crate::fair_tree::stats::{AttrStats, LeafStats};
use crate::fair_tree::SplitConfig;
use crate::metrics::disc;
use crate::scalar::{cast, Scalar};

/// Magnitudes below this count as an exact zero fairness gain.
const FG_ZERO_TOLERANCE: f64 = 1e-12;

/// How an attribute partitions a leaf.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec<F> {
    /// One branch per declared nominal value.
    Multiway,
    /// Binary split on a histogram edge; values `v < threshold` go left.
    LessThan(F),
}

/// Outcome of a split attempt.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitDecision<F> {
    NoSplit,
    Split {
        feature: usize,
        spec: SplitSpec<F>,
        gain: F,
    },
}

/// Best split found for one candidate attribute.
#[derive(Clone, Copy, Debug)]
pub struct SplitCandidate<F> {
    pub feature: usize,
    pub spec: Option<SplitSpec<F>>,
    pub fig: F,
    pub ig: F,
    pub fg: F,
}

/// Shannon entropy of a binary class distribution, in bits.
pub fn entropy<F: Scalar>(neg: F, pos: F) -> F {
    let total = neg + pos;
    if total <= F::zero() {
        return F::zero();
    }
    let term = |count: F| {
        if count > F::zero() {
            let p = count / total;
            -p * p.log2()
        } else {
            F::zero()
        }
    };
    term(neg) + term(pos)
}

fn class_entropy<F: Scalar>(counts: &GroupCounts<F>) -> F {
    entropy(counts.negatives(), counts.positives())
}

/// Hoeffding confidence radius for a statistic with range `range` after
/// observing weight `n`.
pub fn hoeffding_bound<F: Scalar>(range: F, delta: F, n: F) -> Result<F> {
    if n <= F::zero() {
        return Err(FarfError::argument("hoeffding bound needs positive weight"));
    }
    Ok((range * range * (F::one() / delta).ln() / (cast::<F>(2.0) * n)).sqrt())
}

/// Combines information gain and fairness gain: the product, except that an
/// exactly neutral fairness gain leaves the information gain untouched.
pub fn fair_info_gain<F: Scalar>(ig: F, fg: F) -> F {
    if fg.abs() < cast(FG_ZERO_TOLERANCE) {
        ig
    } else {
        ig * fg
    }
}

/// Parent cells and the non-empty partition cells induced by a split.
fn partitions<F: Scalar>(
    leaf: &LeafStats<F>,
    feature: usize,
    spec: &SplitSpec<F>,
) -> Result<(GroupCounts<F>, Vec<GroupCounts<F>>)> {
    let stats = leaf
        .attr_slot(feature)
        .ok_or_else(|| FarfError::argument(format!("feature {feature} is not a candidate")))?;
    match (stats, spec) {
        (AttrStats::Nominal { cells }, SplitSpec::Multiway) => {
            let mut parent = GroupCounts::new();
            let mut parts = Vec::new();
            for cell in cells {
                parent.accumulate(cell);
                if !cell.is_empty() {
                    parts.push(*cell);
                }
            }
            Ok((parent, parts))
        }
        (AttrStats::Numeric(hist), SplitSpec::LessThan(threshold)) => {
            if let Some(point) = hist.point() {
                return Ok((*point, vec![*point]));
            }
            let (lo, width) = match hist.layout() {
                Some(layout) => layout,
                None => return Ok((GroupCounts::new(), Vec::new())),
            };
            let cells = hist.cells().expect("binned");
            let bins = hist.bins();
            let edge = ((*threshold - lo) / width)
                .round()
                .to_usize()
                .unwrap_or(0)
                .clamp(1, bins - 1);
            let mut left = GroupCounts::new();
            let mut right = GroupCounts::new();
            for cell in &cells[..edge] {
                left.accumulate(cell);
            }
            for cell in &cells[edge..] {
                right.accumulate(cell);
            }
            let mut parent = left;
            parent.accumulate(&right);
            let parts = [left, right]
                .into_iter()
                .filter(|c| !c.is_empty())
                .collect();
            Ok((parent, parts))
        }
        _ => Err(FarfError::argument(
            "split specification does not match the attribute kind",
        )),
    }
}

/// Information gain of a split: parent entropy minus the weighted child
/// entropies, over the instances where the attribute is present. Zero
/// unless the split yields at least two non-empty partitions.
pub fn info_gain<F: Scalar>(leaf: &LeafStats<F>, feature: usize, spec: &SplitSpec<F>) -> Result<F> {
    let (parent, parts) = partitions(leaf, feature, spec)?;
    Ok(info_gain_of(&parent, &parts))
}

/// Fairness gain of a split: the parent's absolute discrimination minus the
/// sum of the partitions' absolute discriminations.
pub fn fairness_gain<F: Scalar>(
    leaf: &LeafStats<F>,
    feature: usize,
    spec: &SplitSpec<F>,
) -> Result<F> {
    let (parent, parts) = partitions(leaf, feature, spec)?;
    Ok(fairness_gain_of(&parent, &parts))
}

pub(crate) fn info_gain_of<F: Scalar>(parent: &GroupCounts<F>, parts: &[GroupCounts<F>]) -> F {
    if parts.len() < 2 {
        return F::zero();
    }
    let total = parent.total();
    let children: F = parts
        .iter()
        .map(|part| part.total() / total * class_entropy(part))
        .sum();
    class_entropy(parent) - children
}

pub(crate) fn fairness_gain_of<F: Scalar>(parent: &GroupCounts<F>, parts: &[GroupCounts<F>]) -> F {
    let children: F = parts.iter().map(|part| disc(part).abs()).sum();
    disc(parent).abs() - children
}

fn score<F: Scalar>(parent: &GroupCounts<F>, parts: &[GroupCounts<F>], fair: bool) -> (F, F, F) {
    let ig = info_gain_of(parent, parts);
    let fg = if fair {
        fairness_gain_of(parent, parts)
    } else {
        F::zero()
    };
    (fair_info_gain(ig, fg), ig, fg)
}

/// Best split (by combined gain) for one candidate attribute. Attributes
/// that admit no valid split score zero with no spec.
pub fn best_split_for<F: Scalar>(
    leaf: &LeafStats<F>,
    feature: usize,
    use_fair_gain: bool,
) -> Result<SplitCandidate<F>> {
    let stats = leaf
        .attr_slot(feature)
        .ok_or_else(|| FarfError::argument(format!("feature {feature} is not a candidate")))?;
    let mut candidate = SplitCandidate {
        feature,
        spec: None,
        fig: F::zero(),
        ig: F::zero(),
        fg: F::zero(),
    };
    match stats {
        AttrStats::Nominal { cells } => {
            let mut parent = GroupCounts::new();
            let mut parts = Vec::new();
            for cell in cells {
                parent.accumulate(cell);
                if !cell.is_empty() {
                    parts.push(*cell);
                }
            }
            if parts.len() >= 2 {
                let (fig, ig, fg) = score(&parent, &parts, use_fair_gain);
                candidate = SplitCandidate {
                    feature,
                    spec: Some(SplitSpec::Multiway),
                    fig,
                    ig,
                    fg,
                };
            }
        }
        AttrStats::Numeric(hist) => {
            let (lo, width) = match hist.layout() {
                Some(layout) => layout,
                None => return Ok(candidate),
            };
            let cells = hist.cells().expect("binned");
            let bins = hist.bins();
            // suffix sums keep each side an exact sum of cells
            let mut suffix = vec![GroupCounts::new(); bins + 1];
            for i in (0..bins).rev() {
                suffix[i] = suffix[i + 1];
                suffix[i].accumulate(&cells[i]);
            }
            let parent = suffix[0];
            let mut left = GroupCounts::new();
            for edge in 1..bins {
                left.accumulate(&cells[edge - 1]);
                if left.is_empty() {
                    continue;
                }
                let right = suffix[edge];
                if right.is_empty() {
                    break;
                }
                let parts = [left, right];
                let (fig, ig, fg) = score(&parent, &parts, use_fair_gain);
                if candidate.spec.is_none() || fig > candidate.fig {
                    let threshold = lo + F::from_count(edge as u64) * width;
                    candidate = SplitCandidate {
                        feature,
                        spec: Some(SplitSpec::LessThan(threshold)),
                        fig,
                        ig,
                        fg,
                    };
                }
            }
        }
    }
    Ok(candidate)
}

/// Ranks the leaf's candidate attributes by combined gain and applies the
/// confidence gate: split when the leader's margin over the runner-up
/// exceeds the Hoeffding radius (or the radius is below the tie threshold)
/// and the leader's gain is strictly positive.
pub fn try_split<F: Scalar>(leaf: &LeafStats<F>, config: &SplitConfig<F>) -> SplitDecision<F> {
    let mut best: Option<SplitCandidate<F>> = None;
    let mut second_fig = F::zero();
    for &feature in leaf.features() {
        let candidate =
            best_split_for(leaf, feature, config.use_fair_gain).expect("candidate feature");
        match &best {
            Some(leader) if candidate.fig <= leader.fig => {
                if candidate.fig > second_fig {
                    second_fig = candidate.fig;
                }
            }
            _ => {
                if let Some(leader) = best.take() {
                    if leader.fig > second_fig {
                        second_fig = leader.fig;
                    }
                }
                best = Some(candidate);
            }
        }
    }
    let best = match best {
        Some(candidate) => candidate,
        None => return SplitDecision::NoSplit,
    };
    let spec = match best.spec {
        Some(spec) => spec,
        None => return SplitDecision::NoSplit,
    };
    if best.fig <= F::zero() {
        return SplitDecision::NoSplit;
    }
    let n = leaf.total_weight();
    if n <= F::zero() {
        return SplitDecision::NoSplit;
    }
    let epsilon = hoeffding_bound(F::one(), config.delta, n).expect("positive weight");
    if best.fig - second_fig > epsilon || epsilon < config.tie_threshold {
        SplitDecision::Split {
            feature: best.feature,
            spec,
            gain: best.fig,
        }
    } else {
        SplitDecision::NoSplit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Attribute, FeatureValue, Group, Instance, Label, StreamSchema};

    fn abs_diff(a: f64, b: f64) -> f64 {
        (a - b).abs()
    }

    #[test]
    fn entropy_hand_values() {
        assert!(abs_diff(entropy(50.0, 50.0), 1.0) < 1e-12);
        assert_eq!(entropy(100.0, 0.0), 0.0);
        assert_eq!(entropy(0.0, 0.0), 0.0);
        assert!(abs_diff(entropy(25.0, 75.0), 0.8112781244591328) < 1e-12);
    }

    #[test]
    fn hoeffding_bound_hand_values() {
        let eps = hoeffding_bound(1.0, 1e-7, 1000.0).unwrap();
        assert!(abs_diff(eps, 0.0897722) < 1e-6);
        // monotone decreasing in n
        assert!(hoeffding_bound(1.0, 1e-7, 10_000.0).unwrap() < eps);
        assert_eq!(hoeffding_bound(1.0, 1.0, 500.0).unwrap(), 0.0);
        assert!(hoeffding_bound(1.0, 1e-7, 0.0).is_err());
    }

    #[test]
    fn fair_info_gain_branches() {
        assert_eq!(fair_info_gain(0.5, 0.0), 0.5);
        assert!(abs_diff(fair_info_gain(0.5, 0.05), 0.025) < 1e-15);
        assert!(abs_diff(fair_info_gain(0.5, -0.1), -0.05) < 1e-15);
        assert_eq!(fair_info_gain(0.5, 1e-13), 0.5);
    }

    /// Schema with one nominal candidate plus the mandatory group column.
    fn nominal_schema(values: &[&str]) -> StreamSchema {
        StreamSchema::new(
            vec![
                Attribute::nominal("a", values),
                Attribute::nominal("g", &["u", "p"]),
                Attribute::nominal("y", &["neg", "pos"]),
            ],
            "g",
            "p",
            "y",
            "pos",
        )
        .unwrap()
    }

    fn feed(
        leaf: &mut LeafStats<f64>,
        schema: &StreamSchema,
        value: u32,
        group: Group,
        label: Label,
        weight: f64,
    ) {
        let g_code = if group == Group::Protected { 1 } else { 0 };
        let x = Instance::new(
            schema,
            vec![FeatureValue::Nominal(value), FeatureValue::Nominal(g_code)],
            group,
            label,
            0,
        )
        .unwrap();
        leaf.update(&x, weight);
    }

    #[test]
    fn info_gain_hand_example() {
        // parent (60+, 40-); children (50+, 10-) and (10+, 30-)
        let schema = nominal_schema(&["v0", "v1"]);
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 50.0);
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Negative, 10.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Positive, 10.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Negative, 30.0);
        let ig = info_gain(&leaf, 0, &SplitSpec::Multiway).unwrap();
        assert!(abs_diff(ig, 0.2564258916820030) < 1e-9);
        assert!(info_gain(&leaf, 5, &SplitSpec::Multiway).is_err());
    }

    #[test]
    fn info_gain_degenerate_cases() {
        let schema = nominal_schema(&["v0", "v1"]);

        // perfect separator on a 50/50 class mix
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 50.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Negative, 50.0);
        assert!(abs_diff(info_gain(&leaf, 0, &SplitSpec::Multiway).unwrap(), 1.0) < 1e-12);

        // split independent of class
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        for value in [0, 1] {
            feed(&mut leaf, &schema, value, Group::Unprotected, Label::Positive, 30.0);
            feed(&mut leaf, &schema, value, Group::Unprotected, Label::Negative, 30.0);
        }
        assert!(info_gain(&leaf, 0, &SplitSpec::Multiway).unwrap().abs() < 1e-12);

        // single observed value: one partition, gain defined as zero
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 10.0);
        assert_eq!(info_gain(&leaf, 0, &SplitSpec::Multiway).unwrap(), 0.0);
    }

    #[test]
    fn fairness_gain_hand_examples() {
        let schema = nominal_schema(&["v0", "v1"]);

        // single observed value: identical partition, zero gain
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 7.0);
        feed(&mut leaf, &schema, 0, Group::Protected, Label::Negative, 3.0);
        assert_eq!(fairness_gain(&leaf, 0, &SplitSpec::Multiway).unwrap(), 0.0);

        // children discs 0.1 and 0.05 against their summed parent
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 2.0);
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Negative, 8.0);
        feed(&mut leaf, &schema, 0, Group::Protected, Label::Positive, 1.0);
        feed(&mut leaf, &schema, 0, Group::Protected, Label::Negative, 9.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Positive, 15.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Negative, 85.0);
        feed(&mut leaf, &schema, 1, Group::Protected, Label::Positive, 10.0);
        feed(&mut leaf, &schema, 1, Group::Protected, Label::Negative, 90.0);
        // parent: u 17/110, p 11/110 -> disc 0.1545..-0.1; children 0.1, 0.05
        let parent_disc: f64 = 17.0 / 110.0 - 11.0 / 110.0;
        let expected = parent_disc.abs() - (0.1 + 0.05);
        let fg = fairness_gain(&leaf, 0, &SplitSpec::Multiway).unwrap();
        assert!(abs_diff(fg, expected) < 1e-12);

        // fair parent, discriminatory children: penalized
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 3.0);
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Negative, 7.0);
        feed(&mut leaf, &schema, 0, Group::Protected, Label::Negative, 10.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Negative, 10.0);
        feed(&mut leaf, &schema, 1, Group::Protected, Label::Positive, 3.0);
        feed(&mut leaf, &schema, 1, Group::Protected, Label::Negative, 7.0);
        let fg = fairness_gain(&leaf, 0, &SplitSpec::Multiway).unwrap();
        assert!(abs_diff(fg, -0.6) < 1e-12);
    }

    #[test]
    fn try_split_requires_positive_gain() {
        let schema = nominal_schema(&["v0", "v1"]);
        let config = SplitConfig::<f64>::default();

        // v0 never appears with a positive class: splitting only raises
        // child discrimination, so the combined gain is negative.
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 300.0);
        feed(&mut leaf, &schema, 0, Group::Protected, Label::Negative, 300.0);
        feed(&mut leaf, &schema, 1, Group::Protected, Label::Positive, 300.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Negative, 300.0);
        // parent disc = 0.5-0.5 = 0; each child fully one-sided
        let fg = fairness_gain(&leaf, 0, &SplitSpec::Multiway).unwrap();
        assert!(fg < 0.0);
        assert_eq!(try_split(&leaf, &config), SplitDecision::NoSplit);
    }

    #[test]
    fn try_split_accepts_clear_winner() {
        let schema = nominal_schema(&["v0", "v1"]);
        let config = SplitConfig::<f64>::default();
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        // perfect predictor, balanced groups inside each value
        for (value, label) in [(0, Label::Positive), (1, Label::Negative)] {
            feed(&mut leaf, &schema, value, Group::Unprotected, label, 2500.0);
            feed(&mut leaf, &schema, value, Group::Protected, label, 2500.0);
        }
        match try_split(&leaf, &config) {
            SplitDecision::Split { feature, gain, .. } => {
                assert_eq!(feature, 0);
                assert!(gain > 0.0);
            }
            SplitDecision::NoSplit => panic!("expected a split"),
        }
    }

    #[test]
    fn try_split_cannot_separate_clones() {
        // two identical attributes, small sample: the margin never clears
        // the bound and the bound stays above the tie threshold
        let schema = StreamSchema::new(
            vec![
                Attribute::nominal("a", &["v0", "v1"]),
                Attribute::nominal("b", &["v0", "v1"]),
                Attribute::nominal("g", &["u", "p"]),
                Attribute::nominal("y", &["neg", "pos"]),
            ],
            "g",
            "p",
            "y",
            "pos",
        )
        .unwrap();
        let config = SplitConfig::<f64>::default();
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0, 1]).unwrap();
        for (value, label, w) in [
            (0u32, Label::Positive, 6.0),
            (0u32, Label::Negative, 2.0),
            (1u32, Label::Negative, 6.0),
            (1u32, Label::Positive, 2.0),
        ] {
            let x = Instance::new(
                &schema,
                vec![
                    FeatureValue::Nominal(value),
                    FeatureValue::Nominal(value),
                    FeatureValue::Nominal(0),
                ],
                Group::Unprotected,
                label,
                0,
            )
            .unwrap();
            leaf.update(&x, w);
        }
        let eps = hoeffding_bound(1.0, config.delta, leaf.total_weight()).unwrap();
        assert!(eps > config.tie_threshold);
        assert_eq!(try_split(&leaf, &config), SplitDecision::NoSplit);
    }

    #[test]
    fn fig_equals_ig_when_fairness_gain_vanishes() {
        // equal group rates inside every partition and in the parent: the
        // fairness gain is exactly zero and the criterion reduces to
        // information gain
        let schema = nominal_schema(&["v0", "v1"]);
        let mut leaf = LeafStats::tracking(&schema, 8, vec![0]).unwrap();
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Positive, 10.0);
        feed(&mut leaf, &schema, 0, Group::Unprotected, Label::Negative, 10.0);
        feed(&mut leaf, &schema, 0, Group::Protected, Label::Positive, 5.0);
        feed(&mut leaf, &schema, 0, Group::Protected, Label::Negative, 5.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Positive, 2.0);
        feed(&mut leaf, &schema, 1, Group::Unprotected, Label::Negative, 18.0);
        feed(&mut leaf, &schema, 1, Group::Protected, Label::Positive, 1.0);
        feed(&mut leaf, &schema, 1, Group::Protected, Label::Negative, 9.0);
        let ig = info_gain(&leaf, 0, &SplitSpec::Multiway).unwrap();
        let fg = fairness_gain(&leaf, 0, &SplitSpec::Multiway).unwrap();
        assert!(ig > 0.1);
        assert_eq!(fg, 0.0);
        assert_eq!(fair_info_gain(ig, fg), ig);
    }
}
