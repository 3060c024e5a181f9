//! The online fair forest: M incremental fair trees trained with
//! policy-weighted Poisson sampling, per-member drift detection on both an
//! accuracy and a fairness signal, standby trees promoted by fairness
//! comparison, and fairness-weighted anytime voting.

use serde::{Deserialize, Serialize};

use crate::core::{Group, Instance, Label, RandomSource, SchemaRef};
use crate::drift::Adwin;
use crate::error::{FarfError, Result};
use crate::fair_tree::{FairTree, Prediction, SplitConfig};
use crate::metrics::{ConfusionTracker, DiscTracker};
use crate::sampling::SamplingPolicy;
use crate::scalar::{cast, Scalar};

const SNAPSHOT_FORMAT: &str = "farf-ensemble";
const SNAPSHOT_VERSION: u32 = 1;

/// Which prequential statistic drives member replacement and vote weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationBasis {
    /// Replace and weight by absolute discrimination (the default).
    Fairness,
    /// Replace and weight by prequential error instead.
    Accuracy,
}

/// Ensemble hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct FarfConfig<F> {
    /// Number of base models.
    pub members: usize,
    pub split: SplitConfig<F>,
    /// Confidence for every per-member change detector.
    pub adwin_delta: F,
    /// Lower bound on vote weights.
    pub vote_floor: F,
    /// Feed group-wise positive-rate signals to per-member detectors.
    pub fairness_drift_detection: bool,
    pub adaptation: AdaptationBasis,
}

impl<F: Scalar> Default for FarfConfig<F> {
    fn default() -> Self {
        FarfConfig {
            members: 10,
            split: SplitConfig::default(),
            adwin_delta: cast(0.002),
            vote_floor: cast(0.01),
            fairness_drift_detection: true,
            adaptation: AdaptationBasis::Fairness,
        }
    }
}

impl<F: Scalar> FarfConfig<F> {
    pub fn validate(&self, feature_count: usize) -> Result<()> {
        if self.members < 1 {
            return Err(FarfError::config("ensemble needs at least one member"));
        }
        if !(self.vote_floor > F::zero() && self.vote_floor <= F::one()) {
            return Err(FarfError::config("vote floor must lie in (0, 1]"));
        }
        self.split.validate(feature_count)
    }
}

/// Background learner trained alongside a member, with its own prequential
/// trackers since creation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
struct StandbyTree<F> {
    tree: FairTree<F>,
    disc: DiscTracker<F>,
    conf: ConfusionTracker<F>,
}

/// One base model plus its detectors and prequential trackers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct EnsembleMember<F> {
    tree: FairTree<F>,
    standby: Option<StandbyTree<F>>,
    acc_detector: Adwin<F>,
    fair_detector_protected: Adwin<F>,
    fair_detector_unprotected: Adwin<F>,
    /// Discrimination of this member's own predictions since its last
    /// reset or replacement.
    member_disc: DiscTracker<F>,
    member_conf: ConfusionTracker<F>,
    rng: RandomSource,
}

impl<F: Scalar> EnsembleMember<F> {
    fn new(
        schema: &SchemaRef,
        config: &FarfConfig<F>,
        rng: &mut RandomSource,
    ) -> Result<Self> {
        let mut member_rng = rng.fork();
        let tree_seed = member_rng.fork().seed();
        Ok(EnsembleMember {
            tree: FairTree::new(schema.clone(), config.split, tree_seed)?,
            standby: None,
            acc_detector: Adwin::new(config.adwin_delta)?,
            fair_detector_protected: Adwin::new(config.adwin_delta)?,
            fair_detector_unprotected: Adwin::new(config.adwin_delta)?,
            member_disc: DiscTracker::predictions(),
            member_conf: ConfusionTracker::new(),
            rng: member_rng,
        })
    }

    pub fn tree(&self) -> &FairTree<F> {
        &self.tree
    }

    pub fn has_standby(&self) -> bool {
        self.standby.is_some()
    }

    pub fn disc(&self) -> F {
        self.member_disc.disc()
    }

    fn vote_weight(&self, basis: AdaptationBasis, floor: F) -> F {
        let raw = match basis {
            AdaptationBasis::Fairness => F::one() - self.member_disc.disc().abs(),
            AdaptationBasis::Accuracy => self.member_conf.accuracy().unwrap_or(floor),
        };
        raw.max(floor)
    }

    fn reset_after_replacement(&mut self) {
        self.member_disc.reset();
        self.member_conf.reset();
        self.acc_detector.reset();
        self.fair_detector_protected.reset();
        self.fair_detector_unprotected.reset();
    }
}

/// What happened while adapting one member.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptAction {
    StandbyCreated,
    Replaced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DriftEvent {
    pub member: usize,
    pub action: AdaptAction,
}

/// Per-instance outcome: the ensemble's prequential prediction (made
/// before any training), the training weight each member received, and
/// any adaptation events.
#[derive(Clone, Debug)]
pub struct StepReport<F> {
    pub prediction: Label,
    /// Normalized `[negative, positive]` vote scores.
    pub scores: [F; 2],
    pub weights: Vec<F>,
    pub events: Vec<DriftEvent>,
}

/// The fair and adaptive online forest.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct FarfEnsemble<F> {
    schema: SchemaRef,
    config: FarfConfig<F>,
    policy: SamplingPolicy<F>,
    members: Vec<EnsembleMember<F>>,
    /// Accumulated discrimination of the ensemble's own predictions; the
    /// automatic sampling weight reads this.
    global_disc: DiscTracker<F>,
}

impl<F: Scalar> FarfEnsemble<F> {
    pub fn new(
        schema: SchemaRef,
        config: FarfConfig<F>,
        policy: SamplingPolicy<F>,
        seed: u64,
    ) -> Result<Self> {
        config.validate(schema.feature_count())?;
        let mut root = RandomSource::new(seed);
        let members = (0..config.members)
            .map(|_| EnsembleMember::new(&schema, &config, &mut root))
            .collect::<Result<Vec<_>>>()?;
        Ok(FarfEnsemble {
            schema,
            config,
            policy,
            members,
            global_disc: DiscTracker::predictions(),
        })
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn config(&self) -> &FarfConfig<F> {
        &self.config
    }

    pub fn policy(&self) -> &SamplingPolicy<F> {
        &self.policy
    }

    pub fn members(&self) -> &[EnsembleMember<F>] {
        &self.members
    }

    /// Accumulated discrimination of the ensemble's predictions so far.
    pub fn accumulated_disc(&self) -> F {
        self.global_disc.disc()
    }

    fn member_predictions(&self, x: &Instance<F>) -> Vec<Prediction<F>> {
        self.members.iter().map(|m| m.tree.predict(x)).collect()
    }

    fn vote(&self, member_predictions: &[Prediction<F>]) -> Prediction<F> {
        let mut scores = [F::zero(); 2];
        for (member, prediction) in self.members.iter().zip(member_predictions) {
            let weight = member.vote_weight(self.config.adaptation, self.config.vote_floor);
            scores[prediction.label.index()] = scores[prediction.label.index()] + weight;
        }
        let total = scores[0] + scores[1];
        if total > F::zero() {
            scores[0] = scores[0] / total;
            scores[1] = scores[1] / total;
        }
        Prediction::from_scores(scores)
    }

    /// Anytime weighted vote over the current members.
    pub fn predict(&self, x: &Instance<F>) -> Prediction<F> {
        self.vote(&self.member_predictions(x))
    }

    /// One prequential step: predict, account, weight, train members,
    /// adapt on detector fires, then train standbys.
    pub fn learn_one(&mut self, x: &Instance<F>) -> Result<StepReport<F>> {
        if x.values().len() != self.schema.feature_count() {
            return Err(FarfError::schema(
                "instance arity does not match the ensemble's schema",
            ));
        }
        let member_predictions = self.member_predictions(x);
        let voted = self.vote(&member_predictions);
        self.global_disc.record(x.group(), voted.label, F::one())?;
        let disc_now = self.global_disc.disc();

        let mut weights = Vec::with_capacity(self.members.len());
        let mut events = Vec::new();
        for (index, member) in self.members.iter_mut().enumerate() {
            let own = member_predictions[index].label;
            member.member_disc.record(x.group(), own, F::one())?;
            member.member_conf.record(x.label(), own, F::one())?;

            let correct = if own == x.label() { F::one() } else { F::zero() };
            let mut fired = member.acc_detector.add(correct)?.is_change();
            if self.config.fairness_drift_detection {
                let positive = if own == Label::Positive {
                    F::one()
                } else {
                    F::zero()
                };
                let fairness_fired = match x.group() {
                    Group::Protected => member.fair_detector_protected.add(positive)?,
                    Group::Unprotected => member.fair_detector_unprotected.add(positive)?,
                }
                .is_change();
                fired = fired || fairness_fired;
            }

            let k = self.policy.poisson_weight(&mut member.rng);
            let weight = self
                .policy
                .instance_weight(x.group(), x.label(), disc_now, k);
            member.tree.learn_one(x, weight)?;
            weights.push(weight);

            if fired {
                if let Some(action) = adapt_member(
                    member,
                    &self.schema,
                    &self.config,
                )? {
                    events.push(DriftEvent {
                        member: index,
                        action,
                    });
                }
            }
        }

        for (index, member) in self.members.iter_mut().enumerate() {
            if let Some(standby) = member.standby.as_mut() {
                let own = standby.tree.predict(x).label;
                standby.disc.record(x.group(), own, F::one())?;
                standby.conf.record(x.label(), own, F::one())?;
                standby.tree.learn_one(x, weights[index])?;
            }
        }

        Ok(StepReport {
            prediction: voted.label,
            scores: voted.scores,
            weights,
            events,
        })
    }

    /// Versioned textual snapshot sufficient to resume a run bit-exactly.
    pub fn to_snapshot_json(&self) -> Result<String> {
        let snapshot = Snapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            model: self,
        };
        Ok(serde_json::to_string(&snapshot)?)
    }

    pub fn from_snapshot_json(json: &str) -> Result<Self> {
        let snapshot: SnapshotOwned<F> = serde_json::from_str(json)?;
        if snapshot.format != SNAPSHOT_FORMAT {
            return Err(FarfError::config(format!(
                "unknown snapshot format '{}'",
                snapshot.format
            )));
        }
        if snapshot.version != SNAPSHOT_VERSION {
            return Err(FarfError::config(format!(
                "unsupported snapshot version {}",
                snapshot.version
            )));
        }
        Ok(snapshot.model)
    }
}

/// Creates a standby on the first detection; on later detections promotes
/// it when the member tracks strictly worse than the standby.
fn adapt_member<F: Scalar>(
    member: &mut EnsembleMember<F>,
    schema: &SchemaRef,
    config: &FarfConfig<F>,
) -> Result<Option<AdaptAction>> {
    match member.standby.take() {
        None => {
            let seed = member.rng.fork().seed();
            member.standby = Some(StandbyTree {
                tree: FairTree::new(schema.clone(), config.split, seed)?,
                disc: DiscTracker::predictions(),
                conf: ConfusionTracker::new(),
            });
            Ok(Some(AdaptAction::StandbyCreated))
        }
        Some(standby) => {
            let member_worse = match config.adaptation {
                AdaptationBasis::Fairness => {
                    member.member_disc.disc().abs() > standby.disc.disc().abs()
                }
                AdaptationBasis::Accuracy => {
                    let member_error =
                        F::one() - member.member_conf.accuracy().unwrap_or(F::zero());
                    let standby_error =
                        F::one() - standby.conf.accuracy().unwrap_or(F::zero());
                    member_error > standby_error
                }
            };
            if member_worse {
                member.tree = standby.tree;
                member.reset_after_replacement();
                Ok(Some(AdaptAction::Replaced))
            } else {
                member.standby = Some(standby);
                Ok(None)
            }
        }
    }
}

#[derive(Serialize)]
#[serde(bound(serialize = "F: Scalar"))]
struct Snapshot<'a, F> {
    format: String,
    version: u32,
    model: &'a FarfEnsemble<F>,
}

#[derive(Deserialize)]
#[serde(bound(deserialize = "F: Scalar"))]
struct SnapshotOwned<F> {
    format: String,
    version: u32,
    model: FarfEnsemble<F>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{Attribute, FeatureValue, StreamSchema};
    use std::sync::Arc;

    fn schema() -> SchemaRef {
        Arc::new(
            StreamSchema::new(
                vec![
                    Attribute::numeric("signal"),
                    Attribute::numeric("noise"),
                    Attribute::nominal("g", &["u", "p"]),
                    Attribute::nominal("y", &["neg", "pos"]),
                ],
                "g",
                "p",
                "y",
                "pos",
            )
            .unwrap(),
        )
    }

    /// Separable concept with a 0.2 positive-rate gap between groups;
    /// `inverted` flips the feature-label relationship.
    fn stream_instance(
        rng: &mut RandomSource,
        schema: &SchemaRef,
        t: u64,
        inverted: bool,
    ) -> Instance<f64> {
        let group = if rng.next_f64() < 0.4 {
            Group::Protected
        } else {
            Group::Unprotected
        };
        let positive_rate = if group == Group::Protected { 0.4 } else { 0.6 };
        let label = if rng.next_f64() < positive_rate {
            Label::Positive
        } else {
            Label::Negative
        };
        let mut signal = if label == Label::Positive {
            0.05 + 0.95 * rng.next_f64()
        } else {
            -1.0 + 0.95 * rng.next_f64()
        };
        if inverted {
            signal = -signal;
        }
        let g_code = if group == Group::Protected { 1 } else { 0 };
        Instance::new(
            schema,
            vec![
                FeatureValue::Numeric(signal),
                FeatureValue::Numeric(rng.next_f64()),
                FeatureValue::Nominal(g_code),
            ],
            group,
            label,
            t,
        )
        .unwrap()
    }

    fn small_config() -> FarfConfig<f64> {
        FarfConfig {
            members: 5,
            ..FarfConfig::default()
        }
    }

    #[test]
    fn rejects_empty_ensembles() {
        let config = FarfConfig::<f64> {
            members: 0,
            ..FarfConfig::default()
        };
        assert!(FarfEnsemble::new(schema(), config, SamplingPolicy::fair(), 1).is_err());
    }

    #[test]
    fn single_member_vote_is_that_members_prediction() {
        let schema = schema();
        let config = FarfConfig::<f64> {
            members: 1,
            ..FarfConfig::default()
        };
        let mut farf =
            FarfEnsemble::new(schema.clone(), config, SamplingPolicy::fair(), 3).unwrap();
        let mut rng = RandomSource::new(4);
        for t in 0..500 {
            let x = stream_instance(&mut rng, &schema, t, false);
            let ensemble = farf.predict(&x).label;
            let member = farf.members[0].tree.predict(&x).label;
            assert_eq!(ensemble, member);
            farf.learn_one(&x).unwrap();
        }
    }

    #[test]
    fn identical_seeds_give_identical_prediction_sequences() {
        let schema = schema();
        let mut a =
            FarfEnsemble::new(schema.clone(), small_config(), SamplingPolicy::fair(), 9).unwrap();
        let mut b =
            FarfEnsemble::new(schema.clone(), small_config(), SamplingPolicy::fair(), 9).unwrap();
        let mut rng = RandomSource::new(10);
        for t in 0..2000 {
            let x = stream_instance(&mut rng, &schema, t, false);
            let ra = a.learn_one(&x).unwrap();
            let rb = b.learn_one(&x).unwrap();
            assert_eq!(ra.prediction, rb.prediction);
            assert_eq!(ra.weights, rb.weights);
            assert_eq!(ra.events, rb.events);
        }
    }

    #[test]
    fn weighted_vote_downweights_unfair_members() {
        let schema = schema();
        let config = FarfConfig::<f64> {
            members: 3,
            ..FarfConfig::default()
        };
        let mut farf =
            FarfEnsemble::new(schema.clone(), config, SamplingPolicy::fair(), 5).unwrap();
        let mut rng = RandomSource::new(6);

        // members 0 and 1 accumulate |disc| = 0.9, member 2 stays at 0.0
        for member in &mut farf.members[..2] {
            for _ in 0..9 {
                member
                    .member_disc
                    .record(Group::Unprotected, Label::Positive, 1.0)
                    .unwrap();
            }
            member
                .member_disc
                .record(Group::Unprotected, Label::Negative, 1.0)
                .unwrap();
            member
                .member_disc
                .record(Group::Protected, Label::Negative, 1.0)
                .unwrap();
        }
        assert!((farf.members[0].disc() - 0.9).abs() < 1e-12);

        // force trees into known votes: members 0/1 vote positive via
        // heavy leaves, member 2 votes negative
        for t in 0..40 {
            let positive = Instance::new(
                &schema,
                vec![
                    FeatureValue::Numeric(0.5),
                    FeatureValue::Numeric(rng.next_f64()),
                    FeatureValue::Nominal(0),
                ],
                Group::Unprotected,
                Label::Positive,
                t,
            )
            .unwrap();
            farf.members[0].tree.learn_one(&positive, 1.0).unwrap();
            farf.members[1].tree.learn_one(&positive, 1.0).unwrap();
            let negative = Instance::new(
                &schema,
                vec![
                    FeatureValue::Numeric(0.5),
                    FeatureValue::Numeric(rng.next_f64()),
                    FeatureValue::Nominal(0),
                ],
                Group::Unprotected,
                Label::Negative,
                t,
            )
            .unwrap();
            farf.members[2].tree.learn_one(&negative, 1.0).unwrap();
        }

        let probe = stream_instance(&mut rng, &schema, 99, false);
        let probe = Instance::new(
            &schema,
            vec![
                FeatureValue::Numeric(0.5),
                probe.value(1),
                FeatureValue::Nominal(0),
            ],
            Group::Unprotected,
            probe.label(),
            99,
        )
        .unwrap();
        // weights (0.1, 0.1, 1.0): the single fair negative voter wins
        assert_eq!(farf.predict(&probe).label, Label::Negative);
    }

    #[test]
    fn replacement_follows_the_fairness_comparison() {
        let schema = schema();
        let mut farf = FarfEnsemble::new(
            schema.clone(),
            small_config(),
            SamplingPolicy::<f64>::fair(),
            7,
        )
        .unwrap();

        // first detection: standby created
        let action = adapt_member(&mut farf.members[0], &schema, &small_config()).unwrap();
        assert_eq!(action, Some(AdaptAction::StandbyCreated));
        assert!(farf.members[0].has_standby());

        // member worse than standby: |0.30| > |0.01| replaces and resets
        let member = &mut farf.members[0];
        for _ in 0..3 {
            member
                .member_disc
                .record(Group::Unprotected, Label::Positive, 1.0)
                .unwrap();
        }
        for _ in 0..7 {
            member
                .member_disc
                .record(Group::Unprotected, Label::Negative, 1.0)
                .unwrap();
        }
        member
            .member_disc
            .record(Group::Protected, Label::Negative, 1.0)
            .unwrap();
        assert!((member.member_disc.disc() - 0.3).abs() < 1e-12);

        let action = adapt_member(&mut farf.members[0], &schema, &small_config()).unwrap();
        assert_eq!(action, Some(AdaptAction::Replaced));
        assert!(!farf.members[0].has_standby());
        assert_eq!(farf.members[0].member_disc.disc(), 0.0);
        assert_eq!(farf.members[0].member_conf.total(), 0.0);

        // standby strictly fairer is required: equal discs keep the member
        let action = adapt_member(&mut farf.members[0], &schema, &small_config()).unwrap();
        assert_eq!(action, Some(AdaptAction::StandbyCreated));
        let action = adapt_member(&mut farf.members[0], &schema, &small_config()).unwrap();
        assert_eq!(action, None);
        assert!(farf.members[0].has_standby());
    }

    #[test]
    fn detectors_stay_quiet_once_learning_stabilizes() {
        // While trees are still learning, their accuracy and positive-rate
        // signals genuinely shift and detectors may fire. After the
        // transient the signals are stationary and fires should be rare.
        let schema = schema();
        let mut late_fires = 0usize;
        for seed in 0..5 {
            let mut farf = FarfEnsemble::new(
                schema.clone(),
                small_config(),
                SamplingPolicy::fair(),
                seed,
            )
            .unwrap();
            let mut rng = RandomSource::new(1000 + seed);
            for t in 0..12_000 {
                let x = stream_instance(&mut rng, &schema, t, false);
                let events = farf.learn_one(&x).unwrap().events.len();
                if t >= 6000 {
                    late_fires += events;
                }
            }
        }
        assert!(
            late_fires <= 10,
            "{late_fires} adaptation events on a stationary tail"
        );
    }

    #[test]
    fn concept_flip_triggers_standby_creation() {
        let schema = schema();
        let mut farf = FarfEnsemble::new(
            schema.clone(),
            small_config(),
            SamplingPolicy::fair(),
            42,
        )
        .unwrap();
        let mut rng = RandomSource::new(43);
        let mut creations_after_flip = 0usize;
        for t in 0..6000u64 {
            let inverted = t >= 4000;
            let x = stream_instance(&mut rng, &schema, t, inverted);
            let report = farf.learn_one(&x).unwrap();
            if t >= 4000 && t < 4600 {
                creations_after_flip += report
                    .events
                    .iter()
                    .filter(|e| e.action == AdaptAction::StandbyCreated)
                    .count();
            }
        }
        assert!(
            creations_after_flip >= 1,
            "no standby created near the concept flip"
        );
    }

    #[test]
    fn custom_alpha_one_equals_plain_sampling() {
        let schema = schema();
        let mut plain = FarfEnsemble::new(
            schema.clone(),
            small_config(),
            SamplingPolicy::plain(),
            21,
        )
        .unwrap();
        let mut custom = FarfEnsemble::new(
            schema.clone(),
            small_config(),
            SamplingPolicy::custom(1.0).unwrap(),
            21,
        )
        .unwrap();
        let mut rng = RandomSource::new(22);
        for t in 0..3000 {
            let x = stream_instance(&mut rng, &schema, t, false);
            let a = plain.learn_one(&x).unwrap();
            let b = custom.learn_one(&x).unwrap();
            assert_eq!(a.prediction, b.prediction);
            assert_eq!(a.weights, b.weights);
        }
    }

    #[test]
    fn snapshot_resumes_bit_exactly() {
        let schema = schema();
        let mut original = FarfEnsemble::new(
            schema.clone(),
            small_config(),
            SamplingPolicy::fair(),
            31,
        )
        .unwrap();
        let mut rng = RandomSource::new(32);
        for t in 0..1500 {
            let x = stream_instance(&mut rng, &schema, t, false);
            original.learn_one(&x).unwrap();
        }
        let snapshot = original.to_snapshot_json().unwrap();
        let mut resumed = FarfEnsemble::<f64>::from_snapshot_json(&snapshot).unwrap();
        for t in 1500..3000 {
            let x = stream_instance(&mut rng, &schema, t, false);
            let a = original.learn_one(&x).unwrap();
            let b = resumed.learn_one(&x).unwrap();
            assert_eq!(a.prediction, b.prediction);
            assert_eq!(a.weights, b.weights);
        }
        assert_eq!(
            original.to_snapshot_json().unwrap(),
            resumed.to_snapshot_json().unwrap()
        );
    }

    #[test]
    fn snapshot_rejects_unknown_versions() {
        let schema = schema();
        let farf = FarfEnsemble::<f64>::new(
            schema,
            small_config(),
            SamplingPolicy::fair(),
            1,
        )
        .unwrap();
        let snapshot = farf.to_snapshot_json().unwrap();
        let tampered = snapshot.replacen("\"version\":1", "\"version\":99", 1);
        assert!(FarfEnsemble::<f64>::from_snapshot_json(&tampered).is_err());
    }
}
