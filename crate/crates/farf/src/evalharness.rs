//! Prequential (test-then-train) evaluation of any learner exposing the
//! step interface, with windowed metric logging, alpha sweeps and
//! sampling-mode ablations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{Group, Instance, Label, SchemaRef};
use crate::dataio::{load_stream, synth_stream, DatasetConfig, LoadedStream, SynthSpec};
use crate::ensemble::{AdaptAction, AdaptationBasis, FarfConfig, FarfEnsemble, StepReport};
use crate::error::{FarfError, Result};
use crate::fair_tree::{FairTree, SplitConfig};
use crate::metrics::{ConfusionTracker, DiscTracker};
use crate::sampling::{SamplingMode, SamplingPolicy};
use crate::scalar::{cast, Scalar};

/// Anything that can be evaluated prequentially: one call predicts the
/// instance, accounts for it, and then trains on it.
pub trait OnlineLearner<F: Scalar> {
    fn step(&mut self, x: &Instance<F>) -> Result<StepReport<F>>;
}

impl<F: Scalar> OnlineLearner<F> for FarfEnsemble<F> {
    fn step(&mut self, x: &Instance<F>) -> Result<StepReport<F>> {
        self.learn_one(x)
    }
}

/// Single incremental tree trained with unit weights.
pub struct SingleTreeLearner<F> {
    tree: FairTree<F>,
}

impl<F: Scalar> SingleTreeLearner<F> {
    pub fn new(tree: FairTree<F>) -> Self {
        SingleTreeLearner { tree }
    }

    pub fn tree(&self) -> &FairTree<F> {
        &self.tree
    }
}

impl<F: Scalar> OnlineLearner<F> for SingleTreeLearner<F> {
    fn step(&mut self, x: &Instance<F>) -> Result<StepReport<F>> {
        let prediction = self.tree.predict(x);
        self.tree.learn_one(x, F::one())?;
        Ok(StepReport {
            prediction: prediction.label,
            scores: prediction.scores,
            weights: vec![F::one()],
            events: Vec::new(),
        })
    }
}

/// Which learner the harness builds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// The fair adaptive forest.
    Farf,
    /// Single incremental tree, plain information gain, no sampling.
    HoeffdingTree,
    /// Online-bagged forest of plain trees: Poisson sampling only,
    /// accuracy-driven adaptation, no fairness machinery.
    PlainForest,
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LearnerKind::Farf => "farf",
            LearnerKind::HoeffdingTree => "hoeffding_tree",
            LearnerKind::PlainForest => "plain_forest",
        }
    }
}

/// Where the instances come from.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Csv(DatasetConfig),
    Synthetic(SynthSpec),
}

impl DataSource {
    pub fn load<F: Scalar>(&self) -> Result<LoadedStream<F>> {
        match self {
            DataSource::Csv(config) => load_stream(config),
            DataSource::Synthetic(spec) => synth_stream(spec),
        }
    }
}

fn default_window() -> usize {
    1000
}

fn default_members() -> usize {
    10
}

fn default_adwin_delta() -> f64 {
    0.002
}

/// Full description of one evaluation run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct RunConfig<F> {
    pub learner: LearnerKind,
    pub data: DataSource,
    pub seed: u64,
    #[serde(default = "default_window")]
    pub window_size: usize,
    #[serde(default = "default_members")]
    pub members: usize,
    /// Sampling mode for the fair forest; `None` picks the automatic
    /// discrimination-driven weighting.
    #[serde(default)]
    pub mode: Option<SamplingMode<F>>,
    #[serde(default)]
    pub split: SplitConfig<F>,
    #[serde(default = "default_adwin_delta")]
    pub adwin_delta: f64,
    #[serde(default)]
    pub dump_predictions: bool,
}

impl<F: Scalar> RunConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 1 {
            return Err(FarfError::config("window size must be at least 1"));
        }
        match self.learner {
            LearnerKind::HoeffdingTree => {
                if self.mode.is_some() {
                    return Err(FarfError::config(
                        "the single-tree baseline does not sample",
                    ));
                }
            }
            LearnerKind::PlainForest => {
                if !matches!(self.mode, None | Some(SamplingMode::Plain)) {
                    return Err(FarfError::config(
                        "the plain forest baseline only supports plain sampling",
                    ));
                }
            }
            LearnerKind::Farf => {}
        }
        if let Some(SamplingMode::Custom { alpha }) = self.mode {
            if !(alpha > F::zero() && alpha.is_finite()) {
                return Err(FarfError::config("alpha must be positive"));
            }
        }
        Ok(())
    }

    /// Effective sampling mode after defaults.
    pub fn resolved_mode(&self) -> SamplingMode<F> {
        match self.learner {
            LearnerKind::Farf => self.mode.unwrap_or(SamplingMode::Fair),
            _ => SamplingMode::Plain,
        }
    }
}

/// One windowed snapshot. Cumulative columns cover the whole stream up to
/// `t_end`; window columns cover only the window that just closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct WindowRecord<F> {
    pub t_end: u64,
    pub disc_pct: F,
    pub acc_pct: F,
    pub kappa_pct: F,
    pub window_disc_pct: F,
    pub window_acc_pct: F,
    pub standby_creations: u64,
    pub replacements: u64,
}

/// Final cumulative metrics of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct RunSummary<F> {
    pub instances: u64,
    pub disc_pct: F,
    pub acc_pct: F,
    pub kappa_pct: F,
    pub standby_creations: u64,
    pub replacements: u64,
    pub seed: u64,
    pub learner: LearnerKind,
    pub mode: Option<SamplingMode<F>>,
    pub members: usize,
}

/// One prequential decision, for optional raw dumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t: u64,
    pub group: Group,
    pub label: Label,
    pub predicted: Label,
}

/// Windowed log plus the final summary of one run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Scalar", deserialize = "F: Scalar"))]
pub struct PrequentialLog<F> {
    pub windows: Vec<WindowRecord<F>>,
    pub summary: RunSummary<F>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<Vec<PredictionRecord>>,
}

impl<F: Scalar> PrequentialLog<F> {
    pub fn windows_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for record in &self.windows {
            writer.serialize(record)?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| FarfError::config(format!("csv buffer: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn summary_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(&self.summary)?;
        text.push('\n');
        Ok(text)
    }

    pub fn predictions_csv(&self) -> Option<Result<String>> {
        self.predictions.as_ref().map(|records| {
            let mut writer = csv::Writer::from_writer(Vec::new());
            for record in records {
                writer.serialize(record)?;
            }
            let bytes = writer
                .into_inner()
                .map_err(|e| FarfError::config(format!("csv buffer: {e}")))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        })
    }
}

/// Builds the learner described by the config against a loaded schema.
pub fn build_learner<F: Scalar>(
    config: &RunConfig<F>,
    schema: &SchemaRef,
) -> Result<HarnessLearner<F>> {
    config.validate()?;
    let adwin_delta: F = cast(config.adwin_delta);
    match config.learner {
        LearnerKind::Farf => {
            let farf_config = FarfConfig {
                members: config.members,
                split: config.split,
                adwin_delta,
                fairness_drift_detection: true,
                adaptation: AdaptationBasis::Fairness,
                ..FarfConfig::default()
            };
            let policy =
                SamplingPolicy::new(config.resolved_mode(), SamplingPolicy::<F>::DEFAULT_LAMBDA)?;
            Ok(HarnessLearner::Forest(FarfEnsemble::new(
                schema.clone(),
                farf_config,
                policy,
                config.seed,
            )?))
        }
        LearnerKind::PlainForest => {
            let farf_config = FarfConfig {
                members: config.members,
                split: SplitConfig {
                    use_fair_gain: false,
                    ..config.split
                },
                adwin_delta,
                fairness_drift_detection: false,
                adaptation: AdaptationBasis::Accuracy,
                ..FarfConfig::default()
            };
            let policy =
                SamplingPolicy::new(SamplingMode::Plain, SamplingPolicy::<F>::DEFAULT_LAMBDA)?;
            Ok(HarnessLearner::Forest(FarfEnsemble::new(
                schema.clone(),
                farf_config,
                policy,
                config.seed,
            )?))
        }
        LearnerKind::HoeffdingTree => {
            let split = SplitConfig {
                use_fair_gain: false,
                subspace_size: Some(schema.feature_count()),
                ..config.split
            };
            let tree = FairTree::new(schema.clone(), split, config.seed)?;
            Ok(HarnessLearner::Tree(SingleTreeLearner::new(tree)))
        }
    }
}

/// Learner variants the harness can drive.
pub enum HarnessLearner<F> {
    Forest(FarfEnsemble<F>),
    Tree(SingleTreeLearner<F>),
}

impl<F: Scalar> OnlineLearner<F> for HarnessLearner<F> {
    fn step(&mut self, x: &Instance<F>) -> Result<StepReport<F>> {
        match self {
            HarnessLearner::Forest(farf) => farf.step(x),
            HarnessLearner::Tree(tree) => tree.step(x),
        }
    }
}

fn pct<F: Scalar>(fraction: F) -> F {
    fraction * cast(100.0)
}

/// Drives one prequential pass: for every instance the learner first
/// predicts (the logged decision), then trains. Emits a snapshot per full
/// window plus one for any partial tail.
pub fn run_loop<F: Scalar>(
    learner: &mut impl OnlineLearner<F>,
    instances: &[Instance<F>],
    window_size: usize,
    dump_predictions: bool,
) -> Result<PrequentialLog<F>> {
    if window_size < 1 {
        return Err(FarfError::config("window size must be at least 1"));
    }
    let mut disc = DiscTracker::<F>::predictions();
    let mut conf = ConfusionTracker::<F>::new();
    let mut window_disc = DiscTracker::<F>::predictions();
    let mut window_conf = ConfusionTracker::<F>::new();
    let mut creations = 0u64;
    let mut replacements = 0u64;
    let mut window_creations = 0u64;
    let mut window_replacements = 0u64;
    let mut windows = Vec::new();
    let mut predictions = dump_predictions.then(Vec::new);

    for (index, x) in instances.iter().enumerate() {
        let report = learner.step(x).map_err(|e| {
            FarfError::config(format!("learner failed at position {index}: {e}"))
        })?;
        let predicted = report.prediction;
        disc.record(x.group(), predicted, F::one())?;
        conf.record(x.label(), predicted, F::one())?;
        window_disc.record(x.group(), predicted, F::one())?;
        window_conf.record(x.label(), predicted, F::one())?;
        for event in &report.events {
            match event.action {
                AdaptAction::StandbyCreated => {
                    creations += 1;
                    window_creations += 1;
                }
                AdaptAction::Replaced => {
                    replacements += 1;
                    window_replacements += 1;
                }
            }
        }
        if let Some(records) = predictions.as_mut() {
            records.push(PredictionRecord {
                t: x.t(),
                group: x.group(),
                label: x.label(),
                predicted,
            });
        }
        let done = index + 1;
        if done % window_size == 0 || done == instances.len() {
            windows.push(WindowRecord {
                t_end: done as u64,
                disc_pct: pct(disc.disc()),
                acc_pct: pct(conf.accuracy()?),
                kappa_pct: pct(conf.kappa()?),
                window_disc_pct: pct(window_disc.disc()),
                window_acc_pct: pct(window_conf.accuracy()?),
                standby_creations: window_creations,
                replacements: window_replacements,
            });
            window_disc.reset();
            window_conf.reset();
            window_creations = 0;
            window_replacements = 0;
        }
    }

    let summary = RunSummary {
        instances: instances.len() as u64,
        disc_pct: if instances.is_empty() {
            F::zero()
        } else {
            pct(disc.disc())
        },
        acc_pct: if instances.is_empty() {
            F::zero()
        } else {
            pct(conf.accuracy()?)
        },
        kappa_pct: if instances.is_empty() {
            F::zero()
        } else {
            pct(conf.kappa()?)
        },
        standby_creations: creations,
        replacements,
        seed: 0,
        learner: LearnerKind::Farf,
        mode: None,
        members: 0,
    };
    Ok(PrequentialLog {
        windows,
        summary,
        predictions,
    })
}

/// Loads the configured stream, builds the learner and evaluates it.
pub fn run<F: Scalar>(config: &RunConfig<F>) -> Result<PrequentialLog<F>> {
    config.validate()?;
    let stream = config.data.load::<F>()?;
    let mut learner = build_learner(config, &stream.schema)?;
    let mut log = run_loop(
        &mut learner,
        &stream.instances,
        config.window_size,
        config.dump_predictions,
    )?;
    log.summary.seed = config.seed;
    log.summary.learner = config.learner;
    log.summary.mode = match config.learner {
        LearnerKind::HoeffdingTree => None,
        _ => Some(config.resolved_mode()),
    };
    log.summary.members = match config.learner {
        LearnerKind::HoeffdingTree => 1,
        _ => config.members,
    };
    Ok(log)
}

/// One full run per alpha, all under the shared seed, in input order.
pub fn sweep_alpha<F: Scalar>(
    config: &RunConfig<F>,
    alphas: &[F],
) -> Result<Vec<(F, RunSummary<F>)>> {
    if alphas.is_empty() {
        return Err(FarfError::config("alpha sweep needs at least one value"));
    }
    if config.learner != LearnerKind::Farf {
        return Err(FarfError::config("alpha sweeps apply to the fair forest"));
    }
    alphas
        .par_iter()
        .map(|&alpha| {
            let mut run_config = config.clone();
            run_config.mode = Some(SamplingMode::Custom { alpha });
            run(&run_config).map(|log| (alpha, log.summary))
        })
        .collect()
}

/// The four sampling strategies compared on one stream under one seed.
pub fn ablate<F: Scalar>(config: &RunConfig<F>) -> Result<Vec<(String, RunSummary<F>)>> {
    let variants: Vec<(String, RunConfig<F>)> = vec![
        (
            "plain_rf".to_string(),
            RunConfig {
                learner: LearnerKind::PlainForest,
                mode: None,
                ..config.clone()
            },
        ),
        (
            "oversample_protected".to_string(),
            RunConfig {
                learner: LearnerKind::Farf,
                mode: Some(SamplingMode::OversampleProtected),
                ..config.clone()
            },
        ),
        (
            "over_and_under".to_string(),
            RunConfig {
                learner: LearnerKind::Farf,
                mode: Some(SamplingMode::OverAndUnder),
                ..config.clone()
            },
        ),
        (
            "fair".to_string(),
            RunConfig {
                learner: LearnerKind::Farf,
                mode: Some(SamplingMode::Fair),
                ..config.clone()
            },
        ),
    ];
    variants
        .into_par_iter()
        .map(|(label, run_config)| run(&run_config).map(|log| (label, log.summary)))
        .collect()
}

/// CSV table for a sweep, ready for plotting.
pub fn sweep_table_csv<F: Scalar>(rows: &[(F, RunSummary<F>)]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "alpha",
        "disc_pct",
        "acc_pct",
        "kappa_pct",
        "instances",
        "seed",
    ])?;
    for (alpha, summary) in rows {
        writer.write_record([
            format!("{alpha}"),
            format!("{}", summary.disc_pct),
            format!("{}", summary.acc_pct),
            format!("{}", summary.kappa_pct),
            format!("{}", summary.instances),
            format!("{}", summary.seed),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| FarfError::config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// CSV table for an ablation.
pub fn ablation_table_csv<F: Scalar>(rows: &[(String, RunSummary<F>)]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record([
        "strategy",
        "disc_pct",
        "acc_pct",
        "kappa_pct",
        "instances",
        "seed",
    ])?;
    for (label, summary) in rows {
        writer.write_record([
            label.clone(),
            format!("{}", summary.disc_pct),
            format!("{}", summary.acc_pct),
            format!("{}", summary.kappa_pct),
            format!("{}", summary.instances),
            format!("{}", summary.seed),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| FarfError::config(format!("csv buffer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::Segment;

    fn synth_config(seed: u64, learner: LearnerKind) -> RunConfig<f64> {
        RunConfig {
            learner,
            data: DataSource::Synthetic(SynthSpec {
                seed: 77,
                segments: vec![Segment {
                    len: 3000,
                    protected_fraction: 0.4,
                    positive_rate_protected: 0.35,
                    positive_rate_unprotected: 0.6,
                    label_noise: 0.0,
                    inverted: false,
                }],
                numeric_distractors: 2,
                nominal_distractors: 1,
            }),
            seed,
            window_size: 500,
            members: 5,
            mode: None,
            split: SplitConfig::default(),
            adwin_delta: 0.002,
            dump_predictions: false,
        }
    }

    /// Predicts the true label; an upper bound for any learner.
    struct OracleLearner;

    impl OnlineLearner<f64> for OracleLearner {
        fn step(&mut self, x: &Instance<f64>) -> Result<StepReport<f64>> {
            Ok(StepReport {
                prediction: x.label(),
                scores: [0.0, 0.0],
                weights: vec![],
                events: vec![],
            })
        }
    }

    struct ConstantNegative;

    impl OnlineLearner<f64> for ConstantNegative {
        fn step(&mut self, _x: &Instance<f64>) -> Result<StepReport<f64>> {
            Ok(StepReport {
                prediction: Label::Negative,
                scores: [1.0, 0.0],
                weights: vec![],
                events: vec![],
            })
        }
    }

    /// Remembers every instance it trained on, keyed by raw feature bits.
    struct MemorizingLearner {
        seen: std::collections::HashMap<String, Label>,
    }

    impl MemorizingLearner {
        fn new() -> Self {
            MemorizingLearner {
                seen: std::collections::HashMap::new(),
            }
        }

        fn key(x: &Instance<f64>) -> String {
            format!("{:?}", x.values())
        }

        fn predict(&self, x: &Instance<f64>) -> Label {
            *self.seen.get(&Self::key(x)).unwrap_or(&Label::Negative)
        }

        fn learn(&mut self, x: &Instance<f64>) {
            self.seen.insert(Self::key(x), x.label());
        }
    }

    impl OnlineLearner<f64> for MemorizingLearner {
        fn step(&mut self, x: &Instance<f64>) -> Result<StepReport<f64>> {
            let prediction = self.predict(x);
            self.learn(x);
            Ok(StepReport {
                prediction,
                scores: [0.0, 0.0],
                weights: vec![],
                events: vec![],
            })
        }
    }

    fn stream(n: usize) -> LoadedStream<f64> {
        synth_stream(&SynthSpec {
            seed: 3,
            segments: vec![Segment {
                len: n,
                protected_fraction: 0.5,
                positive_rate_protected: 0.4,
                positive_rate_unprotected: 0.6,
                label_noise: 0.0,
                inverted: false,
            }],
            numeric_distractors: 1,
            nominal_distractors: 0,
        })
        .unwrap()
    }

    #[test]
    fn oracle_learner_scores_perfectly() {
        let stream = stream(2000);
        let log = run_loop(&mut OracleLearner, &stream.instances, 500, false).unwrap();
        assert_eq!(log.summary.acc_pct, 100.0);
        assert_eq!(log.summary.kappa_pct, 100.0);
    }

    #[test]
    fn constant_negative_learner_has_zero_disc() {
        let stream = stream(2000);
        let log = run_loop(&mut ConstantNegative, &stream.instances, 500, false).unwrap();
        assert_eq!(log.summary.disc_pct, 0.0);
        assert!(log.summary.kappa_pct.abs() < 1e-9);
    }

    #[test]
    fn harness_never_leaks_the_label_before_prediction() {
        let stream = stream(2000);
        // honest test-then-train: memorization cannot help on first sight
        let log = run_loop(&mut MemorizingLearner::new(), &stream.instances, 500, false).unwrap();
        let mut negatives = 0usize;
        for x in &stream.instances {
            if x.label() == Label::Negative {
                negatives += 1;
            }
        }
        let baseline = 100.0 * negatives as f64 / stream.len() as f64;
        assert!((log.summary.acc_pct - baseline).abs() < 1e-9);

        // a leaky train-then-test loop scores perfectly instead
        let mut leaky = MemorizingLearner::new();
        let mut correct = 0usize;
        for x in &stream.instances {
            leaky.learn(x);
            if leaky.predict(x) == x.label() {
                correct += 1;
            }
        }
        assert_eq!(correct, stream.len());
    }

    #[test]
    fn final_window_matches_the_summary() {
        let config = synth_config(5, LearnerKind::Farf);
        let log = run::<f64>(&config).unwrap();
        let last = log.windows.last().unwrap();
        assert_eq!(last.t_end, log.summary.instances);
        assert_eq!(last.disc_pct, log.summary.disc_pct);
        assert_eq!(last.acc_pct, log.summary.acc_pct);
        assert_eq!(last.kappa_pct, log.summary.kappa_pct);
        for window in &log.windows {
            assert!(window.disc_pct.abs() <= 100.0);
            assert!((0.0..=100.0).contains(&window.acc_pct));
            assert!(window.kappa_pct.abs() <= 100.0);
        }
    }

    #[test]
    fn partial_tail_window_is_emitted() {
        let stream = stream(1250);
        let log = run_loop(&mut ConstantNegative, &stream.instances, 500, false).unwrap();
        let ends: Vec<u64> = log.windows.iter().map(|w| w.t_end).collect();
        assert_eq!(ends, vec![500, 1000, 1250]);
    }

    #[test]
    fn identical_configs_produce_byte_identical_outputs() {
        let config = synth_config(11, LearnerKind::Farf);
        let a = run::<f64>(&config).unwrap();
        let b = run::<f64>(&config).unwrap();
        assert_eq!(a.windows_csv().unwrap(), b.windows_csv().unwrap());
        assert_eq!(a.summary_json().unwrap(), b.summary_json().unwrap());
    }

    #[test]
    fn summary_recomputes_from_the_prediction_dump() {
        let mut config = synth_config(13, LearnerKind::Farf);
        config.dump_predictions = true;
        let log = run::<f64>(&config).unwrap();
        let records = log.predictions.as_ref().unwrap();
        assert_eq!(records.len() as u64, log.summary.instances);

        let mut disc = DiscTracker::<f64>::predictions();
        let mut conf = ConfusionTracker::<f64>::new();
        for record in records {
            disc.record(record.group, record.predicted, 1.0).unwrap();
            conf.record(record.label, record.predicted, 1.0).unwrap();
        }
        assert!((pct(disc.disc()) - log.summary.disc_pct).abs() < 1e-9);
        assert!((pct(conf.accuracy().unwrap()) - log.summary.acc_pct).abs() < 1e-9);
        assert!((pct(conf.kappa().unwrap()) - log.summary.kappa_pct).abs() < 1e-9);
    }

    #[test]
    fn duplicate_alphas_give_identical_summaries() {
        let config = synth_config(17, LearnerKind::Farf);
        let rows = sweep_alpha(&config, &[0.6, 0.6]).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].1, rows[1].1);
        assert!(sweep_alpha(&config, &[]).is_err());
    }

    #[test]
    fn ablation_runs_share_the_stream() {
        let config = synth_config(19, LearnerKind::Farf);
        let rows = ablate(&config).unwrap();
        assert_eq!(rows.len(), 4);
        let labels: Vec<&str> = rows.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(
            labels,
            vec!["plain_rf", "oversample_protected", "over_and_under", "fair"]
        );
        let counts: Vec<u64> = rows.iter().map(|(_, s)| s.instances).collect();
        assert!(counts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut config = synth_config(1, LearnerKind::HoeffdingTree);
        config.mode = Some(SamplingMode::Fair);
        assert!(config.validate().is_err());

        let mut config = synth_config(1, LearnerKind::PlainForest);
        config.mode = Some(SamplingMode::Fair);
        assert!(config.validate().is_err());

        let mut config = synth_config(1, LearnerKind::Farf);
        config.mode = Some(SamplingMode::Custom { alpha: -0.5 });
        assert!(config.validate().is_err());

        let mut config = synth_config(1, LearnerKind::Farf);
        config.window_size = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn run_config_round_trips_through_json() {
        let mut config = synth_config(23, LearnerKind::Farf);
        config.mode = Some(SamplingMode::Custom { alpha: 0.9 });
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig<f64> = serde_json::from_str(&json).unwrap();
        let a = run::<f64>(&config).unwrap();
        let b = run::<f64>(&back).unwrap();
        assert_eq!(a.summary_json().unwrap(), b.summary_json().unwrap());
    }
}
