use farf::dataio::{Segment, SynthSpec};
use farf::evalharness::{run, DataSource, LearnerKind, RunConfig};
use farf::fair_tree::SplitConfig;

fn main() {
    for seed in 0..6u64 {
        let config = RunConfig::<f64> {
            learner: LearnerKind::Farf,
            data: DataSource::Synthetic(SynthSpec {
                seed: 6000 + seed,
                segments: vec![
                    Segment { len: 5000, protected_fraction: 0.4, positive_rate_protected: 0.4, positive_rate_unprotected: 0.6, label_noise: 0.0, inverted: false },
                    Segment { len: 5000, protected_fraction: 0.4, positive_rate_protected: 0.4, positive_rate_unprotected: 0.6, label_noise: 0.0, inverted: true },
                ],
                numeric_distractors: 2,
                nominal_distractors: 1,
            }),
            seed,
            window_size: 500,
            members: 10,
            mode: None,
            split: SplitConfig::default(),
            adwin_delta: 0.002,
            dump_predictions: false,
        };
        let log = run(&config).unwrap();
        println!("== seed {seed}");
        for w in &log.windows {
            println!(
                "t_end={:5} win_acc={:6.2} win_disc={:6.2} creations={} replacements={}",
                w.t_end, w.window_acc_pct, w.window_disc_pct, w.standby_creations, w.replacements
            );
        }
    }
}
