//! Cross-module integration: synthetic cohorts round-trip through the
//! on-disk dataset format, and ablation behaves sanely when only one
//! modality carries signal.

use fogsim_core::eval::{
    ablation, generate_synthetic_cohort, loo_evaluate, subset_label, AblationSpec, EffectProfile,
    EvalConfig, SynthConfig,
};
use fogsim_core::nn::{ModelSpec, OptimizerKind, TrainConfig};
use fogsim_core::signal::{load_dataset, save_dataset, ModalityKind};

#[test]
fn synthetic_cohort_round_trips_through_disk() {
    let cohort = generate_synthetic_cohort(&SynthConfig {
        n_subjects: 3,
        windows_per_subject: 6,
        effect_profile: EffectProfile::Strong,
        seed: 19,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &cohort).unwrap();
    let (manifest, loaded) = load_dataset(&dir.path().join("manifest.toml")).unwrap();
    assert_eq!(manifest.subjects.len(), 3);
    // Field-for-field equality: float samples round-trip exactly through
    // the text format.
    assert_eq!(loaded, cohort);
}

#[test]
fn eval_pipeline_runs_on_a_reloaded_dataset() {
    let cohort = generate_synthetic_cohort(&SynthConfig {
        n_subjects: 3,
        windows_per_subject: 8,
        effect_profile: EffectProfile::Strong,
        seed: 23,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_dataset(dir.path(), &cohort).unwrap();
    let (_, loaded) = load_dataset(&dir.path().join("manifest.toml")).unwrap();

    let cfg = EvalConfig {
        train: TrainConfig {
            epochs: 2,
            batch_size: 16,
            ..Default::default()
        },
        bootstrap_samples: 50,
        jobs: 2,
        ..Default::default()
    };
    let spec = ModelSpec::default_spec();
    let from_disk = loo_evaluate(&loaded, &spec, &cfg).unwrap();
    let from_memory = loo_evaluate(&cohort, &spec, &cfg).unwrap();
    assert_eq!(from_disk.float_report, from_memory.float_report);
}

/// With EMG and ACC carrying pure noise, the EEG-only model and the
/// multi-modal model measure the same thing; their pooled AUCs agree
/// within overlapping confidence intervals.
#[test]
fn eeg_only_cohort_gives_equivalent_eeg_and_multimodal_models() {
    let cohort = generate_synthetic_cohort(&SynthConfig {
        n_subjects: 6,
        windows_per_subject: 24,
        effect_profile: EffectProfile::EegOnly,
        seed: 29,
        ..Default::default()
    })
    .unwrap();
    let cfg = EvalConfig {
        train: TrainConfig {
            epochs: 25,
            batch_size: 64,
            optimizer: OptimizerKind::adam(2e-3),
            ..Default::default()
        },
        bootstrap_samples: 300,
        jobs: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        ..Default::default()
    };
    let spec = ModelSpec::default_spec();
    let outcomes = ablation(
        &cohort,
        &spec,
        &AblationSpec {
            subsets: vec![
                vec![ModalityKind::Eeg],
                vec![ModalityKind::Eeg, ModalityKind::Emg, ModalityKind::Acc],
            ],
        },
        &cfg,
    )
    .unwrap();

    let auc_ci = |i: usize| {
        let pooled = &outcomes[i].outcome.float_report.pooled.auc;
        (
            subset_label(&outcomes[i].subset),
            pooled.value.unwrap(),
            pooled.ci95_lo.unwrap(),
            pooled.ci95_hi.unwrap(),
        )
    };
    let (label_a, auc_a, lo_a, hi_a) = auc_ci(0);
    let (label_b, auc_b, lo_b, hi_b) = auc_ci(1);
    // Both models find the EEG signal.
    assert!(auc_a > 0.6, "{label_a} AUC {auc_a}");
    assert!(auc_b > 0.6, "{label_b} AUC {auc_b}");
    // And their intervals overlap: adding noise modalities neither helps
    // nor hurts beyond resampling noise.
    assert!(
        lo_a <= hi_b && lo_b <= hi_a,
        "CIs disjoint: {label_a} [{lo_a:.3}, {hi_a:.3}] vs {label_b} [{lo_b:.3}, {hi_b:.3}]"
    );
}
