//! Subcommand implementations. Each command resolves its inputs from the
//! experiment configuration, writes its artifacts under a dedicated
//! subdirectory of `output_dir`, and echoes the resolved configuration
//! next to them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fogsim_core::compress::{
    self, float_size_bytes, quantized_size_bytes, serialize_float, serialize_quantized,
};
use fogsim_core::eval::{
    self, ablation_csv, feature_oracle_auc, subset_label, windows_for_cohort, AblationSpec,
};
use fogsim_core::netsim::{self, latency_report};
use fogsim_core::nn::{self, ModelSpec};
use fogsim_core::signal::{self, ModalityKind, Recording, Window};
use fogsim_core::{Error, Result};

use crate::config::ExperimentConfig;

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Load the configured cohort, restricted to the channel selection.
pub fn load_cohort(cfg: &ExperimentConfig) -> Result<Vec<Recording>> {
    let cohort = match cfg.dataset.source.as_str() {
        "synthetic" => eval::generate_synthetic_cohort(&cfg.synth_config()?)?,
        "manifest" => {
            let (_, recordings) = signal::load_dataset(&cfg.dataset.manifest_path)?;
            recordings
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown dataset source {other:?}"
            )))
        }
    };
    let selection = cfg.channel_selection()?;
    cohort
        .iter()
        .map(|rec| signal::select_channels(rec, &selection))
        .collect()
}

fn cohort_rates(cohort: &[Recording]) -> BTreeMap<ModalityKind, f64> {
    let mut rates = BTreeMap::new();
    for rec in cohort {
        for modality in ModalityKind::ALL {
            if let Some(r) = rec.sample_rate(modality) {
                rates.entry(modality).or_insert(r);
            }
        }
    }
    rates
}

fn labeled_windows(cfg: &ExperimentConfig, cohort: &[Recording]) -> Result<Vec<Window>> {
    windows_for_cohort(
        cohort,
        cfg.windowing.length_s,
        cfg.windowing.stride_s,
        cfg.windowing.label_threshold,
    )
}

// ---------------------------------------------------------------------------

/// Generate the synthetic cohort and write it as an on-disk dataset, with a
/// separability self-check in the summary.
pub fn cmd_datagen(cfg: &ExperimentConfig) -> Result<String> {
    if cfg.dataset.source != "synthetic" {
        return Err(Error::InvalidConfig(
            "datagen needs dataset.source = 'synthetic'".into(),
        ));
    }
    let cohort = eval::generate_synthetic_cohort(&cfg.synth_config()?)?;
    let dir = cfg.output_dir.join("dataset");
    signal::save_dataset(&dir, &cohort)?;
    cfg.write_resolved(&dir)?;

    let windows = labeled_windows(cfg, &cohort)?;
    let positives = windows.iter().filter(|w| w.label == Some(true)).count();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "dataset: {} subjects, {} windows ({} positive) under {}",
        cohort.len(),
        windows.len(),
        positives,
        dir.display()
    );
    // Generator self-check: band-power oracle AUC per modality and joint.
    for modality in ModalityKind::ALL {
        let auc = feature_oracle_auc(&windows, &[modality])?;
        let _ = writeln!(summary, "oracle auc {modality}: {auc:.3}");
    }
    let joint = feature_oracle_auc(&windows, &ModalityKind::ALL)?;
    let _ = writeln!(summary, "oracle auc joint: {joint:.3}");
    Ok(summary)
}

// ---------------------------------------------------------------------------

/// Train on the full configured dataset (non-LOO utility mode).
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<String> {
    let cohort = load_cohort(cfg)?;
    let windows = labeled_windows(cfg, &cohort)?;
    let spec = cfg.model_spec(&cohort_rates(&cohort))?;
    let outcome = nn::train(&spec, &windows, &cfg.train_config()?)?;

    let dir = cfg.output_dir.join("train");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    nn::save_parameters(&dir.join("model.fgp"), &outcome.params)?;
    write_file(
        &dir.join("model_spec.toml"),
        toml::to_string_pretty(&spec)
            .map_err(|e| Error::InvalidConfig(format!("spec serialization failed: {e}")))?
            .as_bytes(),
    )?;
    let mut loss_csv = String::from("epoch,loss\n");
    for (i, loss) in outcome.epoch_losses.iter().enumerate() {
        let _ = writeln!(loss_csv, "{},{loss:.9}", i + 1);
    }
    write_file(&dir.join("loss.csv"), loss_csv.as_bytes())?;
    cfg.write_resolved(&dir)?;

    let first = outcome.epoch_losses.first().copied().unwrap_or(f64::NAN);
    let last = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "trained {} windows for {} epochs: loss {first:.4} -> {last:.4} \
         (pos_weight {:.3})\nartifacts under {}\n",
        windows.len(),
        outcome.epoch_losses.len(),
        outcome.pos_weight,
        dir.display()
    ))
}

// ---------------------------------------------------------------------------

/// Prune, calibrate and quantize a trained model; write the quantized
/// container and a size breakdown.
pub fn cmd_compress(cfg: &ExperimentConfig, model_path: Option<&Path>) -> Result<String> {
    let train_dir = cfg.output_dir.join("train");
    let model_path: PathBuf =
        model_path.map_or_else(|| train_dir.join("model.fgp"), Path::to_path_buf);
    let spec_path = model_path.with_file_name("model_spec.toml");
    let params = nn::load_parameters(&model_path)?;
    let spec: ModelSpec = toml::from_str(
        &std::fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?,
    )
    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", spec_path.display())))?;

    let cohort = load_cohort(cfg)?;
    let calibration = labeled_windows(cfg, &cohort)?;
    if calibration.is_empty() {
        return Err(Error::Evaluation("no calibration windows available".into()));
    }
    let comp = cfg.compression_config();
    let dir = cfg.output_dir.join("compress");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let float_bytes = float_size_bytes(&params, false);
    let (pruned, _mask) = compress::prune_magnitude(&params, comp.sparsity)?;
    let pruned_sparse_bytes = float_size_bytes(&pruned, true);

    let mut summary = String::new();
    let artifact_bytes;
    if comp.quantize {
        let (qm, _) = compress::compress(&spec, &params, &calibration, &comp)?;
        let bytes = serialize_quantized(&qm, comp.sparse_encoding);
        artifact_bytes = bytes.len();
        write_file(&dir.join("model.fgq"), &bytes)?;
        let _ = writeln!(
            summary,
            "quantized container: {} bytes ({} weight tensors)",
            bytes.len(),
            qm.weights.len()
        );
        debug_assert_eq!(bytes.len(), quantized_size_bytes(&qm, comp.sparse_encoding));
    } else {
        let bytes = serialize_float(&pruned, comp.sparse_encoding);
        artifact_bytes = bytes.len();
        write_file(&dir.join("model.fgp"), &bytes)?;
        let _ = writeln!(summary, "pruned float container: {} bytes", bytes.len());
    }
    write_file(
        &dir.join("model_spec.toml"),
        toml::to_string_pretty(&spec)
            .map_err(|e| Error::InvalidConfig(format!("spec serialization failed: {e}")))?
            .as_bytes(),
    )?;

    let ratio = artifact_bytes as f64 / float_bytes as f64;
    let mut size_csv = String::from("representation,bytes\n");
    let _ = writeln!(size_csv, "float32,{float_bytes}");
    let _ = writeln!(size_csv, "pruned_sparse_float32,{pruned_sparse_bytes}");
    let _ = writeln!(size_csv, "compressed,{artifact_bytes}");
    write_file(&dir.join("size_report.csv"), size_csv.as_bytes())?;
    cfg.write_resolved(&dir)?;

    let _ = writeln!(
        summary,
        "float {float_bytes} B, pruned-sparse {pruned_sparse_bytes} B, \
         compressed {artifact_bytes} B (ratio {ratio:.3})"
    );
    let _ = writeln!(summary, "artifacts under {}", dir.display());
    Ok(summary)
}

// ---------------------------------------------------------------------------

/// Leave-one-out evaluation plus the configured ablation, on float and
/// compressed models.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<String> {
    let cohort = load_cohort(cfg)?;
    let spec = cfg.model_spec(&cohort_rates(&cohort))?;
    let eval_cfg = cfg.eval_config()?;
    let dir = cfg.output_dir.join("evaluate");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let outcome = eval::loo_evaluate(&cohort, &spec, &eval_cfg)?;
    write_file(
        &dir.join("metrics_float.toml"),
        outcome.float_report.to_toml()?.as_bytes(),
    )?;
    let mut csv = outcome.float_report.to_csv();
    if let Some(q) = &outcome.quantized_report {
        write_file(&dir.join("metrics_int8.toml"), q.to_toml()?.as_bytes())?;
        // Append the int8 rows, skipping the repeated header.
        csv.push_str(
            &q.to_csv()
                .lines()
                .skip(1)
                .map(|l| format!("{l}\n"))
                .collect::<String>(),
        );
    }
    write_file(&dir.join("metrics.csv"), csv.as_bytes())?;

    let mut summary = String::new();
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    let _ = writeln!(
        summary,
        "float: auc {} f1 {} sens {} spec {}",
        fmt(outcome.float_report.pooled.auc.value),
        fmt(outcome.float_report.pooled.f1.value),
        fmt(outcome.float_report.pooled.sensitivity.value),
        fmt(outcome.float_report.pooled.specificity.value),
    );
    if let Some(q) = &outcome.quantized_report {
        let _ = writeln!(
            summary,
            "int8:  auc {} f1 {} sens {} spec {} (decision agreement {:.4})",
            fmt(q.pooled.auc.value),
            fmt(q.pooled.f1.value),
            fmt(q.pooled.sensitivity.value),
            fmt(q.pooled.specificity.value),
            outcome.decision_agreement.unwrap_or(f64::NAN),
        );
    }

    if !cfg.evaluation.ablation.is_empty() {
        let subsets = cfg
            .evaluation
            .ablation
            .iter()
            .map(|s| eval::parse_subset(s))
            .collect::<Result<Vec<_>>>()?;
        let spec_ablation = AblationSpec { subsets };
        let outcomes = eval::ablation(&cohort, &spec, &spec_ablation, &eval_cfg)?;
        write_file(&dir.join("ablation.csv"), ablation_csv(&outcomes).as_bytes())?;
        for o in &outcomes {
            let _ = writeln!(
                summary,
                "ablation {}: auc {} f1 {}",
                subset_label(&o.subset),
                fmt(o.outcome.float_report.pooled.auc.value),
                fmt(o.outcome.float_report.pooled.f1.value),
            );
        }
    }
    cfg.write_resolved(&dir)?;
    let _ = writeln!(summary, "reports under {}", dir.display());
    Ok(summary)
}

// ---------------------------------------------------------------------------

/// Run the network simulation with the compressed model (or a freshly
/// initialized one when no artifact exists) and write the event log plus
/// the latency/energy summary.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<String> {
    let scenario = cfg.scenario()?;
    let model = load_or_init_model(cfg)?;
    let dir = cfg.output_dir.join("simulate");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let out = netsim::run_simulation(&scenario, &model)?;
    let report = latency_report(&out.log);
    write_file(&dir.join("events.log"), out.log.to_lines().as_bytes())?;
    write_file(
        &dir.join("summary.csv"),
        netsim::report_csv(&report).as_bytes(),
    )?;
    write_file(
        &dir.join("summary.toml"),
        toml::to_string_pretty(&report)
            .map_err(|e| Error::InvalidConfig(format!("report serialization failed: {e}")))?
            .as_bytes(),
    )?;
    cfg.write_resolved(&dir)?;

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "simulated {:.1} s: {} windows ({} degraded), {} inferences, {} alerts",
        cfg.netsim.sim_duration_s,
        report.windows_ready,
        report.windows_degraded,
        report.inferences,
        report.alerts
    );
    let _ = writeln!(
        summary,
        "alert latency mean {:.3} s max {:.3} s; backlog high water {}{}",
        report.mean_alert_latency_s,
        report.max_alert_latency_s,
        report.backlog_high_water,
        if report.saturated {
            " (SATURATED: inference cannot keep up with the window cadence)"
        } else {
            ""
        }
    );
    let _ = writeln!(
        summary,
        "frames tx {} lost {}; radio energy tx {:.3e} J rx {:.3e} J; resync budget {:.2} s",
        report.frames_tx,
        report.frames_lost,
        report.tx_energy_j,
        report.rx_energy_j,
        report.sync_margin_s
    );
    let _ = writeln!(summary, "logs under {}", dir.display());
    Ok(summary)
}

/// The compressed artifact when present; otherwise a deterministic
/// freshly-initialized quantized model (latency behavior does not depend
/// on the weights).
fn load_or_init_model(cfg: &ExperimentConfig) -> Result<compress::QuantizedModel> {
    let fgq = cfg.output_dir.join("compress/model.fgq");
    let spec_path = cfg.output_dir.join("compress/model_spec.toml");
    if fgq.exists() && spec_path.exists() {
        let spec: ModelSpec = toml::from_str(
            &std::fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?,
        )
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", spec_path.display())))?;
        return compress::load_quantized(&fgq, spec);
    }
    let mut synth = cfg.synth_config()?;
    synth.n_subjects = 2;
    synth.windows_per_subject = 2.max(synth.windows_per_subject.min(4));
    let cohort = eval::generate_synthetic_cohort(&synth)?;
    let selection = cfg.channel_selection()?;
    let cohort: Vec<Recording> = cohort
        .iter()
        .map(|r| signal::select_channels(r, &selection))
        .collect::<Result<_>>()?;
    let windows = labeled_windows(cfg, &cohort)?;
    let spec = cfg.model_spec(&cohort_rates(&cohort))?;
    let params = nn::init_parameters(&spec, cfg.train.seed);
    let (qm, _) = compress::compress(&spec, &params, &windows, &cfg.compression_config())?;
    Ok(qm)
}

// ---------------------------------------------------------------------------

/// Collect the run's artifacts into one human-readable summary.
pub fn cmd_report(cfg: &ExperimentConfig) -> Result<String> {
    let mut text = String::from("experiment summary\n==================\n");
    let mut found = false;
    for (name, rel) in [
        ("dataset", "dataset/resolved_config.toml"),
        ("training loss trace", "train/loss.csv"),
        ("size breakdown", "compress/size_report.csv"),
        ("float metrics", "evaluate/metrics_float.toml"),
        ("int8 metrics", "evaluate/metrics_int8.toml"),
        ("ablation", "evaluate/ablation.csv"),
        ("simulation summary", "simulate/summary.csv"),
    ] {
        let path = cfg.output_dir.join(rel);
        if !path.exists() {
            continue;
        }
        found = true;
        let _ = writeln!(text, "\n--- {name} ({rel})");
        let content = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        if rel.ends_with(".csv") {
            text.push_str(&content);
        } else {
            // Keep TOML reports to their pooled section for the summary.
            for line in content.lines().take(30) {
                let _ = writeln!(text, "{line}");
            }
        }
    }
    if !found {
        return Err(Error::Evaluation(format!(
            "no artifacts under {}; run the other subcommands first",
            cfg.output_dir.display()
        )));
    }
    let dir = cfg.output_dir.join("report");
    write_file(&dir.join("summary.txt"), text.as_bytes())?;
    cfg.write_resolved(&dir)?;
    Ok(text)
}
