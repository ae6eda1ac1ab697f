use std::path::PathBuf;

use clap::{Parser, Subcommand};

use fogsim_cli::{
    cmd_compress, cmd_datagen, cmd_evaluate, cmd_report, cmd_simulate, cmd_train,
    ExperimentConfig,
};

/// Freezing-of-gait detection sandbox: synthetic data generation, model
/// training and compression, leave-one-out evaluation, and body-area
/// network simulation.
#[derive(Parser)]
#[command(name = "fogsim", version, about)]
struct Cli {
    /// Experiment configuration file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic cohort and write it as a dataset.
    Datagen {
        /// Override the number of subjects.
        #[arg(long)]
        subjects: Option<usize>,
        /// Override the effect profile (null|strong|complementary).
        #[arg(long)]
        profile: Option<String>,
        /// Override the dataset seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train on the full configured dataset and write the float model.
    Train {
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the epoch count.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Prune, calibrate and quantize a trained model.
    Compress {
        /// Model container to compress (defaults to the train output).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Override the pruning sparsity.
        #[arg(long)]
        sparsity: Option<f64>,
    },
    /// Leave-one-out evaluation and modality ablation.
    Evaluate {
        /// Override the fold worker count (0 = all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Skip the ablation pass.
        #[arg(long)]
        no_ablation: bool,
    },
    /// Run the TDMA network simulation under the latency budget.
    Simulate {
        /// Override the simulated duration in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Override the inference time in seconds.
        #[arg(long)]
        inference_time: Option<f64>,
        /// Override the simulation seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize the artifacts of previous runs.
    Report,
}

fn run() -> fogsim_core::Result<String> {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }

    match cli.command {
        Command::Datagen {
            subjects,
            profile,
            seed,
        } => {
            if let Some(n) = subjects {
                cfg.dataset.synthetic.subjects = n;
            }
            if let Some(p) = profile {
                cfg.dataset.synthetic.effect_profile = p;
            }
            if let Some(s) = seed {
                cfg.dataset.synthetic.seed = s;
            }
            cfg.validate()?;
            cmd_datagen(&cfg)
        }
        Command::Train { seed, epochs } => {
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            cfg.validate()?;
            cmd_train(&cfg)
        }
        Command::Compress { model, sparsity } => {
            if let Some(s) = sparsity {
                cfg.compression.sparsity = s;
            }
            cfg.validate()?;
            cmd_compress(&cfg, model.as_deref())
        }
        Command::Evaluate { jobs, no_ablation } => {
            if let Some(j) = jobs {
                cfg.evaluation.jobs = j;
            }
            if no_ablation {
                cfg.evaluation.ablation.clear();
            }
            cfg.validate()?;
            cmd_evaluate(&cfg)
        }
        Command::Simulate {
            duration,
            inference_time,
            seed,
        } => {
            if let Some(d) = duration {
                cfg.netsim.sim_duration_s = d;
            }
            if let Some(t) = inference_time {
                cfg.netsim.inference_time_s = t;
            }
            if let Some(s) = seed {
                cfg.netsim.seed = s;
            }
            cfg.validate()?;
            cmd_simulate(&cfg)
        }
        Command::Report => {
            cfg.validate()?;
            cmd_report(&cfg)
        }
    }
}

fn main() {
    match run() {
        Ok(summary) => {
            print!("{summary}");
        }
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            std::process::exit(fogsim_cli::exit_code_for(&err));
        }
    }
}
