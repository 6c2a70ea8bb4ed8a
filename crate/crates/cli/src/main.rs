use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use drimv::commands::{self, Metric, RunConfig, TrainedModel};
use drimv::dataset::{gen_synthetic, load_dataset, save_dataset, SyntheticConfig};
use drimv::Error;

/// Incomplete multi-view classification with dual representation learning
/// and a cooperative TSK fuzzy classifier.
#[derive(Parser)]
#[command(name = "drimv", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a planted common/specific factor dataset.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Comma-separated view dimensions.
        #[arg(long, value_delimiter = ',', default_values_t = [20, 15, 10])]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        latent: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        /// Distance of the class means in the common latent space.
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// File name stem of the manifest and CSV files.
        #[arg(long, default_value = "synthetic")]
        stem: String,
    },
    /// Remove a fraction of each view's instances and write the masked dataset.
    Mask {
        /// Dataset manifest (JSON).
        manifest: PathBuf,
        /// Fraction of instances removed per view, in [0, 1).
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for the masked manifest and CSV files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the representation and classifier on a dataset.
    Train {
        manifest: PathBuf,
        /// Run configuration (JSON); defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the representation seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Where to write the model JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a dataset with a trained model.
    Predict {
        model: PathBuf,
        manifest: PathBuf,
        /// Output CSV of labels and per-class scores.
        #[arg(long)]
        out: PathBuf,
    },
    /// Mask, split, train and evaluate over missing rates and repetitions.
    Bench {
        manifest: PathBuf,
        /// Comma-separated missing rates, e.g. 0.1,0.3,0.5,0.7.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the root seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for results.csv and summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Friedman test and Holm comparisons over benchmark result files.
    Stats {
        /// One results.csv per algorithm.
        #[arg(required = true, num_args = 2..)]
        results: Vec<PathBuf>,
        /// Algorithm used as the Holm control.
        #[arg(long)]
        control: String,
        /// Comma-separated algorithm names (default: file stems).
        #[arg(long, value_delimiter = ',')]
        names: Option<Vec<String>>,
        /// acc, auc or f1.
        #[arg(long, default_value = "auc")]
        metric: String,
        /// Also write the report as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the linguistic rule report of one view.
    Explain {
        model: PathBuf,
        /// View name: an input view, "common" or "specific".
        #[arg(long)]
        view: String,
        /// Feature names, one per line (default f0, f1, ...).
        #[arg(long)]
        names: Option<PathBuf>,
        /// Row of --data to trace through the rules.
        #[arg(long, requires = "data")]
        instance: Option<usize>,
        /// Dataset manifest the traced instance comes from.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Directory for rules.txt, rules.json and trace.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?),
        None => Ok(RunConfig::default()),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Synth {
            n,
            dims,
            latent,
            noise,
            separation,
            classes,
            seed,
            out,
            stem,
        } => {
            let ds = gen_synthetic(&SyntheticConfig {
                n,
                dims,
                latent_dim: latent,
                noise_sd: noise,
                class_sep: separation,
                n_classes: classes,
                seed,
            })?;
            println!("{}", save_dataset(&ds, &out, &stem)?.display());
        }
        Command::Mask {
            manifest,
            rate,
            seed,
            out,
        } => {
            let path = commands::cmd_mask(&manifest, rate, seed, &out)?;
            println!("{}", path.display());
        }
        Command::Train {
            manifest,
            config,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                cfg.drl.seed = seed;
            }
            let model = commands::cmd_train(&manifest, &cfg, &out)?;
            let weights: Vec<String> = model
                .ensemble
                .views
                .iter()
                .zip(&model.ensemble.weights)
                .map(|(v, w)| format!("{}={w:.4}", v.role.name()))
                .collect();
            println!(
                "trained: {} representation iterations, {} classifier sweeps; weights {}",
                model.drl.objective_trace.len(),
                model.ensemble.sweeps,
                weights.join(" ")
            );
        }
        Command::Predict { model, manifest, out } => {
            let prediction = commands::cmd_predict(&model, &manifest, &out)?;
            println!("{} predictions written to {}", prediction.labels.len(), out.display());
        }
        Command::Bench {
            manifest,
            rates,
            reps,
            config,
            seed,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(rates) = rates {
                cfg.rates = rates;
            }
            if let Some(reps) = reps {
                cfg.repetitions = reps;
            }
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let outcome = commands::cmd_bench(&manifest, &cfg, &out)?;
            println!("rate\tn\tACC\tAUC\tF1");
            for s in &outcome.summary {
                println!("{}\t{}\t{}\t{}\t{}", s.rate, s.completed, s.acc, s.auc, s.f1);
            }
            if !outcome.is_complete() {
                eprintln!(
                    "{} cell(s) failed; see {}",
                    outcome.failures.len(),
                    out.join("failures.json").display()
                );
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Stats {
            results,
            control,
            names,
            metric,
            out,
        } => {
            let metric: Metric = metric.parse()?;
            let report = commands::cmd_stats(&results, names.as_deref(), &control, metric)?;
            print!("{}", report.to_text());
            if let Some(out) = out {
                write(&out, &serde_json::to_string_pretty(&report)?)?;
            }
        }
        Command::Explain {
            model,
            view,
            names,
            instance,
            data,
            out,
        } => {
            let model = TrainedModel::load(&model)?;
            let names = names.map(|p| commands::read_feature_names(&p)).transpose()?;
            let ds = data.map(load_dataset).transpose()?;
            let target = match (&ds, instance) {
                (Some(ds), Some(row)) => Some((ds, row)),
                _ => None,
            };
            let output = commands::cmd_explain(&model, &view, names.as_deref(), target)?;
            print!("{}", output.text);
            if let Some(trace) = &output.trace {
                println!(
                    "\nInstance trace: decision class {}, dominant rule {}",
                    trace.decision,
                    trace.dominant_rule + 1
                );
                for (k, (mu, c)) in trace.firing.iter().zip(&trace.contributions).enumerate() {
                    println!("  rule {}: firing {mu:.4}, contribution {c:?}", k + 1);
                }
            }
            if let Some(dir) = out {
                write(&dir.join("rules.txt"), &output.text)?;
                write(&dir.join("rules.json"), &serde_json::to_string_pretty(&output.report)?)?;
                if let Some(trace) = &output.trace {
                    write(&dir.join("trace.json"), &serde_json::to_string_pretty(trace)?)?;
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err
                .downcast_ref::<Error>()
                .is_some_and(|e| matches!(e, Error::InvalidArgument(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
