//! `clonefuse` command-line entry point.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use clonefuse::codeparse::{build_vocab, encode_pair, lex_manifest};
use clonefuse::config::ExperimentConfig;
use clonefuse::corpus::{ingest_irplag, ingest_pairs_csv, CorpusManifest};
use clonefuse::evalx::{compare_table, compute_metrics, ComparisonRow, ScoredPair, TableFormat};
use clonefuse::model::{gradient_check, predict, save_checkpoint, load_checkpoint, ModelConfig};
use clonefuse::outfeature::{attach_features, compute_features, load_features, save_features, FeatureMap};
use clonefuse::train::run_experiment;
use clonefuse::{Error, Real};

mod results;

use results::ResultsFile;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_CHECK: u8 = 3;

#[derive(Parser)]
#[command(name = "clonefuse", version, about = "Clone detection with execution-feature fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build manifest.json from an IR-Plag directory or a pairs.csv file.
    Ingest {
        root: PathBuf,
        #[arg(short, long, default_value = "manifest.json")]
        output: PathBuf,
    },
    /// Print token statistics of a manifest.
    Stats { manifest: PathBuf },
    /// Execute fragments and write the pair feature cache.
    Features {
        manifest: PathBuf,
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long, default_value = "features.json")]
        output: PathBuf,
    },
    /// Run the multi-run training experiment.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Feed the constant fallback feature instead of each pair's feature.
        #[arg(long)]
        no_feature: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score every pair of a manifest with a checkpoint.
    Eval {
        checkpoint: PathBuf,
        manifest: PathBuf,
        features: PathBuf,
        #[arg(long)]
        no_feature: bool,
    },
    /// Emit the comparison table with rows from results files appended.
    Compare {
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
    /// Compare analytic gradients with central differences on the tiny model.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 20)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

enum Failure {
    Data(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

fn log(event: &str, fields: serde_json::Value) {
    let mut obj = json!({ "event": event });
    if let (Some(o), serde_json::Value::Object(f)) = (obj.as_object_mut(), fields) {
        o.extend(f);
    }
    eprintln!("{obj}");
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_owned(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn ingest(root: &Path) -> Result<CorpusManifest, Error> {
    if root.is_file() && root.extension().is_some_and(|e| e == "csv") {
        ingest_pairs_csv(root)
    } else {
        ingest_irplag(root)
    }
}

fn load_or_compute_features(
    manifest: &CorpusManifest,
    cfg: &ExperimentConfig,
) -> Result<FeatureMap, Error> {
    let cache = match &cfg.features {
        Some(p) if p.exists() => load_features(p)?,
        _ => FeatureMap::new(),
    };
    let features = compute_features(manifest, &cfg.executor, &cache)?;
    if let Some(p) = &cfg.features {
        if features != cache {
            save_features(p, &features)?;
        }
    }
    Ok(features)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Ingest { root, output } => {
            let manifest = ingest(&root)?;
            manifest.save(&output)?;
            log(
                "ingest",
                json!({"fragments": manifest.fragments.len(), "pairs": manifest.pairs.len(), "output": output}),
            );
        }
        Command::Stats { manifest } => {
            let m = CorpusManifest::load(&manifest)?;
            let stats = clonefuse::corpus::corpus_stats(&m)?;
            println!("{}", serde_json::to_string_pretty(&stats).map_err(Error::from)?);
        }
        Command::Features {
            manifest,
            config,
            output,
        } => {
            let m = CorpusManifest::load(&manifest)?;
            let cfg = ExperimentConfig::load(&config)?;
            let cache = if output.exists() {
                load_features(&output)?
            } else {
                FeatureMap::new()
            };
            let features = compute_features(&m, &cfg.executor, &cache)?;
            save_features(&output, &features)?;
            let available = features.values().filter(|f| f.available).count();
            log(
                "features",
                json!({"pairs": features.len(), "available": available, "output": output}),
            );
        }
        Command::Train {
            config,
            output,
            no_feature,
            seed,
            runs,
            epochs,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
                cfg.apply_seed();
            }
            if let Some(r) = runs {
                cfg.train.num_runs = r;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            if no_feature {
                cfg.train.use_feature = false;
            }
            cfg.validate()?;

            let manifest = match (&cfg.manifest, &cfg.dataset_root, &cfg.pairs_csv) {
                (Some(m), _, _) => CorpusManifest::load(m)?,
                (None, Some(root), _) => ingest_irplag(root)?,
                (None, None, Some(csv)) => ingest_pairs_csv(csv)?,
                (None, None, None) => unreachable!("validate() requires a data source"),
            };
            let features = load_or_compute_features(&manifest, &cfg)?;
            let vocab = build_vocab(&manifest, cfg.vocab_max_size)?;
            cfg.model.vocab_size = vocab.len();
            log(
                "train_start",
                json!({"pairs": manifest.pairs.len(), "vocab": vocab.len(), "runs": cfg.train.num_runs,
                       "use_feature": cfg.train.use_feature}),
            );

            let outcome = run_experiment::<Real>(
                &manifest,
                &features,
                &vocab,
                &cfg.split,
                &cfg.model,
                &cfg.train,
                cfg.seed,
            )?;
            let out_path = output.unwrap_or_else(|| cfg.output_dir.join("results.json"));
            for (i, params) in outcome.params.iter().enumerate() {
                let mcfg = ModelConfig {
                    seed: outcome.result.runs[i].seed,
                    ..cfg.model.clone()
                };
                let ckpt = results::checkpoint_path(&out_path, i);
                if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                        path: dir.to_owned(),
                        source: e,
                    })?;
                }
                save_checkpoint(&ckpt, &mcfg, params, Some(&vocab))?;
            }
            let file = ResultsFile::new(cfg, outcome.result);
            write_text(&out_path, &file.to_json()?)?;
            log(
                "train_done",
                json!({"output": out_path, "mean_f_measure": file.aggregate.mean.f_measure}),
            );
        }
        Command::Eval {
            checkpoint,
            manifest,
            features,
            no_feature,
        } => {
            let ckpt = load_checkpoint::<Real>(&checkpoint)?;
            let vocab = ckpt.vocab.ok_or_else(|| Error::Format {
                path: checkpoint.clone(),
                reason: "checkpoint carries no vocabulary".into(),
            })?;
            let m = CorpusManifest::load(&manifest)?;
            let feats = load_features(&features)?;
            let fallback = clonefuse::outfeature::DEFAULT_FALLBACK;
            let mut pairs = m.pairs.clone();
            attach_features(&mut pairs, &feats, ckpt.config.feature_dim, fallback);
            let streams = lex_manifest(&m)?;
            let index: std::collections::HashMap<&str, usize> =
                m.fragments.iter().enumerate().map(|(i, f)| (f.id.as_str(), i)).collect();
            let ablated = vec![fallback; ckpt.config.feature_dim];
            let mut scored = Vec::with_capacity(pairs.len());
            for p in &pairs {
                let seq = |id: &str| {
                    index
                        .get(id)
                        .map(|&i| &streams[i])
                        .ok_or_else(|| Error::UnknownFragment(id.to_owned()))
                };
                let enc = encode_pair(seq(&p.id_a)?, seq(&p.id_b)?, &vocab, ckpt.config.max_len)?;
                let f = if no_feature { &ablated } else { &p.out_feature };
                let pred = predict(&ckpt.params, &ckpt.config, &enc, f)?;
                scored.push(ScoredPair {
                    prob: pred.prob,
                    label: p.label,
                });
            }
            let metrics = compute_metrics(&scored)?;
            println!("{}", serde_json::to_string_pretty(&metrics).map_err(Error::from)?);
        }
        Command::Compare { results, format } => {
            let rows = results
                .iter()
                .map(|p| ResultsFile::load(p).map(|r| r.comparison_row()))
                .collect::<Result<Vec<ComparisonRow>, Error>>()?;
            let fmt = match format {
                Format::Md => TableFormat::Markdown,
                Format::Csv => TableFormat::Csv,
            };
            print!("{}", compare_table(&rows, fmt));
        }
        Command::Gradcheck { tol, probes, seed } => {
            let report = gradient_check::<f64>(&ModelConfig::tiny(), seed, probes, tol)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            if !report.pass {
                return Err(Failure::Check(format!(
                    "max relative error {:e} is not below {tol:e}",
                    report.max_rel_err
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            log("error", json!({"message": e.to_string()}));
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Check(msg)) => {
            log("check_failed", json!({"message": msg}));
            ExitCode::from(EXIT_CHECK)
        }
    }
}
