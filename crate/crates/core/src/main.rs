use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use veritas::calibration::calibration_report;
use veritas::data::{load_dataset, FoldSpec};
use veritas::harness::{
    evaluate, min_uncertainty_step, run, timeline_report, write_synthetic, RunConfig, SyntheticSpec,
};
use veritas::nn::Checkpoint;
use veritas::rejection::{
    load_records, per_fold_reject, random_curve, rejection_curve, supervised_reject, supervised_reject_folded,
    train_meta, FoldedMeta, Measure, MetaClassifier, PredictionRecord,
};
use veritas::verifier::ModelParams;
use veritas::{Error, Result};

#[derive(Parser)]
#[command(name = "veritas", version, about = "Rumour verification with uncertainty estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Unsup,
    Sup,
    Random,
    Perfold,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate a model and write per-tree records.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        folds: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dev_fold: Option<usize>,
    },
    /// Accuracy and F-scores of a record file.
    Evaluate {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        classes: usize,
    },
    /// Withhold uncertain predictions and score the rest.
    Reject {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        measure: Option<String>,
        #[arg(long)]
        retain: Option<f64>,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Histogram-binning calibration report.
    Calibrate {
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        measure: String,
        #[arg(long, default_value_t = 10)]
        bins: usize,
    },
    /// Uncertainty over the prefixes of one conversation.
    Timeline {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tree: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        measure: String,
    },
    /// Generate a synthetic dataset.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn measure(name: Option<&str>) -> Result<Measure> {
    name.ok_or_else(|| Error::Config("--measure is required for this mode".into()))?.parse()
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train { data, folds, config, out, dev_fold } => train(&data, &folds, &config, &out, dev_fold),
        Command::Evaluate { records, classes } => {
            let recs = load_records(records)?;
            let gold: Vec<usize> = recs.iter().map(|r| r.label).collect();
            let pred: Vec<usize> = recs.iter().map(|r| r.predicted).collect();
            println!("{}", serde_json::to_string_pretty(&evaluate(&gold, &pred, classes)?)?);
            Ok(())
        }
        Command::Reject { records, mode, measure: name, retain, meta, seed } => {
            let recs = load_records(records)?;
            let retain = || retain.ok_or_else(|| Error::Config("--retain is required for this mode".into()));
            let curve = match mode {
                Mode::Unsup => rejection_curve(&recs, measure(name.as_deref())?, &[retain()?])?,
                Mode::Perfold => per_fold_reject(&recs, measure(name.as_deref())?, &[retain()?])?,
                Mode::Random => random_curve(&recs, &[retain()?], seed)?,
                Mode::Sup => {
                    let path = meta.ok_or_else(|| Error::Config("--meta is required for supervised mode".into()))?;
                    return supervised(&recs, &path);
                }
            };
            print!("{}", curve.to_csv(true));
            Ok(())
        }
        Command::Calibrate { dev, test, measure: name, bins } => {
            let dev = load_records(dev)?;
            let test = load_records(test)?;
            let measures = if name == "all" { Measure::ALL.to_vec() } else { vec![name.parse()?] };
            println!("measure,ece_before,ece_after,M,n_dev,n_test");
            for m in measures {
                let (report, _) = calibration_report(&dev, &test, m, bins)?;
                println!("{}", report.csv_row());
            }
            Ok(())
        }
        Command::Timeline { model, tree, data, measure: name } => {
            let m: Measure = name.parse()?;
            let params = ModelParams::from_checkpoint(&Checkpoint::load(&model)?)?;
            let config = sibling_config(&model, params.input_dim())?;
            let embedder = config.embedder.build()?;
            if embedder.dimension() != params.input_dim() {
                return Err(Error::Config(format!(
                    "embedder dimension {} does not match model input {}",
                    embedder.dimension(),
                    params.input_dim()
                )));
            }
            let trees = load_dataset(data)?;
            let t = trees
                .iter()
                .find(|t| t.tree_id == tree)
                .ok_or_else(|| Error::Data(format!("tree {tree} not in dataset")))?;
            let series = timeline_report(&params, t, &embedder, config.training.max_branch_len, &config.uncertainty)?;
            print!("{}", series.to_csv(true));
            let best = min_uncertainty_step(&series, m)?;
            eprintln!(
                "lowest {} at step {} (n_tweets {}), predicted class {}",
                m,
                best + 1,
                series.steps[best].n_tweets,
                series.steps[best].predicted()
            );
            Ok(())
        }
        Command::Synth { spec, out } => {
            let spec: SyntheticSpec = read_json(&spec)?;
            let n = write_synthetic(&spec, &out)?;
            eprintln!("wrote {n} trees to {}", out.display());
            Ok(())
        }
    }
}

/// `config.json` next to a checkpoint, as written by `train`; defaults
/// otherwise, sized to the model.
fn sibling_config(model: &Path, input_dim: usize) -> Result<RunConfig> {
    let path = model.with_file_name("config.json");
    if path.exists() {
        return read_json(&path);
    }
    log::warn!("no config.json beside the checkpoint; using defaults");
    let mut config = RunConfig::default();
    config.embedder.dimension = input_dim;
    Ok(config)
}

fn supervised(records: &[PredictionRecord], path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)?;
    let outcome = match serde_json::from_str::<FoldedMeta>(&text) {
        Ok(folded) => supervised_reject_folded(&folded, records)?,
        Err(_) => supervised_reject(&MetaClassifier::from_json(&text)?, records)?,
    };
    let n_classes = records.first().map_or(2, |r| r.n_classes());
    let frac = outcome.retained.len() as f64 / records.len().max(1) as f64;
    let point = veritas::rejection::point_for(&outcome.retained, frac, n_classes)?;
    println!("n_removed,n_remaining,accuracy,macro_f");
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    println!("{},{},{},{}", outcome.n_removed, point.n_remaining, na(point.accuracy), na(point.macro_f));
    Ok(())
}

fn train(data: &Path, folds: &Path, config: &Path, out: &Path, dev_fold: Option<usize>) -> Result<()> {
    let trees = load_dataset(data)?;
    let mut folds = FoldSpec::from_json(&fs::read_to_string(folds)?)?;
    if dev_fold.is_some() {
        folds.dev_fold = dev_fold;
    }
    let config: RunConfig = read_json(config)?;
    let with_dev = folds.dev_fold.is_some();
    let cv = run(&trees, &folds, &config, with_dev)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("config.json"), serde_json::to_string_pretty(&config)?)?;
    fs::write(out.join("records.csv"), veritas::rejection::records_to_csv(&cv.records)?)?;
    for f in &cv.folds {
        f.params.to_checkpoint().save(out.join(format!("model_fold{}.json", f.fold)))?;
        fs::write(out.join(format!("history_fold{}.csv", f.fold)), f.history.to_csv())?;
    }
    let gold: Vec<usize> = cv.records.iter().map(|r| r.label).collect();
    let pred: Vec<usize> = cv.records.iter().map(|r| r.predicted).collect();
    let n_classes = veritas::data::class_count(&trees);
    let metrics = evaluate(&gold, &pred, n_classes)?;
    fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
    if with_dev {
        fs::write(out.join("dev_records.csv"), veritas::rejection::records_to_csv(&cv.all_dev_records())?)?;
        let mut by_fold = std::collections::BTreeMap::new();
        for f in &cv.folds {
            let meta = train_meta(&f.dev, config.meta.backend, &config.meta.hyperparams, config.meta.seed)?;
            by_fold.insert(f.fold, meta);
        }
        fs::write(out.join("meta.json"), serde_json::to_string_pretty(&FoldedMeta { by_fold })?)?;
    }
    println!("accuracy,macro_f,n");
    println!("{},{},{}", metrics.accuracy, metrics.macro_f, metrics.n_instances);
    Ok(())
}
