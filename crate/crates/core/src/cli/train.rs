use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use super::inputs::{flow_schema, load_dataset, DataFormat};
use super::{CliError, Outputs};
use crate::analytics::{confusion_metrics, roc_auc, EvalMetrics};
use crate::artifact::{ModelArtifact, SavedModel};
use crate::classical::{cross_validate, dt_fit, knn_fit, rf_fit, Algorithm, ForestConfig, TreeConfig};
use crate::data::Samples;
use crate::federated::{centralized_train, derive_seed, stratified_split, CentralConfig};
use crate::neuralnet::{EpochStats, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainAlgo {
    Knn,
    Dt,
    Rf,
    Mlp,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: TrainAlgo,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Table)]
    pub format: DataFormat,
    /// Flow schema JSON for `--format flow`.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Algorithm settings as JSON; replaces the per-algorithm flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run k-fold cross-validation instead of a single 90/10 fit.
    #[arg(long)]
    pub cv: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Neighbors for knn.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Trees for rf.
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    pub optimizer: OptimizerKind,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_optimizer(s: &str) -> Result<OptimizerKind, String> {
    OptimizerKind::parse(s).ok_or_else(|| format!("unknown optimizer `{s}` (sgd, adam, rmsprop)"))
}

/// Neural-network settings accepted by `--config` for `--algo mlp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSettings {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default = "ten")]
    pub epochs: usize,
    #[serde(default = "thirty_two")]
    pub batch_size: usize,
}

fn ten() -> usize {
    10
}

fn thirty_two() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Settings {
    Classical(Algorithm),
    Mlp(MlpSettings),
}

/// `metrics.json` of a single fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub algorithm: String,
    pub settings: Settings,
    pub schema_hash: String,
    pub n_train: usize,
    pub n_eval: usize,
    pub metrics: EvalMetrics,
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<EpochStats>>,
}

fn settings(args: &TrainArgs) -> Result<Settings, CliError> {
    if let Some(p) = &args.config {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        let bad = |e: serde_json::Error| CliError::Format(format!("{}: {e}", p.display()));
        let s = match args.algo {
            TrainAlgo::Mlp => Settings::Mlp(serde_json::from_str(&text).map_err(bad)?),
            _ => Settings::Classical(serde_json::from_str(&text).map_err(bad)?),
        };
        if let Settings::Classical(a) = &s {
            if a.name() != args.algo.to_possible_value().expect("named").get_name() {
                return Err(CliError::Usage(format!("{} configures {}, not the requested algorithm", p.display(), a.name())));
            }
        }
        return Ok(s);
    }
    let tree = TreeConfig {
        max_depth: args.max_depth,
        ..TreeConfig::default()
    };
    Ok(match args.algo {
        TrainAlgo::Knn => Settings::Classical(Algorithm::Knn { k: args.k }),
        TrainAlgo::Dt => Settings::Classical(Algorithm::Dt(tree)),
        TrainAlgo::Rf => Settings::Classical(Algorithm::Rf(ForestConfig {
            n_trees: args.trees,
            seed: args.seed,
            tree,
            ..ForestConfig::default()
        })),
        TrainAlgo::Mlp => Settings::Mlp(MlpSettings {
            optimizer: args.optimizer,
            learning_rate: args.lr,
            epochs: args.epochs,
            batch_size: args.batch,
        }),
    })
}

fn fit_saved(algo: &Algorithm, data: &Samples) -> Result<SavedModel, CliError> {
    Ok(match *algo {
        Algorithm::Knn { k } => SavedModel::Knn(knn_fit(data, k)?),
        Algorithm::Dt(cfg) => SavedModel::Dt(dt_fit(data, cfg)?),
        Algorithm::Rf(cfg) => SavedModel::Rf(rf_fit(data, cfg)?),
    })
}

fn evaluate(model: &SavedModel, data: &Samples) -> Result<(EvalMetrics, Option<f64>), CliError> {
    let p = model.predictor()?;
    let scores: Vec<f64> = data.rows().map(|(x, _)| p.score_unchecked(x)).collect();
    let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
    let metrics = confusion_metrics(&preds, data.labels())?;
    // one-class held-out splits have no ROC curve
    let auc = roc_auc(&scores, data.labels()).ok().map(|r| r.auc);
    Ok((metrics, auc))
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let settings = settings(args)?;
    let mut out = Outputs::create(&args.out, "train", args, Some(args.seed))?;
    out.input(&args.data)?;
    if let Some(p) = &args.config {
        out.input(p)?;
    }
    let schema = flow_schema(args.schema.as_ref())?;
    let ds = load_dataset(&args.data, args.format, &schema)?;

    if let Some(k) = args.cv {
        let Settings::Classical(algo) = &settings else {
            return Err(CliError::Usage("--cv supports knn, dt and rf".into()));
        };
        let report = cross_validate(algo, &ds.samples, k, args.seed)?;
        let rows: Vec<Vec<String>> = report
            .folds
            .iter()
            .enumerate()
            .map(|(i, m)| {
                vec![
                    (i + 1).to_string(),
                    m.accuracy.to_string(),
                    m.precision.to_string(),
                    m.recall.to_string(),
                    m.f1.to_string(),
                ]
            })
            .collect();
        out.write_csv("cv_folds.csv", &["fold", "accuracy", "precision", "recall", "f1"], &rows)?;
        let scores: Vec<Vec<String>> = report
            .out_of_fold_scores
            .iter()
            .zip(ds.samples.labels())
            .map(|(s, l)| vec![s.to_string(), l.to_string()])
            .collect();
        out.write_csv("cv_scores.csv", &["score", "label"], &scores)?;
        println!(
            "{} {k}-fold: accuracy {:.4} ± {:.4}, f1 {:.4} ± {:.4}",
            report.algorithm, report.accuracy.mean, report.accuracy.stddev, report.f1.mean, report.f1.stddev
        );
        let mut summary = serde_json::to_value(&report).expect("report serializes");
        summary.as_object_mut().expect("object").remove("out_of_fold_scores");
        out.write_json("cv_report.json", &summary)?;
        out.commit()?;
        return Ok(());
    }

    let (model, report) = match &settings {
        Settings::Classical(algo) => {
            let (tr, ev) = stratified_split(ds.samples.labels(), 0.1, derive_seed(args.seed, 1, 1));
            let (train, eval) = (ds.samples.select(&tr), ds.samples.select(&ev));
            let model = fit_saved(algo, &train)?;
            let (metrics, auc) = evaluate(&model, &eval)?;
            let report = TrainReport {
                algorithm: algo.name().into(),
                settings: settings.clone(),
                schema_hash: ds.schema_hash.clone(),
                n_train: train.len(),
                n_eval: eval.len(),
                metrics,
                auc,
                history: None,
            };
            (model, report)
        }
        Settings::Mlp(m) => {
            let cfg = CentralConfig {
                optimizer: m.optimizer,
                learning_rate: m.learning_rate,
                epochs: m.epochs,
                batch_size: m.batch_size,
                eval_split: 0.1,
                seed: args.seed,
            };
            let outcome = centralized_train(&[&ds.samples], &cfg)?;
            let model = SavedModel::Mlp {
                weights: outcome.weights,
                standardizer: outcome.standardizer,
            };
            // same split the trainer held out
            let (_, ev) = stratified_split(ds.samples.labels(), cfg.eval_split, derive_seed(args.seed, 1, 1));
            let (metrics, auc) = evaluate(&model, &ds.samples.select(&ev))?;
            let report = TrainReport {
                algorithm: "mlp".into(),
                settings: settings.clone(),
                schema_hash: ds.schema_hash.clone(),
                n_train: outcome.n_train,
                n_eval: outcome.n_eval,
                metrics,
                auc,
                history: Some(outcome.history),
            };
            (model, report)
        }
    };
    println!(
        "{}: accuracy {:.4}, precision {:.4}, recall {:.4}, f1 {:.4} on {} held-out rows",
        report.algorithm,
        report.metrics.accuracy,
        report.metrics.precision,
        report.metrics.recall,
        report.metrics.f1,
        report.n_eval
    );
    let artifact = ModelArtifact {
        schema_hash: ds.schema_hash,
        model,
        metrics: Some(report.metrics),
    };
    let path = out.path("model.json")?;
    artifact.save(&path)?;
    out.write_json("metrics.json", &report)?;
    out.commit()?;
    Ok(())
}
