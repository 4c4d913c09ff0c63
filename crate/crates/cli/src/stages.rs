//! One runner per subcommand. Each reads a JSON config, writes its artifacts
//! under the output directory and returns the text to show the user.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use shm_locate_core::features::{self, FeatureDataset, GaConfig, GaOutcome, PcaModel, Split};
use shm_locate_core::mlp::{self, TrainConfig};
use shm_locate_core::novelty::BaselineModel;
use shm_locate_core::pipeline::{
    self, experiment_train_config, ArmConfig, ExperimentConfig, ExperimentOutcome, ExperimentReport, FeatureTransform,
    StageSeeds,
};
use shm_locate_core::rng::stream;
use shm_locate_core::signals;
use shm_locate_core::synthdata::{self, ClassId, LayoutConfig, ModelConfig, SensorLayout, SMALL_PANEL_CLASSES};

use crate::error::CliError;
use crate::exec::RayonExecutor;
use crate::io::{self, Classifier};
use crate::table::render_confusion;

/// Invocation context shared by every stage.
pub struct Context {
    pub out: PathBuf,
    /// Relative paths inside a config file resolve against this directory.
    pub config_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub exec: RayonExecutor,
}

impl Context {
    fn input(&self, p: &Path) -> PathBuf {
        io::resolve(&self.config_dir, p)
    }

    fn seed(&self, configured: u64) -> u64 {
        self.seed_override.unwrap_or(configured)
    }
}

fn required(p: &Option<PathBuf>, field: &str) -> Result<PathBuf, CliError> {
    p.clone()
        .ok_or_else(|| CliError::usage(format!("config field `{field}` is required")))
}

fn classes_or_all(data: &FeatureDataset, classes: &Option<Vec<ClassId>>) -> Vec<ClassId> {
    match classes {
        Some(c) => {
            let mut c = c.clone();
            c.sort_unstable();
            c.dedup();
            c
        }
        None => data.classes(),
    }
}

fn restrict(data: &FeatureDataset, classes: &[ClassId]) -> FeatureDataset {
    data.rows_where(|c, _| classes.contains(&c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    /// Master seed; the data stream uses the same derived seed as `experiment`.
    pub seed: u64,
    pub model: ModelConfig,
    pub layout: LayoutConfig,
    pub reps_per_class: usize,
    pub noise_level: f64,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        GenDataConfig {
            seed: e.seed,
            model: e.model,
            layout: e.layout,
            reps_per_class: e.reps_per_class,
            noise_level: e.noise_level,
        }
    }
}

pub fn gen_data(ctx: &Context, cfg: &GenDataConfig) -> Result<String, CliError> {
    let model = synthdata::build_wing_model(&cfg.model)?;
    let layout = SensorLayout::from_config(&cfg.layout)?;
    let seed = StageSeeds::derive(ctx.seed(cfg.seed)).data;
    let data = synthdata::generate_dataset(&model, &layout, cfg.reps_per_class, cfg.noise_level, seed, &ctx.exec)?;
    io::write_dataset(&ctx.out, &cfg.model, &layout, &data)?;
    info!("wrote {} records to {}", data.records.len(), ctx.out.display());
    let mut text = format!("{} records ({} pairs × {} lines)\n", data.records.len(), layout.pairs.len(), layout.n_lines());
    for (c, n) in &data.per_class_counts {
        let _ = writeln!(text, "class {c}: {n}");
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Dataset directory written by `gen-data`.
    pub dataset: Option<PathBuf>,
    pub window_len: usize,
    pub ridge_scale: f64,
    pub feature_transform: FeatureTransform,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        FeaturesConfig {
            dataset: None,
            window_len: e.window_len,
            ridge_scale: e.ridge_scale,
            feature_transform: e.feature_transform,
        }
    }
}

pub const BASELINES_FILE: &str = "baselines.json";
pub const FEATURES_FILE: &str = "features.csv";

pub fn features(ctx: &Context, cfg: &FeaturesConfig) -> Result<String, CliError> {
    let dir = ctx.input(&required(&cfg.dataset, "dataset")?);
    let (meta, data) = io::read_dataset(&dir)?;
    let windows = signals::default_window_grid(meta.pairs, meta.lines, cfg.window_len)?;
    let baselines = pipeline::fit_baselines(&data, &windows, cfg.ridge_scale)?;
    let mut fd = pipeline::damaged_features(&data, &baselines, &ctx.exec)?;
    for v in fd.x.as_mut_slice() {
        *v = cfg.feature_transform.apply(*v);
    }
    io::create_dir(&ctx.out)?;
    io::write_json(&ctx.out.join(BASELINES_FILE), &baselines)?;
    io::write_features(&ctx.out.join(FEATURES_FILE), &fd)?;
    Ok(format!("{} rows × {} candidate features\n", fd.len(), fd.x.cols()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub features: Option<PathBuf>,
    pub ga: GaConfig,
}

impl Default for SelectConfig {
    fn default() -> Self {
        SelectConfig {
            features: None,
            ga: GaConfig::default(),
        }
    }
}

pub const SELECTION_FILE: &str = "selection.json";
pub const SELECTED_FILE: &str = "selected.csv";

pub fn select(ctx: &Context, cfg: &SelectConfig) -> Result<String, CliError> {
    let fd = io::read_features(&ctx.input(&required(&cfg.features, "features")?))?;
    let scaled = fd.normalized()?;
    let (xt, yt) = scaled.part(Split::Train);
    let (xv, yv) = scaled.part(Split::Validation);
    let ga = GaConfig {
        seed: ctx.seed(cfg.ga.seed),
        ..cfg.ga.clone()
    };
    let outcome: GaOutcome = features::ga_select(&xt, &yt, &xv, &yv, &ga, &ctx.exec)?;
    io::create_dir(&ctx.out)?;
    io::write_json(&ctx.out.join(SELECTION_FILE), &outcome)?;
    io::write_features(&ctx.out.join(SELECTED_FILE), &fd.select_columns(&outcome.indices)?)?;
    Ok(format!(
        "selected columns {:?}, validation 1-NN accuracy {:.4}\n",
        outcome.indices, outcome.fitness
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainStageConfig {
    pub features: Option<PathBuf>,
    /// Classes to train on; all classes in the file when absent.
    pub classes: Option<Vec<ClassId>>,
    pub hidden_sizes: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for TrainStageConfig {
    fn default() -> Self {
        let arm = ArmConfig::default();
        TrainStageConfig {
            features: None,
            classes: None,
            hidden_sizes: arm.hidden_sizes,
            train: arm.train,
        }
    }
}

pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const TRAINING_FILE: &str = "training.json";
pub const LOSS_FILE: &str = "loss.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub classes: Vec<ClassId>,
    pub hidden_size: Option<usize>,
    pub restart_index: Option<usize>,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

pub fn train(ctx: &Context, cfg: &TrainStageConfig) -> Result<String, CliError> {
    let fd = io::read_features(&ctx.input(&required(&cfg.features, "features")?))?;
    let classes = classes_or_all(&fd, &cfg.classes);
    let data = restrict(&fd, &classes).normalized()?;
    let arm = ArmConfig {
        hidden_sizes: cfg.hidden_sizes.clone(),
        train: cfg.train.clone(),
    };
    let trained = pipeline::train_arm(&data, &classes, &arm, ctx.seed(cfg.train.seed), &ctx.exec)?;
    let summary = TrainingSummary {
        classes: classes.clone(),
        hidden_size: Some(trained.hidden),
        restart_index: Some(trained.restart_index),
        stopped_epoch: trained.history.stopped_epoch,
        best_epoch: trained.history.best_epoch,
        best_val_loss: trained.history.best_val_loss(),
    };
    io::create_dir(&ctx.out)?;
    io::write_json(
        &ctx.out.join(CLASSIFIER_FILE),
        &Classifier {
            classes,
            normalization: data.normalization.clone().expect("normalized above"),
            model: trained.model,
        },
    )?;
    io::write_json(&ctx.out.join(TRAINING_FILE), &summary)?;
    io::write_loss(&ctx.out.join(LOSS_FILE), &trained.history)?;
    Ok(format!(
        "hidden {} (restart {}), stopped at epoch {}, best epoch {} with validation loss {:.6}\n",
        trained.hidden, trained.restart_index, summary.stopped_epoch, summary.best_epoch, summary.best_val_loss
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferStageConfig {
    pub features: Option<PathBuf>,
    /// Classifier whose first layer is copied and frozen.
    pub source: Option<PathBuf>,
    pub classes: Vec<ClassId>,
    pub train: TrainConfig,
    /// Also train the no-hidden-layer control from the same output-layer draw.
    pub control: bool,
}

impl Default for TransferStageConfig {
    fn default() -> Self {
        TransferStageConfig {
            features: None,
            source: None,
            classes: SMALL_PANEL_CLASSES.to_vec(),
            train: experiment_train_config(),
            control: true,
        }
    }
}

pub const TRANSFER_FILE: &str = "transfer.json";
pub const CONTROL_FILE: &str = "scratch.json";
pub const TRANSFER_LOSS_FILE: &str = "loss_transfer.csv";
pub const CONTROL_LOSS_FILE: &str = "loss_scratch.csv";

pub fn transfer(ctx: &Context, cfg: &TransferStageConfig) -> Result<String, CliError> {
    let fd = io::read_features(&ctx.input(&required(&cfg.features, "features")?))?;
    let source: Classifier = io::read_json(&ctx.input(&required(&cfg.source, "source")?))?;
    let mut classes = cfg.classes.clone();
    classes.sort_unstable();
    classes.dedup();
    let data = restrict(&fd, &classes).normalized()?;
    let norm = data.normalization.clone().expect("normalized above");
    let seed = ctx.seed(cfg.train.seed);
    let tcfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };

    let model = mlp::freeze_transfer(&source.model, classes.len(), tcfg.init_std, &mut stream(seed, 0))?;
    let (model, history) = pipeline::train_output_layer(model, &data, &classes, &tcfg)?;
    io::create_dir(&ctx.out)?;
    io::write_json(
        &ctx.out.join(TRANSFER_FILE),
        &Classifier {
            classes: classes.clone(),
            normalization: norm.clone(),
            model,
        },
    )?;
    io::write_loss(&ctx.out.join(TRANSFER_LOSS_FILE), &history)?;
    let mut text = format!(
        "transfer: stopped at epoch {}, best validation loss {:.6}\n",
        history.stopped_epoch,
        history.best_val_loss()
    );

    if cfg.control {
        let control = mlp::single_layer(data.x.cols(), classes.len(), tcfg.init_std, &mut stream(seed, 0))?;
        let (control, history) = pipeline::train_output_layer(control, &data, &classes, &tcfg)?;
        io::write_json(
            &ctx.out.join(CONTROL_FILE),
            &Classifier {
                classes,
                normalization: norm,
                model: control,
            },
        )?;
        io::write_loss(&ctx.out.join(CONTROL_LOSS_FILE), &history)?;
        let _ = writeln!(
            text,
            "control: stopped at epoch {}, best validation loss {:.6}",
            history.stopped_epoch,
            history.best_val_loss()
        );
    }
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Classifier written by `train`, `transfer` or `experiment`.
    pub model: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub split: Split,
    /// Drop rows whose class the model does not predict instead of failing.
    pub only_model_classes: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            model: None,
            features: None,
            split: Split::Test,
            only_model_classes: true,
        }
    }
}

pub const CONFUSION_FILE: &str = "confusion.json";

pub fn evaluate(ctx: &Context, cfg: &EvaluateConfig) -> Result<String, CliError> {
    let clf: Classifier = io::read_json(&ctx.input(&required(&cfg.model, "model")?))?;
    let fd = io::read_features(&ctx.input(&required(&cfg.features, "features")?))?;
    let fd = if cfg.only_model_classes {
        restrict(&fd, &clf.classes)
    } else {
        fd
    };
    let (x, y) = fd.part(cfg.split);
    let x = features::apply_normalization(&x, &clf.normalization)?;
    let cm = pipeline::evaluate(&clf.model, &x, &y, &clf.classes)?;
    io::create_dir(&ctx.out)?;
    io::write_json(&ctx.out.join(CONFUSION_FILE), &cm)?;
    Ok(render_confusion(&format!("Confusion matrix ({} split)", cfg.split.as_str()), &cm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaStageConfig {
    pub features: Option<PathBuf>,
    pub components: usize,
    pub classes: Option<Vec<ClassId>>,
    /// Project hidden activations of this classifier instead of the features.
    pub model: Option<PathBuf>,
    /// Scale features by their training range before projecting (ignored with `model`).
    pub normalize: bool,
}

impl Default for PcaStageConfig {
    fn default() -> Self {
        PcaStageConfig {
            features: None,
            components: ExperimentConfig::default().pca_components,
            classes: None,
            model: None,
            normalize: false,
        }
    }
}

pub const PCA_FILE: &str = "pca.csv";
pub const PCA_MODEL_FILE: &str = "pca.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaExportFile {
    pub model: PcaModel,
    pub explained_fraction: Vec<f64>,
}

pub fn pca(ctx: &Context, cfg: &PcaStageConfig) -> Result<String, CliError> {
    let fd = io::read_features(&ctx.input(&required(&cfg.features, "features")?))?;
    let classes = classes_or_all(&fd, &cfg.classes);
    let fd = restrict(&fd, &classes);
    let x = match &cfg.model {
        Some(p) => {
            let clf: Classifier = io::read_json(&ctx.input(p))?;
            let x = features::apply_normalization(&fd.x, &clf.normalization)?;
            clf.model.hidden_batch(&x)?
        }
        None if cfg.normalize => fd.normalized()?.x,
        None => fd.x.clone(),
    };
    let model = features::pca_fit(&x, cfg.components)?;
    let scores = features::pca_project(&model, &x)?;
    io::create_dir(&ctx.out)?;
    io::write_scores(&ctx.out.join(PCA_FILE), &fd.y, &scores)?;
    let explained_fraction = model.explained_fraction();
    let text = format!(
        "explained variance fractions {:?} (cumulative {:.4})\n",
        explained_fraction,
        explained_fraction.iter().sum::<f64>()
    );
    io::write_json(
        &ctx.out.join(PCA_MODEL_FILE),
        &PcaExportFile {
            model,
            explained_fraction,
        },
    )?;
    Ok(text)
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const SELECTED_FEATURES_FILE: &str = "features_selected.csv";

/// Written next to the report; identical inputs give an identical file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// The configuration as given, before any command-line override.
    pub config: ExperimentConfig,
    pub seed_override: Option<u64>,
    pub seeds: StageSeeds,
    pub files: Vec<String>,
}

pub fn loss_file(arm: &str) -> String {
    format!("loss_{arm}.csv")
}

pub fn pca_file(view: &str) -> String {
    format!("pca_{view}.csv")
}

fn arm_classifier(outcome: &ExperimentOutcome, arm: &str) -> Classifier {
    let r = &outcome.report;
    let (classes, normalization) = match arm {
        "monolithic" => (&r.monolithic.classes, &r.normalization.monolithic),
        "split_large" => (&r.split_large.classes, &r.normalization.split_large),
        _ => (&r.split_small.classes, &r.normalization.split_small),
    };
    Classifier {
        classes: classes.clone(),
        normalization: normalization.clone(),
        model: outcome.arm(arm).expect("every arm is present").model.clone(),
    }
}

/// Writes every experiment artifact and returns the run's in-memory outcome.
pub fn write_experiment(ctx: &Context, cfg: &ExperimentConfig) -> Result<ExperimentOutcome, CliError> {
    let effective = ExperimentConfig {
        seed: ctx.seed(cfg.seed),
        ..cfg.clone()
    };
    let outcome = pipeline::run_experiment(&effective, &ctx.exec)?;
    io::create_dir(&ctx.out)?;
    let models = ctx.out.join("models");
    io::create_dir(&models)?;

    let mut files = vec![REPORT_FILE.to_string()];
    io::write_json(&ctx.out.join(REPORT_FILE), &outcome.report)?;
    for arm in &outcome.arms {
        let name = loss_file(arm.name);
        io::write_loss(&ctx.out.join(&name), &arm.history)?;
        files.push(name);
        let name = format!("models/{}.json", arm.name);
        io::write_json(&ctx.out.join(&name), &arm_classifier(&outcome, arm.name))?;
        files.push(name);
    }
    for view in &outcome.pca_exports {
        let name = pca_file(&view.name);
        io::write_scores(&ctx.out.join(&name), &view.classes, &view.scores)?;
        files.push(name);
    }
    let selected = outcome.features.select_columns(&outcome.report.selected_features)?;
    io::write_features(&ctx.out.join(SELECTED_FEATURES_FILE), &selected)?;
    files.push(SELECTED_FEATURES_FILE.to_string());
    files.sort();

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seed_override: ctx.seed_override,
        seeds: outcome.report.seeds.clone(),
        files,
    };
    io::write_json(&ctx.out.join(MANIFEST_FILE), &manifest)?;
    Ok(outcome)
}

/// Human-readable summary of a finished experiment.
pub fn render_report(r: &ExperimentReport) -> String {
    let mut text = String::new();
    let arms = [
        ("Nine-class classifier", &r.monolithic),
        ("Large-panel sub-classifier", &r.split_large),
        ("Small-panel sub-classifier", &r.split_small),
        ("Small panels, transferred first layer", &r.transfer_small),
        ("Small panels, no hidden layer", &r.scratch_small),
    ];
    for (title, arm) in arms {
        text.push_str(&render_confusion(title, &arm.confusion));
        let _ = writeln!(
            text,
            "stopped at epoch {}, best epoch {}, best validation loss {:.6}\n",
            arm.stopped_epoch, arm.best_epoch, arm.best_val_loss
        );
    }
    let _ = writeln!(text, "selected windows: {:?}", r.selected_features);
    let _ = writeln!(text, "composite split accuracy: {:.2}%", 100.0 * r.composite_split_accuracy);
    let _ = writeln!(
        text,
        "nine-class accuracy on panels {:?}: {:.2}%",
        r.split_small.classes,
        100.0 * r.monolithic_small_class_accuracy
    );
    for p in &r.pca {
        let _ = writeln!(
            text,
            "PCA {}: explained fractions {:?} (cumulative {:.4})",
            p.name, p.explained_fraction, p.cumulative_fraction
        );
    }
    let _ = writeln!(text, "note: {}", r.routing_note);
    text
}

pub fn experiment(ctx: &Context, cfg: &ExperimentConfig) -> Result<String, CliError> {
    let outcome = write_experiment(ctx, cfg)?;
    Ok(render_report(&outcome.report))
}

/// Reads the baselines written by `features`.
pub fn read_baselines(path: &Path) -> Result<Vec<BaselineModel>, CliError> {
    io::read_json(path)
}
