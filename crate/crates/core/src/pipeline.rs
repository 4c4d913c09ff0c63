//! Experiment driver: monolithic nine-class classifier, split sub-classifiers,
//! and frozen-layer transfer between the two sub-problems.
//!
//! Sub-classifiers are evaluated on pre-separated test rows. Nothing routes a
//! new record to the right sub-classifier; see [`ROUTING_NOTE`].

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Stage};
use crate::exec::Executor;
use crate::features::{self, FeatureDataset, GaConfig, Normalization, PcaModel, Split};
use crate::matrix::Matrix;
use crate::mlp::{self, Batch, LossHistory, MlpModel, TrainConfig};
use crate::novelty::{self, BaselineModel};
use crate::rng::{derive_seed, stream};
use crate::signals::{self, SpectralWindow};
use crate::synthdata::{self, ClassId, LayoutConfig, ModelConfig, RawDataset, SensorLayout, DAMAGE_CLASSES, SMALL_PANEL_CLASSES};

pub const ROUTING_NOTE: &str = "sub-classifiers are scored on test rows already separated by true class; \
no routing of unseen records between sub-classifiers is implemented";

/// Per-class prediction counts; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfusionRepr", into = "ConfusionRepr")]
pub struct ConfusionMatrix {
    classes: Vec<ClassId>,
    counts: Vec<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
struct ConfusionRepr {
    classes: Vec<ClassId>,
    counts: Vec<Vec<u64>>,
    accuracy: f64,
}

impl From<ConfusionMatrix> for ConfusionRepr {
    fn from(cm: ConfusionMatrix) -> Self {
        ConfusionRepr {
            accuracy: cm.accuracy(),
            classes: cm.classes,
            counts: cm.counts,
        }
    }
}

impl TryFrom<ConfusionRepr> for ConfusionMatrix {
    type Error = Error;

    fn try_from(r: ConfusionRepr) -> Result<Self> {
        let cm = ConfusionMatrix::new(r.classes, r.counts)?;
        if (cm.accuracy() - r.accuracy).abs() > 1e-12 {
            return Err(Error::precondition(format!(
                "stored accuracy {} disagrees with counts ({})",
                r.accuracy,
                cm.accuracy()
            )));
        }
        Ok(cm)
    }
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<ClassId>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = classes.len();
        if classes.iter().collect::<BTreeSet<_>>().len() != c {
            return Err(Error::precondition("duplicate class in confusion matrix"));
        }
        if counts.len() != c {
            return Err(Error::dimension("confusion rows", c, counts.len()));
        }
        if let Some(row) = counts.iter().find(|r| r.len() != c) {
            return Err(Error::dimension("confusion columns", c, row.len()));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// trace / total; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }

    /// Accuracy over the rows of the listed true classes only.
    pub fn accuracy_for(&self, classes: &[ClassId]) -> Result<f64> {
        let mut correct = 0;
        let mut total = 0;
        for c in classes {
            let i = self
                .classes
                .iter()
                .position(|k| k == c)
                .ok_or(Error::Label { label: *c })?;
            correct += self.counts[i][i];
            total += self.counts[i].iter().sum::<u64>();
        }
        Ok(if total == 0 { 0.0 } else { correct as f64 / total as f64 })
    }
}

/// Test-set confusion matrix of `model` whose output `k` stands for `classes[k]`.
pub fn evaluate(model: &MlpModel, x: &Matrix, y: &[ClassId], classes: &[ClassId]) -> Result<ConfusionMatrix> {
    if model.output_dim() != classes.len() {
        return Err(Error::dimension("model outputs vs classes", classes.len(), model.output_dim()));
    }
    if x.cols() != model.input_dim() {
        return Err(Error::dimension("model inputs vs features", model.input_dim(), x.cols()));
    }
    if y.len() != x.rows() {
        return Err(Error::dimension("labels", x.rows(), y.len()));
    }
    let c = classes.len();
    let mut counts = vec![vec![0u64; c]; c];
    for (row, label) in x.row_iter().zip(y) {
        let truth = classes
            .iter()
            .position(|k| k == label)
            .ok_or(Error::Label { label: *label })?;
        counts[truth][model.predict(row)?] += 1;
    }
    ConfusionMatrix::new(classes.to_vec(), counts)
}

/// Summed traces over summed totals of matrices with disjoint class sets.
pub fn composite_accuracy(cms: &[ConfusionMatrix]) -> Result<f64> {
    if cms.is_empty() {
        return Err(Error::precondition("no confusion matrices"));
    }
    let mut seen = BTreeSet::new();
    for cm in cms {
        for c in &cm.classes {
            if !seen.insert(*c) {
                return Err(Error::precondition(format!("class {c} appears in more than one matrix")));
            }
        }
    }
    let trace: u64 = cms.iter().map(ConfusionMatrix::trace).sum();
    let total: u64 = cms.iter().map(ConfusionMatrix::total).sum();
    if total == 0 {
        return Err(Error::precondition("confusion matrices are empty"));
    }
    Ok(trace as f64 / total as f64)
}

/// Partitions rows into (classes outside `small_classes`, classes inside it).
pub fn split_problem(dataset: &FeatureDataset, small_classes: &[ClassId]) -> Result<(FeatureDataset, FeatureDataset)> {
    let present = dataset.classes();
    let small: BTreeSet<ClassId> = small_classes.iter().copied().collect();
    if small.is_empty() {
        return Err(Error::InvalidSplit {
            detail: "the small class set is empty".into(),
        });
    }
    if let Some(c) = small.iter().find(|c| !present.contains(c)) {
        return Err(Error::InvalidSplit {
            detail: format!("class {c} is not in the dataset"),
        });
    }
    if small.len() == present.len() {
        return Err(Error::InvalidSplit {
            detail: "the small class set covers every class".into(),
        });
    }
    let large = dataset.rows_where(|c, _| !small.contains(&c));
    let small = dataset.rows_where(|c, _| small.contains(&c));
    Ok((large, small))
}

/// Labels mapped to output indices of the sorted class list.
fn label_indices(y: &[ClassId], classes: &[ClassId]) -> Result<Vec<usize>> {
    y.iter()
        .map(|c| classes.binary_search(c).map_err(|_| Error::Label { label: *c }))
        .collect()
}

/// Monotone map applied to every novelty index before selection and scaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureTransform {
    Identity,
    /// `ln(1 + D²)`; compresses the heavy upper tail of the distance.
    #[default]
    Log1p,
}

impl FeatureTransform {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            FeatureTransform::Identity => v,
            FeatureTransform::Log1p => libm::log1p(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmConfig {
    /// Hidden widths to try; the one with the lowest validation loss is kept.
    pub hidden_sizes: Vec<usize>,
    pub train: TrainConfig,
}

impl ArmConfig {
    fn with_hidden(h: usize) -> Self {
        ArmConfig {
            hidden_sizes: vec![h],
            train: experiment_train_config(),
        }
    }
}

/// Training defaults for the experiment arms: a larger step than the bare
/// trainer default so the nine-class net leaves its initial plateau before the
/// stall counter fires.
pub fn experiment_train_config() -> TrainConfig {
    TrainConfig {
        learning_rate: 0.5,
        ..TrainConfig::default()
    }
}

impl Default for ArmConfig {
    fn default() -> Self {
        ArmConfig::with_hidden(9)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub layout: LayoutConfig,
    pub reps_per_class: usize,
    pub noise_level: f64,
    pub window_len: usize,
    pub feature_transform: FeatureTransform,
    /// Baseline ridge as a multiple of trace(S)/dim.
    pub ridge_scale: f64,
    pub ga: GaConfig,
    pub small_classes: Vec<ClassId>,
    pub monolithic: ArmConfig,
    pub split_large: ArmConfig,
    pub split_small: ArmConfig,
    /// Output-layer training for both the transferred model and the no-hidden-layer control.
    pub transfer: TrainConfig,
    pub pca_components: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            model: ModelConfig::default(),
            layout: LayoutConfig::default(),
            reps_per_class: 198,
            noise_level: 0.02,
            window_len: 16,
            feature_transform: FeatureTransform::default(),
            ridge_scale: 1e-8,
            ga: GaConfig::default(),
            small_classes: SMALL_PANEL_CLASSES.to_vec(),
            monolithic: ArmConfig::with_hidden(10),
            split_large: ArmConfig::with_hidden(9),
            split_small: ArmConfig::with_hidden(9),
            transfer: experiment_train_config(),
            pca_components: 3,
        }
    }
}

/// Effective seeds of every stochastic stage, all derived from the master seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub master: u64,
    pub data: u64,
    pub selection: u64,
    pub monolithic: u64,
    pub split_large: u64,
    pub split_small: u64,
    pub transfer: u64,
}

impl StageSeeds {
    pub fn derive(master: u64) -> Self {
        StageSeeds {
            master,
            data: derive_seed(master, 1),
            selection: derive_seed(master, 2),
            monolithic: derive_seed(master, 3),
            split_large: derive_seed(master, 4),
            split_small: derive_seed(master, 5),
            transfer: derive_seed(master, 6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub classes: Vec<ClassId>,
    pub hidden_size: Option<usize>,
    pub trainable_parameters: usize,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub restart_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub name: String,
    pub explained_fraction: Vec<f64>,
    pub cumulative_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seeds: StageSeeds,
    pub damaged_records: usize,
    pub candidate_features: usize,
    pub selected_features: Vec<usize>,
    pub selected_windows: Vec<SpectralWindow>,
    pub selection_fitness: f64,
    pub selection_fitness_per_generation: Vec<f64>,
    pub monolithic: ArmReport,
    pub split_large: ArmReport,
    pub split_small: ArmReport,
    pub transfer_small: ArmReport,
    pub scratch_small: ArmReport,
    pub composite_split_accuracy: f64,
    /// Monolithic accuracy restricted to test rows of the small classes.
    pub monolithic_small_class_accuracy: f64,
    pub normalization: NormalizationReport,
    pub pca: Vec<PcaSummary>,
    pub routing_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub monolithic: Normalization,
    pub split_large: Normalization,
    pub split_small: Normalization,
}

/// Scores of one PCA view, with the class of each row.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaExport {
    pub name: String,
    pub classes: Vec<ClassId>,
    pub scores: Matrix,
    pub model: PcaModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmOutcome {
    pub name: &'static str,
    pub model: MlpModel,
    pub history: LossHistory,
}

/// Everything `run_experiment` produces, in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub arms: Vec<ArmOutcome>,
    pub pca_exports: Vec<PcaExport>,
    pub baselines: Vec<BaselineModel>,
    pub features: FeatureDataset,
}

impl ExperimentOutcome {
    pub fn arm(&self, name: &str) -> Option<&ArmOutcome> {
        self.arms.iter().find(|a| a.name == name)
    }
}

/// Fits one baseline per window on the baseline pool of `data`.
pub fn fit_baselines(data: &RawDataset, windows: &[SpectralWindow], ridge_scale: f64) -> Result<Vec<BaselineModel>> {
    let pool: Vec<_> = data.baseline_pool().collect();
    windows
        .iter()
        .map(|w| {
            let rows = pool
                .iter()
                .map(|r| signals::window_slice(&r.record, w))
                .collect::<Result<Vec<_>>>()?;
            let samples = Matrix::from_rows(rows)?;
            let ridge = novelty::relative_ridge(&samples, ridge_scale);
            novelty::fit_baseline(&samples, *w, ridge)
        })
        .collect()
}

/// Novelty features of every damaged record, split by repetition thirds.
pub fn damaged_features<E: Executor>(data: &RawDataset, baselines: &[BaselineModel], exec: &E) -> Result<FeatureDataset> {
    let damaged: Vec<_> = data.damaged().collect();
    let rows = exec
        .map(damaged.len(), |i| novelty::novelty_features(baselines, &damaged[i].record))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let x = if rows.is_empty() {
        Matrix::zeros(0, baselines.len())
    } else {
        Matrix::from_rows(rows)?
    };
    FeatureDataset::new(
        x,
        damaged.iter().map(|r| r.class).collect(),
        damaged
            .iter()
            .map(|r| Split::for_rep(r.rep, data.reps_per_class))
            .collect(),
    )
}

/// Winner of a hidden-size sweep with multi-restart training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedArm {
    pub model: MlpModel,
    pub history: LossHistory,
    pub hidden: usize,
    pub restart_index: usize,
}

/// Trains one network per hidden size (each with restarts) on the train and
/// validation rows of `data` and keeps the lowest validation loss.
///
/// Output `k` of the returned model stands for `classes[k]`; `classes` must be sorted.
pub fn train_arm<E: Executor>(data: &FeatureDataset, classes: &[ClassId], arm: &ArmConfig, seed: u64, exec: &E) -> Result<TrainedArm> {
    if arm.hidden_sizes.is_empty() {
        return Err(Error::config("hidden_sizes", "at least one hidden size is required"));
    }
    let (xt, yt) = data.part(Split::Train);
    let (xv, yv) = data.part(Split::Validation);
    let lt = label_indices(&yt, classes)?;
    let lv = label_indices(&yv, classes)?;
    let tb = Batch::new(&xt, &lt)?;
    let vb = Batch::new(&xv, &lv)?;
    let mut best: Option<TrainedArm> = None;
    for &h in &arm.hidden_sizes {
        let cfg = TrainConfig {
            seed: derive_seed(seed, h as u64),
            ..arm.train.clone()
        };
        let out = mlp::multi_restart_train(data.x.cols(), h, classes.len(), tb, vb, &cfg, exec)?;
        let better = best
            .as_ref()
            .is_none_or(|b| out.history.best_val_loss() < b.history.best_val_loss());
        if better {
            best = Some(TrainedArm {
                model: out.model,
                history: out.history,
                hidden: h,
                restart_index: out.restart_index,
            });
        }
    }
    Ok(best.expect("non-empty hidden sizes"))
}

/// Trains the unfrozen layers of `model` on the train and validation rows of `data`.
pub fn train_output_layer(model: MlpModel, data: &FeatureDataset, classes: &[ClassId], cfg: &TrainConfig) -> Result<(MlpModel, LossHistory)> {
    let (xt, yt) = data.part(Split::Train);
    let (xv, yv) = data.part(Split::Validation);
    let lt = label_indices(&yt, classes)?;
    let lv = label_indices(&yv, classes)?;
    mlp::train(model, Batch::new(&xt, &lt)?, Batch::new(&xv, &lv)?, cfg)
}

fn arm_report(
    model: &MlpModel,
    history: &LossHistory,
    data: &FeatureDataset,
    classes: &[ClassId],
    hidden_size: Option<usize>,
    restart_index: Option<usize>,
) -> Result<ArmReport> {
    let (x, y) = data.part(Split::Test);
    let confusion = evaluate(model, &x, &y, classes)?;
    Ok(ArmReport {
        classes: classes.to_vec(),
        hidden_size,
        trainable_parameters: model.trainable_parameter_count(),
        accuracy: confusion.accuracy(),
        confusion,
        stopped_epoch: history.stopped_epoch,
        best_epoch: history.best_epoch,
        best_val_loss: history.best_val_loss(),
        restart_index,
    })
}

fn pca_view(name: &str, x: &Matrix, classes: &[ClassId], k: usize) -> Result<PcaExport> {
    let model = features::pca_fit(x, k)?;
    let scores = features::pca_project(&model, x)?;
    Ok(PcaExport {
        name: name.to_string(),
        classes: classes.to_vec(),
        scores,
        model,
    })
}

/// Runs every stage from data generation to PCA exports.
pub fn run_experiment<E: Executor>(config: &ExperimentConfig, exec: &E) -> Result<ExperimentOutcome> {
    let seeds = StageSeeds::derive(config.seed);

    let model = synthdata::build_wing_model(&config.model).map_err(|e| e.at(Stage::Data))?;
    let layout = SensorLayout::from_config(&config.layout).map_err(|e| e.at(Stage::Data))?;
    let data = synthdata::generate_dataset(&model, &layout, config.reps_per_class, config.noise_level, seeds.data, exec)
        .map_err(|e| e.at(Stage::Data))?;
    let run = RunInputs { config, seeds, exec };
    run.from_dataset(&data, &layout)
}

/// Runs every stage after data generation on an existing dataset.
pub fn run_on_dataset<E: Executor>(config: &ExperimentConfig, data: &RawDataset, layout: &SensorLayout, exec: &E) -> Result<ExperimentOutcome> {
    RunInputs {
        config,
        seeds: StageSeeds::derive(config.seed),
        exec,
    }
    .from_dataset(data, layout)
}

struct RunInputs<'a, E> {
    config: &'a ExperimentConfig,
    seeds: StageSeeds,
    exec: &'a E,
}

impl<E: Executor> RunInputs<'_, E> {
    fn from_dataset(&self, data: &RawDataset, layout: &SensorLayout) -> Result<ExperimentOutcome> {
        let config = self.config;
        let seeds = &self.seeds;
        let exec = self.exec;

        let windows = signals::default_window_grid(layout.pairs.len(), layout.n_lines(), config.window_len)
            .map_err(|e| e.at(Stage::Baseline))?;
        let baselines = fit_baselines(data, &windows, config.ridge_scale).map_err(|e| e.at(Stage::Baseline))?;
        let mut candidates = damaged_features(data, &baselines, exec).map_err(|e| e.at(Stage::Novelty))?;
        for v in candidates.x.as_mut_slice() {
            *v = config.feature_transform.apply(*v);
        }

        // distances in the GA fitness are computed on training-range-scaled features
        let scaled = candidates.normalized().map_err(|e| e.at(Stage::Selection))?;
        let (xt, yt) = scaled.part(Split::Train);
        let (xv, yv) = scaled.part(Split::Validation);
        let ga_cfg = GaConfig {
            seed: seeds.selection,
            ..config.ga.clone()
        };
        let selection = features::ga_select(&xt, &yt, &xv, &yv, &ga_cfg, exec).map_err(|e| e.at(Stage::Selection))?;
        let raw = candidates
            .select_columns(&selection.indices)
            .map_err(|e| e.at(Stage::Selection))?;

        let all_classes = raw.classes();
        let mono_data = raw.normalized().map_err(|e| e.at(Stage::Normalization))?;
        let mono = train_arm(&mono_data, &all_classes, &config.monolithic, seeds.monolithic, exec)
            .map_err(|e| e.at(Stage::Monolithic))?;
        let mono_report = arm_report(&mono.model, &mono.history, &mono_data, &all_classes, Some(mono.hidden), Some(mono.restart_index))
            .map_err(|e| e.at(Stage::Monolithic))?;

        let (large_raw, small_raw) = split_problem(&raw, &config.small_classes).map_err(|e| e.at(Stage::Split))?;
        let large_data = large_raw.normalized().map_err(|e| e.at(Stage::Split))?;
        let small_data = small_raw.normalized().map_err(|e| e.at(Stage::Split))?;
        let large_classes = large_data.classes();
        let small_classes = small_data.classes();

        let large = train_arm(&large_data, &large_classes, &config.split_large, seeds.split_large, exec)
            .map_err(|e| e.at(Stage::SplitLarge))?;
        let large_report = arm_report(&large.model, &large.history, &large_data, &large_classes, Some(large.hidden), Some(large.restart_index))
            .map_err(|e| e.at(Stage::SplitLarge))?;
        let small = train_arm(&small_data, &small_classes, &config.split_small, seeds.split_small, exec)
            .map_err(|e| e.at(Stage::SplitSmall))?;
        let small_report = arm_report(&small.model, &small.history, &small_data, &small_classes, Some(small.hidden), Some(small.restart_index))
            .map_err(|e| e.at(Stage::SplitSmall))?;

        // transfer and control draw their output layers from the same stream
        let tcfg = TrainConfig {
            seed: seeds.transfer,
            ..config.transfer.clone()
        };
        let transferred = mlp::freeze_transfer(&large.model, small_classes.len(), tcfg.init_std, &mut stream(seeds.transfer, 0))
            .map_err(|e| e.at(Stage::Transfer))?;
        let (transferred, transfer_history) =
            train_output_layer(transferred, &small_data, &small_classes, &tcfg).map_err(|e| e.at(Stage::Transfer))?;
        let transfer_report = arm_report(&transferred, &transfer_history, &small_data, &small_classes, Some(large.hidden), None)
            .map_err(|e| e.at(Stage::Transfer))?;

        let control = mlp::single_layer(small_data.x.cols(), small_classes.len(), tcfg.init_std, &mut stream(seeds.transfer, 0))
            .map_err(|e| e.at(Stage::Control))?;
        let (control, control_history) =
            train_output_layer(control, &small_data, &small_classes, &tcfg).map_err(|e| e.at(Stage::Control))?;
        let control_report = arm_report(&control, &control_history, &small_data, &small_classes, None, None)
            .map_err(|e| e.at(Stage::Control))?;

        let composite = composite_accuracy(&[large_report.confusion.clone(), small_report.confusion.clone()])
            .map_err(|e| e.at(Stage::Split))?;
        let mono_small = mono_report
            .confusion
            .accuracy_for(&small_classes)
            .map_err(|e| e.at(Stage::Split))?;

        let k = config.pca_components;
        let pca_exports = (|| -> Result<Vec<PcaExport>> {
            Ok(vec![
                pca_view("raw", &raw.x, &raw.y, k)?,
                pca_view("large_hidden", &large.model.hidden_batch(&large_data.x)?, &large_data.y, k)?,
                pca_view("small_input", &small_data.x, &small_data.y, k)?,
                pca_view("small_hidden", &large.model.hidden_batch(&small_data.x)?, &small_data.y, k)?,
            ])
        })()
        .map_err(|e| e.at(Stage::Pca))?;

        let report = ExperimentReport {
            seeds: seeds.clone(),
            damaged_records: candidates.len(),
            candidate_features: candidates.x.cols(),
            selected_windows: selection.indices.iter().map(|&i| windows[i]).collect(),
            selected_features: selection.indices.clone(),
            selection_fitness: selection.fitness,
            selection_fitness_per_generation: selection.best_per_generation.clone(),
            monolithic: mono_report,
            split_large: large_report,
            split_small: small_report,
            transfer_small: transfer_report,
            scratch_small: control_report,
            composite_split_accuracy: composite,
            monolithic_small_class_accuracy: mono_small,
            normalization: NormalizationReport {
                monolithic: mono_data.normalization.clone().expect("normalized"),
                split_large: large_data.normalization.clone().expect("normalized"),
                split_small: small_data.normalization.clone().expect("normalized"),
            },
            pca: pca_exports
                .iter()
                .map(|p| {
                    let explained_fraction = p.model.explained_fraction();
                    PcaSummary {
                        name: p.name.clone(),
                        cumulative_fraction: explained_fraction.iter().sum(),
                        explained_fraction,
                    }
                })
                .collect(),
            routing_note: ROUTING_NOTE.to_string(),
        };

        Ok(ExperimentOutcome {
            report,
            arms: vec![
                ArmOutcome { name: "monolithic", model: mono.model, history: mono.history },
                ArmOutcome { name: "split_large", model: large.model, history: large.history },
                ArmOutcome { name: "split_small", model: small.model, history: small.history },
                ArmOutcome { name: "transfer_small", model: transferred, history: transfer_history },
                ArmOutcome { name: "scratch_small", model: control, history: control_history },
            ],
            pca_exports,
            baselines,
            features: candidates,
        })
    }
}

/// The nine damage classes, in label order.
pub fn damage_classes() -> Vec<ClassId> {
    DAMAGE_CLASSES.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(classes: &[ClassId], rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::new(classes.to_vec(), rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn accuracy_from_counts() {
        let m = cm(&[3, 6], &[&[65, 1], &[2, 64]]);
        assert!((m.accuracy() - 129.0 / 132.0).abs() < 1e-15);
        assert!((m.accuracy() - 0.97727).abs() < 1e-5);
        let perfect = cm(&[3, 6], &[&[66, 0], &[0, 66]]);
        assert_eq!(perfect.accuracy(), 1.0);
        let one_sided = cm(&[1, 2], &[&[10, 0], &[10, 0]]);
        assert_eq!(one_sided.accuracy(), 0.5);
    }

    #[test]
    fn composite_rules() {
        let a = cm(&[1, 2], &[&[5, 5], &[5, 5]]);
        let b = cm(&[3, 4], &[&[5, 5], &[5, 5]]);
        assert_eq!(composite_accuracy(&[a.clone(), b]).unwrap(), 0.5);
        assert_eq!(composite_accuracy(&[a.clone()]).unwrap(), a.accuracy());
        assert!(composite_accuracy(&[]).is_err());
        assert!(composite_accuracy(&[a.clone(), a]).is_err());
    }

    #[test]
    fn split_by_small_classes() {
        let x = Matrix::from_rows([[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let ds = FeatureDataset::new(x, vec![1, 3, 6, 9], vec![Split::Train; 4]).unwrap();
        let (a, b) = split_problem(&ds, &[3, 6]).unwrap();
        assert_eq!(a.classes(), vec![1, 9]);
        assert_eq!(b.classes(), vec![3, 6]);
        assert_eq!(a.x.as_slice(), &[0.0, 3.0]);
        assert!(matches!(split_problem(&ds, &[1, 3, 6, 9]), Err(Error::InvalidSplit { .. })));
        assert!(matches!(split_problem(&ds, &[]), Err(Error::InvalidSplit { .. })));
        assert!(matches!(split_problem(&ds, &[4]), Err(Error::InvalidSplit { .. })));
    }

    #[test]
    fn evaluate_counts_and_label_errors() {
        let m = mlp::single_layer(2, 2, 0.1, &mut stream(1, 1)).unwrap();
        let x = Matrix::from_rows([[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let cm = evaluate(&m, &x, &[3, 6], &[3, 6]).unwrap();
        assert_eq!(cm.total(), 2);
        assert_eq!(evaluate(&m, &x, &[3, 5], &[3, 6]).unwrap_err(), Error::Label { label: 5 });
        assert!(matches!(evaluate(&m, &x, &[3, 6], &[1, 3, 6]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn restricted_accuracy() {
        let m = cm(&[1, 3, 6], &[&[10, 0, 0], &[1, 8, 1], &[0, 2, 8]]);
        assert_eq!(m.accuracy_for(&[3, 6]).unwrap(), 16.0 / 20.0);
        assert!(m.accuracy_for(&[4]).is_err());
    }
}
