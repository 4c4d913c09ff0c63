//! Feature datasets, genetic subset selection, [-1, 1] scaling and PCA.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::matrix::Matrix;
use crate::mlp::{self, Batch, TrainConfig};
use crate::rng::stream;
use crate::synthdata::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    /// Thirds by repetition index: first third train, second validation, last test.
    pub fn for_rep(rep: usize, reps_per_class: usize) -> Split {
        let third = reps_per_class / 3;
        if rep < third {
            Split::Train
        } else if rep < 2 * third {
            Split::Validation
        } else {
            Split::Test
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::precondition(format!("unknown split tag `{other}`"))),
        }
    }
}

/// Novelty-index feature rows with class labels and split tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDataset {
    pub x: Matrix,
    pub y: Vec<ClassId>,
    pub split: Vec<Split>,
    pub normalization: Option<Normalization>,
}

impl FeatureDataset {
    pub fn new(x: Matrix, y: Vec<ClassId>, split: Vec<Split>) -> Result<Self> {
        if y.len() != x.rows() {
            return Err(Error::dimension("labels", x.rows(), y.len()));
        }
        if split.len() != x.rows() {
            return Err(Error::dimension("split tags", x.rows(), split.len()));
        }
        Ok(FeatureDataset {
            x,
            y,
            split,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Sorted distinct class ids.
    pub fn classes(&self) -> Vec<ClassId> {
        self.y.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn rows_where(&self, keep: impl Fn(ClassId, Split) -> bool) -> FeatureDataset {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep(self.y[i], self.split[i])).collect();
        FeatureDataset {
            x: self.x.select_rows(&rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            split: rows.iter().map(|&i| self.split[i]).collect(),
            normalization: self.normalization.clone(),
        }
    }

    /// Rows of one split as (features, labels).
    pub fn part(&self, split: Split) -> (Matrix, Vec<ClassId>) {
        let d = self.rows_where(|_, s| s == split);
        (d.x, d.y)
    }

    pub fn select_columns(&self, columns: &[usize]) -> Result<FeatureDataset> {
        Ok(FeatureDataset {
            x: self.x.select_columns(columns)?,
            y: self.y.clone(),
            split: self.split.clone(),
            normalization: None,
        })
    }

    /// Count per (class, split) cell.
    pub fn cell_counts(&self) -> BTreeMap<(ClassId, Split), usize> {
        let mut counts = BTreeMap::new();
        for (&c, &s) in self.y.iter().zip(&self.split) {
            *counts.entry((c, s)).or_insert(0) += 1;
        }
        counts
    }

    /// Fits scaling on the training rows and applies it to every row.
    pub fn normalized(&self) -> Result<FeatureDataset> {
        let (train, _) = self.part(Split::Train);
        let norm = fit_normalization(&train)?;
        Ok(FeatureDataset {
            x: apply_normalization(&self.x, &norm)?,
            y: self.y.clone(),
            split: self.split.clone(),
            normalization: Some(norm),
        })
    }
}

/// Per-feature training range used for the affine map onto [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    /// Maps scaled values back to the original units.
    pub fn invert(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v + 1.0) * 0.5 * (self.max[j] - self.min[j]) + self.min[j];
            }
        }
        Ok(out)
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.dim() {
            return Err(Error::dimension("normalization width", self.dim(), x.cols()));
        }
        Ok(())
    }
}

pub fn fit_normalization(x_train: &Matrix) -> Result<Normalization> {
    if x_train.rows() == 0 {
        return Err(Error::precondition("no training rows to fit scaling"));
    }
    let mut min = vec![f64::INFINITY; x_train.cols()];
    let mut max = vec![f64::NEG_INFINITY; x_train.cols()];
    for row in x_train.row_iter() {
        for (j, &v) in row.iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    if let Some(column) = (0..min.len()).find(|&j| !(max[j] > min[j])) {
        return Err(Error::DegenerateFeature { column });
    }
    Ok(Normalization { min, max })
}

/// `2(x − min)/(max − min) − 1`; values outside the training range map outside [-1, 1].
pub fn apply_normalization(x: &Matrix, norm: &Normalization) -> Result<Matrix> {
    norm.check(x)?;
    let mut out = x.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = 2.0 * (*v - norm.min[j]) / (norm.max[j] - norm.min[j]) - 1.0;
        }
    }
    Ok(out)
}

/// 1-nearest-neighbour validation accuracy on the chosen columns.
///
/// Distance ties go to the lower training row.
pub fn fitness_knn(
    x_train: &Matrix,
    y_train: &[ClassId],
    x_val: &Matrix,
    y_val: &[ClassId],
    subset: &[usize],
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::precondition("empty feature subset"));
    }
    if x_train.rows() == 0 || x_val.rows() == 0 {
        return Err(Error::precondition("empty training or validation set"));
    }
    let train = x_train.select_columns(subset)?;
    let val = x_val.select_columns(subset)?;
    let k = subset.len();
    let mut correct = 0usize;
    for (v, &label) in val.row_iter().zip(y_val) {
        let mut best = f64::INFINITY;
        let mut best_row = 0;
        for (i, t) in train.as_slice().chunks_exact(k).enumerate() {
            let mut d2 = 0.0;
            for (a, b) in t.iter().zip(v) {
                let diff = a - b;
                d2 += diff * diff;
            }
            if d2 < best {
                best = d2;
                best_row = i;
            }
        }
        if y_train[best_row] == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / y_val.len() as f64)
}

/// Validation accuracy of a small MLP trained on the chosen columns.
fn fitness_mlp(
    x_train: &Matrix,
    y_train: &[ClassId],
    x_val: &Matrix,
    y_val: &[ClassId],
    subset: &[usize],
    settings: &MlpFitness,
    seed: u64,
) -> Result<f64> {
    let train = x_train.select_columns(subset)?;
    let val = x_val.select_columns(subset)?;
    let norm = fit_normalization(&train)?;
    let train = apply_normalization(&train, &norm)?;
    let val = apply_normalization(&val, &norm)?;
    let classes: Vec<ClassId> = y_train.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let index_of = |c: &ClassId| classes.binary_search(c).ok();
    let ty: Vec<usize> = y_train.iter().map(|c| index_of(c).expect("train class")).collect();
    let mut model = mlp::init_random(subset.len(), settings.hidden, classes.len(), 0.1, &mut stream(seed, 0))?;
    let cfg = TrainConfig {
        learning_rate: settings.learning_rate,
        max_epochs: settings.epochs,
        early_stop_rel: 0.0,
        early_stop_patience: usize::MAX,
        restarts: 1,
        init_std: 0.1,
        seed,
    };
    let tb = Batch::new(&train, &ty)?;
    // validation-set stopping is not used here, so train doubles as monitor set
    (model, _) = mlp::train(model, tb, tb, &cfg)?;
    let mut correct = 0;
    for (row, c) in val.row_iter().zip(y_val) {
        if index_of(c) == Some(model.predict(row)?) {
            correct += 1;
        }
    }
    Ok(correct as f64 / y_val.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFitness {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitnessKind {
    /// 1-NN validation accuracy.
    Knn1,
    /// Validation accuracy of a fixed-budget MLP, seeded from the GA seed.
    Mlp(MlpFitness),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub subset_size: usize,
    /// Per-index probability of swapping in an unused feature.
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub elitism: usize,
    pub fitness: FitnessKind,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 40,
            generations: 30,
            subset_size: 9,
            mutation_rate: 0.1,
            tournament_size: 3,
            elitism: 2,
            fitness: FitnessKind::Knn1,
            seed: 0,
        }
    }
}

impl GaConfig {
    fn validate(&self, d: usize) -> Result<()> {
        if self.subset_size == 0 || self.subset_size > d {
            return Err(Error::config(
                "subset_size",
                format!("{} must lie in [1, {d}]", self.subset_size),
            ));
        }
        if self.population < 2 {
            return Err(Error::config("population", "must be ≥ 2"));
        }
        if self.elitism >= self.population {
            return Err(Error::config("elitism", "must be smaller than the population"));
        }
        if self.tournament_size == 0 {
            return Err(Error::config("tournament_size", "must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config("mutation_rate", "must be a probability"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaOutcome {
    /// Sorted selected column indices.
    pub indices: Vec<usize>,
    pub fitness: f64,
    /// Best fitness after each generation; entry 0 is the initial population.
    pub best_per_generation: Vec<f64>,
}

type Subset = Vec<usize>;

/// Genetic search for the `subset_size` columns with the best validation fitness.
///
/// Individuals are sorted index sets. Ranking is by fitness, then by the
/// lexicographically smaller subset, so equal-fitness populations resolve to
/// the smallest subset.
pub fn ga_select<E: Executor>(
    x_train: &Matrix,
    y_train: &[ClassId],
    x_val: &Matrix,
    y_val: &[ClassId],
    config: &GaConfig,
    exec: &E,
) -> Result<GaOutcome> {
    let d = x_train.cols();
    config.validate(d)?;
    if x_val.cols() != d {
        return Err(Error::dimension("validation width", d, x_val.cols()));
    }
    if y_train.len() != x_train.rows() || y_val.len() != x_val.rows() {
        return Err(Error::dimension("label count", x_train.rows(), y_train.len()));
    }
    if y_train.iter().collect::<BTreeSet<_>>().len() < 2 {
        return Err(Error::precondition("feature selection needs at least two classes"));
    }

    let evaluate = |s: &[usize]| -> Result<f64> {
        match &config.fitness {
            FitnessKind::Knn1 => fitness_knn(x_train, y_train, x_val, y_val, s),
            FitnessKind::Mlp(m) => fitness_mlp(x_train, y_train, x_val, y_val, s, m, config.seed),
        }
    };

    if config.subset_size == d {
        let all: Subset = (0..d).collect();
        let fitness = evaluate(&all)?;
        return Ok(GaOutcome {
            indices: all,
            fitness,
            best_per_generation: vec![fitness],
        });
    }

    let k = config.subset_size;
    let mut rng = stream(config.seed, 0x6A);
    let mut cache: BTreeMap<Subset, f64> = BTreeMap::new();

    let score = |pop: &[Subset], cache: &mut BTreeMap<Subset, f64>| -> Result<()> {
        let fresh: Vec<&Subset> = pop
            .iter()
            .filter(|s| !cache.contains_key(*s))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let scores = exec.map(fresh.len(), |i| evaluate(fresh[i]));
        for (s, f) in fresh.into_iter().zip(scores) {
            cache.insert(s.clone(), f?);
        }
        Ok(())
    };
    let rank = |pop: &mut Vec<Subset>, cache: &BTreeMap<Subset, f64>| {
        pop.sort_by(|a, b| cache[b].total_cmp(&cache[a]).then_with(|| a.cmp(b)));
    };

    let mut population: Vec<Subset> = (0..config.population)
        .map(|_| {
            let mut s = rand::seq::index::sample(&mut rng, d, k).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    score(&population, &mut cache)?;
    rank(&mut population, &cache);
    let mut best_per_generation = vec![cache[&population[0]]];

    for _ in 0..config.generations {
        let mut next: Vec<Subset> = population[..config.elitism].to_vec();
        while next.len() < config.population {
            let a = tournament(&population, config.tournament_size, &mut rng);
            let b = tournament(&population, config.tournament_size, &mut rng);
            let mut child = crossover(&population[a], &population[b], k, d, &mut rng);
            mutate(&mut child, d, config.mutation_rate, &mut rng);
            next.push(child);
        }
        score(&next, &mut cache)?;
        rank(&mut next, &cache);
        population = next;
        best_per_generation.push(cache[&population[0]]);
    }

    let best = population.swap_remove(0);
    Ok(GaOutcome {
        fitness: cache[&best],
        indices: best,
        best_per_generation,
    })
}

/// Index of the best of `size` uniformly drawn members of a ranked population.
fn tournament<R: Rng + ?Sized>(ranked: &[Subset], size: usize, rng: &mut R) -> usize {
    (0..size).map(|_| rng.random_range(0..ranked.len())).min().expect("size ≥ 1")
}

/// Keeps the shared indices, then takes each non-shared index with probability
/// one half, and fills any shortfall from the leftovers.
fn crossover<R: Rng + ?Sized>(a: &[usize], b: &[usize], k: usize, d: usize, rng: &mut R) -> Subset {
    let sa: BTreeSet<usize> = a.iter().copied().collect();
    let sb: BTreeSet<usize> = b.iter().copied().collect();
    let mut child: Vec<usize> = sa.intersection(&sb).copied().collect();
    let mut rest: Vec<usize> = sa.symmetric_difference(&sb).copied().collect();
    rest.shuffle(rng);
    let mut leftovers = Vec::new();
    for idx in rest {
        if child.len() < k && rng.random_bool(0.5) {
            child.push(idx);
        } else {
            leftovers.push(idx);
        }
    }
    for idx in leftovers {
        if child.len() == k {
            break;
        }
        child.push(idx);
    }
    while child.len() < k {
        let idx = rng.random_range(0..d);
        if !child.contains(&idx) {
            child.push(idx);
        }
    }
    child.sort_unstable();
    child
}

fn mutate<R: Rng + ?Sized>(child: &mut Subset, d: usize, rate: f64, rng: &mut R) {
    if child.len() == d {
        return;
    }
    for pos in 0..child.len() {
        if rng.random_bool(rate) {
            let replacement = loop {
                let idx = rng.random_range(0..d);
                if !child.contains(&idx) {
                    break idx;
                }
            };
            child[pos] = replacement;
        }
    }
    child.sort_unstable();
}

/// Principal axes of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k × d`, orthonormal rows.
    pub components: Matrix,
    /// Non-increasing variances along each component.
    pub explained_variance: Vec<f64>,
    pub total_variance: f64,
}

impl PcaModel {
    pub fn explained_fraction(&self) -> Vec<f64> {
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// `scores · components + mean`.
    pub fn reconstruct(&self, scores: &Matrix) -> Result<Matrix> {
        let mut out = scores.matmul(&self.components)?;
        for i in 0..out.rows() {
            for (v, m) in out.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}

/// Top-`k` right singular directions of the centred data.
///
/// Each component's largest-magnitude entry is made positive.
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if k == 0 || n < 2 || k > (n - 1).min(d) {
        return Err(Error::bounds(format!(
            "{k} components from {n} samples of dimension {d}"
        )));
    }
    let mut mean = vec![0.0; d];
    for row in x.row_iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let total_variance = centered.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;

    let svd = centered.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::precondition("SVD did not return right singular vectors"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));

    let mut components = Matrix::zeros(k, d);
    let mut explained_variance = Vec::with_capacity(k);
    for (r, &idx) in order.iter().take(k).enumerate() {
        let row: Vec<f64> = (0..d).map(|j| v_t[(idx, j)]).collect();
        let pivot = (0..d).fold(0, |best, j| if row[j].abs() > row[best].abs() { j } else { best });
        let sign = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (c, v) in components.row_mut(r).iter_mut().zip(&row) {
            *c = sign * v;
        }
        let s = svd.singular_values[idx];
        explained_variance.push(s * s / (n - 1) as f64);
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        total_variance,
    })
}

/// Scores of each row of `x` along the model's components.
pub fn pca_project(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    let d = model.mean.len();
    if x.cols() != d {
        return Err(Error::dimension("pca input width", d, x.cols()));
    }
    let k = model.components.rows();
    let mut out = Matrix::zeros(x.rows(), k);
    for (i, row) in x.row_iter().enumerate() {
        for c in 0..k {
            out[(i, c)] = model
                .components
                .row(c)
                .iter()
                .zip(row.iter().zip(&model.mean))
                .map(|(w, (v, m))| w * (v - m))
                .sum();
        }
    }
    Ok(out)
}
