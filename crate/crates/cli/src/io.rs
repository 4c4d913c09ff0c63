//! On-disk formats. Every float is written in shortest round-trip form, so
//! reading a file back yields bit-identical values.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use shm_locate_core::features::{FeatureDataset, Normalization, Split};
use shm_locate_core::mlp::{LossHistory, MlpModel};
use shm_locate_core::signals::TransmissibilityRecord;
use shm_locate_core::synthdata::{ClassId, LabeledRecord, ModelConfig, RawDataset, SensorLayout};
use shm_locate_core::Matrix;

use crate::error::CliError;

pub const META_FILE: &str = "meta.json";
pub const RECORDS_FILE: &str = "records.csv";

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str, path: &Path, line: u64) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::format(path, format!("line {line}: `{s}` is not a number")))
}

fn parse_int<T: std::str::FromStr>(s: &str, path: &Path, line: u64) -> Result<T, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::format(path, format!("line {line}: `{s}` is not a non-negative integer")))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::format(path, e.to_string()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::format(path, e.to_string()))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::format(path, format!("{other:?}")),
    })
}

fn write_row<W: Write>(w: &mut csv::Writer<W>, path: &Path, row: &[String]) -> Result<(), CliError> {
    w.write_record(row).map_err(|e| CliError::format(path, e.to_string()))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn check_header(r: &mut csv::Reader<fs::File>, path: &Path, expected: &[&str]) -> Result<Vec<String>, CliError> {
    let header: Vec<String> = r
        .headers()
        .map_err(|e| CliError::format(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(a, b)| a != b) {
        return Err(CliError::format(
            path,
            format!("header {header:?} does not start with {expected:?}"),
        ));
    }
    Ok(header)
}

/// Everything about a dataset except the magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub model: ModelConfig,
    pub layout: SensorLayout,
    pub rng_seed: u64,
    pub noise_level: f64,
    pub reps_per_class: usize,
    pub per_class_counts: BTreeMap<ClassId, usize>,
    pub pairs: usize,
    pub lines: usize,
}

/// Writes `meta.json` and `records.csv` into `dir`.
pub fn write_dataset(dir: &Path, model: &ModelConfig, layout: &SensorLayout, data: &RawDataset) -> Result<(), CliError> {
    create_dir(dir)?;
    let meta = DatasetMeta {
        model: model.clone(),
        layout: layout.clone(),
        rng_seed: data.rng_seed,
        noise_level: data.noise_level,
        reps_per_class: data.reps_per_class,
        per_class_counts: data.per_class_counts.clone(),
        pairs: layout.pairs.len(),
        lines: layout.n_lines(),
    };
    write_json(&dir.join(META_FILE), &meta)?;

    let path = dir.join(RECORDS_FILE);
    let mut w = csv_writer(&path)?;
    write_row(&mut w, &path, &["class", "rep", "pair_index", "line_index", "magnitude"].map(String::from))?;
    for r in &data.records {
        let m = &r.record.magnitudes;
        for p in 0..m.rows() {
            for (l, v) in m.row(p).iter().enumerate() {
                write_row(
                    &mut w,
                    &path,
                    &[r.class.to_string(), r.rep.to_string(), p.to_string(), l.to_string(), fmt_f64(*v)],
                )?;
            }
        }
    }
    finish(w, &path)
}

/// Reads a dataset directory written by [`write_dataset`].
pub fn read_dataset(dir: &Path) -> Result<(DatasetMeta, RawDataset), CliError> {
    let meta: DatasetMeta = read_json(&dir.join(META_FILE))?;
    let path = dir.join(RECORDS_FILE);
    let mut r = csv_reader(&path)?;
    check_header(&mut r, &path, &["class", "rep", "pair_index", "line_index", "magnitude"])?;

    let cell = meta.pairs * meta.lines;
    let mut order: Vec<(ClassId, usize)> = Vec::new();
    let mut cells: BTreeMap<(ClassId, usize), (Vec<f64>, usize)> = BTreeMap::new();
    for (i, row) in r.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| CliError::format(&path, e.to_string()))?;
        if row.len() != 5 {
            return Err(CliError::format(&path, format!("line {line}: expected 5 fields, got {}", row.len())));
        }
        let class: ClassId = parse_int(&row[0], &path, line)?;
        let rep: usize = parse_int(&row[1], &path, line)?;
        let p: usize = parse_int(&row[2], &path, line)?;
        let l: usize = parse_int(&row[3], &path, line)?;
        let v = parse_f64(&row[4], &path, line)?;
        if p >= meta.pairs || l >= meta.lines {
            return Err(CliError::format(
                &path,
                format!("line {line}: pair {p} / line {l} outside {} × {}", meta.pairs, meta.lines),
            ));
        }
        let entry = cells.entry((class, rep)).or_insert_with(|| {
            order.push((class, rep));
            (vec![f64::NAN; cell], 0)
        });
        let slot = &mut entry.0[p * meta.lines + l];
        if !slot.is_nan() {
            return Err(CliError::format(&path, format!("line {line}: duplicate value for class {class} rep {rep}")));
        }
        *slot = v;
        entry.1 += 1;
    }

    let mut records = Vec::with_capacity(order.len());
    for key in order {
        let (values, filled) = cells.remove(&key).expect("every key was inserted");
        if filled != cell {
            return Err(CliError::format(
                &path,
                format!("class {} rep {} has {filled} of {cell} values", key.0, key.1),
            ));
        }
        let magnitudes = Matrix::from_vec(meta.pairs, meta.lines, values)?;
        records.push(LabeledRecord {
            class: key.0,
            rep: key.1,
            record: TransmissibilityRecord::new(magnitudes, meta.layout.freq_grid.clone())?,
        });
    }
    let data = RawDataset {
        records,
        per_class_counts: meta.per_class_counts.clone(),
        rng_seed: meta.rng_seed,
        noise_level: meta.noise_level,
        reps_per_class: meta.reps_per_class,
    };
    Ok((meta, data))
}

/// `class,split,f0,…` with one row per observation.
pub fn write_features(path: &Path, data: &FeatureDataset) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["class".to_string(), "split".to_string()];
    header.extend((0..data.x.cols()).map(|j| format!("f{j}")));
    write_row(&mut w, path, &header)?;
    for ((row, y), s) in data.x.row_iter().zip(&data.y).zip(&data.split) {
        let mut fields = vec![y.to_string(), s.as_str().to_string()];
        fields.extend(row.iter().map(|v| fmt_f64(*v)));
        write_row(&mut w, path, &fields)?;
    }
    finish(w, path)
}

pub fn read_features(path: &Path) -> Result<FeatureDataset, CliError> {
    let mut r = csv_reader(path)?;
    let header = check_header(&mut r, path, &["class", "split"])?;
    let d = header.len() - 2;
    let mut y = Vec::new();
    let mut split = Vec::new();
    let mut values = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| CliError::format(path, e.to_string()))?;
        if row.len() != d + 2 {
            return Err(CliError::format(path, format!("line {line}: expected {} fields, got {}", d + 2, row.len())));
        }
        y.push(parse_int(&row[0], path, line)?);
        split.push(
            row[1]
                .parse::<Split>()
                .map_err(|e| CliError::format(path, format!("line {line}: {e}")))?,
        );
        for v in row.iter().skip(2) {
            values.push(parse_f64(v, path, line)?);
        }
    }
    let x = Matrix::from_vec(y.len(), d, values)?;
    Ok(FeatureDataset::new(x, y, split)?)
}

/// `epoch,train_loss,val_loss`, epochs counted from 1.
pub fn write_loss(path: &Path, history: &LossHistory) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, &["epoch", "train_loss", "val_loss"].map(String::from))?;
    for (e, (t, v)) in history.train_loss.iter().zip(&history.val_loss).enumerate() {
        write_row(&mut w, path, &[(e + 1).to_string(), fmt_f64(*t), fmt_f64(*v)])?;
    }
    finish(w, path)
}

/// Per-epoch losses as read back from a loss CSV.
pub fn read_loss(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut r = csv_reader(path)?;
    check_header(&mut r, path, &["epoch", "train_loss", "val_loss"])?;
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| CliError::format(path, e.to_string()))?;
        let epoch: usize = parse_int(&row[0], path, line)?;
        if epoch != i + 1 {
            return Err(CliError::format(path, format!("line {line}: epoch {epoch} out of sequence")));
        }
        train.push(parse_f64(&row[1], path, line)?);
        val.push(parse_f64(&row[2], path, line)?);
    }
    Ok((train, val))
}

/// `class,pc1,…,pck`.
pub fn write_scores(path: &Path, classes: &[ClassId], scores: &Matrix) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["class".to_string()];
    header.extend((1..=scores.cols()).map(|k| format!("pc{k}")));
    write_row(&mut w, path, &header)?;
    for (row, c) in scores.row_iter().zip(classes) {
        let mut fields = vec![c.to_string()];
        fields.extend(row.iter().map(|v| fmt_f64(*v)));
        write_row(&mut w, path, &fields)?;
    }
    finish(w, path)
}

pub fn read_scores(path: &Path) -> Result<(Vec<ClassId>, Matrix), CliError> {
    let mut r = csv_reader(path)?;
    let header = check_header(&mut r, path, &["class"])?;
    let k = header.len() - 1;
    let mut classes = Vec::new();
    let mut values = Vec::new();
    for (i, row) in r.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| CliError::format(path, e.to_string()))?;
        if row.len() != k + 1 {
            return Err(CliError::format(path, format!("line {line}: expected {} fields", k + 1)));
        }
        classes.push(parse_int(&row[0], path, line)?);
        for v in row.iter().skip(1) {
            values.push(parse_f64(v, path, line)?);
        }
    }
    let scores = Matrix::from_vec(classes.len(), k, values)?;
    Ok((classes, scores))
}

/// A trained network plus what is needed to feed it raw feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classifier {
    /// Output `k` predicts `classes[k]`.
    pub classes: Vec<ClassId>,
    /// Training-split range mapping raw features onto [-1, 1].
    pub normalization: Normalization,
    pub model: MlpModel,
}

/// Resolves `p` against `base` unless it is already absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
