//! Transmissibility arithmetic and spectral windows.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Reference lines whose magnitude falls below this fraction of the reference
/// spectrum's peak are rejected.
pub const REFERENCE_FLOOR: f64 = 1e-12;

/// |T| for every sensor pair of one measurement repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissibilityRecord {
    /// `pairs × lines`.
    pub magnitudes: Matrix,
    pub freq_grid: Vec<f64>,
}

impl TransmissibilityRecord {
    pub fn new(magnitudes: Matrix, freq_grid: Vec<f64>) -> Result<Self> {
        if magnitudes.cols() != freq_grid.len() {
            return Err(Error::dimension(
                "record lines",
                freq_grid.len(),
                magnitudes.cols(),
            ));
        }
        if let Some(bad) = magnitudes
            .as_slice()
            .iter()
            .position(|m| !m.is_finite() || *m < 0.0)
        {
            return Err(Error::precondition(format!(
                "magnitude {} at flat index {bad} is not a finite non-negative value",
                magnitudes.as_slice()[bad]
            )));
        }
        Ok(TransmissibilityRecord {
            magnitudes,
            freq_grid,
        })
    }

    pub fn pairs(&self) -> usize {
        self.magnitudes.rows()
    }

    pub fn lines(&self) -> usize {
        self.magnitudes.cols()
    }
}

/// Contiguous line range `[line_lo, line_hi)` of one sensor pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpectralWindow {
    pub pair_index: usize,
    pub line_lo: usize,
    pub line_hi: usize,
}

impl SpectralWindow {
    pub fn len(&self) -> usize {
        self.line_hi.saturating_sub(self.line_lo)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self, pairs: usize, lines: usize) -> Result<()> {
        if self.line_lo >= self.line_hi {
            return Err(Error::precondition(format!(
                "empty window [{}, {})",
                self.line_lo, self.line_hi
            )));
        }
        if self.pair_index >= pairs || self.line_hi > lines {
            return Err(Error::bounds(format!(
                "window pair {} lines [{}, {}) on a {pairs}×{lines} record",
                self.pair_index, self.line_lo, self.line_hi
            )));
        }
        Ok(())
    }
}

/// Element-wise `|spec_i / spec_j|`.
pub fn transmissibility(spec_i: &[Complex64], spec_j: &[Complex64]) -> Result<Vec<f64>> {
    if spec_i.len() != spec_j.len() {
        return Err(Error::dimension("spectrum length", spec_j.len(), spec_i.len()));
    }
    let reference: Vec<f64> = spec_j.iter().map(|z| z.norm()).collect();
    let peak = reference.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::DegenerateReference { line: 0 });
    }
    let floor = REFERENCE_FLOOR * peak;
    spec_i
        .iter()
        .zip(&reference)
        .enumerate()
        .map(|(line, (num, &den))| {
            if den < floor {
                Err(Error::DegenerateReference { line })
            } else {
                // |a|/|b| rather than |a/b| keeps T_ii exactly 1
                Ok(num.norm() / den)
            }
        })
        .collect()
}

/// Copies the window's magnitudes out of the record.
pub fn window_slice(record: &TransmissibilityRecord, w: &SpectralWindow) -> Result<Vec<f64>> {
    w.validate(record.pairs(), record.lines())?;
    Ok(record.magnitudes.row(w.pair_index)[w.line_lo..w.line_hi].to_vec())
}

/// Non-overlapping windows of `window_len` lines tiling each pair, pair-major.
pub fn default_window_grid(pairs: usize, lines: usize, window_len: usize) -> Result<Vec<SpectralWindow>> {
    if window_len < 2 || window_len > lines {
        return Err(Error::precondition(format!(
            "window length {window_len} must lie in [2, {lines}]"
        )));
    }
    let per_pair = lines / window_len;
    Ok((0..pairs)
        .flat_map(|pair_index| {
            (0..per_pair).map(move |k| SpectralWindow {
                pair_index,
                line_lo: k * window_len,
                line_hi: (k + 1) * window_len,
            })
        })
        .collect())
}
