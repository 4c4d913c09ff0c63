//! Synthetic transmissibility data from a grounded mass-spring-damper chain.
//!
//! Each damage class removes a fraction of the stiffness of a few springs. The
//! smallest-panel classes (3 and 6) remove less than every other class, so
//! their records sit closer to each other and to the undamaged state.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::matrix::Matrix;
use crate::rng::{cell_stream, standard_normal};
use crate::signals::{transmissibility, TransmissibilityRecord};

/// Damage class id; 0 is the undamaged state, 1..=9 the panel removals.
pub type ClassId = u8;

pub const UNDAMAGED: ClassId = 0;
pub const DAMAGE_CLASSES: [ClassId; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];
pub const SMALL_PANEL_CLASSES: [ClassId; 2] = [3, 6];

/// Rayleigh damping `C = alpha·M + beta·K`.
///
/// The default gives roughly 10 to 15 % of critical damping on the modes inside
/// the default band, wide enough that small-panel damage is of the same order
/// as 2 % measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayleighDamping {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RayleighDamping {
    fn default() -> Self {
        RayleighDamping {
            alpha: 30.0,
            beta: 3e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDamage {
    pub class_id: ClassId,
    /// Spring indices in `0..=n_dof`; spring `s` joins DOF `s-1` and DOF `s`.
    pub springs: Vec<usize>,
    /// Fraction of stiffness removed, in (0, 1).
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_dof: usize,
    pub masses: Vec<f64>,
    pub stiffnesses: Vec<f64>,
    pub damping: RayleighDamping,
    pub panels: Vec<PanelDamage>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        const REDUCTIONS: [f64; 9] = [0.15, 0.12, 0.02, 0.10, 0.13, 0.03, 0.11, 0.14, 0.09];
        let n_dof = 12;
        ModelConfig {
            n_dof,
            masses: vec![1.0; n_dof],
            stiffnesses: vec![1e6; n_dof + 1],
            damping: RayleighDamping::default(),
            panels: DAMAGE_CLASSES
                .iter()
                .zip(REDUCTIONS)
                .map(|(&class_id, reduction)| PanelDamage {
                    class_id,
                    springs: vec![usize::from(class_id)],
                    reduction,
                })
                .collect(),
        }
    }
}

/// Validated lumped-parameter chain, grounded at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfig", into = "ModelConfig")]
pub struct ChainModel {
    masses: Vec<f64>,
    stiffnesses: Vec<f64>,
    damping: RayleighDamping,
    panels: Vec<PanelDamage>,
}

impl TryFrom<ModelConfig> for ChainModel {
    type Error = Error;

    fn try_from(config: ModelConfig) -> Result<Self> {
        if config.masses.len() != config.n_dof {
            return Err(Error::config(
                "masses",
                format!("expected {} entries, got {}", config.n_dof, config.masses.len()),
            ));
        }
        ChainModel::new(config.masses, config.stiffnesses, config.damping, config.panels)
    }
}

impl From<ChainModel> for ModelConfig {
    fn from(m: ChainModel) -> Self {
        ModelConfig {
            n_dof: m.masses.len(),
            masses: m.masses,
            stiffnesses: m.stiffnesses,
            damping: m.damping,
            panels: m.panels,
        }
    }
}

impl ChainModel {
    pub fn new(
        masses: Vec<f64>,
        stiffnesses: Vec<f64>,
        damping: RayleighDamping,
        panels: Vec<PanelDamage>,
    ) -> Result<Self> {
        let n_dof = masses.len();
        if n_dof == 0 {
            return Err(Error::config("n_dof", "must be positive"));
        }
        if let Some(i) = masses.iter().position(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::config("masses", format!("mass {i} is {}", masses[i])));
        }
        if stiffnesses.len() != n_dof + 1 {
            return Err(Error::config(
                "stiffnesses",
                format!("expected {} entries, got {}", n_dof + 1, stiffnesses.len()),
            ));
        }
        if let Some(i) = stiffnesses.iter().position(|k| !(*k > 0.0 && k.is_finite())) {
            return Err(Error::config(
                "stiffnesses",
                format!("stiffness {i} is {}", stiffnesses[i]),
            ));
        }
        if !(damping.alpha >= 0.0 && damping.beta >= 0.0) {
            return Err(Error::config("damping", "coefficients must be non-negative"));
        }

        let mut seen = BTreeSet::new();
        for p in &panels {
            if !seen.insert(p.class_id) {
                return Err(Error::config(
                    "panels",
                    format!("class {} appears more than once", p.class_id),
                ));
            }
            if !(p.reduction > 0.0 && p.reduction < 1.0) {
                return Err(Error::config(
                    "panels",
                    format!("class {} reduction {} outside (0, 1)", p.class_id, p.reduction),
                ));
            }
            if p.springs.is_empty() || p.springs.iter().any(|&s| s > n_dof) {
                return Err(Error::config(
                    "panels",
                    format!("class {} springs must be non-empty and ≤ {n_dof}", p.class_id),
                ));
            }
        }
        if seen.iter().copied().ne(DAMAGE_CLASSES) {
            return Err(Error::config("panels", "class ids must be exactly 1..=9"));
        }
        let small_max = panels
            .iter()
            .filter(|p| SMALL_PANEL_CLASSES.contains(&p.class_id))
            .map(|p| p.reduction)
            .fold(f64::MIN, f64::max);
        let large_min = panels
            .iter()
            .filter(|p| !SMALL_PANEL_CLASSES.contains(&p.class_id))
            .map(|p| p.reduction)
            .fold(f64::MAX, f64::min);
        if small_max >= large_min {
            return Err(Error::config(
                "panels",
                "classes 3 and 6 must have strictly smaller reductions than all other classes",
            ));
        }

        Ok(ChainModel {
            masses,
            stiffnesses,
            damping,
            panels,
        })
    }

    pub fn n_dof(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn stiffnesses(&self) -> &[f64] {
        &self.stiffnesses
    }

    pub fn damping(&self) -> RayleighDamping {
        self.damping
    }

    pub fn panel(&self, class_id: ClassId) -> Option<&PanelDamage> {
        self.panels.iter().find(|p| p.class_id == class_id)
    }

    pub fn panels(&self) -> &[PanelDamage] {
        &self.panels
    }

    /// Spring constants with the given class's reductions applied.
    pub fn damaged_stiffnesses(&self, class_id: ClassId) -> Result<Vec<f64>> {
        let mut k = self.stiffnesses.clone();
        if class_id != UNDAMAGED {
            let panel = self
                .panel(class_id)
                .ok_or_else(|| Error::bounds(format!("damage class {class_id}")))?;
            for &s in &panel.springs {
                k[s] *= 1.0 - panel.reduction;
            }
        }
        Ok(k)
    }
}

/// Builds the default-style wing surrogate; requires at least 12 DOFs.
pub fn build_wing_model(config: &ModelConfig) -> Result<ChainModel> {
    if config.n_dof < 12 {
        return Err(Error::config("n_dof", format!("{} < 12", config.n_dof)));
    }
    ChainModel::try_from(config.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorLayout {
    /// (response DOF, reference DOF).
    pub pairs: Vec<(usize, usize)>,
    pub excitation_dof: usize,
    pub freq_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub pairs: Vec<(usize, usize)>,
    pub excitation_dof: usize,
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    pub n_lines: usize,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            pairs: (1..=9).map(|r| (r, 0)).collect(),
            excitation_dof: 0,
            f_lo_hz: 25.0,
            f_hi_hz: 175.0,
            n_lines: 256,
        }
    }
}

impl SensorLayout {
    pub fn new(pairs: Vec<(usize, usize)>, excitation_dof: usize, freq_grid: Vec<f64>) -> Result<Self> {
        if let Some((r, _)) = pairs.iter().find(|(r, f)| r == f) {
            return Err(Error::config("pairs", format!("pair ({r}, {r}) has equal DOFs")));
        }
        if freq_grid.is_empty() || freq_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("freq_grid", "must be non-empty and strictly ascending"));
        }
        if freq_grid.iter().any(|f| !f.is_finite() || *f < 0.0) {
            return Err(Error::config("freq_grid", "frequencies must be finite and ≥ 0"));
        }
        Ok(SensorLayout {
            pairs,
            excitation_dof,
            freq_grid,
        })
    }

    /// Evenly spaced grid of `n_lines` frequencies covering `[f_lo, f_hi]`.
    pub fn from_config(config: &LayoutConfig) -> Result<Self> {
        if config.n_lines < 2 || config.n_lines > 2048 {
            return Err(Error::config("n_lines", format!("{} outside [2, 2048]", config.n_lines)));
        }
        let step = (config.f_hi_hz - config.f_lo_hz) / (config.n_lines - 1) as f64;
        let grid = (0..config.n_lines)
            .map(|k| config.f_lo_hz + step * k as f64)
            .collect();
        SensorLayout::new(config.pairs.clone(), config.excitation_dof, grid)
    }

    pub fn n_lines(&self) -> usize {
        self.freq_grid.len()
    }

    /// Checks every DOF index against the model size.
    pub fn check_dofs(&self, n_dof: usize) -> Result<()> {
        let too_big = |d: usize| d >= n_dof;
        if too_big(self.excitation_dof) {
            return Err(Error::bounds(format!("excitation DOF {} ≥ {n_dof}", self.excitation_dof)));
        }
        if let Some((r, f)) = self.pairs.iter().find(|(r, f)| too_big(*r) || too_big(*f)) {
            return Err(Error::bounds(format!("sensor pair ({r}, {f}) with {n_dof} DOFs")));
        }
        Ok(())
    }

    fn sensors(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.pairs.iter().flat_map(|&(r, f)| [r, f]).collect();
        set.into_iter().collect()
    }
}

/// Receptance of every DOF to a unit force at the excitation DOF, one row per DOF.
///
/// Solves the tridiagonal system `(K' − ω²M + iωC)·u = f` per grid frequency.
pub fn frf_all(model: &ChainModel, class_id: ClassId, layout: &SensorLayout) -> Result<Vec<Vec<Complex64>>> {
    layout.check_dofs(model.n_dof())?;
    let n = model.n_dof();
    let k = model.damaged_stiffnesses(class_id)?;
    let RayleighDamping { alpha, beta } = model.damping;
    let mut out = vec![Vec::with_capacity(layout.n_lines()); n];

    let mut diag = vec![Complex64::new(0.0, 0.0); n];
    let mut off = vec![Complex64::new(0.0, 0.0); n.saturating_sub(1)];
    let mut c_prime = vec![Complex64::new(0.0, 0.0); n];
    let mut d_prime = vec![Complex64::new(0.0, 0.0); n];

    for &f_hz in &layout.freq_grid {
        let w = 2.0 * core::f64::consts::PI * f_hz;
        let k_factor = Complex64::new(1.0, w * beta);
        let m_factor = Complex64::new(-w * w, w * alpha);
        for i in 0..n {
            diag[i] = k_factor * (k[i] + k[i + 1]) + m_factor * model.masses[i];
        }
        for i in 0..n - 1 {
            off[i] = k_factor * (-k[i + 1]);
        }
        // pivots are compared against the size of the terms that make up the
        // diagonal, not the diagonal itself, which cancels at resonance
        let scale = (0..n)
            .map(|i| k_factor.norm() * (k[i] + k[i + 1]) + m_factor.norm() * model.masses[i])
            .fold(0.0, f64::max);
        let tiny = 1e-13 * scale;

        // Thomas elimination; the symmetric tridiagonal system needs no pivoting
        // as long as every leading minor is nonsingular.
        for i in 0..n {
            let mut denom = diag[i];
            let mut rhs = if i == layout.excitation_dof {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            if i > 0 {
                denom -= off[i - 1] * c_prime[i - 1];
                rhs -= off[i - 1] * d_prime[i - 1];
            }
            if !(denom.norm() > tiny) || !denom.is_finite() {
                return Err(Error::SingularSystem { freq_hz: f_hz });
            }
            c_prime[i] = if i + 1 < n { off[i] / denom } else { Complex64::new(0.0, 0.0) };
            d_prime[i] = rhs / denom;
        }
        let mut u = d_prime[n - 1];
        out[n - 1].push(u);
        for i in (0..n - 1).rev() {
            u = d_prime[i] - c_prime[i] * u;
            out[i].push(u);
        }
    }
    Ok(out)
}

/// FRF of a single DOF for the given damage state.
pub fn frf(model: &ChainModel, class_id: ClassId, layout: &SensorLayout, dof: usize) -> Result<Vec<Complex64>> {
    if dof >= model.n_dof() {
        return Err(Error::bounds(format!("DOF {dof} ≥ {}", model.n_dof())));
    }
    let mut all = frf_all(model, class_id, layout)?;
    Ok(all.swap_remove(dof))
}

/// Applies per-line, per-sensor multiplicative Gaussian noise to noise-free FRFs
/// and forms |T| for every pair.
pub fn measure_from_frfs<R: rand::Rng + ?Sized>(
    frfs: &[Vec<Complex64>],
    layout: &SensorLayout,
    noise_level: f64,
    rng: &mut R,
) -> Result<TransmissibilityRecord> {
    if !(noise_level >= 0.0) {
        return Err(Error::precondition(format!("noise level {noise_level} < 0")));
    }
    let lines = layout.n_lines();
    let mut measured: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
    for dof in layout.sensors() {
        let clean = frfs
            .get(dof)
            .ok_or_else(|| Error::bounds(format!("DOF {dof} has no FRF")))?;
        let noisy = if noise_level == 0.0 {
            clean.clone()
        } else {
            clean
                .iter()
                .map(|h| h * (1.0 + noise_level * standard_normal(rng)))
                .collect()
        };
        measured.insert(dof, noisy);
    }
    let mut magnitudes = Matrix::zeros(layout.pairs.len(), lines);
    for (p, (resp, refr)) in layout.pairs.iter().enumerate() {
        let t = transmissibility(&measured[resp], &measured[refr])?;
        magnitudes.row_mut(p).copy_from_slice(&t);
    }
    TransmissibilityRecord::new(magnitudes, layout.freq_grid.clone())
}

/// One noisy transmissibility measurement of the given damage state.
pub fn simulate_measurement<R: rand::Rng + ?Sized>(
    model: &ChainModel,
    class_id: ClassId,
    layout: &SensorLayout,
    noise_level: f64,
    rng: &mut R,
) -> Result<TransmissibilityRecord> {
    let frfs = frf_all(model, class_id, layout)?;
    measure_from_frfs(&frfs, layout, noise_level, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub class: ClassId,
    pub rep: usize,
    pub record: TransmissibilityRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub records: Vec<LabeledRecord>,
    pub per_class_counts: BTreeMap<ClassId, usize>,
    pub rng_seed: u64,
    pub noise_level: f64,
    pub reps_per_class: usize,
}

impl RawDataset {
    /// Undamaged records reserved for fitting novelty baselines.
    pub fn baseline_pool(&self) -> impl Iterator<Item = &LabeledRecord> {
        let reps = self.reps_per_class;
        self.records
            .iter()
            .filter(move |r| r.class == UNDAMAGED && r.rep < reps)
    }

    /// Undamaged records that never touch a baseline fit.
    pub fn normal_pool(&self) -> impl Iterator<Item = &LabeledRecord> {
        let reps = self.reps_per_class;
        self.records
            .iter()
            .filter(move |r| r.class == UNDAMAGED && r.rep >= reps)
    }

    pub fn damaged(&self) -> impl Iterator<Item = &LabeledRecord> {
        self.records.iter().filter(|r| r.class != UNDAMAGED)
    }
}

/// Generates `reps_per_class` records per damage class plus twice that many
/// undamaged records. Each (class, rep) cell draws from its own stream.
pub fn generate_dataset<E: Executor>(
    model: &ChainModel,
    layout: &SensorLayout,
    reps_per_class: usize,
    noise_level: f64,
    seed: u64,
    exec: &E,
) -> Result<RawDataset> {
    if reps_per_class < 3 || reps_per_class % 3 != 0 {
        return Err(Error::precondition(format!(
            "reps_per_class {reps_per_class} must be a positive multiple of 3"
        )));
    }
    let mut clean = Vec::with_capacity(10);
    for class in core::iter::once(UNDAMAGED).chain(DAMAGE_CLASSES) {
        clean.push(frf_all(model, class, layout)?);
    }
    let mut cells = Vec::new();
    for class in core::iter::once(UNDAMAGED).chain(DAMAGE_CLASSES) {
        let count = if class == UNDAMAGED { 2 * reps_per_class } else { reps_per_class };
        cells.extend((0..count).map(|rep| (class, rep)));
    }
    let records = exec
        .map(cells.len(), |i| {
            let (class, rep) = cells[i];
            let mut rng = cell_stream(seed, class, rep);
            measure_from_frfs(&clean[usize::from(class)], layout, noise_level, &mut rng)
                .map(|record| LabeledRecord { class, rep, record })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut per_class_counts = BTreeMap::new();
    for r in &records {
        *per_class_counts.entry(r.class).or_insert(0) += 1;
    }
    Ok(RawDataset {
        records,
        per_class_counts,
        rng_seed: seed,
        noise_level,
        reps_per_class,
    })
}
