//! Experiment orchestration: end-to-end tomography runs and shot-scaling sweeps.
//!
//! Everything here runs in `f64`. Every random draw derives from the master
//! seed of an [`ExperimentSpec`] through [`derive_seed`], so a spec fully
//! determines its report.

mod config;
mod report;
mod scaling;
mod tomography;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{parse_config, parse_readout_table, ConfigEntry, SPEC_KEYS};
pub use report::{write_cells_csv, write_series_csv, REPORT_VERSION};
pub use scaling::{
    baseline_ns_star, find_ns_star, linear_fit, run_scaling, CellRecord, GridPoint, LinearFit,
    Method, NsStar, ScalingReport, SeriesReport,
};
pub use tomography::{
    prepare, prepare_state, run_tomography, CorrelationRecord, Prepared, StateScores,
    TomographyRecord, MAX_DENSE_RECONSTRUCTION,
};

use crate::error::{Error, Result};
use crate::generative::TrainingConfig;
use crate::mle::MleConfig;
use crate::povm::PovmKind;
use crate::sim::{ReadoutFidelity, MAX_QUBITS};

/// Target state prepared before measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Ghz,
    /// GHZ followed by X on odd-indexed qubits.
    GhzExperimental,
    Random,
    Zero,
}

impl fmt::Display for StateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ghz => "ghz",
            Self::GhzExperimental => "ghz-experimental",
            Self::Random => "random",
            Self::Zero => "zero",
        })
    }
}

impl FromStr for StateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ghz" | "bell" => Ok(Self::Ghz),
            "ghz-experimental" | "ghz_experimental" => Ok(Self::GhzExperimental),
            "random" => Ok(Self::Random),
            "zero" => Ok(Self::Zero),
            other => Err(Error::Validation(format!(
                "unknown state '{other}' (expected ghz, ghz-experimental, random or zero)"
            ))),
        }
    }
}

/// How the per-qubit depolarizing probability is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Depolarizing {
    Off,
    Fixed(f64),
    /// Calibrated so the prepared state has this fidelity with the ideal one.
    TargetFidelity(f64),
    /// Calibrated to [`reference_fidelity`] for the qubit count.
    Reference,
}

/// Prepared-state fidelity the [`Depolarizing::Reference`] setting aims for.
pub fn reference_fidelity(n_qubits: usize) -> f64 {
    match n_qubits {
        0..=2 => 0.980,
        3 => 0.979,
        4 => 0.933,
        _ => 0.894,
    }
}

impl fmt::Display for Depolarizing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Off => f.write_str("off"),
            Self::Fixed(p) => write!(f, "{p}"),
            Self::TargetFidelity(t) => write!(f, "fidelity:{t}"),
            Self::Reference => f.write_str("reference"),
        }
    }
}

impl FromStr for Depolarizing {
    type Err = Error;

    /// `off`, `reference`, `fidelity:<F>` or a probability.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let prob = |v: &str| -> Result<f64> {
            match v.parse::<f64>() {
                Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
                _ => Err(Error::Validation(format!(
                    "'{v}' is not a number in [0, 1]"
                ))),
            }
        };
        match s.as_str() {
            "off" | "none" => Ok(Self::Off),
            "reference" => Ok(Self::Reference),
            _ => match s.strip_prefix("fidelity:") {
                Some(t) => Ok(Self::TargetFidelity(prob(t)?)),
                None => Ok(Self::Fixed(prob(&s)?)),
            },
        }
    }
}

/// Training settings used by experiments unless overridden.
pub fn default_training() -> TrainingConfig {
    TrainingConfig {
        learning_rate: 2e-3,
        batch_size: 512,
        max_epochs: 1000,
        hidden_size: 32,
        validation_fraction: 0.2,
        patience: 200,
        ..TrainingConfig::default()
    }
}

/// Shot budgets visited by a scaling sweep unless overridden.
pub const DEFAULT_SHOT_GRID: [usize; 8] = [250, 500, 1000, 2000, 4000, 8000, 16000, 32000];

/// Everything needed to reproduce an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub state: StateKind,
    pub qubits: Vec<usize>,
    pub povm: PovmKind,
    /// Size of the master dataset drawn per qubit count.
    pub shots: usize,
    pub shot_grid: Vec<usize>,
    pub repeats: usize,
    pub threshold: f64,
    pub depolarizing: Depolarizing,
    pub readout: Option<Vec<ReadoutFidelity>>,
    pub bayes_correct: bool,
    pub random_depth: usize,
    pub training: TrainingConfig,
    pub mle: MleConfig,
    pub seed: u64,
    /// Record per-cell wall-clock time (breaks bitwise reproducibility of reports).
    pub record_wall_time: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            state: StateKind::Ghz,
            qubits: vec![2],
            povm: PovmKind::Pauli4,
            shots: 32000,
            shot_grid: DEFAULT_SHOT_GRID.to_vec(),
            repeats: 10,
            threshold: 0.99,
            depolarizing: Depolarizing::Off,
            readout: None,
            bayes_correct: false,
            random_depth: 4,
            training: default_training(),
            mle: MleConfig::default(),
            seed: 0,
            record_wall_time: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.qubits.is_empty() {
            return bad("at least one qubit count is required".into());
        }
        if let Some(&n) = self.qubits.iter().find(|&&n| n == 0 || n > MAX_QUBITS) {
            return bad(format!("qubit count {n} outside 1..={MAX_QUBITS}"));
        }
        if self.shots == 0 {
            return bad("shots must be at least 1".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.shot_grid.is_empty() || self.shot_grid[0] == 0 {
            return bad("shot grid must be nonempty with positive entries".into());
        }
        if self.shot_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!(
                "shot grid {:?} is not strictly increasing",
                self.shot_grid
            ));
        }
        if let Some(&last) = self.shot_grid.last() {
            if last > self.shots {
                return bad(format!(
                    "shot grid reaches {last} but the master dataset has {} shots",
                    self.shots
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if self.bayes_correct && self.readout.is_none() {
            return bad("bayes correction needs a readout table".into());
        }
        if let Some(r) = &self.readout {
            if r.is_empty() {
                return bad("readout table is empty".into());
            }
            for f in r {
                ReadoutFidelity::new(f.f_g, f.f_e)?;
            }
        }
        self.training.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Validation(e.to_string()))
    }
}

/// Purposes of derived random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedPurpose {
    State,
    Sample,
    Resample,
    Subsample,
    Train,
    Tomography,
}

/// Seed for one purpose and cell, a pure function of its inputs.
pub fn derive_seed(master: u64, purpose: SeedPurpose, n_qubits: usize, a: u64, b: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update([purpose as u8]);
    h.update((n_qubits as u64).to_le_bytes());
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
