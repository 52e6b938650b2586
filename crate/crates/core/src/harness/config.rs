use std::path::Path;

use super::ExperimentSpec;
use crate::error::{Error, Result};
use crate::sim::{ReadoutFidelity, REFERENCE_READOUT};

/// One `key = value` line of a config file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits `key = value` lines; `#` starts a comment, blank lines are skipped
/// and keys are normalized to lowercase with `_` for `-`.
pub fn parse_config(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(Error::Parse {
                line: i + 1,
                msg: "empty key".into(),
            });
        }
        out.push(ConfigEntry {
            line: i + 1,
            key,
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

pub(crate) fn normalize_key(key: &str) -> String {
    key.trim()
        .trim_start_matches("--")
        .to_ascii_lowercase()
        .replace('-', "_")
}

/// Per-qubit `f_g f_e` pairs, one qubit per line (comma or whitespace separated).
pub fn parse_readout_table(text: &str) -> Result<Vec<ReadoutFidelity>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        let [f_g, f_e] = nums[..] else {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected two fidelities, got {}", nums.len()),
            });
        };
        out.push(ReadoutFidelity::new(f_g, f_e).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    if out.is_empty() {
        return Err(Error::Validation("readout table has no rows".into()));
    }
    Ok(out)
}

fn parse<V: std::str::FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Validation(format!("{key}: '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Validation(format!(
            "{key}: '{value}' is not a boolean"
        ))),
    }
}

/// `2,3,5`, `2..5` or `2-5`, inclusive ranges.
fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let v = value.trim();
    let range = v.split_once("..").or_else(|| v.split_once('-'));
    if let Some((a, b)) = range {
        let (a, b): (usize, usize) = (parse(key, a)?, parse(key, b)?);
        if a > b {
            return Err(Error::Validation(format!("{key}: empty range '{value}'")));
        }
        return Ok((a..=b).collect());
    }
    v.split(',').map(|s| parse(key, s)).collect()
}

/// Keys accepted by [`ExperimentSpec::set`].
pub const SPEC_KEYS: [&str; 26] = [
    "state",
    "qubits",
    "povm",
    "shots",
    "shot_grid",
    "repeats",
    "threshold",
    "seed",
    "noise_depol",
    "readout_table",
    "bayes",
    "random_depth",
    "learning_rate",
    "batch_size",
    "max_epochs",
    "hidden_size",
    "validation_fraction",
    "patience",
    "loss_threshold",
    "beta1",
    "beta2",
    "epsilon",
    "mle_max_iters",
    "mle_tol",
    "mle_grad_tol",
    "record_wall_time",
];

impl ExperimentSpec {
    pub fn is_key(key: &str) -> bool {
        SPEC_KEYS.contains(&normalize_key(key).as_str())
    }

    /// Sets one field from its config or flag spelling. A `readout_table`
    /// value is `none`, `reference` or a path, resolved against `base_dir`.
    pub fn set(&mut self, key: &str, value: &str, base_dir: Option<&Path>) -> Result<()> {
        let key = normalize_key(key);
        let k = key.as_str();
        match k {
            "state" => self.state = parse(k, value)?,
            "qubits" => self.qubits = parse_list(k, value)?,
            "povm" => self.povm = parse(k, value)?,
            "shots" => self.shots = parse(k, value)?,
            "shot_grid" => {
                self.shot_grid = value
                    .split(',')
                    .map(|s| parse(k, s))
                    .collect::<Result<_>>()?
            }
            "repeats" => self.repeats = parse(k, value)?,
            "threshold" => self.threshold = parse(k, value)?,
            "seed" => self.seed = parse(k, value)?,
            "noise_depol" => self.depolarizing = parse(k, value)?,
            "readout_table" => {
                self.readout = match value.trim() {
                    "none" | "off" => None,
                    "reference" => Some(REFERENCE_READOUT.to_vec()),
                    path => {
                        let p = match base_dir {
                            Some(dir) => dir.join(path),
                            None => path.into(),
                        };
                        Some(parse_readout_table(&std::fs::read_to_string(&p)?)?)
                    }
                }
            }
            "bayes" => self.bayes_correct = parse_bool(k, value)?,
            "random_depth" => self.random_depth = parse(k, value)?,
            "learning_rate" => self.training.learning_rate = parse(k, value)?,
            "batch_size" => self.training.batch_size = parse(k, value)?,
            "max_epochs" => self.training.max_epochs = parse(k, value)?,
            "hidden_size" => self.training.hidden_size = parse(k, value)?,
            "validation_fraction" => self.training.validation_fraction = parse(k, value)?,
            "patience" => self.training.patience = parse(k, value)?,
            "loss_threshold" => self.training.loss_threshold = parse(k, value)?,
            "beta1" => self.training.beta1 = parse(k, value)?,
            "beta2" => self.training.beta2 = parse(k, value)?,
            "epsilon" => self.training.epsilon = parse(k, value)?,
            "mle_max_iters" => self.mle.max_iters = parse(k, value)?,
            "mle_tol" => self.mle.tol = parse(k, value)?,
            "mle_grad_tol" => self.mle.grad_tol = parse(k, value)?,
            "record_wall_time" => self.record_wall_time = parse_bool(k, value)?,
            _ => return Err(Error::Validation(format!("unknown key '{key}'"))),
        }
        Ok(())
    }
}
