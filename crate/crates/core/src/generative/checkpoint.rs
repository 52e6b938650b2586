use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RnnParams, TrainingConfig};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "qtomo-rnn";

/// Dataset and settings a model was trained from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointProvenance {
    pub dataset_sha256: String,
    pub n_qubits: usize,
    pub config: TrainingConfig,
}

/// Text checkpoint: a header, optional JSON provenance, then one weight per line.
///
/// ```text
/// qtomo-rnn 1
/// hidden_size 32
/// alphabet 4
/// provenance {"dataset_sha256":"...","n_qubits":2,"config":{...}}
/// weights 5028
/// 0.0132...
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub params: RnnParams<T>,
    pub provenance: Option<CheckpointProvenance>,
}

impl<T: Real> Checkpoint<T> {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "{MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(w, "hidden_size {}", self.params.hidden_size())?;
        writeln!(w, "alphabet {}", self.params.alphabet())?;
        if let Some(p) = &self.provenance {
            let json = serde_json::to_string(p).map_err(|e| Error::Validation(e.to_string()))?;
            writeln!(w, "provenance {json}")?;
        }
        writeln!(w, "weights {}", self.params.len())?;
        for x in self.params.as_flat() {
            // shortest round-tripping decimal
            writeln!(w, "{x}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut lineno = 0;
        let mut next = |what: &str| -> Result<(usize, String)> {
            lineno += 1;
            match lines.next() {
                Some(l) => Ok((lineno, l?)),
                None => Err(Error::Parse {
                    line: lineno,
                    msg: format!("unexpected end of checkpoint, expected {what}"),
                }),
            }
        };
        let field = |(line, text): (usize, String), key: &str| -> Result<String> {
            text.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or(Error::Parse {
                    line,
                    msg: format!("expected '{key} <value>'"),
                })
        };
        let num = |line: usize, s: &str| -> Result<usize> {
            s.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("'{s}' is not a count"),
            })
        };

        let header = next("header")?;
        let version = field(header, MAGIC)?;
        if version.trim() != CHECKPOINT_VERSION.to_string() {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported checkpoint version {version}"),
            });
        }
        let l = next("hidden_size")?;
        let ln = l.0;
        let hidden = num(ln, &field(l, "hidden_size")?)?;
        let l = next("alphabet")?;
        let ln = l.0;
        let alphabet = num(ln, &field(l, "alphabet")?)?;

        let mut l = next("weights")?;
        let mut provenance = None;
        if l.1.starts_with("provenance ") {
            let ln = l.0;
            let json = field(l, "provenance")?;
            provenance = Some(serde_json::from_str(&json).map_err(|e| Error::Parse {
                line: ln,
                msg: e.to_string(),
            })?);
            l = next("weights")?;
        }
        let ln = l.0;
        let count = num(ln, &field(l, "weights")?)?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            let (line, text) = next("weight")?;
            let v: f64 = text.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("'{text}' is not a number"),
            })?;
            data.push(T::lit(v));
        }
        Ok(Self {
            params: RnnParams::from_flat(hidden, alphabet, data)?,
            provenance,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}
