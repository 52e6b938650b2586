use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{OutcomeDataset, PovmKind, Provenance};
use crate::dist::{outcome_count, ProbDist};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::{rotated_z_distribution, Basis, DensityMatrix, ReadoutFidelity};

/// Smallest `|det|` of a single-qubit confusion matrix accepted for inversion.
pub const CONFUSION_DET_TOL: f64 = 1e-9;

/// Bitstring histograms conditioned on the per-qubit basis setting.
///
/// Setting index is base 3 over `(z, x, y)` with qubit 0 most significant;
/// each histogram has `2^N` entries indexed by the measured bitstring.
/// Weights are unnormalized (shot counts for data, probabilities for exact input).
#[derive(Clone, Debug, PartialEq)]
pub struct BasisHistograms {
    n_qubits: usize,
    hist: Vec<Vec<f64>>,
}

fn split_symbol(s: u8) -> (usize, usize) {
    (s as usize % 3, s as usize / 3)
}

impl BasisHistograms {
    pub fn new(n_qubits: usize, hist: Vec<Vec<f64>>) -> Result<Self> {
        let settings = outcome_count(3, n_qubits)?;
        let bits = outcome_count(2, n_qubits)?;
        if hist.len() != settings || hist.iter().any(|h| h.len() != bits) {
            return Err(Error::Dimension(format!(
                "histograms must be {settings} x {bits} for {n_qubits} qubits"
            )));
        }
        if hist.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation(
                "histogram weights must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { n_qubits, hist })
    }

    /// Counts from a Pauli-6 dataset, which keeps the basis of every outcome.
    pub fn from_dataset(d: &OutcomeDataset) -> Result<Self> {
        if d.kind() != PovmKind::Pauli6 {
            return Err(Error::Validation(
                "basis-resolved histograms need pauli6 records (pauli4 merges the 1 outcomes)"
                    .into(),
            ));
        }
        let n = d.n_qubits();
        let mut hist = vec![vec![0.0; 1 << n]; 3usize.pow(n as u32)];
        for shot in d.iter() {
            let (mut setting, mut bits) = (0, 0);
            for &s in shot {
                let (b, bit) = split_symbol(s);
                setting = setting * 3 + b;
                bits = (bits << 1) | bit;
            }
            hist[setting][bits] += 1.0;
        }
        Ok(Self { n_qubits: n, hist })
    }

    /// Exact conditional distributions of `rho`, each setting with weight `3^-N`.
    pub fn exact<T: Real>(rho: &DensityMatrix<T>) -> Result<Self> {
        let n = rho.n_qubits();
        let settings = 3usize.pow(n as u32);
        let w = 1.0 / settings as f64;
        let hist = (0..settings)
            .map(|s| {
                let bases = setting_bases(s, n);
                let d = rotated_z_distribution(rho, &bases)?;
                Ok(d.values().iter().map(|v| v.as_f64() * w).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok(Self { n_qubits: n, hist })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Histogram of one basis setting.
    pub fn setting(&self, s: usize) -> &[f64] {
        &self.hist[s]
    }

    pub fn total(&self) -> f64 {
        self.hist.iter().flatten().sum()
    }

    /// Pushes every histogram through the readout confusion (`observed = C true`).
    pub fn apply_confusion(&self, readout: &[ReadoutFidelity]) -> Result<Self> {
        self.check_readout(readout)?;
        let mats: Vec<[[f64; 2]; 2]> = readout.iter().map(|r| r.confusion()).collect();
        let hist = self
            .hist
            .iter()
            .map(|h| apply_per_qubit(h, self.n_qubits, &mats))
            .collect();
        Ok(Self {
            n_qubits: self.n_qubits,
            hist,
        })
    }

    fn check_readout(&self, readout: &[ReadoutFidelity]) -> Result<()> {
        if readout.len() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "{} readout entries for {} qubits",
                readout.len(),
                self.n_qubits
            )));
        }
        Ok(())
    }

    /// Joint POVM distribution: each `(setting, bits)` weight lands on its symbol string.
    pub fn to_distribution<T: Real>(&self, kind: PovmKind) -> Result<ProbDist<T>> {
        let n = self.n_qubits;
        let k = kind.alphabet();
        let mut out = vec![T::zero(); outcome_count(k, n)?];
        for (s, h) in self.hist.iter().enumerate() {
            let bases = setting_bases(s, n);
            for (bits, &w) in h.iter().enumerate() {
                let idx = bases.iter().enumerate().fold(0, |acc, (q, &b)| {
                    let bit = ((bits >> (n - 1 - q)) & 1) as u8;
                    acc * k + kind.symbol(b, bit) as usize
                });
                out[idx] += T::lit(w);
            }
        }
        ProbDist::from_weights(n, k, out)
    }

    /// Redraws every shot of `template` from these histograms, keeping its
    /// basis setting, so the setting counts are preserved exactly.
    pub fn resample_like(
        &self,
        template: &OutcomeDataset,
        kind: PovmKind,
        seed: u64,
    ) -> Result<OutcomeDataset> {
        if template.kind() != PovmKind::Pauli6 || template.n_qubits() != self.n_qubits {
            return Err(Error::Validation(
                "resampling template must be a matching pauli6 dataset".into(),
            ));
        }
        let n = self.n_qubits;
        let mut samplers: Vec<Option<WeightedIndex<f64>>> = vec![None; self.hist.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shots = Vec::with_capacity(template.as_flat().len());
        for shot in template.iter() {
            let setting = shot.iter().fold(0, |acc, &s| acc * 3 + split_symbol(s).0);
            let sampler = match &mut samplers[setting] {
                Some(s) => s,
                slot => slot.insert(
                    WeightedIndex::new(&self.hist[setting])
                        .map_err(|e| Error::Numeric(e.to_string()))?,
                ),
            };
            let bits = sampler.sample(&mut rng);
            for (q, &s) in shot.iter().enumerate() {
                let b = Basis::ALL[split_symbol(s).0];
                shots.push(kind.symbol(b, ((bits >> (n - 1 - q)) & 1) as u8));
            }
        }
        OutcomeDataset::new(
            n,
            kind,
            shots,
            Provenance {
                bayes_corrected: true,
                ..template.provenance().clone()
            },
        )
    }
}

fn setting_bases(s: usize, n: usize) -> Vec<Basis> {
    let mut bases = vec![Basis::Z; n];
    let mut rest = s;
    for b in bases.iter_mut().rev() {
        *b = Basis::ALL[rest % 3];
        rest /= 3;
    }
    bases
}

/// Applies a 2x2 matrix along each qubit axis of a `2^n` vector.
fn apply_per_qubit(v: &[f64], n: usize, mats: &[[[f64; 2]; 2]]) -> Vec<f64> {
    let mut cur = v.to_vec();
    for (q, m) in mats.iter().enumerate() {
        let mask = 1 << (n - 1 - q);
        for i in 0..cur.len() {
            if i & mask == 0 {
                let (a0, a1) = (cur[i], cur[i | mask]);
                cur[i] = m[0][0] * a0 + m[0][1] * a1;
                cur[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }
    cur
}

/// Removes readout errors from each basis-conditioned histogram.
///
/// Applies the inverse tensor-product confusion matrix, clips negative
/// entries to zero and rescales each histogram to its original total.
pub fn bayes_correct(
    hist: &BasisHistograms,
    readout: &[ReadoutFidelity],
) -> Result<BasisHistograms> {
    hist.check_readout(readout)?;
    let inverses = readout
        .iter()
        .enumerate()
        .map(|(qubit, r)| {
            let c = r.confusion();
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            if det.abs() < CONFUSION_DET_TOL {
                return Err(Error::SingularConfusion { qubit, det });
            }
            Ok([
                [c[1][1] / det, -c[0][1] / det],
                [-c[1][0] / det, c[0][0] / det],
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let out = hist
        .hist
        .iter()
        .map(|h| {
            let total: f64 = h.iter().sum();
            if total == 0.0 {
                return h.clone();
            }
            let mut c = apply_per_qubit(h, hist.n_qubits, &inverses);
            c.iter_mut().for_each(|v| *v = v.max(0.0));
            let kept: f64 = c.iter().sum();
            c.iter_mut().for_each(|v| *v *= total / kept);
            c
        })
        .collect();
    Ok(BasisHistograms {
        n_qubits: hist.n_qubits,
        hist: out,
    })
}
