use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PovmKind;
use crate::dist::{outcome_count, ProbDist};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sim::{rotated_z_distribution, Basis, DensityMatrix, NoiseModel};

/// Where a dataset came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    /// Depolarizing probability used to prepare the sampled state.
    pub depolarizing_p: f64,
    /// Whether readout errors were simulated.
    pub readout_noise: bool,
    /// Whether readout errors were removed by Bayes correction before resampling.
    pub bayes_corrected: bool,
}

/// Ordered measurement records: one length-`N` outcome string per shot.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDataset {
    n_qubits: usize,
    kind: PovmKind,
    shots: Vec<u8>,
    provenance: Provenance,
}

impl OutcomeDataset {
    /// Builds a dataset from flattened shots (`n_qubits` symbols each).
    pub fn new(
        n_qubits: usize,
        kind: PovmKind,
        shots: Vec<u8>,
        provenance: Provenance,
    ) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::Validation("dataset needs at least one qubit".into()));
        }
        if !shots.len().is_multiple_of(n_qubits) {
            return Err(Error::Dimension(format!(
                "{} symbols is not a whole number of {n_qubits}-qubit shots",
                shots.len()
            )));
        }
        let k = kind.alphabet();
        if let Some(&s) = shots.iter().find(|&&s| s as usize >= k) {
            return Err(Error::Validation(format!(
                "symbol {s} outside alphabet of size {k}"
            )));
        }
        Ok(Self {
            n_qubits,
            kind,
            shots,
            provenance,
        })
    }

    pub fn from_shots(
        n_qubits: usize,
        kind: PovmKind,
        shots: &[Vec<u8>],
        provenance: Provenance,
    ) -> Result<Self> {
        if let Some(bad) = shots.iter().find(|s| s.len() != n_qubits) {
            return Err(Error::Dimension(format!(
                "shot of length {} in a {n_qubits}-qubit dataset",
                bad.len()
            )));
        }
        Self::new(n_qubits, kind, shots.concat(), provenance)
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn kind(&self) -> PovmKind {
        self.kind
    }

    #[inline]
    pub fn alphabet(&self) -> usize {
        self.kind.alphabet()
    }

    #[inline]
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn provenance_mut(&mut self) -> &mut Provenance {
        &mut self.provenance
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.shots.len() / self.n_qubits
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.shots.is_empty()
    }

    #[inline]
    pub fn shot(&self, i: usize) -> &[u8] {
        &self.shots[i * self.n_qubits..(i + 1) * self.n_qubits]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.shots.chunks_exact(self.n_qubits)
    }

    /// Flat storage, shot-major.
    #[inline]
    pub fn as_flat(&self) -> &[u8] {
        &self.shots
    }

    /// Flat outcome index (base-`K`, site 0 most significant) of shot `i`.
    pub fn outcome_index(&self, i: usize) -> usize {
        let k = self.alphabet();
        self.shot(i).iter().fold(0, |acc, &s| acc * k + s as usize)
    }

    /// Distinct shots with their multiplicities, in ascending outcome order.
    pub fn unique_counts(&self) -> Vec<(Vec<u8>, usize)> {
        let mut idx: Vec<(usize, usize)> = (0..self.len())
            .map(|i| (self.outcome_index(i), i))
            .collect();
        idx.sort_unstable();
        let mut out: Vec<(Vec<u8>, usize)> = Vec::new();
        let mut last = None;
        for (key, i) in idx {
            if last == Some(key) {
                out.last_mut().expect("nonempty").1 += 1;
            } else {
                out.push((self.shot(i).to_vec(), 1));
                last = Some(key);
            }
        }
        out
    }

    /// Shots at the given positions, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut shots = Vec::with_capacity(indices.len() * self.n_qubits);
        for &i in indices {
            shots.extend_from_slice(self.shot(i));
        }
        Self {
            n_qubits: self.n_qubits,
            kind: self.kind,
            shots,
            provenance: self.provenance.clone(),
        }
    }

    /// `n` shots drawn without replacement.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Self> {
        if n > self.len() {
            return Err(Error::Validation(format!(
                "cannot draw {n} shots without replacement from {}",
                self.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = rand::seq::index::sample(&mut rng, self.len(), n).into_vec();
        Ok(self.select(&picks))
    }

    /// SHA-256 of the header fields and shots, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.kind.to_string().as_bytes());
        h.update((self.n_qubits as u64).to_le_bytes());
        h.update(&self.shots);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Writes the line-oriented text format.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "#povm={} qubits={} seed={}",
            self.kind, self.n_qubits, self.provenance.seed
        )?;
        writeln!(
            w,
            "#noise depolarizing={} readout={} bayes={}",
            self.provenance.depolarizing_p,
            self.provenance.readout_noise,
            self.provenance.bayes_corrected
        )?;
        let mut line = String::with_capacity(2 * self.n_qubits);
        for shot in self.iter() {
            line.clear();
            for (q, s) in shot.iter().enumerate() {
                if q > 0 {
                    line.push(' ');
                }
                line.push(char::from(b'0' + s));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parses the text format written by [`OutcomeDataset::write_to`].
    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty dataset file".into(),
        })?;
        let header = header?;
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let fields = header
            .strip_prefix('#')
            .ok_or_else(|| perr(1, "missing '#povm=...' header".into()))?;
        let (mut kind, mut n_qubits, mut seed) = (None, None, None);
        for field in fields.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| perr(1, format!("malformed header field '{field}'")))?;
            match key {
                "povm" => {
                    kind = Some(
                        value
                            .parse::<PovmKind>()
                            .map_err(|e| perr(1, e.to_string()))?,
                    )
                }
                "qubits" => {
                    n_qubits = Some(value.parse::<usize>().map_err(|e| perr(1, e.to_string()))?)
                }
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| perr(1, e.to_string()))?),
                other => return Err(perr(1, format!("unknown header field '{other}'"))),
            }
        }
        let kind = kind.ok_or_else(|| perr(1, "header lacks povm".into()))?;
        let n_qubits = n_qubits.ok_or_else(|| perr(1, "header lacks qubits".into()))?;
        let mut provenance = Provenance {
            seed: seed.ok_or_else(|| perr(1, "header lacks seed".into()))?,
            ..Provenance::default()
        };

        let k = kind.alphabet();
        let mut shots = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            let trimmed = line.trim();
            if let Some(meta) = trimmed.strip_prefix("#noise") {
                for field in meta.split_whitespace() {
                    let (key, value) = field
                        .split_once('=')
                        .ok_or_else(|| perr(lineno, format!("malformed noise field '{field}'")))?;
                    let bad = |e: String| perr(lineno, e);
                    match key {
                        "depolarizing" => {
                            provenance.depolarizing_p = value
                                .parse()
                                .map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                        }
                        "readout" => {
                            provenance.readout_noise = value
                                .parse()
                                .map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?
                        }
                        "bayes" => {
                            provenance.bayes_corrected = value
                                .parse()
                                .map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?
                        }
                        other => {
                            return Err(perr(lineno, format!("unknown noise field '{other}'")))
                        }
                    }
                }
                continue;
            }
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let before = shots.len();
            for tok in trimmed.split_whitespace() {
                let s: u8 = tok
                    .parse()
                    .map_err(|_| perr(lineno, format!("'{tok}' is not an outcome symbol")))?;
                if s as usize >= k {
                    return Err(perr(
                        lineno,
                        format!("symbol {s} outside alphabet of size {k}"),
                    ));
                }
                shots.push(s);
            }
            if shots.len() - before != n_qubits {
                return Err(perr(
                    lineno,
                    format!(
                        "shot has {} symbols, expected {n_qubits}",
                        shots.len() - before
                    ),
                ));
            }
        }
        Self::new(n_qubits, kind, shots, provenance)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Merges the three Pauli-6 "bit 1" outcomes into the single Pauli-4 outcome 3.
pub trait CoarseGrain: Sized {
    fn coarse_grain_p6_to_p4(&self) -> Result<Self>;
}

impl CoarseGrain for OutcomeDataset {
    fn coarse_grain_p6_to_p4(&self) -> Result<Self> {
        if self.kind != PovmKind::Pauli6 {
            return Err(Error::Validation(format!(
                "coarse-graining needs a pauli6 dataset, got {}",
                self.kind
            )));
        }
        Ok(Self {
            n_qubits: self.n_qubits,
            kind: PovmKind::Pauli4,
            shots: self.shots.iter().map(|&s| s.min(3)).collect(),
            provenance: self.provenance.clone(),
        })
    }
}

impl<T: Real> CoarseGrain for ProbDist<T> {
    fn coarse_grain_p6_to_p4(&self) -> Result<Self> {
        if self.alphabet() != 6 {
            return Err(Error::Validation(format!(
                "coarse-graining needs a 6-outcome distribution, got {}",
                self.alphabet()
            )));
        }
        let n = self.n_qubits();
        let mut out = vec![T::zero(); outcome_count(4, n)?];
        for (idx, &v) in self.values().iter().enumerate() {
            let j = self
                .outcome_of(idx)
                .iter()
                .fold(0usize, |acc, &s| acc * 4 + s.min(3) as usize);
            out[j] += v;
        }
        ProbDist::from_raw(n, 4, out)
    }
}

/// Normalized outcome frequencies of a dataset.
pub fn empirical_distribution<T: Real>(d: &OutcomeDataset) -> Result<ProbDist<T>> {
    if d.is_empty() {
        return Err(Error::Validation(
            "empirical distribution of an empty dataset".into(),
        ));
    }
    let mut counts = vec![0usize; outcome_count(d.alphabet(), d.n_qubits())?];
    for i in 0..d.len() {
        counts[d.outcome_index(i)] += 1;
    }
    let total = T::lit(d.len() as f64);
    ProbDist::from_raw(
        d.n_qubits(),
        d.alphabet(),
        counts
            .into_iter()
            .map(|c| T::lit(c as f64) / total)
            .collect(),
    )
}

/// Simulates randomized local-Pauli measurements of `rho`.
///
/// Each shot draws a uniform basis per qubit, samples the whole bitstring from
/// the joint rotated distribution, optionally flips bits through the readout
/// confusion of `noise`, and maps `(basis, bit)` to a POVM symbol. The
/// depolarizing part of `noise` is expected to be already applied to `rho`;
/// it is only recorded in the provenance. Readout flips draw from a separate
/// random stream, so perfect readout reproduces the noiseless shots exactly.
pub fn sample_dataset<T: Real>(
    rho: &DensityMatrix<T>,
    kind: PovmKind,
    n_shots: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<OutcomeDataset> {
    if n_shots == 0 {
        return Err(Error::Validation("n_shots must be at least 1".into()));
    }
    noise.validate()?;
    let n = rho.n_qubits();
    let readout = match noise.readout {
        Some(_) => Some(noise.readout_for(n)?),
        None => None,
    };
    let n_settings = 3usize.pow(n as u32);
    let mut samplers: Vec<Option<WeightedIndex<f64>>> = vec![None; n_settings];

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut readout_rng = ChaCha8Rng::seed_from_u64(seed);
    readout_rng.set_stream(1);

    let mut shots = Vec::with_capacity(n_shots * n);
    let mut bases = vec![Basis::Z; n];
    for _ in 0..n_shots {
        let mut setting = 0;
        for b in bases.iter_mut() {
            let i = rng.gen_range(0..3);
            *b = Basis::ALL[i];
            setting = setting * 3 + i;
        }
        let sampler = match &mut samplers[setting] {
            Some(s) => s,
            slot => {
                let dist = rotated_z_distribution(rho, &bases)?;
                let w: Vec<f64> = dist.values().iter().map(|v| v.as_f64()).collect();
                slot.insert(WeightedIndex::new(w).map_err(|e| Error::Numeric(e.to_string()))?)
            }
        };
        let bits = sampler.sample(&mut rng);
        for (q, &b) in bases.iter().enumerate() {
            let mut bit = ((bits >> (n - 1 - q)) & 1) as u8;
            if let Some(r) = &readout {
                let u: f64 = readout_rng.gen();
                let keep = if bit == 0 { r[q].f_g } else { r[q].f_e };
                if u >= keep {
                    bit ^= 1;
                }
            }
            shots.push(kind.symbol(b, bit));
        }
    }
    OutcomeDataset::new(
        n,
        kind,
        shots,
        Provenance {
            seed,
            depolarizing_p: noise.depolarizing_p,
            readout_noise: readout.is_some(),
            bayes_corrected: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::povm::{make_povm, povm_distribution};
    use crate::sim::{build_ghz, random_state, ReadoutFidelity, StateVector, REFERENCE_READOUT};

    fn zero_state() -> DensityMatrix<f64> {
        DensityMatrix::from_pure(&StateVector::zero(1).unwrap())
    }

    #[test]
    fn empirical_frequencies() {
        let d = OutcomeDataset::from_shots(
            1,
            PovmKind::Pauli4,
            &[vec![0], vec![0], vec![3], vec![3]],
            Provenance::default(),
        )
        .unwrap();
        let p = empirical_distribution::<f64>(&d).unwrap();
        assert_eq!(p.values(), &[0.5, 0.0, 0.0, 0.5]);

        let one =
            OutcomeDataset::from_shots(2, PovmKind::Pauli4, &[vec![1, 2]], Provenance::default())
                .unwrap();
        let p = empirical_distribution::<f64>(&one).unwrap();
        assert_eq!(p.values().iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(p.prob(&[1, 2]).unwrap(), 1.0);

        let empty =
            OutcomeDataset::new(2, PovmKind::Pauli4, vec![], Provenance::default()).unwrap();
        assert!(empirical_distribution::<f64>(&empty).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(
            OutcomeDataset::new(2, PovmKind::Pauli4, vec![0, 4], Provenance::default()).is_err()
        );
        assert!(
            OutcomeDataset::new(2, PovmKind::Pauli4, vec![0, 1, 2], Provenance::default()).is_err()
        );
        assert!(
            OutcomeDataset::from_shots(2, PovmKind::Pauli6, &[vec![5]], Provenance::default())
                .is_err()
        );
    }

    #[test]
    fn zero_state_frequencies_within_five_sigma() {
        let n = 100_000;
        let d = sample_dataset(
            &zero_state(),
            PovmKind::Pauli4,
            n,
            &NoiseModel::noiseless(),
            3,
        )
        .unwrap();
        let emp = empirical_distribution::<f64>(&d).unwrap();
        for (f, p) in emp
            .values()
            .iter()
            .zip([1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0])
        {
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() < 5.0 * sigma, "{f} vs {p}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let rho = DensityMatrix::from_pure(&build_ghz::<f64>(3, false).unwrap());
        let a = sample_dataset(&rho, PovmKind::Pauli4, 500, &NoiseModel::noiseless(), 9).unwrap();
        let b = sample_dataset(&rho, PovmKind::Pauli4, 500, &NoiseModel::noiseless(), 9).unwrap();
        assert_eq!(a, b);
        let c = sample_dataset(&rho, PovmKind::Pauli4, 500, &NoiseModel::noiseless(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identity_confusion_reproduces_noiseless_stream() {
        let rho = DensityMatrix::from_pure(&build_ghz::<f64>(2, true).unwrap());
        let clean =
            sample_dataset(&rho, PovmKind::Pauli6, 2000, &NoiseModel::noiseless(), 4).unwrap();
        let noise = NoiseModel::noiseless()
            .with_readout(vec![ReadoutFidelity::PERFECT; 2])
            .unwrap();
        let ident = sample_dataset(&rho, PovmKind::Pauli6, 2000, &noise, 4).unwrap();
        assert_eq!(clean.as_flat(), ident.as_flat());
        assert!(ident.provenance().readout_noise);
    }

    #[test]
    fn readout_noise_biases_towards_zero() {
        // |1> read with f_e < 1 produces some 0 outcomes in the z basis
        let one = DensityMatrix::<f64>::new(1, crate::linalg::CMatrix::diag(&[0.0, 1.0])).unwrap();
        let noise = NoiseModel::noiseless()
            .with_readout(REFERENCE_READOUT[..1].to_vec())
            .unwrap();
        let d = sample_dataset(&one, PovmKind::Pauli6, 30_000, &noise, 1).unwrap();
        let z0 = d.iter().filter(|s| s[0] == 0).count() as f64;
        let z_total = d.iter().filter(|s| s[0] == 0 || s[0] == 3).count() as f64;
        let frac = z0 / z_total;
        assert!((frac - (1.0 - 0.899)).abs() < 0.02, "{frac}");
    }

    #[test]
    fn pauli6_stream_coarse_grains_to_pauli4_statistics() {
        let rho = crate::sim::densify(
            &random_state::<f64>(2, 3, 21).unwrap(),
            &NoiseModel::depolarizing(0.05).unwrap(),
        )
        .unwrap();
        let n = 50_000;
        let p6 = sample_dataset(&rho, PovmKind::Pauli6, n, &NoiseModel::noiseless(), 5).unwrap();
        let p4 = sample_dataset(&rho, PovmKind::Pauli4, n, &NoiseModel::noiseless(), 6).unwrap();
        let a = empirical_distribution::<f64>(&p6.coarse_grain_p6_to_p4().unwrap()).unwrap();
        let b = empirical_distribution::<f64>(&p4).unwrap();
        // two independent samples: E[TV] <= sqrt(K^N / n)
        let bound = 5.0 * (16.0 / n as f64).sqrt();
        assert!(a.tv_distance(&b).unwrap() < bound);
    }

    #[test]
    fn empirical_converges_to_exact() {
        let rho = DensityMatrix::from_pure(&build_ghz::<f64>(2, false).unwrap());
        let exact = povm_distribution(&rho, &make_povm(PovmKind::Pauli4)).unwrap();
        let n = 1_000_000;
        let d = sample_dataset(&rho, PovmKind::Pauli4, n, &NoiseModel::noiseless(), 2).unwrap();
        let emp = empirical_distribution::<f64>(&d).unwrap();
        assert!(emp.tv_distance(&exact).unwrap() < 5.0 * (16.0 / n as f64).sqrt());
    }

    #[test]
    fn per_qubit_marginals_match_exact() {
        let rho = DensityMatrix::from_pure(&random_state::<f64>(3, 4, 2).unwrap());
        let exact = povm_distribution(&rho, &make_povm(PovmKind::Pauli4)).unwrap();
        let n = 40_000;
        let d = sample_dataset(&rho, PovmKind::Pauli4, n, &NoiseModel::noiseless(), 8).unwrap();
        let emp = empirical_distribution::<f64>(&d).unwrap();
        for q in 0..3 {
            let e = exact.marginal(&[q]).unwrap();
            let m = emp.marginal(&[q]).unwrap();
            for (f, p) in m.values().iter().zip(e.values()) {
                let sigma = (p * (1.0 - p) / n as f64).sqrt();
                assert!((f - p).abs() < 5.0 * sigma);
            }
        }
    }

    #[test]
    fn coarse_graining() {
        let d = ProbDist::<f64>::new(1, 6, vec![0.1, 0.2, 0.3, 0.15, 0.15, 0.1]).unwrap();
        let c = d.coarse_grain_p6_to_p4().unwrap();
        assert_eq!(c.values()[..3], [0.1, 0.2, 0.3]);
        assert!((c.values()[3] - 0.4).abs() < 1e-15);
        assert!(c.coarse_grain_p6_to_p4().is_err());

        let ds = OutcomeDataset::from_shots(
            2,
            PovmKind::Pauli6,
            &[vec![4, 5], vec![1, 3]],
            Provenance::default(),
        )
        .unwrap();
        let cg = ds.coarse_grain_p6_to_p4().unwrap();
        assert_eq!(cg.as_flat(), &[3, 3, 1, 3]);
        assert_eq!(cg.kind(), PovmKind::Pauli4);
        assert!(cg.coarse_grain_p6_to_p4().is_err());
    }

    #[test]
    fn exact_pauli6_coarse_grains_to_exact_pauli4() {
        let p4 = make_povm::<f64>(PovmKind::Pauli4);
        let p6 = make_povm::<f64>(PovmKind::Pauli6);
        for seed in 0..5 {
            let rho = DensityMatrix::from_pure(&random_state::<f64>(3, 3, seed).unwrap());
            let a = povm_distribution(&rho, &p6)
                .unwrap()
                .coarse_grain_p6_to_p4()
                .unwrap();
            let b = povm_distribution(&rho, &p4).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let rho = DensityMatrix::from_pure(&build_ghz::<f64>(2, false).unwrap());
        let noise = NoiseModel::depolarizing(0.05).unwrap();
        let d = sample_dataset(&rho, PovmKind::Pauli4, 50, &noise, 1).unwrap();
        let mut buf = Vec::new();
        d.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#povm=pauli4 qubits=2 seed=1\n"));
        let back = OutcomeDataset::read_from(&buf[..]).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn file_parse_errors() {
        let bad = [
            "",
            "povm=pauli4 qubits=1 seed=0\n0\n",
            "#povm=pauli5 qubits=1 seed=0\n0\n",
            "#povm=pauli4 qubits=2 seed=0\n0\n",
            "#povm=pauli4 qubits=1 seed=0\n4\n",
            "#povm=pauli4 qubits=1\n0\n",
        ];
        for text in bad {
            assert!(
                OutcomeDataset::read_from(text.as_bytes()).is_err(),
                "{text:?}"
            );
        }
    }

    #[test]
    fn subsample_without_replacement() {
        let shots: Vec<Vec<u8>> = (0..100u8).map(|i| vec![i % 4, (i / 4) % 4]).collect();
        let d =
            OutcomeDataset::from_shots(2, PovmKind::Pauli4, &shots, Provenance::default()).unwrap();
        let s = d.subsample(100, 3).unwrap();
        let mut a = d.unique_counts();
        let mut b = s.unique_counts();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(d.subsample(101, 3).is_err());
        assert_eq!(d.subsample(10, 3).unwrap(), d.subsample(10, 3).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn text_format_round_trips(
                n in 1usize..5,
                raw in proptest::collection::vec(0u8..6, 0..60),
                seed in any::<u64>(),
                p6 in any::<bool>(),
            ) {
                let kind = if p6 { PovmKind::Pauli6 } else { PovmKind::Pauli4 };
                let k = kind.alphabet() as u8;
                let mut shots: Vec<u8> = raw.into_iter().map(|s| s % k).collect();
                shots.truncate(shots.len() / n * n);
                let prov = Provenance { seed, depolarizing_p: 0.125, readout_noise: p6, bayes_corrected: false };
                let d = OutcomeDataset::new(n, kind, shots, prov).unwrap();
                let mut buf = Vec::new();
                d.write_to(&mut buf).unwrap();
                prop_assert_eq!(OutcomeDataset::read_from(&buf[..]).unwrap(), d);
            }
        }
    }
}
