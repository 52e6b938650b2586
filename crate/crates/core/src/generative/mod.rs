//! Autoregressive gated recurrent model over outcome strings.
//!
//! Site `m` is predicted from the hidden state after reading the token of
//! site `m - 1`; a dedicated start token (index `K`) is fed at the first
//! site and the initial hidden state is zero, so every conditional is a
//! deterministic function of the parameters and the prefix.

mod checkpoint;
mod grad;
mod train;

pub use checkpoint::{Checkpoint, CheckpointProvenance, CHECKPOINT_VERSION};
pub use grad::{gradient, gradient_weighted};
pub use train::{
    mean_nll, train, train_observed, EpochRecord, StopReason, TrainedModel, TrainingConfig,
    TrainingTrace,
};

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::{outcome_count, ProbDist};
use crate::error::{Error, Result};
use crate::povm::{OutcomeDataset, PovmKind, Provenance};
use crate::scalar::Real;

/// Largest `K^N` accepted by [`exact_distribution`].
pub const MAX_ENUMERATION: usize = 10_000_000;

/// Parameter groups in storage order.
pub const PARAM_GROUPS: [&str; 11] = [
    "w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_n", "u_n", "b_n", "w_out", "b_out",
];

/// Offsets of each parameter group in the flat vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub h: usize,
    pub k: usize,
    pub offsets: [usize; 12],
}

impl Layout {
    pub fn new(h: usize, k: usize) -> Self {
        let tokens = k + 1;
        let sizes = [
            h * tokens,
            h * h,
            h,
            h * tokens,
            h * h,
            h,
            h * tokens,
            h * h,
            h,
            k * h,
            k,
        ];
        let mut offsets = [0; 12];
        for (i, s) in sizes.iter().enumerate() {
            offsets[i + 1] = offsets[i] + s;
        }
        Self { h, k, offsets }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.offsets[11]
    }

    #[inline]
    pub fn range(&self, group: usize) -> std::ops::Range<usize> {
        self.offsets[group]..self.offsets[group + 1]
    }
}

pub(crate) const W_Z: usize = 0;
pub(crate) const U_Z: usize = 1;
pub(crate) const B_Z: usize = 2;
pub(crate) const W_R: usize = 3;
pub(crate) const U_R: usize = 4;
pub(crate) const B_R: usize = 5;
pub(crate) const W_N: usize = 6;
pub(crate) const U_N: usize = 7;
pub(crate) const B_N: usize = 8;
pub(crate) const W_OUT: usize = 9;
pub(crate) const B_OUT: usize = 10;

/// All trainable weights, stored flat in [`PARAM_GROUPS`] order.
///
/// Input weights are `H x (K+1)` (one column per token, the last being the
/// start token), recurrent weights `H x H`, output weights `K x H`; all
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnParams<T> {
    hidden_size: usize,
    alphabet: usize,
    data: Vec<T>,
}

impl<T: Real> RnnParams<T> {
    pub fn zeros(hidden_size: usize, alphabet: usize) -> Result<Self> {
        if hidden_size == 0 || alphabet < 2 {
            return Err(Error::Validation(format!(
                "need hidden_size >= 1 and alphabet >= 2, got {hidden_size} and {alphabet}"
            )));
        }
        let len = Layout::new(hidden_size, alphabet).len();
        Ok(Self {
            hidden_size,
            alphabet,
            data: vec![T::zero(); len],
        })
    }

    /// Uniform initialization in `±1/sqrt(H)`.
    pub fn init(hidden_size: usize, alphabet: usize, seed: u64) -> Result<Self> {
        let bound = 1.0 / (hidden_size as f64).sqrt();
        Self::random(hidden_size, alphabet, bound, seed)
    }

    /// Every weight uniform in `[-scale, scale)`.
    pub fn random(hidden_size: usize, alphabet: usize, scale: f64, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(hidden_size, alphabet)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in p.data.iter_mut() {
            *w = T::lit(rng.gen_range(-1.0..1.0) * scale);
        }
        Ok(p)
    }

    pub fn from_flat(hidden_size: usize, alphabet: usize, data: Vec<T>) -> Result<Self> {
        let mut p = Self::zeros(hidden_size, alphabet)?;
        if data.len() != p.data.len() {
            return Err(Error::Dimension(format!(
                "{} weights for hidden size {hidden_size} and alphabet {alphabet} (need {})",
                data.len(),
                p.data.len()
            )));
        }
        if data.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("non-finite weight".into()));
        }
        p.data = data;
        Ok(p)
    }

    #[inline]
    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    #[inline]
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    #[inline]
    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_flat_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|w| w.is_finite())
    }

    /// Flat index range of a named group.
    pub fn group_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let g = PARAM_GROUPS.iter().position(|&n| n == name)?;
        Some(self.layout().range(g))
    }

    #[inline]
    pub(crate) fn layout(&self) -> Layout {
        Layout::new(self.hidden_size, self.alphabet)
    }

    #[inline]
    pub(crate) fn group(&self, g: usize) -> &[T] {
        &self.data[self.layout().range(g)]
    }

    fn check_sequence(&self, seq: &[u8]) -> Result<()> {
        if let Some(&s) = seq.iter().find(|&&s| s as usize >= self.alphabet) {
            return Err(Error::Validation(format!(
                "symbol {s} outside alphabet of size {}",
                self.alphabet
            )));
        }
        Ok(())
    }
}

/// Intermediate values of one recurrent step, kept for backpropagation.
#[derive(Clone, Debug)]
pub(crate) struct StepCache<T> {
    pub token: usize,
    pub h_prev: Vec<T>,
    pub z: Vec<T>,
    pub r: Vec<T>,
    pub n: Vec<T>,
    pub h: Vec<T>,
    pub probs: Vec<T>,
}

#[inline]
fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `out = b + W[:, token] + U v`.
#[inline]
fn affine<T: Real>(w: &[T], u: &[T], b: &[T], tokens: usize, token: usize, v: &[T], out: &mut [T]) {
    let h = b.len();
    for i in 0..h {
        let row = &u[i * h..(i + 1) * h];
        let mut acc = b[i] + w[i * tokens + token];
        for (a, x) in row.iter().zip(v) {
            acc += *a * *x;
        }
        out[i] = acc;
    }
}

pub(crate) fn softmax_in_place<T: Real>(v: &mut [T]) {
    let max = v.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in v.iter_mut() {
        *x /= total;
    }
}

impl<T: Real> RnnParams<T> {
    /// One recurrent step from `h_prev` reading `token`; returns the full cache.
    pub(crate) fn step(&self, h_prev: &[T], token: usize) -> StepCache<T> {
        let hs = self.hidden_size;
        let tokens = self.alphabet + 1;
        let mut z = vec![T::zero(); hs];
        let mut r = vec![T::zero(); hs];
        let mut n = vec![T::zero(); hs];
        affine(
            self.group(W_Z),
            self.group(U_Z),
            self.group(B_Z),
            tokens,
            token,
            h_prev,
            &mut z,
        );
        affine(
            self.group(W_R),
            self.group(U_R),
            self.group(B_R),
            tokens,
            token,
            h_prev,
            &mut r,
        );
        z.iter_mut().for_each(|x| *x = sigmoid(*x));
        r.iter_mut().for_each(|x| *x = sigmoid(*x));
        let q: Vec<T> = r.iter().zip(h_prev).map(|(a, b)| *a * *b).collect();
        affine(
            self.group(W_N),
            self.group(U_N),
            self.group(B_N),
            tokens,
            token,
            &q,
            &mut n,
        );
        n.iter_mut().for_each(|x| *x = x.tanh());
        let h: Vec<T> = (0..hs)
            .map(|i| (T::one() - z[i]) * h_prev[i] + z[i] * n[i])
            .collect();
        let probs = self.output(&h);
        StepCache {
            token,
            h_prev: h_prev.to_vec(),
            z,
            r,
            n,
            h,
            probs,
        }
    }

    fn output(&self, h: &[T]) -> Vec<T> {
        let hs = self.hidden_size;
        let w = self.group(W_OUT);
        let b = self.group(B_OUT);
        let mut logits: Vec<T> = (0..self.alphabet)
            .map(|a| {
                w[a * hs..(a + 1) * hs]
                    .iter()
                    .zip(h)
                    .fold(b[a], |acc, (x, y)| acc + *x * *y)
            })
            .collect();
        softmax_in_place(&mut logits);
        logits
    }

    /// Hidden state and next-site distribution only.
    fn advance(&self, h_prev: &[T], token: usize) -> (Vec<T>, Vec<T>) {
        let c = self.step(h_prev, token);
        (c.h, c.probs)
    }

    pub(crate) fn run(&self, seq: &[u8]) -> Vec<StepCache<T>> {
        let mut h = vec![T::zero(); self.hidden_size];
        let mut token = self.alphabet;
        let mut caches = Vec::with_capacity(seq.len());
        for &a in seq {
            let c = self.step(&h, token);
            h.clone_from(&c.h);
            token = a as usize;
            caches.push(c);
        }
        caches
    }
}

/// Per-site conditionals `p(a_m | a_<m)` along one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteDistributions<T> {
    pub sites: Vec<Vec<T>>,
}

/// Site conditionals and negative log-likelihood of `seq`.
pub fn forward<T: Real>(params: &RnnParams<T>, seq: &[u8]) -> Result<(SiteDistributions<T>, T)> {
    params.check_sequence(seq)?;
    let caches = params.run(seq);
    let nll = caches
        .iter()
        .zip(seq)
        .fold(T::zero(), |acc, (c, &a)| acc - c.probs[a as usize].ln());
    Ok((
        SiteDistributions {
            sites: caches.into_iter().map(|c| c.probs).collect(),
        },
        nll,
    ))
}

/// Probability of every outcome string, enumerated depth-first so each
/// prefix is evaluated once.
pub fn exact_distribution<T: Real>(params: &RnnParams<T>, n_qubits: usize) -> Result<ProbDist<T>> {
    let k = params.alphabet();
    let total = outcome_count(k, n_qubits)?;
    if total > MAX_ENUMERATION {
        return Err(Error::Size(format!(
            "{k}^{n_qubits} outcomes exceed the enumeration limit {MAX_ENUMERATION}"
        )));
    }
    let mut out = vec![T::zero(); total];
    if n_qubits == 0 {
        out[0] = T::one();
    } else {
        let h0 = vec![T::zero(); params.hidden_size()];
        enumerate(params, n_qubits, &h0, k, T::one(), 0, 0, &mut out);
    }
    ProbDist::from_raw(n_qubits, k, out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate<T: Real>(
    params: &RnnParams<T>,
    n: usize,
    h_prev: &[T],
    token: usize,
    prob: T,
    depth: usize,
    index: usize,
    out: &mut [T],
) {
    let (h, p) = params.advance(h_prev, token);
    let k = params.alphabet();
    for (a, &pa) in p.iter().enumerate() {
        let idx = index * k + a;
        if depth + 1 == n {
            out[idx] = prob * pa;
        } else {
            enumerate(params, n, &h, a, prob * pa, depth + 1, idx, out);
        }
    }
}

/// Ancestral samples, one site at a time.
pub fn sample_sequences<T: Real>(
    params: &RnnParams<T>,
    n_qubits: usize,
    n: usize,
    seed: u64,
) -> Result<OutcomeDataset> {
    if n == 0 {
        return Err(Error::Validation("sample count must be at least 1".into()));
    }
    let kind = PovmKind::from_alphabet(params.alphabet())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shots = Vec::with_capacity(n * n_qubits);
    let h0 = vec![T::zero(); params.hidden_size()];
    for _ in 0..n {
        let mut h = h0.clone();
        let mut token = params.alphabet();
        for _ in 0..n_qubits {
            let (h_next, p) = params.advance(&h, token);
            let w: Vec<f64> = p.iter().map(|v| v.as_f64()).collect();
            let a = WeightedIndex::new(&w)
                .map_err(|e| Error::Numeric(e.to_string()))?
                .sample(&mut rng);
            shots.push(a as u8);
            h = h_next;
            token = a;
        }
    }
    OutcomeDataset::new(
        n_qubits,
        kind,
        shots,
        Provenance {
            seed,
            ..Provenance::default()
        },
    )
}
