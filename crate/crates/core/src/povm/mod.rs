//! Pauli-4 and Pauli-6 informationally complete POVMs.
//!
//! Multi-qubit POVM elements are tensor products of single-qubit elements, so
//! both the Born rule and the inversion back to a density matrix factorize
//! over sites. Every map here is applied one site at a time on a `K^N` (or
//! `4^N`) tensor instead of materializing `K^N x K^N` operators.

mod dataset;
mod readout;
mod reconstruct;

pub use dataset::{
    empirical_distribution, sample_dataset, CoarseGrain, OutcomeDataset, Provenance,
};
pub use readout::{bayes_correct, BasisHistograms, CONFUSION_DET_TOL};
pub use reconstruct::{linear_inversion_matrix, reconstruct_linear_inversion};

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::dist::ProbDist;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, kron_all, CMatrix};
use crate::scalar::Real;
use crate::sim::{Basis, DensityMatrix};

/// Which single-qubit POVM is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PovmKind {
    Pauli4,
    Pauli6,
}

impl PovmKind {
    /// Number of outcomes per qubit.
    #[inline]
    pub fn alphabet(self) -> usize {
        match self {
            PovmKind::Pauli4 => 4,
            PovmKind::Pauli6 => 6,
        }
    }

    pub fn from_alphabet(k: usize) -> Result<Self> {
        match k {
            4 => Ok(PovmKind::Pauli4),
            6 => Ok(PovmKind::Pauli6),
            _ => Err(Error::Validation(format!(
                "no Pauli POVM with {k} outcomes"
            ))),
        }
    }

    /// Outcome symbol for a single-qubit measurement of `bit` in `basis`.
    ///
    /// Pauli-6: `(z,0)→0, (x,0)→1, (y,0)→2, (z,1)→3, (x,1)→4, (y,1)→5`.
    /// Pauli-4 merges every `1` outcome into symbol 3.
    #[inline]
    pub fn symbol(self, basis: Basis, bit: u8) -> u8 {
        match (self, bit) {
            (_, 0) => basis.index() as u8,
            (PovmKind::Pauli4, _) => 3,
            (PovmKind::Pauli6, _) => 3 + basis.index() as u8,
        }
    }
}

impl fmt::Display for PovmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PovmKind::Pauli4 => "pauli4",
            PovmKind::Pauli6 => "pauli6",
        })
    }
}

impl FromStr for PovmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pauli4" => Ok(PovmKind::Pauli4),
            "pauli6" => Ok(PovmKind::Pauli6),
            other => Err(Error::Validation(format!(
                "unknown POVM '{other}' (expected pauli4 or pauli6)"
            ))),
        }
    }
}

/// Single-qubit POVM elements, their overlap matrix `T_{a,a'} = Tr(M_a M_a')`
/// and, when `T` is invertible, its inverse.
#[derive(Clone, Debug)]
pub struct PovmSet<T> {
    kind: PovmKind,
    elements: Vec<CMatrix<T>>,
    overlap: CMatrix<T>,
    overlap_inverse: Option<CMatrix<T>>,
}

fn projector<T: Real>(basis: Basis, bit: usize) -> CMatrix<T> {
    // Row `bit` of the basis rotation is the conjugate of the eigenvector.
    let u = basis.rotation::<T>();
    let v: Vec<Complex<T>> = u[bit].iter().map(|z| z.conj()).collect();
    CMatrix::outer(&v)
}

/// Builds the single-qubit POVM of the given kind.
pub fn make_povm<T: Real>(kind: PovmKind) -> PovmSet<T> {
    let third = T::one() / T::lit(3.0);
    let mut elements: Vec<CMatrix<T>> = Basis::ALL
        .iter()
        .map(|&b| projector::<T>(b, 0).scale_real(third))
        .collect();
    let ones: Vec<CMatrix<T>> = Basis::ALL
        .iter()
        .map(|&b| projector::<T>(b, 1).scale_real(third))
        .collect();
    match kind {
        PovmKind::Pauli4 => {
            let merged = ones.iter().fold(CMatrix::zeros(2, 2), |acc, m| &acc + m);
            elements.push(merged);
        }
        PovmKind::Pauli6 => elements.extend(ones),
    }
    let k = elements.len();
    let overlap = CMatrix::from_fn(k, k, |a, b| {
        let t = elements[a]
            .trace_product(&elements[b])
            .expect("2x2 elements");
        Complex::new(t.re, T::zero())
    });
    let overlap_inverse = match kind {
        PovmKind::Pauli4 => {
            let eig = hermitian_eig(&overlap).expect("overlap matrix is symmetric");
            Some(eig.map_eigenvalues(|l| T::one() / l))
        }
        PovmKind::Pauli6 => None,
    };
    PovmSet {
        kind,
        elements,
        overlap,
        overlap_inverse,
    }
}

impl<T: Real> PovmSet<T> {
    #[inline]
    pub fn kind(&self) -> PovmKind {
        self.kind
    }

    #[inline]
    pub fn alphabet(&self) -> usize {
        self.elements.len()
    }

    #[inline]
    pub fn elements(&self) -> &[CMatrix<T>] {
        &self.elements
    }

    #[inline]
    pub fn overlap(&self) -> &CMatrix<T> {
        &self.overlap
    }

    #[inline]
    pub fn overlap_inverse(&self) -> Option<&CMatrix<T>> {
        self.overlap_inverse.as_ref()
    }

    /// `K x 4` map from a qubit's `(i, j)` matrix entry to outcome probabilities:
    /// `P(a) = Σ_ij M_a[j,i] ρ[i,j]`.
    pub(crate) fn born_site_map(&self) -> Vec<Complex<T>> {
        let mut map = Vec::with_capacity(self.alphabet() * 4);
        for m in &self.elements {
            for i in 0..2 {
                for j in 0..2 {
                    map.push(m[(j, i)]);
                }
            }
        }
        map
    }

    /// `4 x K` map from outcome weights to `Σ_a w(a) M_a` entries.
    pub(crate) fn element_site_map(&self) -> Vec<Complex<T>> {
        let k = self.alphabet();
        let mut map = Vec::with_capacity(4 * k);
        for i in 0..2 {
            for j in 0..2 {
                for m in &self.elements {
                    map.push(m[(i, j)]);
                }
            }
        }
        map
    }

    /// `4 x K` map `R[(i,j), a] = Σ_a' T^{-1}_{a,a'} M_a'[i,j]`.
    pub(crate) fn reconstruction_site_map(&self) -> Result<Vec<Complex<T>>> {
        let inv = self
            .overlap_inverse
            .as_ref()
            .ok_or(Error::NotInvertible(self.kind))?;
        let k = self.alphabet();
        let mut map = Vec::with_capacity(4 * k);
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..k {
                    let v = (0..k).fold(Complex::zero(), |acc, b| {
                        acc + inv[(a, b)] * self.elements[b][(i, j)]
                    });
                    map.push(v);
                }
            }
        }
        Ok(map)
    }

    /// Dense `N`-qubit element `M_{a_1} ⊗ ... ⊗ M_{a_N}`.
    pub fn tensor_element(&self, outcome: &[u8]) -> Result<CMatrix<T>> {
        let factors = outcome
            .iter()
            .map(|&a| {
                self.elements.get(a as usize).ok_or_else(|| {
                    Error::Validation(format!(
                        "symbol {a} outside alphabet of size {}",
                        self.alphabet()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        kron_all(factors)
    }
}

/// Applies the same `out_dim x in_dim` matrix along every site of an
/// `in_dim^n` tensor (site 0 most significant), giving an `out_dim^n` tensor.
pub(crate) fn apply_per_site<T: Real>(
    input: &[Complex<T>],
    n: usize,
    in_dim: usize,
    out_dim: usize,
    map: &[Complex<T>],
) -> Vec<Complex<T>> {
    debug_assert_eq!(map.len(), in_dim * out_dim);
    debug_assert_eq!(input.len(), in_dim.pow(n as u32));
    let mut cur = input.to_vec();
    for q in 0..n {
        let left = out_dim.pow(q as u32);
        let right = in_dim.pow((n - q - 1) as u32);
        let mut next = vec![Complex::zero(); left * out_dim * right];
        for l in 0..left {
            for o in 0..out_dim {
                let row = &map[o * in_dim..(o + 1) * in_dim];
                let dst = &mut next[(l * out_dim + o) * right..(l * out_dim + o + 1) * right];
                for (i, &w) in row.iter().enumerate() {
                    if w.is_zero() {
                        continue;
                    }
                    let src = &cur[(l * in_dim + i) * right..(l * in_dim + i + 1) * right];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}

/// Index of `(i, j)` in the site-interleaved tensor whose site `q` digit is `2 i_q + j_q`.
fn pair_index(i: usize, j: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, q| {
        let s = n - 1 - q;
        acc * 4 + 2 * ((i >> s) & 1) + ((j >> s) & 1)
    })
}

pub(crate) fn matrix_to_pair_tensor<T: Real>(m: &CMatrix<T>, n: usize) -> Vec<Complex<T>> {
    let dim = 1 << n;
    let mut out = vec![Complex::zero(); dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            out[pair_index(i, j, n)] = m[(i, j)];
        }
    }
    out
}

pub(crate) fn pair_tensor_to_matrix<T: Real>(t: &[Complex<T>], n: usize) -> CMatrix<T> {
    let dim = 1 << n;
    CMatrix::from_fn(dim, dim, |i, j| t[pair_index(i, j, n)])
}

/// Born-rule image `Tr(M_a X)` of an arbitrary `2^n x 2^n` matrix (real parts).
pub fn born_probabilities<T: Real>(x: &CMatrix<T>, n: usize, povm: &PovmSet<T>) -> Result<Vec<T>> {
    let dim = 1usize << n;
    if x.rows() != dim || x.cols() != dim {
        return Err(Error::Dimension(format!(
            "{}x{} matrix for {n} qubits",
            x.rows(),
            x.cols()
        )));
    }
    let pairs = matrix_to_pair_tensor(x, n);
    let probs = apply_per_site(&pairs, n, 4, povm.alphabet(), &povm.born_site_map());
    Ok(probs.into_iter().map(|z| z.re).collect())
}

/// `Σ_a w(a) M_a` for a weight vector over all outcome strings.
pub fn weighted_elements<T: Real>(
    weights: &[T],
    n: usize,
    povm: &PovmSet<T>,
) -> Result<CMatrix<T>> {
    let k = povm.alphabet();
    if weights.len() != k.pow(n as u32) {
        return Err(Error::Dimension(format!(
            "{} weights for {k}^{n} outcomes",
            weights.len()
        )));
    }
    let w: Vec<Complex<T>> = weights
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    let pairs = apply_per_site(&w, n, k, 4, &povm.element_site_map());
    Ok(pair_tensor_to_matrix(&pairs, n))
}

/// Exact outcome distribution `P(a) = Tr(M_a ρ)`.
pub fn povm_distribution<T: Real>(
    rho: &DensityMatrix<T>,
    povm: &PovmSet<T>,
) -> Result<ProbDist<T>> {
    let n = rho.n_qubits();
    let mut values = born_probabilities(rho.matrix(), n, povm)?;
    let floor = -T::tol(1e-12);
    for v in values.iter_mut() {
        if *v < floor {
            return Err(Error::Validation(format!(
                "negative Born probability {:e}; state is not physical",
                v.as_f64()
            )));
        }
        *v = v.max(T::zero());
    }
    ProbDist::new(n, povm.alphabet(), values)
}
