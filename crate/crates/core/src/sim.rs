//! State preparation: gate circuits on dense state vectors, GHZ and random
//! circuit targets, depolarizing noise and readout confusion.
//!
//! Qubit 0 is the most significant bit of a basis-state index, so the
//! amplitude of `|q0 q1 ... q(N-1)>` sits at `Σ q_k 2^(N-1-k)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::ProbDist;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix};
use crate::scalar::Real;

/// Largest register simulated densely.
pub const MAX_QUBITS: usize = 8;

/// Local measurement axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Z,
    X,
    Y,
}

impl Basis {
    /// Order used for basis-setting indices and Pauli-6 symbols.
    pub const ALL: [Basis; 3] = [Basis::Z, Basis::X, Basis::Y];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
            Basis::Y => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Unitary mapping this basis' `+1` eigenstate to `|0>` and `-1` eigenstate to `|1>`.
    ///
    /// `+1` eigenstates: `|0>`, `|+> = (|0>+|1>)/√2`, `|l> = (|0>+i|1>)/√2`.
    pub fn rotation<T: Real>(self) -> [[Complex<T>; 2]; 2] {
        let h = T::FRAC_1_SQRT_2();
        let z = Complex::zero();
        let re = |x: T| Complex::new(x, T::zero());
        let im = |x: T| Complex::new(T::zero(), x);
        match self {
            Basis::Z => [[Complex::one(), z], [z, Complex::one()]],
            Basis::X => [[re(h), re(h)], [re(h), re(-h)]],
            // H · S^dagger
            Basis::Y => [[re(h), im(-h)], [re(h), im(h)]],
        }
    }

    /// Pauli matrix for this axis.
    pub fn pauli<T: Real>(self) -> CMatrix<T> {
        let o = Complex::zero();
        let one = Complex::one();
        let i = Complex::new(T::zero(), T::one());
        let data = match self {
            Basis::Z => vec![one, o, o, -one],
            Basis::X => vec![o, one, one, o],
            Basis::Y => vec![o, -i, i, o],
        };
        CMatrix::new(2, 2, data).expect("2x2 Pauli")
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Z => "z",
            Basis::X => "x",
            Basis::Y => "y",
        })
    }
}

impl FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Basis::Z),
            "x" => Ok(Basis::X),
            "y" => Ok(Basis::Y),
            other => Err(Error::Validation(format!("unknown basis '{other}'"))),
        }
    }
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::Validation(format!(
            "qubit count {n} outside 1..={MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Pure state of `n_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T> {
    n_qubits: usize,
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {n_qubits} qubits",
                amplitudes.len()
            )));
        }
        let s = Self {
            n_qubits,
            amplitudes,
        };
        let norm = s.norm_sqr();
        if !norm.is_finite() || (norm - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::Validation(format!(
                "state norm^2 is {} instead of 1",
                norm.as_f64()
            )));
        }
        Ok(s)
    }

    /// `|0...0>`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let mut amplitudes = vec![Complex::zero(); 1 << n_qubits];
        amplitudes[0] = Complex::one();
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply_1q(&mut self, q: usize, u: &[[Complex<T>; 2]; 2]) {
        let stride = 1 << (self.n_qubits - 1 - q);
        let dim = self.amplitudes.len();
        let mut base = 0;
        while base < dim {
            for i in base..base + stride {
                let a0 = self.amplitudes[i];
                let a1 = self.amplitudes[i + stride];
                self.amplitudes[i] = u[0][0] * a0 + u[0][1] * a1;
                self.amplitudes[i + stride] = u[1][0] * a0 + u[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    fn apply_cz(&mut self, a: usize, b: usize) {
        let ma = 1 << (self.n_qubits - 1 - a);
        let mb = 1 << (self.n_qubits - 1 - b);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & ma != 0 && i & mb != 0 {
                *amp = -*amp;
            }
        }
    }
}

/// Elementary gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    X(usize),
    H(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Cz(usize, usize),
}

impl Gate {
    fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::X(q) | Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => (q, None),
            Gate::Cz(a, b) => (a, Some(b)),
        }
    }

    fn matrix<T: Real>(&self) -> Option<[[Complex<T>; 2]; 2]> {
        let re = |x: f64| Complex::new(T::lit(x), T::zero());
        let z = Complex::zero();
        Some(match *self {
            Gate::X(_) => [[z, Complex::one()], [Complex::one(), z]],
            Gate::H(_) => Basis::X.rotation(),
            Gate::Rx(_, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                let mis = Complex::new(T::zero(), T::lit(-s));
                [[re(c), mis], [mis, re(c)]]
            }
            Gate::Ry(_, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                [[re(c), re(-s)], [re(s), re(c)]]
            }
            Gate::Rz(_, t) => {
                let (s, c) = (t / 2.0).sin_cos();
                [
                    [Complex::new(T::lit(c), T::lit(-s)), z],
                    [z, Complex::new(T::lit(c), T::lit(s))],
                ]
            }
            Gate::Cz(..) => return None,
        })
    }
}

/// Ordered gate list on a fixed register.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        Ok(Self {
            n_qubits,
            gates: Vec::new(),
        })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Appends a gate after checking its qubit indices.
    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        let (a, b) = gate.qubits();
        if a >= self.n_qubits || b.is_some_and(|b| b >= self.n_qubits) {
            return Err(Error::Validation(format!(
                "{gate:?} targets a qubit outside 0..{}",
                self.n_qubits
            )));
        }
        if b == Some(a) {
            return Err(Error::Validation(format!(
                "{gate:?} acts twice on qubit {a}"
            )));
        }
        self.gates.push(gate);
        Ok(self)
    }
}

/// Applies each gate of `circuit` in order.
pub fn apply_circuit<T: Real>(circuit: &Circuit, state: &StateVector<T>) -> Result<StateVector<T>> {
    if circuit.n_qubits != state.n_qubits {
        return Err(Error::Dimension(format!(
            "{}-qubit circuit on {}-qubit state",
            circuit.n_qubits, state.n_qubits
        )));
    }
    let mut out = state.clone();
    for gate in &circuit.gates {
        match (*gate, gate.matrix::<T>()) {
            (Gate::Cz(a, b), _) => out.apply_cz(a, b),
            (g, Some(u)) => out.apply_1q(g.qubits().0, &u),
            (g, None) => unreachable!("{g:?} has no single-qubit matrix"),
        }
    }
    Ok(out)
}

/// GHZ preparation from `|0...0>` using H and CZ only.
///
/// Each CNOT of the standard ladder is compiled as `H(t) CZ(c,t) H(t)`. The
/// experimental variant appends X on every odd-indexed qubit, giving
/// `|01>+|10>` for two qubits.
pub fn ghz_circuit(n: usize, experimental_variant: bool) -> Result<Circuit> {
    if !(2..=MAX_QUBITS).contains(&n) {
        return Err(Error::Validation(format!(
            "GHZ size {n} outside 2..={MAX_QUBITS}"
        )));
    }
    let mut c = Circuit::new(n)?;
    c.push(Gate::H(0))?;
    for q in 1..n {
        c.push(Gate::H(q))?
            .push(Gate::Cz(q - 1, q))?
            .push(Gate::H(q))?;
    }
    if experimental_variant {
        for q in (1..n).step_by(2) {
            c.push(Gate::X(q))?;
        }
    }
    Ok(c)
}

pub fn build_ghz<T: Real>(n: usize, experimental_variant: bool) -> Result<StateVector<T>> {
    let c = ghz_circuit(n, experimental_variant)?;
    apply_circuit(&c, &StateVector::zero(n)?)
}

/// Layered random circuit: per-qubit `Ry(θ) Rz(φ)` then CZ on chain pairs,
/// with the pair offset alternating between layers. Angles come from `angle`.
pub fn random_circuit_with(
    n: usize,
    depth: usize,
    mut angle: impl FnMut() -> f64,
) -> Result<Circuit> {
    if depth == 0 {
        return Err(Error::Validation(
            "random circuit depth must be at least 1".into(),
        ));
    }
    let mut c = Circuit::new(n)?;
    for layer in 0..depth {
        for q in 0..n {
            let theta = angle();
            let phi = angle();
            c.push(Gate::Ry(q, theta))?.push(Gate::Rz(q, phi))?;
        }
        let mut q = layer % 2;
        while q + 1 < n {
            c.push(Gate::Cz(q, q + 1))?;
            q += 2;
        }
    }
    Ok(c)
}

/// Seeded random circuit with angles uniform in `[0, 2π)`.
pub fn random_circuit(n: usize, depth: usize, seed: u64) -> Result<Circuit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_circuit_with(n, depth, || rng.gen_range(0.0..std::f64::consts::TAU))
}

pub fn random_state<T: Real>(n: usize, depth: usize, seed: u64) -> Result<StateVector<T>> {
    let c = random_circuit(n, depth, seed)?;
    apply_circuit(&c, &StateVector::zero(n)?)
}

/// Density matrix of `n_qubits` qubits.
///
/// Matrices built with [`DensityMatrix::new`] are guaranteed physical.
/// [`DensityMatrix::from_estimate`] accepts Hermitian unit-trace estimates that
/// may have negative eigenvalues and records that in [`DensityMatrix::is_physical`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    n_qubits: usize,
    matrix: CMatrix<T>,
    physical: bool,
}

/// Smallest eigenvalue accepted as physical.
pub const PHYSICAL_EIG_TOL: f64 = 1e-9;

impl<T: Real> DensityMatrix<T> {
    fn check_shape(n_qubits: usize, matrix: &CMatrix<T>) -> Result<()> {
        check_qubit_count(n_qubits)?;
        let dim = 1 << n_qubits;
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(Error::Dimension(format!(
                "{}x{} matrix for {n_qubits} qubits",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(())
    }

    fn check_hermitian_unit_trace(matrix: &CMatrix<T>, tol: f64) -> Result<()> {
        let defect = matrix.hermitian_defect();
        if defect > T::tol(tol) * matrix.frobenius_norm().max(T::one()) {
            return Err(Error::Validation(format!(
                "density matrix not Hermitian (defect {:e})",
                defect.as_f64()
            )));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > T::tol(tol) || tr.im.abs() > T::tol(tol) {
            return Err(Error::Validation(format!(
                "density matrix trace is {} instead of 1",
                tr.re.as_f64()
            )));
        }
        Ok(())
    }

    /// Validated physical state: Hermitian and unit trace within 1e-10, min eigenvalue ≥ -1e-9.
    pub fn new(n_qubits: usize, matrix: CMatrix<T>) -> Result<Self> {
        Self::check_shape(n_qubits, &matrix)?;
        Self::check_hermitian_unit_trace(&matrix, 1e-10)?;
        let min = hermitian_eig(&matrix)?.min_eigenvalue();
        if min < -T::tol(PHYSICAL_EIG_TOL) {
            return Err(Error::NotPsd(min.as_f64()));
        }
        Ok(Self {
            n_qubits,
            matrix,
            physical: true,
        })
    }

    /// Hermitian unit-trace estimate (tolerance 1e-9) that may be indefinite.
    pub fn from_estimate(n_qubits: usize, matrix: CMatrix<T>) -> Result<Self> {
        Self::check_shape(n_qubits, &matrix)?;
        Self::check_hermitian_unit_trace(&matrix, 1e-9)?;
        let physical = hermitian_eig(&matrix)?.min_eigenvalue() >= -T::tol(PHYSICAL_EIG_TOL);
        Ok(Self {
            n_qubits,
            matrix,
            physical,
        })
    }

    pub fn from_pure(state: &StateVector<T>) -> Self {
        Self {
            n_qubits: state.n_qubits,
            matrix: CMatrix::outer(&state.amplitudes),
            physical: true,
        }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1 << n_qubits;
        Ok(Self {
            n_qubits,
            matrix: CMatrix::identity(dim).scale_real(T::one() / T::lit(dim as f64)),
            physical: true,
        })
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    /// Whether the minimum eigenvalue is ≥ -1e-9.
    #[inline]
    pub fn is_physical(&self) -> bool {
        self.physical
    }

    pub fn min_eigenvalue(&self) -> Result<T> {
        Ok(hermitian_eig(&self.matrix)?.min_eigenvalue())
    }

    /// `Tr(ρ O)`.
    pub fn expectation(&self, op: &CMatrix<T>) -> Result<Complex<T>> {
        self.matrix.trace_product(op)
    }

    /// `<ψ|ρ|ψ>`.
    pub fn overlap_with_pure(&self, state: &StateVector<T>) -> Result<T> {
        let rho_psi = self.matrix.mul_vec(&state.amplitudes)?;
        Ok(state
            .amplitudes
            .iter()
            .zip(&rho_psi)
            .fold(Complex::zero(), |acc: Complex<T>, (a, b)| {
                acc + a.conj() * b
            })
            .re)
    }

    /// Reduced state on `keep` (ascending, distinct), tracing out the rest.
    pub fn reduced(&self, keep: &[usize]) -> Result<CMatrix<T>> {
        let n = self.n_qubits;
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep.iter().any(|&q| q >= n) {
            return Err(Error::Validation(
                "kept qubits must be ascending and in range".into(),
            ));
        }
        let traced: Vec<usize> = (0..n).filter(|q| !keep.contains(q)).collect();
        let bit = |idx: usize, q: usize| (idx >> (n - 1 - q)) & 1;
        let sub_index =
            |idx: usize, qs: &[usize]| qs.iter().fold(0, |acc, &q| (acc << 1) | bit(idx, q));
        let dk = 1 << keep.len();
        let mut out = CMatrix::zeros(dk, dk);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if sub_index(i, &traced) == sub_index(j, &traced) {
                    out[(sub_index(i, keep), sub_index(j, keep))] += self.matrix[(i, j)];
                }
            }
        }
        Ok(out)
    }
}

/// Single-qubit readout fidelities: `f_g = P(read 0 | 0)`, `f_e = P(read 1 | 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutFidelity {
    pub f_g: f64,
    pub f_e: f64,
}

impl ReadoutFidelity {
    pub const PERFECT: Self = Self { f_g: 1.0, f_e: 1.0 };

    pub fn new(f_g: f64, f_e: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&f_g) || !(0.0..=1.0).contains(&f_e) {
            return Err(Error::Validation(format!(
                "readout fidelities ({f_g}, {f_e}) outside [0, 1]"
            )));
        }
        Ok(Self { f_g, f_e })
    }

    /// Column-stochastic confusion matrix, `[observed][true]`.
    pub fn confusion(&self) -> [[f64; 2]; 2] {
        [[self.f_g, 1.0 - self.f_e], [1.0 - self.f_g, self.f_e]]
    }
}

/// Measured per-qubit readout fidelities of the five-qubit reference device.
pub const REFERENCE_READOUT: [ReadoutFidelity; 5] = [
    ReadoutFidelity {
        f_g: 0.990,
        f_e: 0.899,
    },
    ReadoutFidelity {
        f_g: 0.985,
        f_e: 0.933,
    },
    ReadoutFidelity {
        f_g: 0.973,
        f_e: 0.922,
    },
    ReadoutFidelity {
        f_g: 0.988,
        f_e: 0.917,
    },
    ReadoutFidelity {
        f_g: 0.985,
        f_e: 0.918,
    },
];

/// Reference readout fidelities for `n` qubits, cycling the five-qubit table.
pub fn reference_readout(n: usize) -> Vec<ReadoutFidelity> {
    (0..n)
        .map(|q| REFERENCE_READOUT[q % REFERENCE_READOUT.len()])
        .collect()
}

/// Preparation and readout noise.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Per-qubit depolarizing probability applied after preparation.
    pub depolarizing_p: f64,
    /// Per-qubit readout fidelities; `None` for perfect readout.
    pub readout: Option<Vec<ReadoutFidelity>>,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn depolarizing(p: f64) -> Result<Self> {
        let m = Self {
            depolarizing_p: p,
            readout: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_readout(mut self, readout: Vec<ReadoutFidelity>) -> Result<Self> {
        self.readout = Some(readout);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.depolarizing_p) {
            return Err(Error::Validation(format!(
                "depolarizing probability {} outside [0, 1]",
                self.depolarizing_p
            )));
        }
        if let Some(r) = &self.readout {
            for f in r {
                ReadoutFidelity::new(f.f_g, f.f_e)?;
            }
        }
        Ok(())
    }

    /// Readout fidelities for `n` qubits (perfect when absent).
    pub fn readout_for(&self, n: usize) -> Result<Vec<ReadoutFidelity>> {
        match &self.readout {
            None => Ok(vec![ReadoutFidelity::PERFECT; n]),
            Some(r) if r.len() >= n => Ok(r[..n].to_vec()),
            Some(r) => Err(Error::Dimension(format!(
                "readout table has {} qubits, need {n}",
                r.len()
            ))),
        }
    }
}

/// `ρ → (1-p) ρ + p (I/2 ⊗ Tr_q ρ)` on qubit `q`.
fn depolarize_qubit<T: Real>(m: &mut CMatrix<T>, n: usize, q: usize, p: T) {
    let dim = 1 << n;
    let mask = 1 << (n - 1 - q);
    let keep = T::one() - p;
    let half_p = p * T::lit(0.5);
    let src = m.clone();
    for i in 0..dim {
        for j in 0..dim {
            let mut v = src[(i, j)] * keep;
            if (i & mask) == (j & mask) {
                let (i0, j0) = (i & !mask, j & !mask);
                v += (src[(i0, j0)] + src[(i0 | mask, j0 | mask)]) * half_p;
            }
            m[(i, j)] = v;
        }
    }
}

/// `|s><s|` followed by the per-qubit depolarizing channel of `noise`.
pub fn densify<T: Real>(state: &StateVector<T>, noise: &NoiseModel) -> Result<DensityMatrix<T>> {
    noise.validate()?;
    let mut rho = DensityMatrix::from_pure(state);
    if noise.depolarizing_p > 0.0 {
        let p = T::lit(noise.depolarizing_p);
        for q in 0..rho.n_qubits {
            depolarize_qubit(&mut rho.matrix, rho.n_qubits, q, p);
        }
    }
    Ok(rho)
}

/// Per-qubit depolarizing probability for which `<ψ|densify(ψ, p)|ψ>^{1/2}`
/// equals `target_fidelity`, by bisection on `[0, 1]`.
pub fn calibrate_depolarizing<T: Real>(
    state: &StateVector<T>,
    target_fidelity: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&target_fidelity) {
        return Err(Error::Validation(format!(
            "target fidelity {target_fidelity} outside [0, 1]"
        )));
    }
    let fidelity = |p: f64| -> Result<f64> {
        let rho = densify(state, &NoiseModel::depolarizing(p)?)?;
        Ok(rho.overlap_with_pure(state)?.max(T::zero()).sqrt().as_f64())
    };
    if fidelity(1.0)? >= target_fidelity {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fidelity(mid)? > target_fidelity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Conjugates qubit `q` of `m` by the 2x2 unitary `u`: `m ← u_q m u_q^dagger`.
fn conjugate_local<T: Real>(m: &mut CMatrix<T>, n: usize, q: usize, u: &[[Complex<T>; 2]; 2]) {
    let dim = 1 << n;
    let mask = 1 << (n - 1 - q);
    // rows
    for i in 0..dim {
        if i & mask != 0 {
            continue;
        }
        for j in 0..dim {
            let a0 = m[(i, j)];
            let a1 = m[(i | mask, j)];
            m[(i, j)] = u[0][0] * a0 + u[0][1] * a1;
            m[(i | mask, j)] = u[1][0] * a0 + u[1][1] * a1;
        }
    }
    // columns
    for j in 0..dim {
        if j & mask != 0 {
            continue;
        }
        for i in 0..dim {
            let a0 = m[(i, j)];
            let a1 = m[(i, j | mask)];
            m[(i, j)] = a0 * u[0][0].conj() + a1 * u[0][1].conj();
            m[(i, j | mask)] = a0 * u[1][0].conj() + a1 * u[1][1].conj();
        }
    }
}

/// Bitstring distribution after rotating each qubit into its measurement basis.
///
/// Bit 0 on qubit `q` is the `+1` eigenstate of `bases[q]`.
pub fn rotated_z_distribution<T: Real>(
    rho: &DensityMatrix<T>,
    bases: &[Basis],
) -> Result<ProbDist<T>> {
    let n = rho.n_qubits;
    if bases.len() != n {
        return Err(Error::Dimension(format!(
            "{} bases for {n} qubits",
            bases.len()
        )));
    }
    let mut m = rho.matrix.clone();
    for (q, b) in bases.iter().enumerate() {
        if *b != Basis::Z {
            conjugate_local(&mut m, n, q, &b.rotation());
        }
    }
    let mut values: Vec<T> = (0..rho.dim())
        .map(|i| m[(i, i)].re.max(T::zero()))
        .collect();
    let total: T = values.iter().copied().sum();
    values.iter_mut().for_each(|v| *v /= total);
    ProbDist::new(n, 2, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn amps(s: &StateVector<f64>) -> Vec<(f64, f64)> {
        s.amplitudes().iter().map(|a| (a.re, a.im)).collect()
    }

    #[test]
    fn x_flips_zero() {
        let mut c = Circuit::new(1).unwrap();
        c.push(Gate::X(0)).unwrap();
        let s = apply_circuit(&c, &StateVector::<f64>::zero(1).unwrap()).unwrap();
        assert_eq!(amps(&s), vec![(0.0, 0.0), (1.0, 0.0)]);
    }

    #[test]
    fn bell_builder_from_h_cz_h() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Gate::H(0)).unwrap().push(Gate::H(1)).unwrap();
        c.push(Gate::Cz(0, 1)).unwrap().push(Gate::H(1)).unwrap();
        let s = apply_circuit(&c, &StateVector::<f64>::zero(2).unwrap()).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in amps(&s).iter().zip([h, 0.0, 0.0, h]) {
            assert_abs_diff_eq!(got.0, want, epsilon = 1e-15);
            assert_abs_diff_eq!(got.1, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn ghz_amplitudes() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = build_ghz::<f64>(3, false).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            let want = if i == 0 || i == 7 { h } else { 0.0 };
            assert_abs_diff_eq!(a.re, want, epsilon = 1e-14);
            assert_abs_diff_eq!(a.im, 0.0, epsilon = 1e-14);
        }
        let s = build_ghz::<f64>(2, true).unwrap();
        let want = [0.0, h, h, 0.0];
        for (a, w) in s.amplitudes().iter().zip(want) {
            assert_abs_diff_eq!(a.re, w, epsilon = 1e-14);
        }
        let s = build_ghz::<f64>(5, false).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            assert_eq!(a.norm() > 1e-12, i == 0 || i == 31);
        }
        assert!(build_ghz::<f64>(1, false).is_err());
        assert!(build_ghz::<f64>(9, false).is_err());
    }

    #[test]
    fn experimental_ghz_is_x_layer_of_standard() {
        for n in 2..=6 {
            let std_state = build_ghz::<f64>(n, false).unwrap();
            let mut layer = Circuit::new(n).unwrap();
            for q in (1..n).step_by(2) {
                layer.push(Gate::X(q)).unwrap();
            }
            let flipped = apply_circuit(&layer, &std_state).unwrap();
            assert_eq!(flipped, build_ghz::<f64>(n, true).unwrap());
        }
    }

    #[test]
    fn invalid_gates_are_rejected() {
        let mut c = Circuit::new(2).unwrap();
        assert!(c.push(Gate::X(2)).is_err());
        assert!(c.push(Gate::Cz(1, 1)).is_err());
        assert!(c.push(Gate::Cz(0, 3)).is_err());
        let c3 = Circuit::new(3).unwrap();
        assert!(apply_circuit(&c3, &StateVector::<f64>::zero(2).unwrap()).is_err());
    }

    #[test]
    fn random_circuit_zero_angles_is_identity() {
        let c = random_circuit_with(4, 1, || 0.0).unwrap();
        let s = apply_circuit(&c, &StateVector::<f64>::zero(4).unwrap()).unwrap();
        assert_eq!(s, StateVector::zero(4).unwrap());
        assert!(random_circuit_with(4, 0, || 0.0).is_err());
    }

    #[test]
    fn random_state_is_deterministic_and_normalized() {
        let a = random_state::<f64>(4, 8, 7).unwrap();
        let b = random_state::<f64>(4, 8, 7).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a.norm_sqr(), 1.0, epsilon = 1e-10);
        let c = random_state::<f64>(4, 8, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_state_is_entangled() {
        // half-chain von Neumann entropy from the reduced density matrix
        let s = random_state::<f64>(4, 8, 7).unwrap();
        let rho = DensityMatrix::from_pure(&s);
        let red = rho.reduced(&[0, 1]).unwrap();
        let eig = hermitian_eig(&red).unwrap();
        let entropy: f64 = eig
            .eigenvalues
            .iter()
            .filter(|&&l| l > 1e-15)
            .map(|&l| -l * l.log2())
            .sum();
        assert!(entropy > 0.5, "entropy {entropy}");
    }

    #[test]
    fn densify_without_noise_is_exact_projector() {
        let s = random_state::<f64>(3, 4, 1).unwrap();
        let rho = densify(&s, &NoiseModel::noiseless()).unwrap();
        assert_eq!(rho.matrix(), &CMatrix::outer(s.amplitudes()));
    }

    #[test]
    fn full_depolarizing_gives_maximally_mixed() {
        let s = StateVector::<f64>::zero(1).unwrap();
        let rho = densify(&s, &NoiseModel::depolarizing(1.0).unwrap()).unwrap();
        assert!(rho.matrix().distance(&CMatrix::diag(&[0.5, 0.5])).unwrap() < 1e-15);
    }

    #[test]
    fn depolarized_bell_fidelity_closed_form() {
        // Local depolarizing with probability p on both qubits of a Bell state:
        // the Bell-state weight is (1-p)^2 + 2p(1-p)/4 + p^2/4.
        let p = 0.05;
        let s = build_ghz::<f64>(2, false).unwrap();
        let rho = densify(&s, &NoiseModel::depolarizing(p).unwrap()).unwrap();
        let weight = (1.0 - p) * (1.0 - p) + 2.0 * p * (1.0 - p) / 4.0 + p * p / 4.0;
        assert_abs_diff_eq!(rho.overlap_with_pure(&s).unwrap(), weight, epsilon = 1e-14);
        assert_abs_diff_eq!(rho.matrix().trace().re, 1.0, epsilon = 1e-12);
        assert!(rho.min_eigenvalue().unwrap() >= -1e-12);
    }

    #[test]
    fn depolarizing_validates_probability() {
        assert!(NoiseModel::depolarizing(1.5).is_err());
        assert!(NoiseModel::depolarizing(-0.1).is_err());
    }

    #[test]
    fn calibration_hits_target() {
        let s = build_ghz::<f64>(4, false).unwrap();
        let p = calibrate_depolarizing(&s, 0.933).unwrap();
        let rho = densify(&s, &NoiseModel::depolarizing(p).unwrap()).unwrap();
        assert_abs_diff_eq!(
            rho.overlap_with_pure(&s).unwrap().sqrt(),
            0.933,
            epsilon = 1e-9
        );
    }

    #[test]
    fn rotated_distributions() {
        let zero = DensityMatrix::from_pure(&StateVector::<f64>::zero(1).unwrap());
        let d = rotated_z_distribution(&zero, &[Basis::Z]).unwrap();
        assert_eq!(d.values(), &[1.0, 0.0]);
        let d = rotated_z_distribution(&zero, &[Basis::X]).unwrap();
        assert_abs_diff_eq!(d.values()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.values()[1], 0.5, epsilon = 1e-15);

        let bell = DensityMatrix::from_pure(&build_ghz::<f64>(2, false).unwrap());
        let d = rotated_z_distribution(&bell, &[Basis::X, Basis::X]).unwrap();
        for (got, want) in d.values().iter().zip([0.5, 0.0, 0.0, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        // <YY> = -1 for (|00>+|11>)/√2: outcomes anti-correlated
        let d = rotated_z_distribution(&bell, &[Basis::Y, Basis::Y]).unwrap();
        for (got, want) in d.values().iter().zip([0.0, 0.5, 0.5, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        assert!(rotated_z_distribution(&bell, &[Basis::X]).is_err());
    }

    #[test]
    fn y_basis_zero_outcome_is_plus_i_state() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let l = StateVector::new(1, vec![Complex::new(h, 0.0), Complex::new(0.0, h)]).unwrap();
        let d = rotated_z_distribution(&DensityMatrix::from_pure(&l), &[Basis::Y]).unwrap();
        assert_abs_diff_eq!(d.values()[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(1, CMatrix::<f64>::diag(&[0.5, 0.4])).is_err());
        assert!(matches!(
            DensityMatrix::new(1, CMatrix::<f64>::diag(&[1.1, -0.1])),
            Err(Error::NotPsd(_))
        ));
        let est = DensityMatrix::from_estimate(1, CMatrix::<f64>::diag(&[1.1, -0.1])).unwrap();
        assert!(!est.is_physical());
        assert!(DensityMatrix::new(2, CMatrix::<f64>::diag(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn confusion_columns_are_stochastic() {
        for f in REFERENCE_READOUT {
            let c = f.confusion();
            assert_abs_diff_eq!(c[0][0] + c[1][0], 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(c[0][1] + c[1][1], 1.0, epsilon = 1e-15);
        }
        assert_eq!(
            REFERENCE_READOUT[0],
            ReadoutFidelity::new(0.990, 0.899).unwrap()
        );
        assert!(ReadoutFidelity::new(1.2, 0.9).is_err());
    }
}
