//! Fidelities between distributions and states, and two-body Pauli correlations.

use crate::dist::ProbDist;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, kron, psd_sqrt, PSD_REJECT_TOL};
use crate::povm::{linear_inversion_matrix, PovmSet};
use crate::scalar::Real;
use crate::sim::{Basis, DensityMatrix};

/// Bhattacharyya coefficient `Σ_a sqrt(p(a) q(a))`, clamped to `[0, 1]`.
pub fn classical_fidelity<T: Real>(p: &ProbDist<T>, q: &ProbDist<T>) -> Result<T> {
    if p.n_qubits() != q.n_qubits() || p.alphabet() != q.alphabet() {
        return Err(Error::Dimension(format!(
            "distribution shapes differ: {}^{} vs {}^{}",
            p.alphabet(),
            p.n_qubits(),
            q.alphabet(),
            q.n_qubits()
        )));
    }
    let f: T = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(&a, &b)| (a.max(T::zero()) * b.max(T::zero())).sqrt())
        .sum();
    Ok(f.min(T::one()))
}

/// Uhlmann fidelity `Tr sqrt(sqrt(a) b sqrt(a))`, clamped to `[0, 1]`.
pub fn quantum_fidelity<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::Dimension(format!(
            "{}-qubit and {}-qubit states",
            a.n_qubits(),
            b.n_qubits()
        )));
    }
    let min_b = hermitian_eig(b.matrix())?.min_eigenvalue();
    if min_b < -T::lit(PSD_REJECT_TOL) {
        return Err(Error::NotPsd(min_b.as_f64()));
    }
    let sa = psd_sqrt(a.matrix())?;
    let inner = (&(&sa * b.matrix()) * &sa).hermitian_part();
    let f = psd_sqrt(&inner)?.trace().re;
    Ok(f.max(T::zero()).min(T::one()))
}

fn check_pair(n: usize, j: usize, k: usize) -> Result<()> {
    if j >= n || k >= n {
        return Err(Error::Validation(format!(
            "qubit index out of range for {n} qubits"
        )));
    }
    if j == k {
        return Err(Error::Validation(
            "correlation needs two distinct qubits".into(),
        ));
    }
    Ok(())
}

/// `Tr(ρ_jk σ ⊗ σ)` for a two-qubit reduced matrix in `(min, max)` order.
fn two_body<T: Real>(reduced: &crate::linalg::CMatrix<T>, axis: Basis) -> Result<T> {
    let s = axis.pauli::<T>();
    Ok(reduced.trace_product(&kron(&s, &s)?)?.re)
}

/// `<σ_j σ_k>` with `σ` the Pauli operator of `axis`.
pub fn pauli_correlation<T: Real>(
    rho: &DensityMatrix<T>,
    j: usize,
    k: usize,
    axis: Basis,
) -> Result<T> {
    check_pair(rho.n_qubits(), j, k)?;
    let reduced = rho.reduced(&[j.min(k), j.max(k)])?;
    two_body(&reduced, axis)
}

/// `<σ_j σ_k>` read off an outcome distribution: the two-site marginal is
/// inverted to a two-qubit matrix, with no positivity constraint.
pub fn pauli_correlation_from_distribution<T: Real>(
    p: &ProbDist<T>,
    povm: &PovmSet<T>,
    j: usize,
    k: usize,
    axis: Basis,
) -> Result<T> {
    check_pair(p.n_qubits(), j, k)?;
    if p.alphabet() != povm.alphabet() {
        return Err(Error::Dimension(format!(
            "{}-outcome distribution for a {}-outcome POVM",
            p.alphabet(),
            povm.alphabet()
        )));
    }
    let marginal = p.marginal(&[j.min(k), j.max(k)])?;
    let reduced = linear_inversion_matrix(marginal.values(), 2, povm)?;
    two_body(&reduced, axis)
}

/// Correlation for every pair `j < k`, in lexicographic order.
pub fn pairwise_correlations<T: Real>(
    rho: &DensityMatrix<T>,
    axis: Basis,
) -> Result<Vec<((usize, usize), T)>> {
    let n = rho.n_qubits();
    let mut out = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            out.push(((j, k), pauli_correlation(rho, j, k, axis)?));
        }
    }
    Ok(out)
}

/// [`pairwise_correlations`] computed from an outcome distribution.
pub fn pairwise_correlations_from_distribution<T: Real>(
    p: &ProbDist<T>,
    povm: &PovmSet<T>,
    axis: Basis,
) -> Result<Vec<((usize, usize), T)>> {
    let n = p.n_qubits();
    let mut out = Vec::new();
    for j in 0..n {
        for k in j + 1..n {
            out.push((
                (j, k),
                pauli_correlation_from_distribution(p, povm, j, k, axis)?,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::povm::{make_povm, povm_distribution, PovmKind};
    use crate::sim::{build_ghz, densify, random_state, NoiseModel, StateVector};
    use approx::assert_abs_diff_eq;

    #[test]
    fn classical_fidelity_cases() {
        let p = ProbDist::<f64>::new(1, 2, vec![1.0, 0.0]).unwrap();
        let q = ProbDist::<f64>::new(1, 2, vec![0.5, 0.5]).unwrap();
        let r = ProbDist::<f64>::new(1, 2, vec![0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(
            classical_fidelity(&p, &q).unwrap(),
            0.5f64.sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(classical_fidelity(&p, &r).unwrap(), 0.0);
        assert_abs_diff_eq!(classical_fidelity(&q, &q).unwrap(), 1.0, epsilon = 1e-12);
        assert!(classical_fidelity(&p, &ProbDist::uniform(1, 4).unwrap()).is_err());
    }

    #[test]
    fn quantum_fidelity_cases() {
        let rho = densify(
            &random_state::<f64>(2, 3, 1).unwrap(),
            &NoiseModel::depolarizing(0.1).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(quantum_fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-9);

        let zero = DensityMatrix::from_pure(&StateVector::<f64>::zero(1).unwrap());
        let one = DensityMatrix::<f64>::new(1, CMatrix::diag(&[0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(quantum_fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-9);

        let psi = random_state::<f64>(2, 2, 5).unwrap();
        let pure = DensityMatrix::from_pure(&psi);
        let direct = rho.overlap_with_pure(&psi).unwrap().sqrt();
        assert_abs_diff_eq!(
            quantum_fidelity(&pure, &rho).unwrap(),
            direct,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            quantum_fidelity(&rho, &pure).unwrap(),
            direct,
            epsilon = 1e-8
        );
    }

    #[test]
    fn depolarized_bell_closed_form() {
        let bell = build_ghz::<f64>(2, false).unwrap();
        let p = 0.05;
        let rho = densify(&bell, &NoiseModel::depolarizing(p).unwrap()).unwrap();
        // each qubit keeps the state w.p. 1-p, and a depolarized qubit overlaps w.p. 1/4 per Bell component
        let overlap = (1.0 - p) * (1.0 - p) + 2.0 * p * (1.0 - p) / 4.0 + p * p / 4.0;
        let f = quantum_fidelity(&DensityMatrix::from_pure(&bell), &rho).unwrap();
        assert_abs_diff_eq!(f, overlap.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn correlations_of_textbook_states() {
        let bell = DensityMatrix::from_pure(&build_ghz::<f64>(2, false).unwrap());
        assert_abs_diff_eq!(
            pauli_correlation(&bell, 0, 1, Basis::Z).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            pauli_correlation(&bell, 0, 1, Basis::X).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let flipped = DensityMatrix::from_pure(&build_ghz::<f64>(2, true).unwrap());
        assert_abs_diff_eq!(
            pauli_correlation(&flipped, 1, 0, Basis::Z).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
        let ghz = DensityMatrix::from_pure(&build_ghz::<f64>(4, false).unwrap());
        for ((_, _), zz) in pairwise_correlations(&ghz, Basis::Z).unwrap() {
            assert_abs_diff_eq!(zz, 1.0, epsilon = 1e-12);
        }
        for ((_, _), xx) in pairwise_correlations(&ghz, Basis::X).unwrap() {
            assert_abs_diff_eq!(xx, 0.0, epsilon = 1e-12);
        }
        assert!(pauli_correlation(&ghz, 1, 1, Basis::Z).is_err());
        assert!(pauli_correlation(&ghz, 0, 4, Basis::Z).is_err());
    }

    #[test]
    fn distribution_and_state_paths_agree() {
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let rho = densify(
            &random_state::<f64>(3, 4, 9).unwrap(),
            &NoiseModel::depolarizing(0.03).unwrap(),
        )
        .unwrap();
        let p = povm_distribution(&rho, &povm).unwrap();
        for axis in Basis::ALL {
            let a = pairwise_correlations(&rho, axis).unwrap();
            let b = pairwise_correlations_from_distribution(&p, &povm, axis).unwrap();
            for ((pa, va), (pb, vb)) in a.iter().zip(&b) {
                assert_eq!(pa, pb);
                assert_abs_diff_eq!(*va, *vb, epsilon = 1e-9);
            }
        }
    }
}
