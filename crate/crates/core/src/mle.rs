//! Least-squares projection of an outcome distribution onto physical states.
//!
//! Minimizes `L(ρ) = ‖A(ρ) − p‖²`, where `A` is the Born map of the POVM,
//! over Hermitian PSD unit-trace `ρ` by monotone accelerated projected
//! gradient descent with a backtracking step.

use serde::{Deserialize, Serialize};

use crate::dist::ProbDist;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, CMatrix};
use crate::povm::{
    born_probabilities, linear_inversion_matrix, povm_distribution, weighted_elements, PovmSet,
};
use crate::scalar::Real;
use crate::sim::DensityMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleConfig {
    pub max_iters: usize,
    /// Relative objective change below which the iteration stops.
    pub tol: f64,
    /// Norm of the gradient mapping below which the iteration stops.
    pub grad_tol: f64,
    /// Gradient step; `None` uses the inverse Lipschitz constant of the gradient.
    pub step: Option<f64>,
    /// Step halvings allowed per iteration when the step is too long.
    pub max_halvings: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tol: 1e-10,
            grad_tol: 1e-9,
            step: None,
            max_halvings: 30,
        }
    }
}

/// Result of [`mle_project`].
#[derive(Clone, Debug)]
pub struct PhysicalFit<T> {
    pub rho: DensityMatrix<T>,
    pub p_mle: ProbDist<T>,
    pub objective: T,
    /// Objective at the starting point.
    pub initial_objective: T,
    /// Objective after every accepted step, starting with the initial point.
    pub history: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex<T: Real>(values: &[T]) -> Vec<T> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (j, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - T::one()) / T::lit((j + 1) as f64);
        if u - t > T::zero() {
            theta = t;
        }
    }
    values.iter().map(|&v| (v - theta).max(T::zero())).collect()
}

/// Nearest (Frobenius) density matrix to the Hermitian part of `m`.
pub fn project_to_density<T: Real>(m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let eig = hermitian_eig(&m.hermitian_part())?;
    let lambda = project_simplex(&eig.eigenvalues);
    let total: T = lambda.iter().copied().sum();
    let lambda: Vec<T> = lambda.into_iter().map(|l| l / total).collect();
    Ok(eig.with_eigenvalues(&lambda).hermitian_part())
}

fn objective<T: Real>(
    rho: &CMatrix<T>,
    n: usize,
    p: &[T],
    povm: &PovmSet<T>,
) -> Result<(T, Vec<T>)> {
    let probs = born_probabilities(rho, n, povm)?;
    let resid: Vec<T> = probs.iter().zip(p).map(|(a, b)| *a - *b).collect();
    Ok((resid.iter().map(|r| *r * *r).sum(), resid))
}

/// Largest eigenvalue of the single-site overlap matrix, to the power `n`.
fn lipschitz<T: Real>(povm: &PovmSet<T>, n: usize) -> Result<T> {
    let eig = hermitian_eig(povm.overlap())?;
    let top = *eig.eigenvalues.last().expect("nonempty overlap");
    Ok(T::lit(2.0) * top.powi(n as i32))
}

/// Physical state whose Born distribution is closest to `p_model` in squared
/// Euclidean distance.
pub fn mle_project<T: Real>(
    p_model: &ProbDist<T>,
    povm: &PovmSet<T>,
    cfg: &MleConfig,
) -> Result<PhysicalFit<T>> {
    if p_model.alphabet() != povm.alphabet() {
        return Err(Error::Dimension(format!(
            "{}-outcome distribution for a {}-outcome POVM",
            p_model.alphabet(),
            povm.alphabet()
        )));
    }
    let n = p_model.n_qubits();
    let p = p_model.values();
    let dim = 1usize << n;

    let start = match linear_inversion_matrix(p, n, povm) {
        Ok(li) => project_to_density(&li)?,
        Err(_) => CMatrix::identity(dim).scale_real(T::one() / T::lit(dim as f64)),
    };
    let (mut obj, _) = objective(&start, n, p, povm)?;
    let initial_objective = obj;
    let mut history = vec![obj];
    let mut lip = match cfg.step {
        Some(s) if s > 0.0 => T::one() / T::lit(s),
        Some(s) => {
            return Err(Error::Validation(format!(
                "MLE step must be positive, got {s}"
            )))
        }
        None => lipschitz(povm, n)?,
    };
    let two = T::lit(2.0);

    // monotone accelerated projected gradient: the extrapolated point `y`
    // takes the step, the iterate `rho` only moves when the objective drops
    let mut rho = start.clone();
    let mut prev: CMatrix<T>;
    let mut y = start;
    let mut momentum = T::one();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        if obj <= T::zero() {
            converged = true;
            break;
        }
        let (fy, resid) = objective(&y, n, p, povm)?;
        let twice: Vec<T> = resid.iter().map(|r| *r * two).collect();
        let grad = weighted_elements(&twice, n, povm)?;
        let mut found = None;
        for _ in 0..=cfg.max_halvings {
            let z = project_to_density(&(&y - &grad.scale_real(T::one() / lip)))?;
            let d = &z - &y;
            let (fz, _) = objective(&z, n, p, povm)?;
            let model = fy + grad.trace_product(&d)?.re + lip / two * d.frobenius_norm().powi(2);
            if fz <= model + T::tol(1e-14) * fy.abs() {
                found = Some((z, fz, d.frobenius_norm()));
                break;
            }
            lip *= two;
        }
        let Some((z, fz, moved)) = found else {
            converged = true;
            break;
        };
        let next_momentum =
            (T::one() + (T::one() + T::lit(4.0) * momentum * momentum).sqrt()) / two;
        let improved = fz < obj;
        let rel = if improved {
            (obj - fz) / obj.max(T::min_positive_value())
        } else {
            T::zero()
        };
        prev = rho.clone();
        if improved {
            rho = z;
            obj = fz;
            history.push(obj);
        }
        if lip * moved < T::lit(cfg.grad_tol) || (improved && rel < T::lit(cfg.tol)) {
            converged = true;
            break;
        }
        if improved {
            let b = (momentum - T::one()) / next_momentum;
            y = &rho + &(&rho - &prev).scale_real(b);
            momentum = next_momentum;
        } else {
            // restart from the best point
            y = rho.clone();
            momentum = T::one();
        }
    }

    let rho = DensityMatrix::new(n, rho)?;
    let p_mle = povm_distribution(&rho, povm)?;
    Ok(PhysicalFit {
        rho,
        p_mle,
        objective: obj,
        initial_objective,
        history,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;
    use crate::povm::{make_povm, PovmKind};
    use crate::sim::{build_ghz, random_state};

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.5, 0.7, -0.2]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
        assert!((p[1] - p[0] - 0.2).abs() < 1e-15);
        assert_eq!(project_simplex(&[0.25, 0.75]), vec![0.25, 0.75]);
    }

    #[test]
    fn physical_input_is_a_fixed_point() {
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let rho = DensityMatrix::from_pure(&random_state(2, 3, 4).unwrap());
        let p = povm_distribution(&rho, &povm).unwrap();
        let fit = mle_project(&p, &povm, &MleConfig::default()).unwrap();
        assert!(fit.objective < 1e-10);
        assert!(fit.rho.matrix().distance(rho.matrix()).unwrap() < 1e-6);
    }

    #[test]
    fn maximally_mixed_input() {
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let mixed = DensityMatrix::<f64>::maximally_mixed(3).unwrap();
        let p = povm_distribution(&mixed, &povm).unwrap();
        let fit = mle_project(&p, &povm, &MleConfig::default()).unwrap();
        assert!(fit.rho.matrix().distance(mixed.matrix()).unwrap() < 1e-8);
    }

    /// Distribution whose linear inversion has eigenvalue `-neg`.
    fn unphysical(n: usize, seed: u64, neg: f64) -> (ProbDist<f64>, CMatrix<f64>) {
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let psi = random_state::<f64>(n, 3, seed).unwrap();
        let other = random_state::<f64>(n, 3, seed + 100).unwrap();
        // ρ = (1 + neg) |ψ><ψ| - neg |φ_⊥><φ_⊥|, with φ_⊥ orthogonal to ψ
        let ov: num_complex::Complex<f64> = psi
            .amplitudes()
            .iter()
            .zip(other.amplitudes())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let mut perp: Vec<_> = other
            .amplitudes()
            .iter()
            .zip(psi.amplitudes())
            .map(|(b, a)| b - a * ov)
            .collect();
        let norm = perp.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        perp.iter_mut().for_each(|z| *z /= norm);
        let m = &CMatrix::outer(psi.amplitudes()).scale_real(1.0 + neg)
            - &CMatrix::outer(&perp).scale_real(neg);
        let p = born_probabilities(&m, n, &povm).unwrap();
        (ProbDist::from_raw(n, 4, p).unwrap(), m)
    }

    #[test]
    fn unphysical_input_becomes_physical() {
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let (p, m) = unphysical(2, 3, 0.02);
        assert!((hermitian_eig(&m).unwrap().min_eigenvalue() + 0.02).abs() < 1e-12);
        let fit = mle_project(&p, &povm, &MleConfig::default()).unwrap();
        assert!(fit.rho.min_eigenvalue().unwrap() >= -1e-9);
        assert!((fit.rho.matrix().trace().re - 1.0).abs() < 1e-9);
        assert!(fit.objective < fit.initial_objective);
        assert!(fit.history.windows(2).all(|w| w[1] <= w[0]));
        for (a, b) in fit
            .p_mle
            .values()
            .iter()
            .zip(povm_distribution(&fit.rho, &povm).unwrap().values())
        {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn idempotent_on_own_output() {
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let (p, _) = unphysical(2, 7, 0.05);
        let first = mle_project(&p, &povm, &MleConfig::default()).unwrap();
        let second = mle_project(&first.p_mle, &povm, &MleConfig::default()).unwrap();
        assert!(second.rho.matrix().distance(first.rho.matrix()).unwrap() < 1e-6);
    }

    #[test]
    fn works_for_pauli6_from_mixed_start() {
        let povm = make_povm::<f64>(PovmKind::Pauli6);
        let rho = DensityMatrix::from_pure(&build_ghz(2, false).unwrap());
        let p = povm_distribution(&rho, &povm).unwrap();
        let fit = mle_project(&p, &povm, &MleConfig::default()).unwrap();
        assert!(fit.objective < 1e-8);
        assert!(fit.rho.matrix().distance(rho.matrix()).unwrap() < 1e-3);
    }

    #[test]
    fn lipschitz_bound_matches_dense_operator() {
        // 2 λ_max(A^T A) for the two-qubit Born map equals 2 λ_max(T)^2
        let povm = make_povm::<f64>(PovmKind::Pauli4);
        let t = povm.overlap();
        let tt = kron(t, t).unwrap();
        let dense = *hermitian_eig(&tt).unwrap().eigenvalues.last().unwrap();
        assert!((lipschitz(&povm, 2).unwrap() - 2.0 * dense).abs() < 1e-12);
    }
}
