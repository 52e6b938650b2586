use num_complex::Complex;

use super::{apply_per_site, pair_tensor_to_matrix, PovmSet};
use crate::dist::{outcome_count, ProbDist};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;
use crate::sim::DensityMatrix;

/// `Σ_{a,a'} v(a) (T^-1)^{⊗N}_{a,a'} M_{a'}` for an arbitrary weight vector.
///
/// The inverse overlap is applied one site at a time, so the cost is
/// `O(N K^N)`.
pub fn linear_inversion_matrix<T: Real>(
    values: &[T],
    n: usize,
    povm: &PovmSet<T>,
) -> Result<CMatrix<T>> {
    let map = povm.reconstruction_site_map()?;
    let k = povm.alphabet();
    if values.len() != outcome_count(k, n)? {
        return Err(Error::Dimension(format!(
            "{} values for {k}^{n} outcomes",
            values.len()
        )));
    }
    let v: Vec<Complex<T>> = values.iter().map(|&x| Complex::new(x, T::zero())).collect();
    let pairs = apply_per_site(&v, n, k, 4, &map);
    Ok(pair_tensor_to_matrix(&pairs, n).hermitian_part())
}

/// Linear-inversion estimate of `ρ` from a POVM distribution.
///
/// The result is Hermitian with unit trace but may be indefinite; check
/// [`DensityMatrix::is_physical`].
pub fn reconstruct_linear_inversion<T: Real>(
    dist: &ProbDist<T>,
    povm: &PovmSet<T>,
) -> Result<DensityMatrix<T>> {
    if povm.overlap_inverse().is_none() {
        return Err(Error::NotInvertible(povm.kind()));
    }
    if dist.alphabet() != povm.alphabet() {
        return Err(Error::Dimension(format!(
            "{}-outcome distribution for a {}-outcome POVM",
            dist.alphabet(),
            povm.alphabet()
        )));
    }
    let n = dist.n_qubits();
    DensityMatrix::from_estimate(n, linear_inversion_matrix(dist.values(), n, povm)?)
}
