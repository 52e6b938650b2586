//! Dense complex matrices, Hermitian eigendecomposition and PSD matrix functions.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    /// Builds a matrix from row-major entries, rejecting wrong lengths and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Size(format!("{rows}x{cols} overflows")))?;
        if data.len() != len {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(
            rows,
            cols,
            data.iter()
                .map(|&x| Complex::new(T::lit(x), T::zero()))
                .collect(),
        )
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex::one()
            } else {
                Complex::zero()
            }
        })
    }

    /// Diagonal matrix with real entries.
    pub fn diag(values: &[T]) -> Self {
        let n = values.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex::new(values[i], T::zero())
            } else {
                Complex::zero()
            }
        })
    }

    /// Rank-one projector `|v><v|`.
    pub fn outer(v: &[Complex<T>]) -> Self {
        let n = v.len();
        Self::from_fn(n, n, |i, j| v[i] * v[j].conj())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols)).fold(Complex::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// `||self - self^dagger||_F`.
    pub fn hermitian_defect(&self) -> T {
        if !self.is_square() {
            return T::infinity();
        }
        let mut acc = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self[(i, j)] - self[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)].conj()).scale(half)
        })
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in row.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                let src = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "cannot apply {}x{} matrix to vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .fold(Complex::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect())
    }

    /// `Tr(self * rhs)` without forming the product.
    pub fn trace_product(&self, rhs: &Self) -> Result<Complex<T>> {
        if self.cols != rhs.rows || self.rows != rhs.cols {
            return Err(Error::Dimension("trace of non-square product".into()));
        }
        let mut acc = Complex::zero();
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * rhs[(k, i)];
            }
        }
        Ok(acc)
    }

    pub fn sub_matrix(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn add_matrix(&self, rhs: &Self) -> Result<Self> {
        self.zip_with(rhs, |a, b| a + b)
    }

    fn zip_with(
        &self,
        rhs: &Self,
        f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Frobenius distance `||self - rhs||_F`.
    pub fn distance(&self, rhs: &Self) -> Result<T> {
        Ok(self.sub_matrix(rhs)?.frobenius_norm())
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;

    /// Panics on dimension mismatch; use [`CMatrix::matmul`] for a checked product.
    fn mul(self, rhs: Self) -> CMatrix<T> {
        self.matmul(rhs).expect("matrix dimensions agree")
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;

    fn add(self, rhs: Self) -> CMatrix<T> {
        self.add_matrix(rhs).expect("matrix dimensions agree")
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;

    fn sub(self, rhs: Self) -> CMatrix<T> {
        self.sub_matrix(rhs).expect("matrix dimensions agree")
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<CMatrix<T>> {
    let rows = a
        .rows
        .checked_mul(b.rows)
        .ok_or_else(|| Error::Size("kron row count overflows".into()))?;
    let cols = a
        .cols
        .checked_mul(b.cols)
        .ok_or_else(|| Error::Size("kron column count overflows".into()))?;
    rows.checked_mul(cols)
        .ok_or_else(|| Error::Size("kron entry count overflows".into()))?;
    Ok(CMatrix::from_fn(rows, cols, |i, j| {
        a[(i / b.rows, j / b.cols)] * b[(i % b.rows, j % b.cols)]
    }))
}

/// Kronecker product of a sequence of factors, left to right.
pub fn kron_all<'a, T: Real>(
    factors: impl IntoIterator<Item = &'a CMatrix<T>>,
) -> Result<CMatrix<T>> {
    let mut acc = CMatrix::identity(1);
    for f in factors {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

/// Eigenvalues (ascending) and orthonormal eigenvectors (as columns) of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct EigDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: CMatrix<T>,
}

impl<T: Real> EigDecomposition<T> {
    /// Rebuilds `V f(Λ) V^dagger`.
    pub fn map_eigenvalues(&self, f: impl Fn(T) -> T) -> CMatrix<T> {
        let mapped: Vec<T> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        self.with_eigenvalues(&mapped)
    }

    /// Rebuilds `V diag(values) V^dagger` with replacement eigenvalues.
    pub fn with_eigenvalues(&self, mapped: &[T]) -> CMatrix<T> {
        let n = self.eigenvalues.len();
        assert_eq!(mapped.len(), n, "one value per eigenvector");
        let v = &self.eigenvectors;
        let mut out = CMatrix::zeros(n, n);
        for (k, &w) in mapped.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * w;
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues.first().copied().unwrap_or_else(T::zero)
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Each rotation first removes the phase of the pivot `a_pq`, then applies the
/// real symmetric Jacobi rotation that annihilates it. Sweeps stop once the
/// off-diagonal Frobenius norm drops below `1e-12 * ||a||_F`.
pub fn hermitian_eig<T: Real>(a: &CMatrix<T>) -> Result<EigDecomposition<T>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition of non-square {}x{} matrix",
            a.rows, a.cols
        )));
    }
    let n = a.rows;
    let norm = a.frobenius_norm();
    let defect = a.hermitian_defect();
    if defect > T::tol(1e-8) * norm.max(T::one()) {
        return Err(Error::Validation(format!(
            "matrix is not Hermitian (||A - A^dagger||_F = {:e})",
            defect.as_f64()
        )));
    }

    let mut m = a.hermitian_part();
    let mut v = CMatrix::<T>::identity(n);
    let threshold = T::tol(1e-12) * norm;
    let tiny = T::min_positive_value();

    let off_norm = |m: &CMatrix<T>| {
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    acc += m[(i, j)].norm_sqr();
                }
            }
        }
        acc.sqrt()
    };

    let mut converged = n <= 1 || off_norm(&m) <= threshold;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let mag = apq.norm();
                if mag <= tiny {
                    continue;
                }
                let phase = apq / mag; // e^{i phi}
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (mag + mag);
                let t = {
                    let t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                let cz = Complex::new(c, T::zero());
                let sz = Complex::new(s, T::zero());
                let conj_phase = phase.conj();

                // columns: A <- A J, with J = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                for k in 0..n {
                    let akp = m[(k, p)];
                    let akq = m[(k, q)];
                    m[(k, p)] = akp * cz - akq * conj_phase * sz;
                    m[(k, q)] = akp * sz + akq * conj_phase * cz;
                }
                // rows: A <- J^dagger A
                for k in 0..n {
                    let apk = m[(p, k)];
                    let aqk = m[(q, k)];
                    m[(p, k)] = apk * cz - aqk * phase * sz;
                    m[(q, k)] = apk * sz + aqk * phase * cz;
                }
                m[(p, q)] = Complex::zero();
                m[(q, p)] = Complex::zero();
                m[(p, p)] = Complex::new(m[(p, p)].re, T::zero());
                m[(q, q)] = Complex::new(m[(q, q)].re, T::zero());

                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cz - vkq * conj_phase * sz;
                    v[(k, q)] = vkp * sz + vkq * conj_phase * cz;
                }
            }
        }
        converged = off_norm(&m) <= threshold;
    }
    if !converged {
        return Err(Error::Numeric(format!(
            "Jacobi eigensolver did not converge after {JACOBI_MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[(i, i)]
            .re
            .partial_cmp(&m[(j, j)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&i| m[(i, i)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues below this are rejected as genuinely indefinite.
pub const PSD_REJECT_TOL: f64 = 1e-6;

/// Principal square root of a Hermitian PSD matrix; small negative eigenvalues are clipped to 0.
pub fn psd_sqrt<T: Real>(a: &CMatrix<T>) -> Result<CMatrix<T>> {
    let eig = hermitian_eig(a)?;
    let min = eig.min_eigenvalue();
    if min < -T::lit(PSD_REJECT_TOL) {
        return Err(Error::NotPsd(min.as_f64()));
    }
    Ok(eig.map_eigenvalues(|l| l.max(T::zero()).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn sigma_x() -> CMatrix<f64> {
        CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub(crate) fn random_hermitian(n: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        g.hermitian_part()
    }

    fn random_psd(n: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let p = &g * &g.adjoint();
        let tr = p.trace().re;
        p.scale_real(1.0 / tr)
    }

    /// Determinant by Gaussian elimination with partial pivoting (test oracle).
    fn det(a: &CMatrix<f64>) -> Complex<f64> {
        let n = a.rows();
        let mut m = a.clone();
        let mut d = c(1.0, 0.0);
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| m[(i, col)].norm().partial_cmp(&m[(j, col)].norm()).unwrap())
                .unwrap();
            if m[(piv, col)].norm() == 0.0 {
                return c(0.0, 0.0);
            }
            if piv != col {
                for k in 0..n {
                    let tmp = m[(col, k)];
                    m[(col, k)] = m[(piv, k)];
                    m[(piv, k)] = tmp;
                }
                d = -d;
            }
            d *= m[(col, col)];
            for r in col + 1..n {
                let f = m[(r, col)] / m[(col, col)];
                for k in col..n {
                    let v = m[(col, k)];
                    m[(r, k)] -= f * v;
                }
            }
        }
        d
    }

    #[test]
    fn construction_validates() {
        assert!(CMatrix::<f64>::new(2, 2, vec![c(0.0, 0.0); 3]).is_err());
        assert!(CMatrix::<f64>::new(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
        assert!(CMatrix::<f64>::new(1, 1, vec![c(0.0, f64::INFINITY)]).is_err());
    }

    #[test]
    fn kron_identity_and_pauli() {
        let i2 = CMatrix::<f64>::identity(2);
        assert_eq!(kron(&i2, &i2).unwrap(), CMatrix::identity(4));
        let xx = kron(&sigma_x(), &sigma_x()).unwrap();
        let expected = CMatrix::from_fn(
            4,
            4,
            |i, j| if i + j == 3 { c(1.0, 0.0) } else { c(0.0, 0.0) },
        );
        assert_eq!(xx, expected);
    }

    #[test]
    fn kron_is_associative_on_integers() {
        let a = CMatrix::<f64>::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = CMatrix::<f64>::from_real(2, 3, &[0.0, -1.0, 5.0, 2.0, 7.0, 1.0]).unwrap();
        let cm = CMatrix::<f64>::new(1, 2, vec![c(1.0, 2.0), c(-3.0, 1.0)]).unwrap();
        let left = kron(&kron(&a, &b).unwrap(), &cm).unwrap();
        let right = kron(&a, &kron(&b, &cm).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn kron_dimension_overflow_is_reported() {
        let a = CMatrix::<f64> {
            rows: usize::MAX / 2,
            cols: 0,
            data: vec![],
        };
        let b = CMatrix::<f64> {
            rows: 4,
            cols: 0,
            data: vec![],
        };
        assert!(matches!(kron(&a, &b), Err(Error::Size(_))));
    }

    #[test]
    fn eig_of_identity_and_sigma_x() {
        let e = hermitian_eig(&CMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0; 4]);
        let e = hermitian_eig(&sigma_x()).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian_and_non_square() {
        let a = CMatrix::<f64>::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eig(&a), Err(Error::Validation(_))));
        let b = CMatrix::<f64>::zeros(2, 3);
        assert!(matches!(hermitian_eig(&b), Err(Error::Dimension(_))));
    }

    #[test]
    fn eig_residuals_on_random_hermitian() {
        for seed in 0..10 {
            let a = random_hermitian(8, seed);
            let e = hermitian_eig(&a).unwrap();
            let norm = a.frobenius_norm();
            for (k, &lambda) in e.eigenvalues.iter().enumerate() {
                let v = e.eigenvectors.column(k);
                let av = a.mul_vec(&v).unwrap();
                let res: f64 = av
                    .iter()
                    .zip(&v)
                    .map(|(x, y)| (x - y * lambda).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-9 * norm, "seed {seed}: residual {res}");
            }
            let vhv = &e.eigenvectors.adjoint() * &e.eigenvectors;
            assert!(vhv.distance(&CMatrix::identity(8)).unwrap() < 1e-9);
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_trace_and_determinant() {
        for seed in 20..25 {
            let a = random_hermitian(6, seed);
            let e = hermitian_eig(&a).unwrap();
            let norm = a.frobenius_norm();
            let sum: f64 = e.eigenvalues.iter().sum();
            assert!((sum - a.trace().re).abs() < 1e-9 * norm);
            let prod: f64 = e.eigenvalues.iter().product();
            let d = det(&a);
            assert!(d.im.abs() < 1e-9 * d.re.abs().max(1e-3));
            assert!(
                (prod - d.re).abs() <= 1e-6 * d.re.abs(),
                "{prod} vs {}",
                d.re
            );
        }
    }

    #[test]
    fn eig_is_deterministic() {
        let a = random_hermitian(5, 99);
        let e1 = hermitian_eig(&a).unwrap();
        let e2 = hermitian_eig(&a).unwrap();
        assert_eq!(e1.eigenvalues, e2.eigenvalues);
        assert_eq!(e1.eigenvectors, e2.eigenvectors);
    }

    #[test]
    fn eig_works_in_single_precision() {
        let a = CMatrix::<f32>::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = hermitian_eig(&a).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-5);
        assert!((e.eigenvalues[1] - 3.0).abs() < 1e-5);
    }

    #[test]
    fn sqrt_of_diagonal_and_projector() {
        let s = psd_sqrt(&CMatrix::<f64>::diag(&[4.0, 9.0])).unwrap();
        assert!(s.distance(&CMatrix::diag(&[2.0, 3.0])).unwrap() < 1e-12);

        let psi = vec![c(0.6, 0.0), c(0.0, 0.8)];
        let proj = CMatrix::outer(&psi);
        let s = psd_sqrt(&proj).unwrap();
        assert!(
            s.distance(&proj).unwrap() < 1e-7,
            "{}",
            s.distance(&proj).unwrap()
        );
    }

    #[test]
    fn sqrt_squares_back() {
        for seed in 0..5 {
            let rho = random_psd(6, seed);
            let s = psd_sqrt(&rho).unwrap();
            assert!(s.hermitian_defect() < 1e-12);
            let sq = &s * &s;
            assert!(sq.distance(&rho).unwrap() < 1e-8 * rho.frobenius_norm());
            let again = psd_sqrt(&sq).unwrap();
            assert!(again.distance(&s).unwrap() < 1e-7);
        }
    }

    #[test]
    fn sqrt_clips_tiny_negatives_and_rejects_large_ones() {
        let s = psd_sqrt(&CMatrix::<f64>::diag(&[1.0, -1e-10])).unwrap();
        assert_eq!(s[(1, 1)], c(0.0, 0.0));
        assert!(matches!(
            psd_sqrt(&CMatrix::<f64>::diag(&[1.0, -1e-3])),
            Err(Error::NotPsd(_))
        ));
    }
}
