//! Probability distributions over fixed-length outcome strings.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Distribution over all `K^N` outcome strings of `N` sites with alphabet size `K`.
///
/// Outcome strings are indexed as base-`K` numbers with site 0 as the most
/// significant digit.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist<T> {
    n_qubits: usize,
    alphabet: usize,
    values: Vec<T>,
}

/// Tolerance on `|sum - 1|` accepted by [`ProbDist::new`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// `K^N`, or a size error on overflow.
pub fn outcome_count(alphabet: usize, n_qubits: usize) -> Result<usize> {
    u32::try_from(n_qubits)
        .ok()
        .and_then(|n| alphabet.checked_pow(n))
        .ok_or_else(|| Error::Size(format!("{alphabet}^{n_qubits} outcomes overflow")))
}

impl<T: Real> ProbDist<T> {
    /// Validated constructor: length `K^N`, finite nonnegative entries summing to 1.
    pub fn new(n_qubits: usize, alphabet: usize, values: Vec<T>) -> Result<Self> {
        let d = Self::from_raw(n_qubits, alphabet, values)?;
        if d.values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Validation(
                "distribution has negative or non-finite entries".into(),
            ));
        }
        let total: T = d.values.iter().copied().sum();
        if (total - T::one()).abs() > T::tol(NORMALIZATION_TOL) {
            return Err(Error::Validation(format!(
                "distribution sums to {} instead of 1",
                total.as_f64()
            )));
        }
        Ok(d)
    }

    /// Normalizes nonnegative weights (e.g. counts) into a distribution.
    pub fn from_weights(n_qubits: usize, alphabet: usize, weights: Vec<T>) -> Result<Self> {
        let mut d = Self::from_raw(n_qubits, alphabet, weights)?;
        if d.values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Validation(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: T = d.values.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::Validation("weights sum to zero".into()));
        }
        d.values.iter_mut().for_each(|v| *v /= total);
        Ok(d)
    }

    /// Shape-checked constructor that does not enforce normalization or sign.
    ///
    /// Used for intermediate quantities such as the Born-rule image of an
    /// unphysical matrix.
    pub fn from_raw(n_qubits: usize, alphabet: usize, values: Vec<T>) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::Validation("alphabet size must be positive".into()));
        }
        let len = outcome_count(alphabet, n_qubits)?;
        if values.len() != len {
            return Err(Error::Dimension(format!(
                "{} values for {alphabet}^{n_qubits} outcomes",
                values.len()
            )));
        }
        Ok(Self {
            n_qubits,
            alphabet,
            values,
        })
    }

    pub fn uniform(n_qubits: usize, alphabet: usize) -> Result<Self> {
        let len = outcome_count(alphabet, n_qubits)?;
        Self::from_raw(n_qubits, alphabet, vec![T::one() / T::lit(len as f64); len])
    }

    #[inline]
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    #[inline]
    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> T {
        self.values.iter().copied().sum()
    }

    /// Flat index of an outcome string.
    pub fn index_of(&self, outcome: &[u8]) -> Result<usize> {
        if outcome.len() != self.n_qubits {
            return Err(Error::Dimension(format!(
                "outcome of length {} for {} sites",
                outcome.len(),
                self.n_qubits
            )));
        }
        outcome.iter().try_fold(0usize, |acc, &s| {
            if (s as usize) < self.alphabet {
                Ok(acc * self.alphabet + s as usize)
            } else {
                Err(Error::Validation(format!(
                    "symbol {s} outside alphabet of size {}",
                    self.alphabet
                )))
            }
        })
    }

    /// Digits of flat index `idx`, site 0 first.
    pub fn outcome_of(&self, idx: usize) -> Vec<u8> {
        let mut digits = vec![0u8; self.n_qubits];
        let mut rest = idx;
        for d in digits.iter_mut().rev() {
            *d = (rest % self.alphabet) as u8;
            rest /= self.alphabet;
        }
        digits
    }

    pub fn prob(&self, outcome: &[u8]) -> Result<T> {
        Ok(self.values[self.index_of(outcome)?])
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.n_qubits != other.n_qubits || self.alphabet != other.alphabet {
            return Err(Error::Dimension(format!(
                "distribution shapes differ: {}^{} vs {}^{}",
                self.alphabet, self.n_qubits, other.alphabet, other.n_qubits
            )));
        }
        Ok(())
    }

    /// Total-variation distance `½ Σ |p - q|`.
    pub fn tv_distance(&self, other: &Self) -> Result<T> {
        self.check_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<T>()
            * T::lit(0.5))
    }

    /// Squared Euclidean distance `Σ (p - q)^2`.
    pub fn squared_distance(&self, other: &Self) -> Result<T> {
        self.check_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum())
    }

    /// Marginal over the listed sites (kept in the given order).
    pub fn marginal(&self, keep: &[usize]) -> Result<Self> {
        if keep.iter().any(|&q| q >= self.n_qubits) {
            return Err(Error::Validation(format!(
                "marginal site out of range for {} sites",
                self.n_qubits
            )));
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != keep.len() {
            return Err(Error::Validation("marginal sites must be distinct".into()));
        }
        let k = self.alphabet;
        let len = outcome_count(k, keep.len())?;
        let mut out = vec![T::zero(); len];
        for (idx, &v) in self.values.iter().enumerate() {
            let digits = self.outcome_of(idx);
            let j = keep
                .iter()
                .fold(0usize, |acc, &q| acc * k + digits[q] as usize);
            out[j] += v;
        }
        Self::from_raw(keep.len(), k, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ProbDist::<f64>::new(1, 4, vec![0.5, 0.5, 0.0]).is_err());
        assert!(ProbDist::<f64>::new(1, 2, vec![1.5, -0.5]).is_err());
        assert!(ProbDist::<f64>::new(1, 2, vec![0.5, 0.4]).is_err());
        assert!(ProbDist::<f64>::new(1, 2, vec![0.5, 0.5]).is_ok());
        assert!(ProbDist::<f64>::from_weights(1, 2, vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn indexing_round_trip() {
        let d = ProbDist::<f64>::uniform(3, 4).unwrap();
        for idx in 0..d.len() {
            assert_eq!(d.index_of(&d.outcome_of(idx)).unwrap(), idx);
        }
        assert_eq!(d.index_of(&[1, 0, 3]).unwrap(), 16 + 3);
        assert!(d.index_of(&[4, 0, 0]).is_err());
    }

    #[test]
    fn marginal_sums_out_sites() {
        // p(a, b) with a in {0,1}, b in {0,1}
        let d = ProbDist::<f64>::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(d.marginal(&[0]).unwrap().values(), &[0.1 + 0.2, 0.3 + 0.4]);
        let m1 = d.marginal(&[1]).unwrap();
        assert!((m1.values()[0] - 0.4).abs() < 1e-15 && (m1.values()[1] - 0.6).abs() < 1e-15);
        assert_eq!(d.marginal(&[1, 0]).unwrap().values(), &[0.1, 0.3, 0.2, 0.4]);
        assert!(d.marginal(&[0, 0]).is_err());
    }

    #[test]
    fn tv_distance_basic() {
        let p = ProbDist::<f64>::new(1, 2, vec![1.0, 0.0]).unwrap();
        let q = ProbDist::<f64>::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(p.tv_distance(&q).unwrap(), 0.5);
        let r = ProbDist::<f64>::uniform(1, 4).unwrap();
        assert!(p.tv_distance(&r).is_err());
    }
}
