//! Complex state vectors on the computational basis.

use num_complex::Complex64;

/// Normalized complex amplitude vector over `2^L` basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
}

/// Norm tolerance accepted by [`QuantumState::from_normalized`].
pub const NORM_TOLERANCE: f64 = 1e-9;

impl QuantumState {
    /// Rescales `amplitudes` to unit norm. Returns `None` for the zero vector.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Option<Self> {
        let norm = vector_norm(&amplitudes);
        if !(norm > 0.0 && norm.is_finite()) {
            return None;
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Some(QuantumState { amplitudes })
    }

    /// Wraps amplitudes that are already normalized within [`NORM_TOLERANCE`].
    pub fn from_normalized(amplitudes: Vec<Complex64>) -> Option<Self> {
        ((vector_norm(&amplitudes) - 1.0).abs() <= NORM_TOLERANCE)
            .then_some(QuantumState { amplitudes })
    }

    pub(crate) fn from_raw(amplitudes: Vec<Complex64>) -> Self {
        QuantumState { amplitudes }
    }

    /// The basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index < dim, "basis index {index} outside dimension {dim}");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        QuantumState { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        vector_norm(&self.amplitudes)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuantumState) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// Multiplies by a global phase so that the largest-magnitude amplitude
    /// (first one on ties) is real and positive.
    pub fn fix_phase(&mut self) {
        let max = self.amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return;
        }
        let pivot = self
            .amplitudes
            .iter()
            .find(|a| a.norm() >= max * (1.0 - 1e-10))
            .copied()
            .unwrap();
        let rot = pivot.conj() / pivot.norm();
        self.amplitudes.iter_mut().for_each(|a| *a *= rot);
    }

    /// Largest `|ψ_i − φ_i|`.
    pub fn max_difference(&self, other: &QuantumState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn vector_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
