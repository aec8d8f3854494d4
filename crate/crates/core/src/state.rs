//! Pure states of qubit registers and amplitude encoding.
//!
//! Basis convention: computational basis states are indexed by binary strings
//! with qubit 0 as the most significant bit, so for a k-qubit register the
//! amplitude at index `i` belongs to |b_0 b_1 ... b_{k-1}⟩ where
//! `b_q = (i >> (k - 1 - q)) & 1`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute tolerance for normalization checks.
pub const NORM_TOL: f64 = 1e-12;

/// Norm threshold below which a real vector is rejected by encoding ops.
pub const ZERO_NORM_FLOOR: f64 = 1e-300;

/// Normalized pure state of a `num_qubits`-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct QState {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl QState {
    /// Builds a state from raw amplitudes, normalizing defensively is *not*
    /// done: the caller must supply a vector that is already normalized to
    /// within [`NORM_TOL`].
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch(format!(
                "amplitude vector length {len} is not 2^k for k >= 1"
            )));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-10 {
            return Err(Error::DimensionMismatch(format!(
                "state is not normalized: |psi|^2 = {norm_sq}"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        Ok(Self {
            amplitudes,
            num_qubits,
        })
    }

    /// |0...0⟩ on `num_qubits` qubits.
    pub fn zero(num_qubits: usize) -> Self {
        assert!(num_qubits >= 1, "register needs at least one qubit");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self {
            amplitudes,
            num_qubits,
        }
    }

    /// Computational basis state |index⟩ on `num_qubits` qubits.
    pub fn basis(num_qubits: usize, index: usize) -> Self {
        assert!(index < (1 << num_qubits), "basis index out of range");
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self {
            amplitudes,
            num_qubits,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amplitudes
    }

    /// Builds a state directly from amplitudes without the normalization
    /// check. Internal use only, for states produced by unitary action.
    pub(crate) fn from_raw(amplitudes: Vec<Complex64>, num_qubits: usize) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << num_qubits);
        Self {
            amplitudes,
            num_qubits,
        }
    }

    /// Euclidean norm of the amplitude vector (1 for any valid state).
    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Probability of observing computational basis outcome `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// Marginal probability that `qubit` reads 1 in the computational basis.
    pub fn qubit_one_probability(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::IndexOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        let mask = self.qubit_mask(qubit);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Bitmask selecting `qubit` in a basis index (qubit 0 = most significant).
    pub(crate) fn qubit_mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }
}

/// Encodes a real vector of length 2^k into the amplitudes of a k-qubit state.
///
/// Entry `i` of the normalized vector becomes the amplitude of basis state
/// |i⟩ under the crate's most-significant-qubit-first ordering.
pub fn amplitude_encode(x: &[f64]) -> Result<QState> {
    let len = x.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "input length {len} is not 2^k for k >= 1"
        )));
    }
    let norm = norm(x);
    if norm <= ZERO_NORM_FLOOR {
        return Err(Error::ZeroNorm);
    }
    let amplitudes = x.iter().map(|&v| Complex64::new(v / norm, 0.0)).collect();
    Ok(QState::from_raw(amplitudes, len.trailing_zeros() as usize))
}

/// ⟨a|b⟩, conjugate-linear in the first argument.
pub fn inner_product(a: &QState, b: &QState) -> Result<Complex64> {
    if a.num_qubits() != b.num_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "registers differ: {} vs {} qubits",
            a.num_qubits(),
            b.num_qubits()
        )));
    }
    Ok(a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// cos(x, y) = x·y / (‖x‖ ‖y‖). For real vectors this equals the inner
/// product of their amplitude encodings.
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "vector lengths differ: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let nx = norm(x);
    let ny = norm(y);
    if nx <= ZERO_NORM_FLOOR || ny <= ZERO_NORM_FLOOR {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    Ok(dot / (nx * ny))
}

/// Tensor product a ⊗ b with a's qubits as the more significant block.
pub fn tensor_product(a: &QState, b: &QState) -> QState {
    let dim_b = b.dim();
    let mut amplitudes = Vec::with_capacity(a.dim() * dim_b);
    for &av in a.amplitudes() {
        for &bv in b.amplitudes() {
            amplitudes.push(av * bv);
        }
    }
    QState::from_raw(amplitudes, a.num_qubits() + b.num_qubits())
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
