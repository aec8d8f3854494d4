//! Density matrices for mixed and reduced states of entangled inputs.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::state::QState;

/// Absolute tolerance for the Hermiticity and unit-trace checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues of a valid density matrix may dip this far below zero.
pub const EIGENVALUE_FLOOR: f64 = -1e-10;

/// Hermitian, positive semidefinite, trace-1 operator on a qubit register,
/// stored dense in row-major order under the same most-significant-qubit-first
/// basis convention as [`QState`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Vec<Complex64>,
    num_qubits: usize,
}

impl DensityMatrix {
    /// Validates and wraps a dense matrix. The positivity check runs a full
    /// eigendecomposition, so construction from raw entries is O(dim^3);
    /// intended for desk-scale registers.
    pub fn new(entries: Vec<Complex64>, num_qubits: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if entries.len() != dim * dim {
            return Err(Error::InvalidDensityMatrix(format!(
                "expected {}x{} entries for {} qubits, got {}",
                dim,
                dim,
                num_qubits,
                entries.len()
            )));
        }
        let dm = Self {
            entries,
            num_qubits,
        };
        dm.validate()?;
        Ok(dm)
    }

    /// ρ = |ψ⟩⟨ψ|.
    pub fn from_pure(state: &QState) -> Self {
        let amps = state.amplitudes();
        let dim = amps.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(amps[i] * amps[j].conj());
            }
        }
        Self {
            entries,
            num_qubits: state.num_qubits(),
        }
    }

    /// ρ = I / 2^k.
    pub fn maximally_mixed(num_qubits: usize) -> Self {
        assert!(num_qubits >= 1);
        let dim = 1usize << num_qubits;
        let p = 1.0 / dim as f64;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(p, 0.0);
        }
        Self {
            entries,
            num_qubits,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.entries[i * dim + i]).sum()
    }

    /// ⟨w|ρ|w⟩; real and in [0, 1] for a valid ρ and normalized w.
    pub fn expectation(&self, w: &QState) -> Result<f64> {
        if w.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch(format!(
                "state has {} qubits, density matrix has {}",
                w.num_qubits(),
                self.num_qubits
            )));
        }
        let dim = self.dim();
        let amps = w.amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                acc += amps[i].conj() * self.entries[i * dim + j] * amps[j];
            }
        }
        Ok(acc.re)
    }

    /// Checks Hermiticity, unit trace, and positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        for i in 0..dim {
            for j in i..dim {
                let a = self.entries[i * dim + j];
                let b = self.entries[j * dim + i].conj();
                if (a - b).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidDensityMatrix(format!(
                        "not Hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace is {tr}, not 1")));
        }
        let min = self.min_eigenvalue();
        if min < EIGENVALUE_FLOOR {
            return Err(Error::InvalidDensityMatrix(format!(
                "smallest eigenvalue {min} below floor {EIGENVALUE_FLOOR}"
            )));
        }
        Ok(())
    }

    /// Smallest eigenvalue, via Jacobi iteration on the real symmetric
    /// embedding [[Re ρ, -Im ρ], [Im ρ, Re ρ]].
    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// All eigenvalues (each appears once; the embedding doubles them and the
    /// duplicates are discarded by taking every other sorted value).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let dim = self.dim();
        let n = 2 * dim;
        let mut m = vec![0.0; n * n];
        for i in 0..dim {
            for j in 0..dim {
                let e = self.entries[i * dim + j];
                m[i * n + j] = e.re;
                m[i * n + (dim + j)] = -e.im;
                m[(dim + i) * n + j] = e.im;
                m[(dim + i) * n + (dim + j)] = e.re;
            }
        }
        let mut eig = symmetric_eigenvalues(&mut m, n);
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // eigenvalues come in pairs; keep one of each
        eig.into_iter().step_by(2).collect()
    }

    /// Reduced density matrix over `keep`, tracing out every other qubit.
    /// Kept qubits retain their relative order in the reduced register.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let (kept_part, traced_part, kept_len) = trace_index_tables(self.num_qubits, keep)?;
        let dim = self.dim();
        let rdim = kept_part.len();
        let mut entries = vec![Complex64::new(0.0, 0.0); rdim * rdim];
        for (ri, &row_bits) in kept_part.iter().enumerate() {
            for (rj, &col_bits) in kept_part.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &env in &traced_part {
                    acc += self.entries[(row_bits | env) * dim + (col_bits | env)];
                }
                entries[ri * rdim + rj] = acc;
            }
        }
        Ok(DensityMatrix {
            entries,
            num_qubits: kept_len,
        })
    }
}

/// Reduced density matrix of a pure state without materializing |ψ⟩⟨ψ|.
pub fn reduced_from_pure(state: &QState, keep: &[usize]) -> Result<DensityMatrix> {
    let (kept_part, traced_part, kept_len) = trace_index_tables(state.num_qubits(), keep)?;
    let amps = state.amplitudes();
    let rdim = kept_part.len();
    let mut entries = vec![Complex64::new(0.0, 0.0); rdim * rdim];
    for (ri, &row_bits) in kept_part.iter().enumerate() {
        for (rj, &col_bits) in kept_part.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for &env in &traced_part {
                acc += amps[row_bits | env] * amps[col_bits | env].conj();
            }
            entries[ri * rdim + rj] = acc;
        }
    }
    Ok(DensityMatrix {
        entries,
        num_qubits: kept_len,
    })
}

/// Precomputes full-index fragments for kept and traced qubits. Returns
/// (kept lookups indexed by reduced index, traced lookups indexed by
/// environment index, number of kept qubits).
fn trace_index_tables(
    num_qubits: usize,
    keep: &[usize],
) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    if keep.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if let Some(&bad) = kept.iter().find(|&&q| q >= num_qubits) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            num_qubits,
        });
    }
    let traced: Vec<usize> = (0..num_qubits).filter(|q| !kept.contains(q)).collect();
    let kept_len = kept.len();
    let traced_len = traced.len();

    let scatter = |qubits: &[usize], idx: usize| -> usize {
        let mut full = 0usize;
        for (pos, &q) in qubits.iter().enumerate() {
            let bit = (idx >> (qubits.len() - 1 - pos)) & 1;
            full |= bit << (num_qubits - 1 - q);
        }
        full
    };

    let kept_part: Vec<usize> = (0..1usize << kept_len).map(|i| scatter(&kept, i)).collect();
    let traced_part: Vec<usize> = (0..1usize << traced_len)
        .map(|e| scatter(&traced, e))
        .collect();
    Ok((kept_part, traced_part, kept_len))
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.
/// `m` is row-major n x n and is destroyed.
fn symmetric_eigenvalues(m: &mut [f64], n: usize) -> Vec<f64> {
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() < 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    m[i * n + p] = c * aip - s * aiq;
                    m[i * n + q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = m[p * n + i];
                    let aqi = m[q * n + i];
                    m[p * n + i] = c * api - s * aqi;
                    m[q * n + i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}
