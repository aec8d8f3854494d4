//! Swap-test overlap estimation: analytic, exact circuit simulation, and the
//! mixed-state form for entangled or reduced inputs.
//!
//! Outcome labeling: the simulated circuit's raw control outcome 1 is reported
//! as the model outcome ZERO, so that p_zero = ½(1 − |⟨ψ|φ⟩|²) throughout the
//! crate. The raw outcome 0 (probability ½(1 + |⟨ψ|φ⟩|²)) maps to ONE.

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::gates::{apply_gate_in_place, Gate};
use crate::state::{inner_product, tensor_product, QState};

/// Largest register the dense statevector simulator will allocate. A module
/// with k-qubit inputs needs 2k + 1 qubits.
pub const DEFAULT_MAX_QUBITS: usize = 21;

/// Shot budgets default to ⌈c/ε²⌉ with this constant.
pub const SHOT_CONSTANT: f64 = 1.0;

/// Outcome probabilities of one swap test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapTestResult {
    /// Probability of the model outcome ZERO, equal to ½(1 − overlap_sq).
    pub p_zero: f64,
    /// Squared overlap |⟨ψ|φ⟩|² (or ⟨w|ρ|w⟩ for mixed inputs).
    pub overlap_sq: f64,
}

impl SwapTestResult {
    fn from_overlap_sq(overlap_sq: f64) -> Self {
        let overlap_sq = overlap_sq.clamp(0.0, 1.0);
        Self {
            p_zero: 0.5 * (1.0 - overlap_sq),
            overlap_sq,
        }
    }
}

/// Closed-form result for two pure states of equal width.
pub fn swap_test_analytic(psi: &QState, phi: &QState) -> Result<SwapTestResult> {
    let ip = inner_product(psi, phi)?;
    Ok(SwapTestResult::from_overlap_sq(ip.norm_sqr()))
}

/// Simulates the 2k+1 qubit circuit: control |0⟩, Hadamard, k controlled
/// swaps pairing qubit i of ψ with qubit i of φ, Hadamard, then reads the
/// control marginal under the crate's outcome labeling.
pub fn swap_test_circuit(psi: &QState, phi: &QState) -> Result<SwapTestResult> {
    swap_test_circuit_with_max(psi, phi, DEFAULT_MAX_QUBITS)
}

/// [`swap_test_circuit`] with an explicit register-size cap.
pub fn swap_test_circuit_with_max(
    psi: &QState,
    phi: &QState,
    max_qubits: usize,
) -> Result<SwapTestResult> {
    if psi.num_qubits() != phi.num_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "swap test requires equal register widths, got {} and {}",
            psi.num_qubits(),
            phi.num_qubits()
        )));
    }
    let k = psi.num_qubits();
    let total = 2 * k + 1;
    if total > max_qubits {
        return Err(Error::RegisterTooLarge {
            requested: total,
            max: max_qubits,
        });
    }

    let mut joint = tensor_product(&QState::zero(1), &tensor_product(psi, phi));
    apply_gate_in_place(&mut joint, Gate::Hadamard { target: 0 })?;
    for i in 0..k {
        apply_gate_in_place(
            &mut joint,
            Gate::Fredkin {
                control: 0,
                first: 1 + i,
                second: 1 + k + i,
            },
        )?;
    }
    apply_gate_in_place(&mut joint, Gate::Hadamard { target: 0 })?;

    // raw control outcome 1 is the model outcome ZERO
    let p_zero = joint.qubit_one_probability(0)?;
    Ok(SwapTestResult {
        p_zero,
        overlap_sq: (1.0 - 2.0 * p_zero).clamp(0.0, 1.0),
    })
}

/// Swap-test probabilities when one register carries a mixed state ρ:
/// overlap_sq = ⟨w|ρ|w⟩.
pub fn swap_test_mixed(rho: &DensityMatrix, w: &QState) -> Result<SwapTestResult> {
    let overlap_sq = rho.expectation(w)?;
    Ok(SwapTestResult::from_overlap_sq(overlap_sq))
}

/// Shots needed to estimate p_zero within additive error ε: ⌈c/ε²⌉ with the
/// default constant c = 1.
pub fn required_shots(epsilon: f64) -> Result<u64> {
    required_shots_with_constant(epsilon, SHOT_CONSTANT)
}

/// [`required_shots`] with an explicit budget constant c > 0.
pub fn required_shots_with_constant(epsilon: f64, c: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidEpsilon(c));
    }
    Ok((c / (epsilon * epsilon)).ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::amplitude_encode;
    use num_complex::Complex64;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_state(rng: &mut ChaCha8Rng, num_qubits: usize) -> QState {
        let dim = 1usize << num_qubits;
        loop {
            let amps: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-3 {
                return QState::new(amps.into_iter().map(|a| a / norm).collect()).unwrap();
            }
        }
    }

    #[test]
    fn identical_states_give_zero_probability() {
        let psi = amplitude_encode(&[0.3, -0.7, 0.2, 0.1]).unwrap();
        let r = swap_test_analytic(&psi, &psi).unwrap();
        assert!(r.p_zero.abs() < 1e-12);
        assert!((r.overlap_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_states_give_half() {
        let r = swap_test_analytic(&QState::basis(1, 0), &QState::basis(1, 1)).unwrap();
        assert!((r.p_zero - 0.5).abs() < 1e-12);
        assert!(r.overlap_sq.abs() < 1e-12);
    }

    #[test]
    fn overlap_of_one_zero_with_one_one() {
        let psi = amplitude_encode(&[1.0, 0.0]).unwrap();
        let phi = amplitude_encode(&[1.0, 1.0]).unwrap();
        let r = swap_test_analytic(&psi, &phi).unwrap();
        assert!((r.overlap_sq - 0.5).abs() < 1e-12);
        assert!((r.p_zero - 0.25).abs() < 1e-12);
    }

    #[test]
    fn circuit_matches_trivial_cases() {
        let zero = QState::basis(1, 0);
        let one = QState::basis(1, 1);
        let same = swap_test_circuit(&zero, &zero).unwrap();
        assert!(same.p_zero.abs() < 1e-12);
        let orth = swap_test_circuit(&zero, &one).unwrap();
        assert!((orth.p_zero - 0.5).abs() < 1e-12);
    }

    #[test]
    fn circuit_matches_analytic_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5117);
        for k in 1..=5 {
            for _ in 0..100 {
                let psi = random_state(&mut rng, k);
                let phi = random_state(&mut rng, k);
                let a = swap_test_analytic(&psi, &phi).unwrap();
                let c = swap_test_circuit(&psi, &phi).unwrap();
                assert!(
                    (a.p_zero - c.p_zero).abs() <= 1e-12,
                    "k={k}: analytic {} vs circuit {}",
                    a.p_zero,
                    c.p_zero
                );
            }
        }
    }

    #[test]
    fn analytic_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let psi = random_state(&mut rng, 2);
            let phi = random_state(&mut rng, 2);
            let ab = swap_test_analytic(&psi, &phi).unwrap();
            let ba = swap_test_analytic(&phi, &psi).unwrap();
            assert_eq!(ab.p_zero, ba.p_zero);
            assert_eq!(ab.overlap_sq, ba.overlap_sq);
        }
    }

    #[test]
    fn global_phase_leaves_probability_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let psi = random_state(&mut rng, 2);
            let phi = random_state(&mut rng, 2);
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let phase = Complex64::from_polar(1.0, theta);
            let rotated =
                QState::new(psi.amplitudes().iter().map(|a| a * phase).collect()).unwrap();
            let base = swap_test_analytic(&psi, &phi).unwrap();
            let shifted = swap_test_analytic(&rotated, &phi).unwrap();
            assert!((base.p_zero - shifted.p_zero).abs() < 1e-12);
        }
    }

    #[test]
    fn mixed_reduces_to_analytic_for_pure_projector() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let psi = random_state(&mut rng, 2);
            let phi = random_state(&mut rng, 2);
            let rho = DensityMatrix::from_pure(&psi);
            let mixed = swap_test_mixed(&rho, &phi).unwrap();
            let pure = swap_test_analytic(&psi, &phi).unwrap();
            assert!((mixed.p_zero - pure.p_zero).abs() < 1e-12);
        }
    }

    #[test]
    fn maximally_mixed_single_qubit_gives_quarter() {
        let rho = DensityMatrix::maximally_mixed(1);
        let w = amplitude_encode(&[0.6, 0.8]).unwrap();
        let r = swap_test_mixed(&rho, &w).unwrap();
        assert!((r.overlap_sq - 0.5).abs() < 1e-12);
        assert!((r.p_zero - 0.25).abs() < 1e-12);
    }

    #[test]
    fn reduced_bell_register_gives_quarter() {
        let h = 1.0 / 2.0_f64.sqrt();
        let bell = QState::new(vec![
            Complex64::new(h, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(h, 0.0),
        ])
        .unwrap();
        let rho = DensityMatrix::from_pure(&bell).partial_trace(&[0]).unwrap();
        let r = swap_test_mixed(&rho, &QState::basis(1, 0)).unwrap();
        assert!((r.overlap_sq - 0.5).abs() < 1e-12);
        assert!((r.p_zero - 0.25).abs() < 1e-12);
    }

    #[test]
    fn p_zero_stays_in_lower_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let psi = random_state(&mut rng, 3);
            let phi = random_state(&mut rng, 3);
            let r = swap_test_analytic(&psi, &phi).unwrap();
            assert!(r.p_zero >= 0.0 && r.p_zero <= 0.5);
            assert!(r.overlap_sq >= 0.0 && r.overlap_sq <= 1.0);
        }
    }

    #[test]
    fn shot_budget_examples() {
        assert_eq!(required_shots(0.1).unwrap(), 100);
        assert_eq!(required_shots(0.01).unwrap(), 10_000);
        assert!(matches!(required_shots(1.0), Err(Error::InvalidEpsilon(_))));
        assert!(matches!(required_shots(0.0), Err(Error::InvalidEpsilon(_))));
        assert!(matches!(
            required_shots(-0.5),
            Err(Error::InvalidEpsilon(_))
        ));
        assert_eq!(required_shots_with_constant(0.1, 4.0).unwrap(), 400);
    }

    #[test]
    fn shot_budget_grows_as_tolerance_shrinks() {
        let mut prev = 0;
        for eps in [0.9, 0.5, 0.2, 0.1, 0.05, 0.01] {
            let n = required_shots(eps).unwrap();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn oversized_register_is_rejected_before_allocation() {
        let psi = random_state(&mut ChaCha8Rng::seed_from_u64(1), 11);
        let phi = random_state(&mut ChaCha8Rng::seed_from_u64(2), 11);
        assert!(matches!(
            swap_test_circuit(&psi, &phi),
            Err(Error::RegisterTooLarge {
                requested: 23,
                max: 21
            })
        ));
        assert!(swap_test_circuit_with_max(&psi, &phi, 23).is_ok());
    }

    #[test]
    fn mismatched_widths_are_rejected() {
        let psi = QState::basis(1, 0);
        let phi = QState::basis(2, 0);
        assert!(matches!(
            swap_test_analytic(&psi, &phi),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            swap_test_circuit(&psi, &phi),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
