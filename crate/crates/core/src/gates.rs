//! The gate set needed for swap-test circuits: Hadamard, CNOT, SWAP, Fredkin.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::state::QState;

/// Gates acting on named qubits of a register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Hadamard {
        target: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Swap {
        first: usize,
        second: usize,
    },
    /// Controlled swap: control 0 leaves the pair alone, control 1 swaps it.
    Fredkin {
        control: usize,
        first: usize,
        second: usize,
    },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Hadamard { target } => vec![target],
            Gate::Cnot { control, target } => vec![control, target],
            Gate::Swap { first, second } => vec![first, second],
            Gate::Fredkin {
                control,
                first,
                second,
            } => vec![control, first, second],
        }
    }
}

/// Applies `gate` to `state`, returning the new state. The input is left
/// untouched; all four gates are unitary so the norm is preserved.
pub fn apply_gate(state: &QState, gate: Gate) -> Result<QState> {
    let mut out = state.clone();
    apply_gate_in_place(&mut out, gate)?;
    Ok(out)
}

/// In-place variant used by the circuit simulator to avoid reallocation.
pub fn apply_gate_in_place(state: &mut QState, gate: Gate) -> Result<()> {
    let n = state.num_qubits();
    let qubits = gate.qubits();
    for &q in &qubits {
        if q >= n {
            return Err(Error::IndexOutOfRange {
                index: q,
                num_qubits: n,
            });
        }
    }
    for (i, &q) in qubits.iter().enumerate() {
        if qubits[..i].contains(&q) {
            return Err(Error::DuplicateIndex(q));
        }
    }

    match gate {
        Gate::Hadamard { target } => {
            let mask = state.qubit_mask(target);
            let amps = state.amplitudes_mut();
            for i in 0..amps.len() {
                if i & mask == 0 {
                    let j = i | mask;
                    let a = amps[i];
                    let b = amps[j];
                    amps[i] = (a + b) * FRAC_1_SQRT_2;
                    amps[j] = (a - b) * FRAC_1_SQRT_2;
                }
            }
        }
        Gate::Cnot { control, target } => {
            let cmask = state.qubit_mask(control);
            let tmask = state.qubit_mask(target);
            let amps = state.amplitudes_mut();
            for i in 0..amps.len() {
                if i & cmask != 0 && i & tmask == 0 {
                    amps.swap(i, i | tmask);
                }
            }
        }
        Gate::Swap { first, second } => {
            let m1 = state.qubit_mask(first);
            let m2 = state.qubit_mask(second);
            let amps = state.amplitudes_mut();
            for i in 0..amps.len() {
                if i & m1 != 0 && i & m2 == 0 {
                    amps.swap(i, i ^ (m1 | m2));
                }
            }
        }
        Gate::Fredkin {
            control,
            first,
            second,
        } => {
            let cmask = state.qubit_mask(control);
            let m1 = state.qubit_mask(first);
            let m2 = state.qubit_mask(second);
            let amps = state.amplitudes_mut();
            for i in 0..amps.len() {
                if i & cmask != 0 && i & m1 != 0 && i & m2 == 0 {
                    amps.swap(i, i ^ (m1 | m2));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{amplitude_encode, NORM_TOL};
    use num_complex::Complex64;

    #[test]
    fn hadamard_on_zero() {
        let s = apply_gate(&QState::zero(1), Gate::Hadamard { target: 0 }).unwrap();
        let h = 1.0 / 2.0_f64.sqrt();
        assert!((s.amplitudes()[0].re - h).abs() < NORM_TOL);
        assert!((s.amplitudes()[1].re - h).abs() < NORM_TOL);
    }

    #[test]
    fn hadamard_is_involutive() {
        let s = amplitude_encode(&[0.6, 0.8]).unwrap();
        let t = apply_gate(&s, Gate::Hadamard { target: 0 }).unwrap();
        let u = apply_gate(&t, Gate::Hadamard { target: 0 }).unwrap();
        for (a, b) in s.amplitudes().iter().zip(u.amplitudes()) {
            assert!((a - b).norm() < NORM_TOL);
        }
    }

    #[test]
    fn cnot_flips_target_when_control_set() {
        // |10⟩ -> |11⟩
        let s = QState::basis(2, 0b10);
        let t = apply_gate(
            &s,
            Gate::Cnot {
                control: 0,
                target: 1,
            },
        )
        .unwrap();
        assert_eq!(t.probability(0b11), 1.0);

        // |00⟩ stays put
        let s = QState::zero(2);
        let t = apply_gate(
            &s,
            Gate::Cnot {
                control: 0,
                target: 1,
            },
        )
        .unwrap();
        assert_eq!(t.probability(0b00), 1.0);
    }

    #[test]
    fn fredkin_swaps_when_control_set() {
        // |110⟩ -> |101⟩
        let s = QState::basis(3, 0b110);
        let t = apply_gate(
            &s,
            Gate::Fredkin {
                control: 0,
                first: 1,
                second: 2,
            },
        )
        .unwrap();
        assert_eq!(t.probability(0b101), 1.0);

        // control 0 acts as identity on |011⟩
        let s = QState::basis(3, 0b011);
        let t = apply_gate(
            &s,
            Gate::Fredkin {
                control: 0,
                first: 1,
                second: 2,
            },
        )
        .unwrap();
        assert_eq!(t.probability(0b011), 1.0);
    }

    #[test]
    fn swap_equals_three_cnots() {
        // SWAP(a, b) = CNOT(a,b) CNOT(b,a) CNOT(a,b) on all basis states
        for idx in 0..4 {
            let s = QState::basis(2, idx);
            let direct = apply_gate(
                &s,
                Gate::Swap {
                    first: 0,
                    second: 1,
                },
            )
            .unwrap();
            let mut chained = s;
            for gate in [
                Gate::Cnot {
                    control: 0,
                    target: 1,
                },
                Gate::Cnot {
                    control: 1,
                    target: 0,
                },
                Gate::Cnot {
                    control: 0,
                    target: 1,
                },
            ] {
                chained = apply_gate(&chained, gate).unwrap();
            }
            for (a, b) in direct.amplitudes().iter().zip(chained.amplitudes()) {
                assert!((a - b).norm() < NORM_TOL);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_and_duplicate_indices() {
        let s = QState::zero(2);
        assert!(matches!(
            apply_gate(&s, Gate::Hadamard { target: 2 }),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            apply_gate(
                &s,
                Gate::Cnot {
                    control: 1,
                    target: 1
                }
            ),
            Err(Error::DuplicateIndex(1))
        ));
    }

    #[test]
    fn gates_preserve_norm_on_random_states() {
        // seeded sweep over all gates and register sizes up to 5 qubits
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let k = rng.gen_range(1..=5);
            let dim = 1usize << k;
            let mut amps: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for a in &mut amps {
                *a /= norm;
            }
            let state = QState::new(amps).unwrap();

            let gate = match rng.gen_range(0..4) {
                0 => Gate::Hadamard {
                    target: rng.gen_range(0..k),
                },
                1 if k >= 2 => {
                    let c = rng.gen_range(0..k);
                    let t = (c + rng.gen_range(1..k)) % k;
                    Gate::Cnot {
                        control: c,
                        target: t,
                    }
                }
                2 if k >= 2 => {
                    let a = rng.gen_range(0..k);
                    let b = (a + rng.gen_range(1..k)) % k;
                    Gate::Swap {
                        first: a,
                        second: b,
                    }
                }
                3 if k >= 3 => {
                    let c = rng.gen_range(0..k);
                    let a = (c + rng.gen_range(1..k)) % k;
                    let mut b = (c + rng.gen_range(1..k)) % k;
                    if b == a {
                        b = (a + 1) % k;
                        if b == c {
                            b = (b + 1) % k;
                        }
                    }
                    Gate::Fredkin {
                        control: c,
                        first: a,
                        second: b,
                    }
                }
                _ => Gate::Hadamard {
                    target: rng.gen_range(0..k),
                },
            };
            let out = apply_gate(&state, gate).unwrap();
            assert!(
                (out.norm() - 1.0).abs() < NORM_TOL,
                "norm drifted for {gate:?} on {k} qubits"
            );
        }
    }
}
