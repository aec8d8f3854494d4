//! Simulator for modular quantum neural networks built from swap tests.
//!
//! The crate provides a small statevector simulator, overlap estimation via
//! the swap-test circuit, lossy measurement protocols, analytic network
//! oracles for three wiring topologies, and a gradient-descent trainer for
//! the classical equivalent model.

pub mod density;
pub mod error;
pub mod gates;
pub mod measurement;
pub mod network;
pub mod rng;
pub mod state;
pub mod swap_test;
pub mod train;

pub use density::{reduced_from_pure, DensityMatrix};
pub use error::{Error, Result};
pub use gates::{apply_gate, apply_gate_in_place, Gate};
pub use state::{amplitude_encode, cosine_similarity, inner_product, tensor_product, QState};
pub use measurement::{
    concat, estimate, measure_lossy, run_protocol, run_protocol_joint, EstimateReport, LossMode,
    Outcome, OutcomeString, ProtocolConfig,
};
pub use network::{
    activation, oracle_network, oracle_quantum_input, partition, plan_layout, predict,
    predict_block, predict_full, predict_modular, predict_quantum_input, unpartition,
    ModuleLayout, NetworkSpec, PartitionMode, Prediction, QuantumInput,
};
pub use swap_test::{
    required_shots, required_shots_with_constant, swap_test_analytic, swap_test_circuit,
    swap_test_mixed, SwapTestResult, DEFAULT_MAX_QUBITS,
};
pub use train::{
    evaluate_sampled, gradient, loss, trace_to_csv, train, Dataset, EvalReport, LossMetric,
    TrainConfig, TrainResult,
};
