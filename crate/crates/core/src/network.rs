//! Network assembly: input partitioning across modules, three wiring
//! topologies, shot-sampled predictors, and the exact classical two-layer
//! oracle those predictors estimate.
//!
//! Topologies:
//! * `modular`: m modules in parallel, one hidden unit per module, a single
//!   scalar output f = N₀/𝒩.
//! * `full`: one module reused over R weight vectors and Q output columns
//!   with per-column efficiencies; y_q = N₀q/(R·𝒩).
//! * `block`: m modules × R weight re-initializations, giving m·R hidden
//!   units with a block-sparse first layer; y_q = N₀q/(R·𝒩).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{reduced_from_pure, DensityMatrix};
use crate::error::{Error, Result};
use crate::gates::{apply_gate_in_place, Gate};
use crate::measurement::{estimate, measure_lossy, run_protocol, run_protocol_joint,
    OutcomeString, ProtocolConfig};
use crate::rng::{domains, substream};
use crate::state::{amplitude_encode, cosine_similarity, QState};
use crate::swap_test::{swap_test_mixed, DEFAULT_MAX_QUBITS};

/// Hidden-layer activation φ(z) = ½(1 − z²), realized physically by the
/// ZERO-outcome probability of a swap test at overlap z.
pub fn activation(z: f64) -> f64 {
    0.5 * (1.0 - z * z)
}

/// Register size, module count, and input dimension of a piecewise encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleLayout {
    /// Qubits per input register.
    pub k: usize,
    /// Number of modules.
    pub m: usize,
    /// Input vector dimension.
    pub n: usize,
}

impl ModuleLayout {
    /// Qubits across all modules: m·(2k+1).
    pub fn total_qubits(&self) -> usize {
        self.m * (2 * self.k + 1)
    }

    /// Components stored per module register.
    pub fn piece_len(&self) -> usize {
        1 << self.k
    }
}

/// Smallest module count able to store an N-dimensional input in k-qubit
/// registers: m = ⌈N / 2^k⌉.
pub fn plan_layout(n: usize, k: usize) -> ModuleLayout {
    assert!(n >= 1, "input dimension must be positive");
    assert!(k >= 1, "register size must be positive");
    let piece = 1usize << k;
    ModuleLayout {
        k,
        m: n.div_ceil(piece),
        n,
    }
}

/// How an input vector is split across module registers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    /// Consecutive blocks of 2^k components.
    #[default]
    Contiguous,
    /// A seeded permutation is applied before the contiguous split, so extra
    /// runs can mix components across modules reproducibly.
    SeededRandomPermutation { seed: u64 },
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = substream(seed, domains::PARTITION, 0, 0, 0);
    use rand::Rng;
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Splits `x` into m pieces of length 2^k, padding the tail with `pad_value`
/// when N is not a multiple of 2^k. Every piece must end up with nonzero
/// norm, since each is amplitude-encoded into a register.
pub fn partition(
    x: &[f64],
    layout: &ModuleLayout,
    mode: PartitionMode,
    pad_value: f64,
) -> Result<Vec<Vec<f64>>> {
    if x.len() != layout.n {
        return Err(Error::DimensionMismatch(format!(
            "input has length {}, layout expects {}",
            x.len(),
            layout.n
        )));
    }
    let piece = layout.piece_len();
    let mut arranged: Vec<f64> = match mode {
        PartitionMode::Contiguous => x.to_vec(),
        PartitionMode::SeededRandomPermutation { seed } => {
            let perm = permutation(x.len(), seed);
            perm.iter().map(|&i| x[i]).collect()
        }
    };
    arranged.resize(layout.m * piece, pad_value);
    let pieces: Vec<Vec<f64>> = arranged.chunks(piece).map(<[f64]>::to_vec).collect();
    for (index, p) in pieces.iter().enumerate() {
        if crate::state::norm(p) == 0.0 {
            return Err(Error::ZeroNormPiece { index });
        }
    }
    Ok(pieces)
}

/// Inverse of [`partition`]: concatenates pieces, strips padding, and undoes
/// the permutation, recovering the original input exactly.
pub fn unpartition(pieces: &[Vec<f64>], layout: &ModuleLayout, mode: PartitionMode) -> Vec<f64> {
    let arranged: Vec<f64> = pieces.iter().flatten().copied().take(layout.n).collect();
    match mode {
        PartitionMode::Contiguous => arranged,
        PartitionMode::SeededRandomPermutation { seed } => {
            let perm = permutation(layout.n, seed);
            let mut x = vec![0.0; layout.n];
            for (i, &src) in perm.iter().enumerate() {
                x[src] = arranged[i];
            }
            x
        }
    }
}

/// Wiring, weights, and efficiencies of one network. Serializes to JSON with
/// a `topology` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "topology", rename_all = "snake_case")]
pub enum NetworkSpec {
    /// m parallel modules, scalar output.
    Modular {
        k: usize,
        m: usize,
        #[serde(default)]
        partition_mode: PartitionMode,
        /// m weight pieces of length 2^k.
        weights: Vec<Vec<f64>>,
        /// One efficiency per module.
        efficiencies: Vec<f64>,
        #[serde(default)]
        pad_value: f64,
    },
    /// One module, R hidden weight vectors, Q output columns.
    Full {
        k: usize,
        r: usize,
        q: usize,
        /// R weight vectors of length 2^k.
        weights: Vec<Vec<f64>>,
        /// R×Q efficiency matrix.
        efficiencies: Vec<Vec<f64>>,
    },
    /// m modules × R weight re-initializations, Q output columns.
    Block {
        k: usize,
        m: usize,
        r: usize,
        q: usize,
        #[serde(default)]
        partition_mode: PartitionMode,
        /// R repetitions × m pieces of length 2^k.
        weights: Vec<Vec<Vec<f64>>>,
        /// R×Q efficiency matrix shared by the m modules of a repetition.
        efficiencies: Vec<Vec<f64>>,
        #[serde(default)]
        pad_value: f64,
    },
}

fn check_efficiency(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidEfficiency(p));
    }
    Ok(())
}

fn check_piece(w: &[f64], expected_len: usize, index: usize) -> Result<()> {
    if w.len() != expected_len {
        return Err(Error::InvalidSpec(format!(
            "weight piece {index} has length {}, expected {expected_len}",
            w.len()
        )));
    }
    if crate::state::norm(w) == 0.0 {
        return Err(Error::ZeroNormPiece { index });
    }
    Ok(())
}

impl NetworkSpec {
    pub fn topology_name(&self) -> &'static str {
        match self {
            NetworkSpec::Modular { .. } => "modular",
            NetworkSpec::Full { .. } => "full",
            NetworkSpec::Block { .. } => "block",
        }
    }

    /// Number of output values produced per prediction.
    pub fn num_outputs(&self) -> usize {
        match self {
            NetworkSpec::Modular { .. } => 1,
            NetworkSpec::Full { q, .. } | NetworkSpec::Block { q, .. } => *q,
        }
    }

    /// Number of hidden units in the equivalent two-layer network.
    pub fn hidden_units(&self) -> usize {
        match self {
            NetworkSpec::Modular { m, .. } => *m,
            NetworkSpec::Full { r, .. } => *r,
            NetworkSpec::Block { m, r, .. } => m * r,
        }
    }

    /// Input dimension each prediction expects before padding.
    pub fn input_len(&self) -> usize {
        match self {
            NetworkSpec::Modular { k, m, .. } | NetworkSpec::Block { k, m, .. } => m << k,
            NetworkSpec::Full { k, .. } => 1 << k,
        }
    }

    /// First-layer connectivity: rows are hidden units, columns are input
    /// pieces; true where the unit reads the piece.
    pub fn connectivity(&self) -> Vec<Vec<bool>> {
        match self {
            NetworkSpec::Modular { m, .. } => (0..*m)
                .map(|l| (0..*m).map(|c| c == l).collect())
                .collect(),
            NetworkSpec::Full { r, .. } => vec![vec![true]; *r],
            NetworkSpec::Block { m, r, .. } => {
                let mut rows = Vec::with_capacity(m * r);
                for _rep in 0..*r {
                    for l in 0..*m {
                        rows.push((0..*m).map(|c| c == l).collect());
                    }
                }
                rows
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NetworkSpec::Modular {
                k,
                m,
                weights,
                efficiencies,
                ..
            } => {
                if *k == 0 || *m == 0 {
                    return Err(Error::InvalidSpec("k and m must be positive".into()));
                }
                if weights.len() != *m {
                    return Err(Error::InvalidSpec(format!(
                        "{} weight pieces for {m} modules",
                        weights.len()
                    )));
                }
                for (i, w) in weights.iter().enumerate() {
                    check_piece(w, 1 << k, i)?;
                }
                if efficiencies.len() != *m {
                    return Err(Error::InvalidSpec(format!(
                        "{} efficiencies for {m} modules",
                        efficiencies.len()
                    )));
                }
                efficiencies.iter().try_for_each(|&p| check_efficiency(p))
            }
            NetworkSpec::Full {
                k,
                r,
                q,
                weights,
                efficiencies,
            } => {
                if *k == 0 || *r == 0 || *q == 0 {
                    return Err(Error::InvalidSpec("k, r, q must be positive".into()));
                }
                if weights.len() != *r {
                    return Err(Error::InvalidSpec(format!(
                        "{} weight vectors for r = {r}",
                        weights.len()
                    )));
                }
                for (i, w) in weights.iter().enumerate() {
                    check_piece(w, 1 << k, i)?;
                }
                check_matrix(efficiencies, *r, *q)
            }
            NetworkSpec::Block {
                k,
                m,
                r,
                q,
                weights,
                efficiencies,
                ..
            } => {
                if *k == 0 || *m == 0 || *r == 0 || *q == 0 {
                    return Err(Error::InvalidSpec("k, m, r, q must be positive".into()));
                }
                if weights.len() != *r {
                    return Err(Error::InvalidSpec(format!(
                        "{} weight repetitions for r = {r}",
                        weights.len()
                    )));
                }
                for (rep, pieces) in weights.iter().enumerate() {
                    if pieces.len() != *m {
                        return Err(Error::InvalidSpec(format!(
                            "repetition {rep} has {} pieces for {m} modules",
                            pieces.len()
                        )));
                    }
                    for (l, w) in pieces.iter().enumerate() {
                        check_piece(w, 1 << k, rep * m + l)?;
                    }
                }
                check_matrix(efficiencies, *r, *q)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidSpec(format!("serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: NetworkSpec =
            serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Flattens all trainable parameters: weight components in declaration
    /// order, then efficiencies row-major.
    pub fn pack_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            NetworkSpec::Modular {
                weights,
                efficiencies,
                ..
            } => {
                out.extend(weights.iter().flatten());
                out.extend(efficiencies.iter());
            }
            NetworkSpec::Full {
                weights,
                efficiencies,
                ..
            } => {
                out.extend(weights.iter().flatten());
                out.extend(efficiencies.iter().flatten());
            }
            NetworkSpec::Block {
                weights,
                efficiencies,
                ..
            } => {
                out.extend(weights.iter().flatten().flatten());
                out.extend(efficiencies.iter().flatten());
            }
        }
        out
    }

    /// Rebuilds a spec with the same wiring and the given packed parameters.
    pub fn with_params(&self, params: &[f64]) -> Result<NetworkSpec> {
        let expected = self.pack_params().len();
        if params.len() != expected {
            return Err(Error::LengthMismatch(format!(
                "{} parameters supplied, spec has {expected}",
                params.len()
            )));
        }
        let mut spec = self.clone();
        let mut it = params.iter().copied();
        match &mut spec {
            NetworkSpec::Modular {
                weights,
                efficiencies,
                ..
            } => {
                for w in weights.iter_mut().flatten() {
                    *w = it.next().unwrap();
                }
                for p in efficiencies.iter_mut() {
                    *p = it.next().unwrap();
                }
            }
            NetworkSpec::Full {
                weights,
                efficiencies,
                ..
            } => {
                for w in weights.iter_mut().flatten() {
                    *w = it.next().unwrap();
                }
                for p in efficiencies.iter_mut().flatten() {
                    *p = it.next().unwrap();
                }
            }
            NetworkSpec::Block {
                weights,
                efficiencies,
                ..
            } => {
                for w in weights.iter_mut().flatten().flatten() {
                    *w = it.next().unwrap();
                }
                for p in efficiencies.iter_mut().flatten() {
                    *p = it.next().unwrap();
                }
            }
        }
        Ok(spec)
    }

    /// Number of trainable parameters.
    pub fn num_params(&self) -> usize {
        self.pack_params().len()
    }

    /// Number of weight components preceding the efficiencies in the packed
    /// layout.
    pub fn num_weight_params(&self) -> usize {
        match self {
            NetworkSpec::Modular { k, m, .. } => m << k,
            NetworkSpec::Full { k, r, .. } => r << k,
            NetworkSpec::Block { k, m, r, .. } => (m * r) << k,
        }
    }

    /// Human-readable shot-noise bound for this topology.
    pub fn error_bound_formula(&self) -> &'static str {
        match self {
            NetworkSpec::Modular { .. } => "1/sqrt(shots)",
            NetworkSpec::Full { .. } | NetworkSpec::Block { .. } => "1/sqrt(r*shots)",
        }
    }
}

fn check_matrix(values: &[Vec<f64>], r: usize, q: usize) -> Result<()> {
    if values.len() != r {
        return Err(Error::InvalidSpec(format!(
            "{} efficiency rows for r = {r}",
            values.len()
        )));
    }
    for row in values {
        if row.len() != q {
            return Err(Error::InvalidSpec(format!(
                "efficiency row has {} entries for q = {q}",
                row.len()
            )));
        }
        row.iter().try_for_each(|&p| check_efficiency(p))?;
    }
    Ok(())
}

/// Output of one prediction, sampled or exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// One value per output column (length 1 for the modular topology).
    pub values: Vec<f64>,
    /// Total shot draws consumed (0 for the exact oracle).
    pub shots_used: u64,
    /// Shot-noise scale: 1/√𝒩 or 1/√(R·𝒩) (0 for the exact oracle).
    pub error_bound: f64,
}

fn modular_fields(spec: &NetworkSpec) -> Result<(usize, usize, PartitionMode, &[Vec<f64>], &[f64], f64)> {
    match spec {
        NetworkSpec::Modular {
            k,
            m,
            partition_mode,
            weights,
            efficiencies,
            pad_value,
        } => Ok((*k, *m, *partition_mode, weights, efficiencies, *pad_value)),
        other => Err(Error::TopologyMismatch {
            expected: "modular",
            actual: other.topology_name(),
        }),
    }
}

/// ZERO probabilities of the m modules for a classical input.
fn modular_p_zeros(
    x: &[f64],
    k: usize,
    m: usize,
    mode: PartitionMode,
    weights: &[Vec<f64>],
    pad_value: f64,
) -> Result<Vec<f64>> {
    let layout = plan_layout(x.len(), k);
    if layout.m != m {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} needs {} modules, spec has {m}",
            x.len(),
            layout.m
        )));
    }
    let pieces = partition(x, &layout, mode, pad_value)?;
    pieces
        .iter()
        .zip(weights)
        .map(|(piece, w)| Ok(activation(cosine_similarity(piece, w)?)))
        .collect()
}

/// Samples the scalar modular prediction f = N₀/𝒩.
///
/// `config` supplies shots, loss mode, and seed; its efficiencies field is
/// ignored in favor of the network's own efficiencies.
pub fn predict_modular(x: &[f64], spec: &NetworkSpec, config: &ProtocolConfig) -> Result<Prediction> {
    spec.validate()?;
    let (k, m, mode, weights, efficiencies, pad_value) = modular_fields(spec)?;
    let p_zeros = modular_p_zeros(x, k, m, mode, weights, pad_value)?;
    let cfg = ProtocolConfig {
        shots: config.shots,
        efficiencies: efficiencies.to_vec(),
        loss_mode: config.loss_mode,
        seed: config.seed,
        joint_sampling: false,
    };
    let strings = run_protocol(&p_zeros, &cfg)?;
    let report = estimate(&strings, cfg.shots);
    Ok(Prediction {
        values: vec![report.f_hat],
        shots_used: cfg.shots * m as u64,
        error_bound: report.std_error_bound,
    })
}

/// Samples the full-topology outputs y_q = N₀q/(R·𝒩): R×Q measurement
/// batches of 𝒩 shots each, outcome strings concatenated per column.
///
/// `config` supplies shots, loss mode, and seed; efficiencies come from the
/// network.
pub fn predict_full(x: &[f64], spec: &NetworkSpec, config: &ProtocolConfig) -> Result<Prediction> {
    spec.validate()?;
    let (k, r, q, weights, efficiencies) = match spec {
        NetworkSpec::Full {
            k,
            r,
            q,
            weights,
            efficiencies,
        } => (*k, *r, *q, weights, efficiencies),
        other => {
            return Err(Error::TopologyMismatch {
                expected: "full",
                actual: other.topology_name(),
            })
        }
    };
    if x.len() != 1 << k {
        return Err(Error::DimensionMismatch(format!(
            "input has length {}, register stores {}",
            x.len(),
            1 << k
        )));
    }
    if config.shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    let p_zeros: Vec<f64> = weights
        .iter()
        .map(|w| Ok(activation(cosine_similarity(x, w)?)))
        .collect::<Result<_>>()?;

    let batches: Vec<(usize, usize)> =
        (0..r).flat_map(|rr| (0..q).map(move |qq| (rr, qq))).collect();
    let strings: Vec<OutcomeString> = batches
        .par_iter()
        .map(|&(rr, qq)| {
            let mut rng = substream(
                config.seed,
                domains::NETWORK_BATCH,
                rr as u64,
                qq as u64,
                0,
            );
            measure_lossy(
                p_zeros[rr],
                efficiencies[rr][qq],
                config.shots,
                &mut rng,
                config.loss_mode,
            )
        })
        .collect::<Result<_>>()?;

    // zero counts add over the concatenation b_q = b_1q…b_Rq
    let denominator = r as u64 * config.shots;
    let values = (0..q)
        .map(|qq| {
            let n_zero: u64 = (0..r).map(|rr| strings[rr * q + qq].count_zero()).sum();
            n_zero as f64 / denominator as f64
        })
        .collect();
    Ok(Prediction {
        values,
        shots_used: (r * q) as u64 * config.shots,
        error_bound: 1.0 / (denominator as f64).sqrt(),
    })
}

/// Samples the block-topology outputs: for each repetition r and column q,
/// the m modules are measured with the shared efficiency p_rq; zeros from
/// all m·R strings of a column are pooled into y_q = N₀q/(R·𝒩).
pub fn predict_block(x: &[f64], spec: &NetworkSpec, config: &ProtocolConfig) -> Result<Prediction> {
    spec.validate()?;
    let (k, m, r, q, mode, weights, efficiencies, pad_value) = match spec {
        NetworkSpec::Block {
            k,
            m,
            r,
            q,
            partition_mode,
            weights,
            efficiencies,
            pad_value,
        } => (*k, *m, *r, *q, *partition_mode, weights, efficiencies, *pad_value),
        other => {
            return Err(Error::TopologyMismatch {
                expected: "block",
                actual: other.topology_name(),
            })
        }
    };
    if config.shots == 0 {
        return Err(Error::InvalidConfig("shots must be at least 1".into()));
    }
    let layout = plan_layout(x.len(), k);
    if layout.m != m {
        return Err(Error::DimensionMismatch(format!(
            "input of length {} needs {} modules, spec has {m}",
            x.len(),
            layout.m
        )));
    }
    let pieces = partition(x, &layout, mode, pad_value)?;
    // p_zeros[rep][l]
    let p_zeros: Vec<Vec<f64>> = weights
        .iter()
        .map(|rep| {
            rep.iter()
                .zip(&pieces)
                .map(|(w, piece)| Ok(activation(cosine_similarity(piece, w)?)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let batches: Vec<(usize, usize, usize)> = (0..r)
        .flat_map(|rr| (0..q).flat_map(move |qq| (0..m).map(move |l| (rr, qq, l))))
        .collect();
    let strings: Vec<OutcomeString> = batches
        .par_iter()
        .map(|&(rr, qq, l)| {
            let mut rng = substream(
                config.seed,
                domains::NETWORK_BATCH,
                rr as u64,
                qq as u64,
                l as u64,
            );
            measure_lossy(
                p_zeros[rr][l],
                efficiencies[rr][qq],
                config.shots,
                &mut rng,
                config.loss_mode,
            )
        })
        .collect::<Result<_>>()?;

    let denominator = r as u64 * config.shots;
    let values = (0..q)
        .map(|qq| {
            let mut n_zero = 0u64;
            for rr in 0..r {
                for l in 0..m {
                    n_zero += strings[(rr * q + qq) * m + l].count_zero();
                }
            }
            n_zero as f64 / denominator as f64
        })
        .collect();
    Ok(Prediction {
        values,
        shots_used: (r * q * m) as u64 * config.shots,
        error_bound: 1.0 / (denominator as f64).sqrt(),
    })
}

/// Samples a prediction under whichever topology `spec` declares.
pub fn predict(x: &[f64], spec: &NetworkSpec, config: &ProtocolConfig) -> Result<Prediction> {
    match spec {
        NetworkSpec::Modular { .. } => predict_modular(x, spec, config),
        NetworkSpec::Full { .. } => predict_full(x, spec, config),
        NetworkSpec::Block { .. } => predict_block(x, spec, config),
    }
}

/// Exact noise-free evaluation of the two-layer network the sampled
/// predictors estimate. Hidden unit outputs are φ(cos) with φ(z) = ½(1−z²);
/// the full and block topologies carry the estimator's 1/R factor.
pub fn oracle_network(x: &[f64], spec: &NetworkSpec) -> Result<Prediction> {
    spec.validate()?;
    let values = match spec {
        NetworkSpec::Modular {
            k,
            m,
            partition_mode,
            weights,
            efficiencies,
            pad_value,
        } => {
            let p_zeros = modular_p_zeros(x, *k, *m, *partition_mode, weights, *pad_value)?;
            vec![p_zeros
                .iter()
                .zip(efficiencies)
                .map(|(phi, p)| p * phi)
                .sum()]
        }
        NetworkSpec::Full {
            k,
            r,
            q,
            weights,
            efficiencies,
        } => {
            if x.len() != 1 << k {
                return Err(Error::DimensionMismatch(format!(
                    "input has length {}, register stores {}",
                    x.len(),
                    1 << k
                )));
            }
            let phis: Vec<f64> = weights
                .iter()
                .map(|w| Ok(activation(cosine_similarity(x, w)?)))
                .collect::<Result<_>>()?;
            (0..*q)
                .map(|qq| {
                    (0..*r).map(|rr| efficiencies[rr][qq] * phis[rr]).sum::<f64>() / *r as f64
                })
                .collect()
        }
        NetworkSpec::Block {
            k,
            m,
            r,
            q,
            partition_mode,
            weights,
            efficiencies,
            pad_value,
        } => {
            let layout = plan_layout(x.len(), *k);
            if layout.m != *m {
                return Err(Error::DimensionMismatch(format!(
                    "input of length {} needs {} modules, spec has {m}",
                    x.len(),
                    layout.m
                )));
            }
            let pieces = partition(x, &layout, *partition_mode, *pad_value)?;
            // block_phi[rep] = Σ_l φ(cos(x_l, w_rep_l))
            let block_phi: Vec<f64> = weights
                .iter()
                .map(|rep| {
                    rep.iter()
                        .zip(&pieces)
                        .map(|(w, piece)| Ok(activation(cosine_similarity(piece, w)?)))
                        .sum::<Result<f64>>()
                })
                .collect::<Result<_>>()?;
            (0..*q)
                .map(|qq| {
                    (0..*r)
                        .map(|rr| efficiencies[rr][qq] * block_phi[rr])
                        .sum::<f64>()
                        / *r as f64
                })
                .collect()
        }
    };
    Ok(Prediction {
        values,
        shots_used: 0,
        error_bound: 0.0,
    })
}

/// A quantum network input: a pure state or a density matrix over the m·k
/// input qubits (modules may be entangled with each other).
#[derive(Debug, Clone)]
pub enum QuantumInput {
    Pure(QState),
    Mixed(DensityMatrix),
}

impl From<QState> for QuantumInput {
    fn from(s: QState) -> Self {
        QuantumInput::Pure(s)
    }
}

impl From<DensityMatrix> for QuantumInput {
    fn from(d: DensityMatrix) -> Self {
        QuantumInput::Mixed(d)
    }
}

impl QuantumInput {
    fn num_qubits(&self) -> usize {
        match self {
            QuantumInput::Pure(s) => s.num_qubits(),
            QuantumInput::Mixed(d) => d.num_qubits(),
        }
    }

    /// Reduced state of module `l` out of `m` modules of `k` qubits each.
    fn reduced(&self, l: usize, k: usize) -> Result<DensityMatrix> {
        let keep: Vec<usize> = (l * k..(l + 1) * k).collect();
        match self {
            QuantumInput::Pure(s) => reduced_from_pure(s, &keep),
            QuantumInput::Mixed(d) => d.partial_trace(&keep),
        }
    }
}

fn quantum_modular_p_zeros(input: &QuantumInput, spec: &NetworkSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate()?;
    let (k, m, _, weights, efficiencies, _) = modular_fields(spec)?;
    if input.num_qubits() != m * k {
        return Err(Error::DimensionMismatch(format!(
            "input state has {} qubits, spec needs {}",
            input.num_qubits(),
            m * k
        )));
    }
    let p_zeros = (0..m)
        .map(|l| {
            let rho = input.reduced(l, k)?;
            let w = amplitude_encode(&weights[l])?;
            Ok(swap_test_mixed(&rho, &w)?.p_zero)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((p_zeros, efficiencies.to_vec()))
}

/// Exact expectation of the modular prediction for a quantum input:
/// E[f] = Σ_l p_l · ½(1 − ⟨w_l|ρ_l|w_l⟩) with ρ_l the reduced module state.
pub fn oracle_quantum_input(input: &QuantumInput, spec: &NetworkSpec) -> Result<Prediction> {
    let (p_zeros, efficiencies) = quantum_modular_p_zeros(input, spec)?;
    Ok(Prediction {
        values: vec![p_zeros.iter().zip(&efficiencies).map(|(pz, p)| p * pz).sum()],
        shots_used: 0,
        error_bound: 0.0,
    })
}

/// Samples the modular prediction for a quantum input.
///
/// With `config.joint_sampling` false, each module's control is sampled
/// independently from its reduced-state probability; this matches the exact
/// marginals but discards cross-module outcome correlations. With it true,
/// the full post-circuit register is simulated and the m controls are drawn
/// jointly (pure inputs only, register capped at 21 qubits).
pub fn predict_quantum_input(
    input: &QuantumInput,
    spec: &NetworkSpec,
    config: &ProtocolConfig,
) -> Result<Prediction> {
    let (p_zeros, efficiencies) = quantum_modular_p_zeros(input, spec)?;
    let (k, m, _, weights, _, _) = modular_fields(spec)?;
    let cfg = ProtocolConfig {
        shots: config.shots,
        efficiencies,
        loss_mode: config.loss_mode,
        seed: config.seed,
        joint_sampling: false,
    };
    let strings = if config.joint_sampling {
        let state = match input {
            QuantumInput::Pure(s) => s,
            QuantumInput::Mixed(_) => {
                return Err(Error::InvalidConfig(
                    "joint sampling requires a pure input state".into(),
                ))
            }
        };
        let joint = post_circuit_state(state, weights, k, m)?;
        run_protocol_joint(&joint, &cfg)?
    } else {
        run_protocol(&p_zeros, &cfg)?
    };
    let report = estimate(&strings, cfg.shots);
    Ok(Prediction {
        values: vec![report.f_hat],
        shots_used: cfg.shots * m as u64,
        error_bound: report.std_error_bound,
    })
}

/// Builds the m·(2k+1)-qubit state of all module circuits run on a shared
/// (possibly entangled) input: per module, control |0⟩, then the encoded
/// weight register, then the module's slice of the input state; Hadamard,
/// k controlled swaps, Hadamard on each control.
fn post_circuit_state(input: &QState, weights: &[Vec<f64>], k: usize, m: usize) -> Result<QState> {
    let per = 2 * k + 1;
    let total = m * per;
    if total > DEFAULT_MAX_QUBITS {
        return Err(Error::RegisterTooLarge {
            requested: total,
            max: DEFAULT_MAX_QUBITS,
        });
    }
    let encoded: Vec<QState> = weights
        .iter()
        .map(|w| amplitude_encode(w))
        .collect::<Result<_>>()?;

    let dim = 1usize << total;
    let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); dim];
    let input_amps = input.amplitudes();
    // index bit of qubit t (global) is 1 << (total - 1 - t)
    for (idx, amp) in amps.iter_mut().enumerate() {
        let mut coeff = num_complex::Complex64::new(1.0, 0.0);
        let mut input_idx = 0usize;
        let mut nonzero = true;
        for l in 0..m {
            let base = l * per;
            let control = (idx >> (total - 1 - base)) & 1;
            if control == 1 {
                nonzero = false;
                break;
            }
            let mut w_idx = 0usize;
            let mut x_idx = 0usize;
            for b in 0..k {
                w_idx = (w_idx << 1) | ((idx >> (total - 1 - (base + 1 + b))) & 1);
                x_idx = (x_idx << 1) | ((idx >> (total - 1 - (base + 1 + k + b))) & 1);
            }
            coeff *= encoded[l].amplitudes()[w_idx];
            input_idx = (input_idx << k) | x_idx;
        }
        if nonzero {
            *amp = coeff * input_amps[input_idx];
        }
    }
    let mut state = QState::new(amps)?;
    for l in 0..m {
        let base = l * per;
        apply_gate_in_place(&mut state, Gate::Hadamard { target: base })?;
        for b in 0..k {
            apply_gate_in_place(
                &mut state,
                Gate::Fredkin {
                    control: base,
                    first: base + 1 + b,
                    second: base + 1 + k + b,
                },
            )?;
        }
        apply_gate_in_place(&mut state, Gate::Hadamard { target: base })?;
    }
    Ok(state)
}
