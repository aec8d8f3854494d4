//! Lossy measurements, the multi-qubit measurement protocol, and frequency
//! estimators over outcome strings.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domains, substream};
use crate::state::QState;
use crate::swap_test::DEFAULT_MAX_QUBITS;

/// Result of one lossy single-qubit measurement shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// The shot was lost; nothing was recorded.
    Missing,
    /// The model outcome with probability p·ℙ(0) per shot.
    Zero,
    /// The complementary recorded outcome.
    One,
}

/// Recorded outcomes of a shot sequence on one qubit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeString {
    symbols: Vec<Outcome>,
}

impl OutcomeString {
    pub fn new(symbols: Vec<Outcome>) -> Self {
        Self { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Outcome] {
        &self.symbols
    }

    pub fn count_zero(&self) -> u64 {
        self.count(Outcome::Zero)
    }

    pub fn count_one(&self) -> u64 {
        self.count(Outcome::One)
    }

    pub fn count_missing(&self) -> u64 {
        self.count(Outcome::Missing)
    }

    fn count(&self, which: Outcome) -> u64 {
        self.symbols.iter().filter(|&&s| s == which).count() as u64
    }

    /// Compact text form: '0', '1', and '.' for missing.
    pub fn to_text(&self) -> String {
        self.symbols
            .iter()
            .map(|s| match s {
                Outcome::Missing => '.',
                Outcome::Zero => '0',
                Outcome::One => '1',
            })
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let symbols = text
            .chars()
            .map(|c| match c {
                '.' => Ok(Outcome::Missing),
                '0' => Ok(Outcome::Zero),
                '1' => Ok(Outcome::One),
                other => Err(Error::InvalidDataset(format!(
                    "invalid outcome character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { symbols })
    }
}

/// Concatenates outcome strings in order.
pub fn concat(strings: &[OutcomeString]) -> OutcomeString {
    let mut symbols = Vec::with_capacity(strings.iter().map(OutcomeString::len).sum());
    for s in strings {
        symbols.extend_from_slice(&s.symbols);
    }
    OutcomeString { symbols }
}

/// Multi-qubit strings as newline-separated text, one line per qubit.
pub fn strings_to_text(strings: &[OutcomeString]) -> String {
    strings
        .iter()
        .map(OutcomeString::to_text)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn strings_from_text(text: &str) -> Result<Vec<OutcomeString>> {
    text.lines().map(OutcomeString::from_text).collect()
}

/// How measurement loss is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Each shot is recorded independently with probability p.
    #[default]
    StochasticThinning,
    /// Exactly round-half-even(p·𝒩) shots are recorded, in the leading
    /// positions; the rest are missing.
    DeterministicCount,
}

/// Shot count, per-qubit efficiencies, loss realization, and master seed for
/// one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub shots: u64,
    pub efficiencies: Vec<f64>,
    #[serde(default)]
    pub loss_mode: LossMode,
    pub seed: u64,
    /// Sample all control qubits jointly from the exact post-circuit
    /// distribution instead of independently per qubit. Only meaningful for
    /// quantum inputs; ignored by the marginal protocol.
    #[serde(default)]
    pub joint_sampling: bool,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        for &p in &self.efficiencies {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(Error::InvalidEfficiency(p));
            }
        }
        Ok(())
    }
}

/// Zero-count estimate with its shot-noise error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// Total ZERO count across all strings.
    pub n_zero: u64,
    /// Denominator used for the frequency.
    pub shots_total: u64,
    /// n_zero / shots_total.
    pub f_hat: f64,
    /// 1/√shots_total.
    pub std_error_bound: f64,
}

/// Number of recorded shots under [`LossMode::DeterministicCount`].
fn deterministic_recorded(efficiency: f64, shots: u64) -> u64 {
    let n = (efficiency * shots as f64).round_ties_even() as u64;
    n.min(shots)
}

/// Samples a length-`shots` outcome string for one qubit whose recorded
/// outcome is ZERO with probability `p_zero`, under loss `efficiency`.
pub fn measure_lossy(
    p_zero: f64,
    efficiency: f64,
    shots: u64,
    rng: &mut ChaCha8Rng,
    mode: LossMode,
) -> Result<OutcomeString> {
    if !(0.0..=1.0).contains(&p_zero) || p_zero.is_nan() {
        return Err(Error::InvalidProbability(p_zero));
    }
    if !(0.0..=1.0).contains(&efficiency) || efficiency.is_nan() {
        return Err(Error::InvalidEfficiency(efficiency));
    }
    let shots = shots as usize;
    let mut symbols = Vec::with_capacity(shots);
    match mode {
        LossMode::StochasticThinning => {
            // one uniform decides both loss and outcome:
            // [0, p·p0) ↦ ZERO, [p·p0, p) ↦ ONE, [p, 1) ↦ MISSING
            let zero_cut = efficiency * p_zero;
            for _ in 0..shots {
                let u: f64 = rng.gen();
                symbols.push(if u < zero_cut {
                    Outcome::Zero
                } else if u < efficiency {
                    Outcome::One
                } else {
                    Outcome::Missing
                });
            }
        }
        LossMode::DeterministicCount => {
            let recorded = deterministic_recorded(efficiency, shots as u64) as usize;
            for _ in 0..recorded {
                let u: f64 = rng.gen();
                symbols.push(if u < p_zero { Outcome::Zero } else { Outcome::One });
            }
            symbols.resize(shots, Outcome::Missing);
        }
    }
    Ok(OutcomeString { symbols })
}

/// Runs the protocol over m independently sampled qubits. Qubit l draws from
/// its own substream, so the result does not depend on thread scheduling.
pub fn run_protocol(p_zeros: &[f64], config: &ProtocolConfig) -> Result<Vec<OutcomeString>> {
    config.validate()?;
    if p_zeros.len() != config.efficiencies.len() {
        return Err(Error::LengthMismatch(format!(
            "{} outcome probabilities but {} efficiencies",
            p_zeros.len(),
            config.efficiencies.len()
        )));
    }
    p_zeros
        .par_iter()
        .zip(config.efficiencies.par_iter())
        .enumerate()
        .map(|(l, (&p_zero, &efficiency))| {
            let mut rng = substream(config.seed, domains::PROTOCOL_QUBIT, l as u64, 0, 0);
            measure_lossy(p_zero, efficiency, config.shots, &mut rng, config.loss_mode)
        })
        .collect()
}

/// Runs the protocol by sampling all m control qubits jointly from the exact
/// post-circuit distribution, then applying loss per qubit. Required when the
/// modules' inputs are entangled with each other.
///
/// `joint_state` covers m modules of 2k+1 qubits each, laid out back to back;
/// the control of module l is qubit l·(2k+1). One efficiency per module.
pub fn run_protocol_joint(
    joint_state: &QState,
    config: &ProtocolConfig,
) -> Result<Vec<OutcomeString>> {
    config.validate()?;
    let total = joint_state.num_qubits();
    if total > DEFAULT_MAX_QUBITS {
        return Err(Error::RegisterTooLarge {
            requested: total,
            max: DEFAULT_MAX_QUBITS,
        });
    }
    let m = config.efficiencies.len();
    if m == 0 || total % m != 0 || (total / m) % 2 == 0 {
        return Err(Error::LengthMismatch(format!(
            "{total} qubits cannot be split into {m} modules of odd width"
        )));
    }
    let per_module = total / m;

    // distribution over raw control patterns (control l at pattern bit m-1-l)
    let mut pattern_probs = vec![0.0f64; 1 << m];
    for (i, amp) in joint_state.amplitudes().iter().enumerate() {
        let p = amp.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let mut pattern = 0usize;
        for l in 0..m {
            let bit = (i >> (total - 1 - l * per_module)) & 1;
            pattern |= bit << (m - 1 - l);
        }
        pattern_probs[pattern] += p;
    }
    let mut cumulative = Vec::with_capacity(pattern_probs.len());
    let mut acc = 0.0;
    for &p in &pattern_probs {
        acc += p;
        cumulative.push(acc);
    }

    let shots = config.shots as usize;
    let mut outcome_rng = substream(config.seed, domains::JOINT_OUTCOME, 0, 0, 0);
    let mut patterns = Vec::with_capacity(shots);
    for _ in 0..shots {
        let u: f64 = outcome_rng.gen::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c <= u);
        patterns.push(idx.min(pattern_probs.len() - 1));
    }

    let strings = config
        .efficiencies
        .par_iter()
        .enumerate()
        .map(|(l, &efficiency)| {
            let mut loss_rng = substream(config.seed, domains::JOINT_LOSS, l as u64, 0, 0);
            let mut symbols = Vec::with_capacity(shots);
            let recorded = match config.loss_mode {
                LossMode::DeterministicCount => {
                    deterministic_recorded(efficiency, shots as u64) as usize
                }
                LossMode::StochasticThinning => shots,
            };
            for (shot, &pattern) in patterns.iter().enumerate() {
                let keep = match config.loss_mode {
                    LossMode::StochasticThinning => loss_rng.gen::<f64>() < efficiency,
                    LossMode::DeterministicCount => shot < recorded,
                };
                let raw_bit = (pattern >> (m - 1 - l)) & 1;
                symbols.push(if !keep {
                    Outcome::Missing
                } else if raw_bit == 1 {
                    // raw control outcome 1 is the model outcome ZERO
                    Outcome::Zero
                } else {
                    Outcome::One
                });
            }
            OutcomeString { symbols }
        })
        .collect();
    Ok(strings)
}

/// Counts zeros across `strings` and forms the frequency over `denominator`.
pub fn estimate(strings: &[OutcomeString], denominator: u64) -> EstimateReport {
    assert!(denominator >= 1, "estimator denominator must be positive");
    let n_zero: u64 = strings.iter().map(OutcomeString::count_zero).sum();
    EstimateReport {
        n_zero,
        shots_total: denominator,
        f_hat: n_zero as f64 / denominator as f64,
        std_error_bound: 1.0 / (denominator as f64).sqrt(),
    }
}
