//! Training of weights and efficiencies on the exact oracle network by
//! projected gradient descent, with analytic gradients, plus shot-sampled
//! evaluation of trained parameters.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::ProtocolConfig;
use crate::network::{activation, oracle_network, partition, plan_layout, predict, NetworkSpec,
    PartitionMode};
use crate::rng::{domains, substream};
use crate::state::norm;

/// Step size used when none is configured.
pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;

/// Weight pieces whose norm falls below this are treated as degenerate.
pub const WEIGHT_NORM_FLOOR: f64 = 1e-8;

/// Training pairs: inputs of one shared length, targets of one shared length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::InvalidDataset(format!(
                "{} inputs and {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let n = inputs[0].len();
        let q = targets[0].len();
        if n == 0 || q == 0 {
            return Err(Error::InvalidDataset("empty input or target row".into()));
        }
        if inputs.iter().any(|x| x.len() != n) {
            return Err(Error::InvalidDataset("inputs differ in length".into()));
        }
        if targets.iter().any(|y| y.len() != q) {
            return Err(Error::InvalidDataset("targets differ in length".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn target_dim(&self) -> usize {
        self.targets[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// Text form: a header row `N,Q`, then one comma-separated row per pair
    /// holding the N features followed by the Q targets.
    pub fn to_text(&self) -> String {
        let mut out = format!("{},{}\n", self.input_dim(), self.target_dim());
        for (x, y) in self.inputs.iter().zip(&self.targets) {
            let row: Vec<String> = x.iter().chain(y).map(f64::to_string).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::InvalidDataset("empty dataset".into()))?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|f| f.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidDataset(format!("header {header:?}: {e}")))?;
        let [n, q] = dims[..] else {
            return Err(Error::InvalidDataset(format!(
                "header must hold two integers, got {header:?}"
            )));
        };
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidDataset(format!("line {}: {e}", lineno + 1)))?;
            if fields.len() != n + q {
                return Err(Error::InvalidDataset(format!(
                    "line {}: {} fields, expected {}",
                    lineno + 1,
                    fields.len(),
                    n + q
                )));
            }
            inputs.push(fields[..n].to_vec());
            targets.push(fields[n..].to_vec());
        }
        Self::new(inputs, targets)
    }
}

/// Distance between prediction and target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossMetric {
    #[default]
    SquaredError,
}

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub loss_metric: LossMetric,
    /// Stop once the per-epoch loss decrease falls below this.
    #[serde(default)]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_lr() -> f64 {
    DEFAULT_LEARNING_RATE
}

fn default_epochs() -> usize {
    5000
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            max_epochs: 5000,
            loss_metric: LossMetric::SquaredError,
            tolerance: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "tolerance {} must be finite and nonnegative",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Compensated (Kahan) sum over a fixed index order, so parallel producers
/// cannot change the result.
pub(crate) fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

fn check_dataset(spec: &NetworkSpec, data: &Dataset) -> Result<()> {
    if data.target_dim() != spec.num_outputs() {
        return Err(Error::DimensionMismatch(format!(
            "targets have {} values, network produces {}",
            data.target_dim(),
            spec.num_outputs()
        )));
    }
    Ok(())
}

/// Σ over pairs of ‖y − oracle(x)‖².
pub fn loss(spec: &NetworkSpec, data: &Dataset) -> Result<f64> {
    spec.validate()?;
    check_dataset(spec, data)?;
    let per_datum: Vec<f64> = data
        .inputs
        .par_iter()
        .zip(data.targets.par_iter())
        .map(|(x, y)| {
            let out = oracle_network(x, spec)?.values;
            Ok(kahan_sum(
                out.iter().zip(y).map(|(o, t)| (o - t) * (o - t)),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(kahan_sum(per_datum))
}

/// ∂cos(x,w)/∂w = x/(‖x‖‖w‖) − cos(x,w)·w/‖w‖².
fn cos_grad_w(x: &[f64], w: &[f64], cos: f64) -> Vec<f64> {
    let nx = norm(x);
    let nw = norm(w);
    x.iter()
        .zip(w)
        .map(|(xi, wi)| xi / (nx * nw) - cos * wi / (nw * nw))
        .collect()
}

fn check_weight_norm(w: &[f64], index: usize) -> Result<()> {
    if norm(w) < WEIGHT_NORM_FLOOR {
        return Err(Error::ZeroNormPiece { index });
    }
    Ok(())
}

/// Loss and packed gradient contribution of one training pair.
fn datum_loss_grad(spec: &NetworkSpec, x: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; spec.num_params()];
    let n_w = spec.num_weight_params();
    let loss;
    match spec {
        NetworkSpec::Modular {
            k,
            m,
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
            let piece_len = 1usize << k;
            let mut cosines = Vec::with_capacity(*m);
            let mut f = 0.0;
            for (l, (w, piece)) in weights.iter().zip(&pieces).enumerate() {
                check_weight_norm(w, l)?;
                let c = crate::state::cosine_similarity(piece, w)?;
                cosines.push(c);
                f += efficiencies[l] * activation(c);
            }
            let e = 2.0 * (f - y[0]);
            loss = (f - y[0]) * (f - y[0]);
            for l in 0..*m {
                let c = cosines[l];
                // dφ/dz = −z
                let scale = e * efficiencies[l] * (-c);
                for (j, g) in cos_grad_w(&pieces[l], &weights[l], c).into_iter().enumerate() {
                    grad[l * piece_len + j] += scale * g;
                }
                grad[n_w + l] += e * activation(c);
            }
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
            let piece_len = 1usize << k;
            let rf = *r as f64;
            let mut cosines = Vec::with_capacity(*r);
            for (rr, w) in weights.iter().enumerate() {
                check_weight_norm(w, rr)?;
                cosines.push(crate::state::cosine_similarity(x, w)?);
            }
            let outs: Vec<f64> = (0..*q)
                .map(|qq| {
                    (0..*r)
                        .map(|rr| efficiencies[rr][qq] * activation(cosines[rr]))
                        .sum::<f64>()
                        / rf
                })
                .collect();
            let residuals: Vec<f64> = outs.iter().zip(y).map(|(o, t)| 2.0 * (o - t)).collect();
            loss = kahan_sum(outs.iter().zip(y).map(|(o, t)| (o - t) * (o - t)));
            for rr in 0..*r {
                let c = cosines[rr];
                let weighted_residual: f64 = (0..*q)
                    .map(|qq| residuals[qq] * efficiencies[rr][qq])
                    .sum();
                let scale = weighted_residual * (-c) / rf;
                for (j, g) in cos_grad_w(x, &weights[rr], c).into_iter().enumerate() {
                    grad[rr * piece_len + j] += scale * g;
                }
                for qq in 0..*q {
                    grad[n_w + rr * q + qq] += residuals[qq] * activation(c) / rf;
                }
            }
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
            let piece_len = 1usize << k;
            let rf = *r as f64;
            let mut cosines = vec![vec![0.0; *m]; *r];
            let mut block_phi = vec![0.0; *r];
            for (rr, rep) in weights.iter().enumerate() {
                for (l, w) in rep.iter().enumerate() {
                    check_weight_norm(w, rr * m + l)?;
                    let c = crate::state::cosine_similarity(&pieces[l], w)?;
                    cosines[rr][l] = c;
                    block_phi[rr] += activation(c);
                }
            }
            let outs: Vec<f64> = (0..*q)
                .map(|qq| {
                    (0..*r)
                        .map(|rr| efficiencies[rr][qq] * block_phi[rr])
                        .sum::<f64>()
                        / rf
                })
                .collect();
            let residuals: Vec<f64> = outs.iter().zip(y).map(|(o, t)| 2.0 * (o - t)).collect();
            loss = kahan_sum(outs.iter().zip(y).map(|(o, t)| (o - t) * (o - t)));
            for rr in 0..*r {
                let weighted_residual: f64 = (0..*q)
                    .map(|qq| residuals[qq] * efficiencies[rr][qq])
                    .sum();
                for l in 0..*m {
                    let c = cosines[rr][l];
                    let scale = weighted_residual * (-c) / rf;
                    let base = (rr * m + l) * piece_len;
                    for (j, g) in cos_grad_w(&pieces[l], &weights[rr][l], c)
                        .into_iter()
                        .enumerate()
                    {
                        grad[base + j] += scale * g;
                    }
                }
                for qq in 0..*q {
                    grad[n_w + rr * q + qq] += residuals[qq] * block_phi[rr] / rf;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Exact gradient of [`loss`] with respect to the packed parameters
/// (weights first, then efficiencies).
pub fn gradient(spec: &NetworkSpec, data: &Dataset) -> Result<Vec<f64>> {
    spec.validate()?;
    check_dataset(spec, data)?;
    let per_datum: Vec<Vec<f64>> = data
        .inputs
        .par_iter()
        .zip(data.targets.par_iter())
        .map(|(x, y)| Ok(datum_loss_grad(spec, x, y)?.1))
        .collect::<Result<_>>()?;
    let n = spec.num_params();
    let grad = (0..n)
        .map(|j| kahan_sum(per_datum.iter().map(|g| g[j])))
        .collect();
    Ok(grad)
}

/// Trained parameters plus the loss recorded before training (index 0) and
/// after every epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub spec: NetworkSpec,
    pub trace: Vec<f64>,
    pub epochs_run: usize,
}

/// Projected gradient descent: plain steps on all parameters, efficiencies
/// clipped back to [0,1] after each step. Stops at `max_epochs`, or earlier
/// once the loss decrease drops below `tolerance`.
pub fn train(spec0: &NetworkSpec, data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult> {
    spec0.validate()?;
    cfg.validate()?;
    check_dataset(spec0, data)?;

    let n_w = spec0.num_weight_params();
    let mut spec = spec0.clone();
    let mut prev = loss(&spec, data)?;
    if !prev.is_finite() {
        return Err(Error::DivergenceDetected { epoch: 0 });
    }
    let mut trace = vec![prev];
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        let grad = gradient(&spec, data)?;
        let mut params = spec.pack_params();
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= cfg.learning_rate * g;
        }
        for p in params[n_w..].iter_mut() {
            *p = p.clamp(0.0, 1.0);
        }
        spec = spec.with_params(&params)?;
        let now = loss(&spec, data)?;
        if !now.is_finite() {
            return Err(Error::DivergenceDetected { epoch });
        }
        trace.push(now);
        epochs_run = epoch;
        if prev - now < cfg.tolerance {
            break;
        }
        prev = now;
    }
    Ok(TrainResult {
        spec,
        trace,
        epochs_run,
    })
}

/// Loss trace as CSV rows `epoch,loss`, epoch 0 being the initial loss.
pub fn trace_to_csv(trace: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (epoch, l) in trace.iter().enumerate() {
        out.push_str(&format!("{epoch},{l}\n"));
    }
    out
}

/// Oracle loss next to the loss of the shot-sampled predictor on the same
/// data, with the error budget that separates them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub oracle_loss: f64,
    pub sampled_loss: f64,
    pub gap: f64,
    pub shots: u64,
    pub seed: u64,
}

/// Evaluates `spec` on `data` both exactly and through shot sampling. Each
/// datum draws from its own substream of `config.seed`, so reports are
/// reproducible.
pub fn evaluate_sampled(
    spec: &NetworkSpec,
    data: &Dataset,
    config: &ProtocolConfig,
) -> Result<EvalReport> {
    spec.validate()?;
    check_dataset(spec, data)?;
    let pairs: Vec<(f64, f64)> = data
        .inputs
        .par_iter()
        .zip(data.targets.par_iter())
        .enumerate()
        .map(|(i, (x, y))| {
            let oracle = oracle_network(x, spec)?.values;
            let mut cfg = config.clone();
            cfg.seed = substream(config.seed, domains::EVAL_DATUM, i as u64, 0, 0).gen();
            let sampled = predict(x, spec, &cfg)?.values;
            let o_loss = kahan_sum(oracle.iter().zip(y).map(|(o, t)| (o - t) * (o - t)));
            let s_loss = kahan_sum(sampled.iter().zip(y).map(|(s, t)| (s - t) * (s - t)));
            Ok((o_loss, s_loss))
        })
        .collect::<Result<_>>()?;
    let oracle_loss = kahan_sum(pairs.iter().map(|p| p.0));
    let sampled_loss = kahan_sum(pairs.iter().map(|p| p.1));
    Ok(EvalReport {
        oracle_loss,
        sampled_loss,
        gap: (sampled_loss - oracle_loss).abs(),
        shots: config.shots,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::LossMode;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn modular_spec(weights: Vec<Vec<f64>>, efficiencies: Vec<f64>, k: usize) -> NetworkSpec {
        let m = weights.len();
        NetworkSpec::Modular {
            k,
            m,
            partition_mode: PartitionMode::Contiguous,
            weights,
            efficiencies,
            pad_value: 0.0,
        }
    }

    fn quarter_fixture() -> (NetworkSpec, Dataset) {
        let spec = modular_spec(vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0], 1);
        let data = Dataset::new(vec![vec![1.0, 0.0, 1.0, 0.0]], vec![vec![0.0]]).unwrap();
        (spec, data)
    }

    #[test]
    fn perfect_fit_has_zero_loss() {
        let spec = modular_spec(vec![vec![1.0, 0.4], vec![0.2, 1.0]], vec![0.9, 0.7], 1);
        let inputs = vec![vec![1.0, 0.0, 0.5, 0.5], vec![0.3, -0.2, 1.0, 0.4]];
        let targets: Vec<Vec<f64>> = inputs
            .iter()
            .map(|x| oracle_network(x, &spec).unwrap().values)
            .collect();
        let data = Dataset::new(inputs, targets).unwrap();
        assert!(loss(&spec, &data).unwrap() < 1e-24);
    }

    #[test]
    fn single_pair_arithmetic() {
        let (spec, data) = quarter_fixture();
        assert!((loss(&spec, &data).unwrap() - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_brute_force_resummation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = random_full_spec(&mut rng, 2, 3, 2);
        let data = random_dataset(&mut rng, 4, 1 << 2, 2);
        let fast = loss(&spec, &data).unwrap();
        let mut slow = 0.0;
        for (x, y) in data.inputs().iter().zip(data.targets()) {
            let out = oracle_network(x, &spec).unwrap().values;
            for (o, t) in out.iter().zip(y) {
                slow += (o - t) * (o - t);
            }
        }
        assert!((fast - slow).abs() < 1e-12);
    }

    fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if norm(&v) > 0.3 {
                return v;
            }
        }
    }

    fn random_dataset(rng: &mut ChaCha8Rng, pairs: usize, n: usize, q: usize) -> Dataset {
        let inputs: Vec<Vec<f64>> = (0..pairs).map(|_| random_vec(rng, n)).collect();
        let targets: Vec<Vec<f64>> = (0..pairs)
            .map(|_| (0..q).map(|_| rng.gen_range(0.0..0.5)).collect())
            .collect();
        Dataset::new(inputs, targets).unwrap()
    }

    fn random_modular_spec(rng: &mut ChaCha8Rng, k: usize, m: usize) -> NetworkSpec {
        modular_spec(
            (0..m).map(|_| random_vec(rng, 1 << k)).collect(),
            (0..m).map(|_| rng.gen_range(0.05..0.95)).collect(),
            k,
        )
    }

    fn random_full_spec(rng: &mut ChaCha8Rng, k: usize, r: usize, q: usize) -> NetworkSpec {
        NetworkSpec::Full {
            k,
            r,
            q,
            weights: (0..r).map(|_| random_vec(rng, 1 << k)).collect(),
            efficiencies: (0..r)
                .map(|_| (0..q).map(|_| rng.gen_range(0.05..0.95)).collect())
                .collect(),
        }
    }

    fn random_block_spec(rng: &mut ChaCha8Rng, k: usize, m: usize, r: usize, q: usize) -> NetworkSpec {
        NetworkSpec::Block {
            k,
            m,
            r,
            q,
            partition_mode: PartitionMode::Contiguous,
            weights: (0..r)
                .map(|_| (0..m).map(|_| random_vec(rng, 1 << k)).collect())
                .collect(),
            efficiencies: (0..r)
                .map(|_| (0..q).map(|_| rng.gen_range(0.05..0.95)).collect())
                .collect(),
            pad_value: 0.0,
        }
    }

    fn finite_difference(spec: &NetworkSpec, data: &Dataset) -> Vec<f64> {
        let params = spec.pack_params();
        let step = 1e-6;
        (0..params.len())
            .map(|j| {
                let mut plus = params.clone();
                plus[j] += step;
                let mut minus = params.clone();
                minus[j] -= step;
                let lp = loss(&spec.with_params(&plus).unwrap(), data).unwrap();
                let lm = loss(&spec.with_params(&minus).unwrap(), data).unwrap();
                (lp - lm) / (2.0 * step)
            })
            .collect()
    }

    fn assert_gradient_close(analytic: &[f64], fd: &[f64]) {
        let diff: f64 = analytic
            .iter()
            .zip(fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale > 1e-8 {
            assert!(diff / scale < 1e-5, "relative gap {}", diff / scale);
        } else {
            assert!(diff < 1e-8, "absolute gap {diff}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for trial in 0..12 {
            let (spec, data) = match trial % 3 {
                0 => {
                    let s = random_modular_spec(&mut rng, 1, 2);
                    let d = random_dataset(&mut rng, 3, 4, 1);
                    (s, d)
                }
                1 => {
                    let s = random_full_spec(&mut rng, 2, 2, 2);
                    let d = random_dataset(&mut rng, 3, 4, 2);
                    (s, d)
                }
                _ => {
                    let s = random_block_spec(&mut rng, 1, 2, 2, 2);
                    let d = random_dataset(&mut rng, 3, 4, 2);
                    (s, d)
                }
            };
            let analytic = gradient(&spec, &data).unwrap();
            let fd = finite_difference(&spec, &data);
            assert_gradient_close(&analytic, &fd);
        }
    }

    #[test]
    fn aligned_piece_contributes_nothing() {
        // x equals w: φ(1) = 0 kills the efficiency partial, and the cosine
        // gradient vanishes at the maximum
        let spec = modular_spec(vec![vec![1.0, 2.0]], vec![0.8], 1);
        let data = Dataset::new(vec![vec![1.0, 2.0]], vec![vec![0.3]]).unwrap();
        let g = gradient(&spec, &data).unwrap();
        for v in g {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_piece_has_zero_weight_gradient() {
        let spec = modular_spec(vec![vec![1.0, 0.0]], vec![0.8], 1);
        let data = Dataset::new(vec![vec![0.0, 1.0]], vec![vec![0.0]]).unwrap();
        let g = gradient(&spec, &data).unwrap();
        assert!(g[0].abs() < 1e-12);
        assert!(g[1].abs() < 1e-12);
        // efficiency partial: 2·(0.8·½ − 0)·φ(0) = 0.4
        assert!((g[2] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_leaves_spec_unchanged() {
        let (spec, data) = quarter_fixture();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            max_epochs: 5,
            ..TrainConfig::default()
        };
        let result = train(&spec, &data, &cfg).unwrap();
        assert_eq!(result.spec, spec);
        assert!(result.trace.iter().all(|&l| (l - 0.0625).abs() < 1e-12));
    }

    #[test]
    fn out_of_range_efficiency_is_rejected_before_training() {
        let spec = modular_spec(vec![vec![1.0, 1.0]], vec![1.2], 1);
        let data = Dataset::new(vec![vec![1.0, 0.0]], vec![vec![0.0]]).unwrap();
        assert!(matches!(
            train(&spec, &data, &TrainConfig::default()),
            Err(Error::InvalidEfficiency(_))
        ));
    }

    #[test]
    fn efficiencies_stay_clipped_to_unit_interval() {
        // targets far above reachable outputs push efficiencies upward hard
        let spec = modular_spec(vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![0.95, 0.9], 1);
        let data = Dataset::new(vec![vec![1.0, 0.0, 0.0, 1.0]], vec![vec![50.0]]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1.0,
            max_epochs: 50,
            tolerance: 0.0,
            ..TrainConfig::default()
        };
        let result = train(&spec, &data, &cfg);
        if let Ok(result) = result {
            let params = result.spec.pack_params();
            let n_w = result.spec.num_weight_params();
            for p in &params[n_w..] {
                assert!((0.0..=1.0).contains(p), "efficiency {p} escaped [0,1]");
            }
        }
    }

    #[test]
    fn non_finite_loss_is_reported_as_divergence() {
        // a target large enough to overflow the squared error
        let spec = modular_spec(vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1.0, 1.0], 1);
        let data = Dataset::new(vec![vec![1.0, 0.0, 1.0, 0.0]], vec![vec![1e200]]).unwrap();
        assert!(matches!(
            train(&spec, &data, &TrainConfig::default()),
            Err(Error::DivergenceDetected { epoch: 0 })
        ));

        let nan_data = Dataset::new(vec![vec![1.0, 0.0, 1.0, 0.0]], vec![vec![f64::NAN]]).unwrap();
        assert!(matches!(
            train(&spec, &nan_data, &TrainConfig::default()),
            Err(Error::DivergenceDetected { .. })
        ));
    }

    #[test]
    fn loss_trace_is_mostly_non_increasing_at_default_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut ok = 0;
        let trials = 20;
        for _ in 0..trials {
            let spec = random_modular_spec(&mut rng, 1, 2);
            let data = random_dataset(&mut rng, 4, 4, 1);
            let cfg = TrainConfig {
                max_epochs: 200,
                tolerance: 0.0,
                ..TrainConfig::default()
            };
            let result = train(&spec, &data, &cfg).unwrap();
            if result
                .trace
                .windows(2)
                .all(|w| w[1] <= w[0] + 1e-12)
            {
                ok += 1;
            }
        }
        assert!(ok * 100 >= trials * 95, "{ok}/{trials} non-increasing");
    }

    #[test]
    fn per_input_rescaling_changes_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = random_modular_spec(&mut rng, 1, 2);
        let data = random_dataset(&mut rng, 4, 4, 1);
        let alphas = [2.0, -3.0, 0.125, -0.04];
        let scaled = Dataset::new(
            data.inputs()
                .iter()
                .zip(alphas)
                .map(|(x, a)| x.iter().map(|v| v * a).collect())
                .collect(),
            data.targets().to_vec(),
        )
        .unwrap();
        assert!((loss(&spec, &data).unwrap() - loss(&spec, &scaled).unwrap()).abs() < 1e-12);
        let g0 = gradient(&spec, &data).unwrap();
        let g1 = gradient(&spec, &scaled).unwrap();
        for (a, b) in g0.iter().zip(&g1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn teacher_student_toy_instance_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let teacher = random_full_spec(&mut rng, 2, 2, 1);
        let inputs: Vec<Vec<f64>> = (0..8).map(|_| random_vec(&mut rng, 4)).collect();
        let targets: Vec<Vec<f64>> = inputs
            .iter()
            .map(|x| oracle_network(x, &teacher).unwrap().values)
            .collect();
        let data = Dataset::new(inputs, targets).unwrap();
        let student = random_full_spec(&mut rng, 2, 2, 1);
        let cfg = TrainConfig {
            max_epochs: 5000,
            tolerance: 0.0,
            ..TrainConfig::default()
        };
        let result = train(&student, &data, &cfg).unwrap();
        let final_loss = *result.trace.last().unwrap();
        assert!(
            final_loss <= 1e-3,
            "final loss {final_loss} after {} epochs",
            result.epochs_run
        );
    }

    #[test]
    fn dataset_text_round_trip() {
        let data = Dataset::new(
            vec![vec![1.0, 0.5, -0.25, 3.0], vec![0.1, 0.2, 0.3, 0.4]],
            vec![vec![0.125], vec![0.5]],
        )
        .unwrap();
        let text = data.to_text();
        assert!(text.starts_with("4,1\n"));
        assert_eq!(Dataset::from_text(&text).unwrap(), data);
    }

    #[test]
    fn malformed_datasets_are_rejected() {
        assert!(Dataset::from_text("").is_err());
        assert!(Dataset::from_text("2\n1,2,3").is_err());
        assert!(Dataset::from_text("2,1\n1,2").is_err());
        assert!(Dataset::from_text("2,1\n1,junk,3").is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![]).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![2.0, 3.0]], vec![vec![0.0]; 2]).is_err());
    }

    #[test]
    fn trace_csv_format() {
        let csv = trace_to_csv(&[0.5, 0.25]);
        assert_eq!(csv, "epoch,loss\n0,0.5\n1,0.25\n");
    }

    fn eval_config(shots: u64, seed: u64) -> ProtocolConfig {
        ProtocolConfig {
            shots,
            efficiencies: Vec::new(),
            loss_mode: LossMode::StochasticThinning,
            seed,
            joint_sampling: false,
        }
    }

    #[test]
    fn sampled_evaluation_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let spec = random_modular_spec(&mut rng, 1, 2);
        let data = random_dataset(&mut rng, 3, 4, 1);
        let a = evaluate_sampled(&spec, &data, &eval_config(1000, 4)).unwrap();
        let b = evaluate_sampled(&spec, &data, &eval_config(1000, 4)).unwrap();
        assert_eq!(a, b);
        let c = evaluate_sampled(&spec, &data, &eval_config(1000, 5)).unwrap();
        assert_ne!(a.sampled_loss, c.sampled_loss);
    }

    #[test]
    fn evaluation_gap_shrinks_with_more_shots() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = random_modular_spec(&mut rng, 1, 2);
        let data = random_dataset(&mut rng, 4, 4, 1);
        let mut larger = 0;
        let trials = 10;
        for seed in 0..trials {
            let coarse = evaluate_sampled(&spec, &data, &eval_config(100, seed)).unwrap();
            let fine = evaluate_sampled(&spec, &data, &eval_config(100_000, seed)).unwrap();
            if coarse.gap > fine.gap {
                larger += 1;
            }
        }
        assert!(larger >= 8, "coarse gap larger in only {larger}/{trials}");
    }

    #[test]
    fn evaluation_tracks_oracle_at_large_shots() {
        let (spec, data) = quarter_fixture();
        let report = evaluate_sampled(&spec, &data, &eval_config(1_000_000, 17)).unwrap();
        assert!((report.oracle_loss - 0.0625).abs() < 1e-12);
        // |f − ¼| ≤ 5/√𝒩 propagates to the loss gap via (f² − ¼²)
        assert!(report.gap < 5e-3);
    }
}
