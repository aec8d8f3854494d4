//! Command-line harness: swap-test comparisons, network predictions, layout
//! planning, training runs, and a self-check suite.
//!
//! Exit codes: 0 on success, 1 for configuration or validation problems,
//! 2 for runtime or numeric failures. `SWAPNET_THREADS` overrides the worker
//! thread count; results are identical for any setting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};

use swapnet::{
    estimate, measure_lossy, oracle_network, plan_layout, predict, rng::domains, rng::substream,
    swap_test_analytic, swap_test_circuit, trace_to_csv, train, Dataset, Error, LossMode,
    NetworkSpec, ProtocolConfig, QState, TrainConfig,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "swapnet",
    version,
    about = "Modular swap-test network simulator",
    after_help = "Environment:\n  SWAPNET_THREADS  worker thread count (output is identical for any value)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LossModeArg {
    StochasticThinning,
    DeterministicCount,
}

impl From<LossModeArg> for LossMode {
    fn from(v: LossModeArg) -> Self {
        match v {
            LossModeArg::StochasticThinning => LossMode::StochasticThinning,
            LossModeArg::DeterministicCount => LossMode::DeterministicCount,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compare analytic, circuit-simulated, and optionally sampled
    /// swap-test outcome probabilities for two vectors.
    Swaptest {
        /// First vector, comma-separated components.
        psi: String,
        /// Second vector, comma-separated components.
        phi: String,
        /// Also sample the outcome with this many shots.
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a network prediction and compare it with the exact oracle.
    Predict {
        /// Network description (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Input vector, comma-separated components.
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Require the config to declare this topology.
        #[arg(long)]
        topology: Option<String>,
        #[arg(long, value_enum, default_value_t = LossModeArg::StochasticThinning)]
        loss_mode: LossModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan how many modules and qubits an input dimension needs.
    Layout {
        /// Input vector dimension.
        n: usize,
        /// Qubits per module register.
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit weights and efficiencies to a dataset on the exact oracle.
    Train {
        /// Run description (JSON): {"network": ..., "train": ...}.
        #[arg(long)]
        config: PathBuf,
        /// Dataset file: header row "N,Q", then comma-separated rows.
        #[arg(long)]
        data: PathBuf,
        /// Directory for trained_spec.json, loss_trace.csv, train_report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in invariant checks and exit nonzero on any failure.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        shots: u64,
    },
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DivergenceDetected { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let failed = e.use_stderr();
            let _ = e.print();
            return if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }

    let outcome = match cli.command {
        Command::Swaptest {
            psi,
            phi,
            shots,
            seed,
            out,
        } => cmd_swaptest(&psi, &phi, shots, seed, out.as_deref()),
        Command::Predict {
            config,
            input,
            shots,
            seed,
            topology,
            loss_mode,
            out,
        } => cmd_predict(
            &config,
            &input,
            shots,
            seed,
            topology.as_deref(),
            loss_mode.into(),
            out.as_deref(),
        ),
        Command::Layout { n, k, out } => cmd_layout(n, k, out.as_deref()),
        Command::Train { config, data, out } => cmd_train(&config, &data, &out),
        Command::Verify { seed, shots } => cmd_verify(seed, shots),
    };

    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("SWAPNET_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .map_err(|_| format!("SWAPNET_THREADS must be a positive integer, got {value:?}"))?;
    if threads == 0 {
        return Err("SWAPNET_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool setup failed: {e}"))
}

fn parse_vector(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|f| {
            f.trim()
                .parse()
                .map_err(|e| CliError::Validation(format!("component {f:?}: {e}")))
        })
        .collect()
}

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn emit_report<T: Serialize>(report: &T, out: Option<&Path>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Runtime(format!("report serialization failed: {e}")))?;
    println!("{json}");
    if let Some(path) = out {
        write_file(path, &format!("{json}\n"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SampledBlock {
    shots: u64,
    p_zero: f64,
    error_bound: f64,
    error_bound_formula: &'static str,
}

#[derive(Serialize)]
struct SwaptestReport {
    version: &'static str,
    seed: u64,
    num_qubits: usize,
    analytic_p_zero: f64,
    circuit_p_zero: f64,
    overlap_sq: f64,
    sampled: Option<SampledBlock>,
}

fn cmd_swaptest(
    psi: &str,
    phi: &str,
    shots: Option<u64>,
    seed: u64,
    out: Option<&Path>,
) -> CliResult<()> {
    let psi = swapnet::amplitude_encode(&parse_vector(psi)?)?;
    let phi = swapnet::amplitude_encode(&parse_vector(phi)?)?;
    let analytic = swap_test_analytic(&psi, &phi)?;
    let circuit = swap_test_circuit(&psi, &phi)?;
    let sampled = match shots {
        None => None,
        Some(0) => {
            return Err(CliError::Validation("shots must be at least 1".into()));
        }
        Some(n) => {
            let mut rng = substream(seed, domains::PROTOCOL_QUBIT, 0, 0, 0);
            let string = measure_lossy(
                analytic.p_zero,
                1.0,
                n,
                &mut rng,
                LossMode::StochasticThinning,
            )?;
            let report = estimate(&[string], n);
            Some(SampledBlock {
                shots: n,
                p_zero: report.f_hat,
                error_bound: report.std_error_bound,
                error_bound_formula: "1/sqrt(shots)",
            })
        }
    };
    emit_report(
        &SwaptestReport {
            version: VERSION,
            seed,
            num_qubits: psi.num_qubits(),
            analytic_p_zero: analytic.p_zero,
            circuit_p_zero: circuit.p_zero,
            overlap_sq: analytic.overlap_sq,
            sampled,
        },
        out,
    )
}

#[derive(Serialize)]
struct PredictReport {
    version: &'static str,
    seed: u64,
    shots: u64,
    topology: String,
    loss_mode: LossMode,
    values: Vec<f64>,
    oracle: Vec<f64>,
    gap: Vec<f64>,
    error_bound: f64,
    error_bound_formula: &'static str,
}

fn cmd_predict(
    config: &Path,
    input: &str,
    shots: u64,
    seed: u64,
    topology: Option<&str>,
    loss_mode: LossMode,
    out: Option<&Path>,
) -> CliResult<()> {
    let spec = NetworkSpec::from_json(&read_file(config)?)?;
    if let Some(required) = topology {
        if required != spec.topology_name() {
            return Err(CliError::Validation(format!(
                "config declares topology {:?}, --topology requires {required:?}",
                spec.topology_name()
            )));
        }
    }
    let x = parse_vector(input)?;
    let cfg = ProtocolConfig {
        shots,
        efficiencies: Vec::new(),
        loss_mode,
        seed,
        joint_sampling: false,
    };
    let sampled = predict(&x, &spec, &cfg)?;
    let oracle = oracle_network(&x, &spec)?;
    let gap = sampled
        .values
        .iter()
        .zip(&oracle.values)
        .map(|(s, o)| (s - o).abs())
        .collect();
    emit_report(
        &PredictReport {
            version: VERSION,
            seed,
            shots,
            topology: spec.topology_name().to_string(),
            loss_mode,
            values: sampled.values,
            oracle: oracle.values,
            gap,
            error_bound: sampled.error_bound,
            error_bound_formula: spec.error_bound_formula(),
        },
        out,
    )
}

#[derive(Serialize)]
struct LayoutReport {
    version: &'static str,
    n: usize,
    k: usize,
    m: usize,
    qubits_per_module: usize,
    total_qubits: usize,
}

fn cmd_layout(n: usize, k: usize, out: Option<&Path>) -> CliResult<()> {
    if n == 0 || k == 0 {
        return Err(CliError::Validation(
            "dimension and register size must be positive".into(),
        ));
    }
    let layout = plan_layout(n, k);
    emit_report(
        &LayoutReport {
            version: VERSION,
            n,
            k,
            m: layout.m,
            qubits_per_module: 2 * k + 1,
            total_qubits: layout.total_qubits(),
        },
        out,
    )
}

#[derive(Deserialize)]
struct TrainRunConfig {
    network: NetworkSpec,
    #[serde(default)]
    train: TrainConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        unreachable!()
    }
}

#[derive(Serialize)]
struct TrainReport {
    version: &'static str,
    seed: u64,
    epochs_run: usize,
    initial_loss: f64,
    final_loss: f64,
    spec_path: String,
    trace_path: String,
}

fn cmd_train(config: &Path, data: &Path, out: &Path) -> CliResult<()> {
    let run: TrainRunConfig = serde_json::from_str(&read_file(config)?)
        .map_err(|e| CliError::Validation(format!("{}: {e}", config.display())))?;
    run.network.validate()?;
    let dataset = Dataset::from_text(&read_file(data)?)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;

    let result = train(&run.network, &dataset, &run.train)?;
    let spec_path = out.join("trained_spec.json");
    let trace_path = out.join("loss_trace.csv");
    write_file(&spec_path, &format!("{}\n", result.spec.to_json()?))?;
    write_file(&trace_path, &trace_to_csv(&result.trace))?;
    emit_report(
        &TrainReport {
            version: VERSION,
            seed: run.train.seed,
            epochs_run: result.epochs_run,
            initial_loss: result.trace[0],
            final_loss: *result.trace.last().unwrap(),
            spec_path: spec_path.display().to_string(),
            trace_path: trace_path.display().to_string(),
        },
        Some(&out.join("train_report.json")),
    )
}

fn random_state(rng: &mut impl Rng, num_qubits: usize) -> QState {
    use num_complex::Complex64;
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

fn random_piece(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if v.iter().map(|x| x * x).sum::<f64>().sqrt() > 0.3 {
            return v;
        }
    }
}

fn cmd_verify(seed: u64, shots: u64) -> CliResult<()> {
    if shots == 0 {
        return Err(CliError::Validation("shots must be at least 1".into()));
    }
    let mut failures = 0usize;
    let mut check = |name: &str, pass: bool, detail: String| {
        if pass {
            println!("ok   {name}");
        } else {
            println!("FAIL {name}: {detail}");
            failures += 1;
        }
    };

    // circuit simulation against the closed form
    {
        let mut rng = substream(seed, domains::NETWORK_BATCH, 100, 0, 0);
        let mut worst: f64 = 0.0;
        for k in 1..=4 {
            for _ in 0..25 {
                let psi = random_state(&mut rng, k);
                let phi = random_state(&mut rng, k);
                let a = swap_test_analytic(&psi, &phi).map_err(CliError::from)?;
                let c = swap_test_circuit(&psi, &phi).map_err(CliError::from)?;
                worst = worst.max((a.p_zero - c.p_zero).abs());
            }
        }
        check(
            "circuit matches analytic",
            worst <= 1e-12,
            format!("worst gap {worst:.3e}"),
        );
    }

    // layout arithmetic
    {
        let layout = plan_layout(128, 5);
        check(
            "layout 128/5 gives 4 modules, 44 qubits",
            layout.m == 4 && layout.total_qubits() == 44,
            format!("m={} qubits={}", layout.m, layout.total_qubits()),
        );
    }

    // sampled modular predictions against the oracle
    {
        let mut rng = substream(seed, domains::NETWORK_BATCH, 101, 0, 0);
        let mut inside = 0;
        let trials = 8;
        for t in 0..trials {
            let k = rng.gen_range(1..=2usize);
            let m = rng.gen_range(1..=3usize);
            let spec = NetworkSpec::Modular {
                k,
                m,
                partition_mode: Default::default(),
                weights: (0..m).map(|_| random_piece(&mut rng, 1 << k)).collect(),
                efficiencies: (0..m).map(|_| rng.gen_range(0.1..1.0)).collect(),
                pad_value: 0.0,
            };
            let x = random_piece(&mut rng, m << k);
            let cfg = ProtocolConfig {
                shots,
                efficiencies: Vec::new(),
                loss_mode: LossMode::StochasticThinning,
                seed: seed.wrapping_add(t),
                joint_sampling: false,
            };
            let sampled = predict(&x, &spec, &cfg).map_err(CliError::from)?;
            let oracle = oracle_network(&x, &spec).map_err(CliError::from)?;
            if (sampled.values[0] - oracle.values[0]).abs() <= 5.0 / (shots as f64).sqrt() {
                inside += 1;
            }
        }
        check(
            "modular sampling tracks oracle",
            inside + 1 >= trials,
            format!("{inside}/{trials} inside the 5/sqrt(shots) band"),
        );
    }

    // sampled multi-output predictions against the oracle
    {
        let mut rng = substream(seed, domains::NETWORK_BATCH, 102, 0, 0);
        let mut inside = 0;
        let trials = 6;
        for t in 0..trials {
            let k = 2usize;
            let r = rng.gen_range(2..=3usize);
            let q = rng.gen_range(1..=3usize);
            let spec = NetworkSpec::Full {
                k,
                r,
                q,
                weights: (0..r).map(|_| random_piece(&mut rng, 1 << k)).collect(),
                efficiencies: (0..r)
                    .map(|_| (0..q).map(|_| rng.gen_range(0.1..1.0)).collect())
                    .collect(),
            };
            let x = random_piece(&mut rng, 1 << k);
            let cfg = ProtocolConfig {
                shots,
                efficiencies: Vec::new(),
                loss_mode: LossMode::StochasticThinning,
                seed: seed.wrapping_add(200 + t),
                joint_sampling: false,
            };
            let sampled = predict(&x, &spec, &cfg).map_err(CliError::from)?;
            let oracle = oracle_network(&x, &spec).map_err(CliError::from)?;
            let band = 5.0 / (r as f64 * shots as f64).sqrt();
            if sampled
                .values
                .iter()
                .zip(&oracle.values)
                .all(|(s, o)| (s - o).abs() <= band)
            {
                inside += 1;
            }
        }
        check(
            "multi-output sampling tracks oracle",
            inside + 1 >= trials,
            format!("{inside}/{trials} inside the 5/sqrt(r*shots) band"),
        );
    }

    // shot-noise scaling
    {
        let spread = |n: u64| {
            let reps = 50;
            let freqs: Vec<f64> = (0..reps)
                .map(|i| {
                    let mut rng = substream(seed, domains::NETWORK_BATCH, 103, n, i);
                    let s = measure_lossy(0.3, 1.0, n, &mut rng, LossMode::StochasticThinning)
                        .unwrap();
                    s.count_zero() as f64 / n as f64
                })
                .collect();
            let mean = freqs.iter().sum::<f64>() / reps as f64;
            (freqs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt()
        };
        let ratio = spread(100) / spread(10_000);
        check(
            "estimator spread scales like 1/sqrt(shots)",
            (6.0..=16.0).contains(&ratio),
            format!("spread ratio {ratio:.2} outside [6, 16]"),
        );
    }

    println!(
        "verify: {} checks failed (version {VERSION}, seed {seed}, shots {shots})",
        failures
    );
    if failures > 0 {
        return Err(CliError::Runtime(format!("{failures} checks failed")));
    }
    Ok(())
}
