//! `qhenn`: reproducible runs of the QHE protocol, the Clifford+T transpiler,
//! federated training, private inference and the privacy audit.
//!
//! Exit codes: 0 success, 1 usage, 2 contract violation, 3 I/O.

mod commands;
mod config;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qhenn_core::fedtrain::EvalBackend;
use qhenn_core::qcnn::Encoding;

use config::DataSource;

#[derive(Parser)]
#[command(name = "qhenn", version, about = "Quantum homomorphic encryption for QCNNs on a statevector simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encrypt, evaluate and decrypt a random Clifford+T circuit, with a self-check.
    Demo(DemoArgs),
    /// Approximate R_Z(theta) by a Clifford+T word.
    Synth(SynthArgs),
    /// Lower a circuit to {X, Z, H, S, T, CNOT}.
    Transpile(TranspileArgs),
    /// Plaintext training of a QCNN classifier.
    Fit(FitArgs),
    /// Federated training on encrypted data from single-class providers.
    Train(TrainArgs),
    /// Homomorphic inference of a trained model on test samples.
    Infer(InferArgs),
    /// Train several models and compare accuracy with and without Pauli gates.
    Audit(AuditArgs),
}

#[derive(Args)]
pub struct DemoArgs {
    /// Register size.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..=10))]
    pub qubits: u16,
    /// Number of T gates in the circuit.
    #[arg(long, default_value_t = 3)]
    pub t_gates: usize,
    /// Number of non-T gates; defaults to 2 * t_gates + 4.
    #[arg(long)]
    pub clifford_gates: Option<usize>,
    /// Readout shots, each with a fresh key.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub shots: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the transcript here (with a manifest beside it).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Rotation angle in radians.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    /// Phase-invariant distance tolerance.
    #[arg(long, default_value_t = 1e-2)]
    pub epsilon: f64,
    /// Largest T-count explored by the search.
    #[arg(long, default_value_t = 34)]
    pub max_depth: usize,
    /// Also write the result here (with a manifest beside it).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["input", "ansatz", "model"]))]
pub struct TranspileArgs {
    /// Circuit JSON file.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Build the n-qubit ansatz with random weights drawn from --seed.
    #[arg(long)]
    pub ansatz: Option<usize>,
    /// Bind the ansatz to the weights of a model JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Total error budget split evenly over all R_Z gates.
    #[arg(long, conflicts_with = "epsilon")]
    pub budget: Option<f64>,
    /// Per-rotation tolerance when no budget is given.
    #[arg(long, default_value_t = 1e-2)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 34)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output circuit JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Report JSON; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args)]
pub struct DataArgs {
    /// Dataset; defaults to digits_pca for qubit encoding and digits otherwise.
    #[arg(long, value_enum)]
    pub data: Option<DataSource>,
    /// CSV path for --data csv.
    #[arg(long)]
    pub data_path: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = 0.8)]
    pub train_ratio: f64,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum EncodingArg {
    Qubit,
    Amplitude,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Qubit => Encoding::Qubit,
            EncodingArg::Amplitude => Encoding::Amplitude,
        }
    }
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long, default_value_t = 8)]
    pub qubits: usize,
    #[arg(long, value_enum, default_value = "amplitude")]
    pub encoding: EncodingArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 300)]
    pub iterations: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model JSON output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Plain,
    QheExact,
    QheShots,
}

impl From<BackendArg> for EvalBackend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Plain => EvalBackend::Plain,
            BackendArg::QheExact => EvalBackend::QheExact,
            BackendArg::QheShots => EvalBackend::QheShots,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// TOML run configuration; the bundled digits configuration when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for log.csv, model.json, summary.json and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write the classical message trace as trace.jsonl.
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub shots: Option<usize>,
    /// Shots sharing one key; 0 for a fresh key per shot.
    #[arg(long)]
    pub shots_per_key: Option<usize>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Args)]
pub struct InferArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of test samples, taken in order from --offset.
    #[arg(long, default_value_t = 5)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
    #[arg(long, default_value_t = 1024)]
    pub shots: usize,
    /// Shots sharing one key; 0 for a fresh key per shot.
    #[arg(long, default_value_t = 0)]
    pub shots_per_key: usize,
    /// Total synthesis budget for the model circuit.
    #[arg(long, default_value_t = 0.1)]
    pub budget: f64,
    #[arg(long, default_value_t = 34)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Results JSON output.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct AuditArgs {
    #[arg(long, default_value_t = 10)]
    pub instances: usize,
    #[arg(long, default_value_t = 8)]
    pub qubits: usize,
    #[arg(long, value_enum, default_value = "amplitude")]
    pub encoding: EncodingArg,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 300)]
    pub iterations: usize,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Total synthesis budget per model circuit.
    #[arg(long, default_value_t = 1.0)]
    pub budget: f64,
    #[arg(long, default_value_t = 34)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Flag the instance whose stripped accuracy is closest to 0.5.
    #[arg(long)]
    pub retrain_select: bool,
    /// CSV output.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Demo(a) => commands::demo(a),
        Command::Synth(a) => commands::synth(a),
        Command::Transpile(a) => commands::transpile(a),
        Command::Fit(a) => commands::fit(a),
        Command::Train(a) => commands::train(a),
        Command::Infer(a) => commands::infer(a),
        Command::Audit(a) => commands::audit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
