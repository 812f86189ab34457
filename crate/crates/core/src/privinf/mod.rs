//! Private inference and the server-circuit privacy audit.
//!
//! A client holding a feature vector encrypts its amplitude-encoded state and
//! has the server run a trained model homomorphically; only the client can
//! decrypt the readout. The audit asks how much a client learns about the
//! model from the key-update program: that program reveals every H, S, T and
//! CNOT of the transpiled circuit but none of its X and Z gates.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::qcnn::{
    accuracy, build_ansatz, encode_amplitude, fit, init_theta, predict, Encoding, FitConfig, Model,
};
use crate::qhe::{keygen, qotp_apply, run_protocol_counts, KeySchedule, KeyUpdateProgram};
use crate::rng::{child_rng, child_seed};
use crate::sim::{Circuit, StateVector};
use crate::synth::{strip_paulis, transpile, SynthConfig, TranspileReport};

/// A model together with the Clifford+T circuit the server actually runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerModel {
    pub model: Model,
    pub circuit: Circuit,
    pub report: TranspileReport,
}

impl ServerModel {
    pub fn compile(model: Model, total_budget: f64, config: &SynthConfig) -> Result<Self> {
        let spec = model.spec()?;
        let (circuit, report) = transpile(&spec.bind(&model.theta)?, Some(total_budget), config)?;
        Ok(ServerModel {
            model,
            circuit,
            report,
        })
    }

    /// Exact plaintext `P(1)` of `circuit` (or the stored circuit) on `x`.
    pub fn exact_prob(&self, circuit: Option<&Circuit>, x: &[f64]) -> Result<f64> {
        let mut s = self.model.prepare(x)?;
        s.apply_circuit(circuit.unwrap_or(&self.circuit))?;
        s.prob_one(self.model.readout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    /// Fraction of ones on the readout before decryption.
    pub encrypted_prob: f64,
    /// Fraction of ones after XOR with the final x bit.
    pub decrypted_prob: f64,
    pub predicted_label: bool,
    pub true_label: Option<bool>,
    pub shots: usize,
}

/// Encrypts `x`, runs the server's circuit homomorphically `shots` times and decrypts.
pub fn private_infer<R: Rng + ?Sized>(
    x: &[f64],
    server: &ServerModel,
    shots: usize,
    schedule: KeySchedule,
    true_label: Option<bool>,
    rng: &mut R,
) -> Result<InferenceResult> {
    let input = server.model.prepare(x)?;
    let c = run_protocol_counts(&server.circuit, &input, server.model.readout, shots, schedule, rng)?;
    let decrypted_prob = c.decrypted_fraction();
    Ok(InferenceResult {
        encrypted_prob: c.encrypted_fraction(),
        decrypted_prob,
        predicted_label: predict(decrypted_prob),
        true_label,
        shots,
    })
}

/// Histogram over `2^n` basis outcomes of the amplitude-encoded `x`.
///
/// With `encrypted`, every shot measures a freshly QOTP-encrypted copy.
pub fn sample_state_image<R: Rng + ?Sized>(
    x: &[f64],
    n: usize,
    shots: usize,
    encrypted: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let state = encode_amplitude(x, n)?;
    let mut hist = vec![0usize; 1 << n];
    if encrypted {
        for _ in 0..shots {
            let key = keygen(n, rng)?;
            hist[qotp_apply(&state, &key)?.sample_index(rng)] += 1;
        }
    } else {
        for i in state.sample_indices(shots, rng)? {
            hist[i] += 1;
        }
    }
    Ok(hist)
}

/// The circuit a client can rebuild from a key-update program: one gate per step.
pub fn reconstruct_client_view(program: &KeyUpdateProgram) -> Result<Circuit> {
    Circuit::from_gates(program.n(), program.steps().iter().map(|s| s.gate()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyRecord {
    pub index: usize,
    pub server_acc: f64,
    pub non_pauli_acc: f64,
    /// `|non_pauli_acc − 0.5|`.
    pub abs_distance: f64,
    /// Set on the instance a retrain-and-select server would deploy.
    pub selected: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub n_qubits: usize,
    pub fit: FitConfig,
    /// Total synthesis budget per model circuit.
    pub epsilon_budget: f64,
    pub max_search_depth: usize,
    pub seed: u64,
    /// Mark the most private instance (smallest `|non_pauli_acc − 0.5|`).
    pub retrain_select: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            n_qubits: 8,
            fit: FitConfig::default(),
            epsilon_budget: 1.0,
            max_search_depth: SynthConfig::default().max_search_depth,
            seed: 0,
            retrain_select: false,
        }
    }
}

fn prepared(data: &Dataset, encoding: Encoding, n: usize) -> Result<Vec<(StateVector, bool)>> {
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| Ok((encoding.prepare(x, n)?, y)))
        .collect()
}

fn circuit_accuracy(c: &Circuit, readout: usize, data: &[(StateVector, bool)]) -> Result<f64> {
    let mut hits = 0;
    for (s, y) in data {
        let mut s = s.clone();
        s.apply_circuit(c)?;
        hits += (predict(s.prob_one(readout)?) == *y) as usize;
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Trains one model on `train` from the seed's `index`-th stream.
pub fn train_instance(
    index: usize,
    encoding: Encoding,
    train: &Dataset,
    config: &AuditConfig,
) -> Result<Model> {
    let spec = build_ansatz(config.n_qubits)?;
    let data = prepared(train, encoding, config.n_qubits)?;
    let mut rng = child_rng(child_seed(config.seed, 0xA0D1), index as u64);
    let theta0 = init_theta(&spec, &mut rng);
    let r = fit(&spec, &data, theta0, &config.fit, &mut rng)?;
    Model::new(&spec, encoding, r.theta)
}

fn audit_instance(
    index: usize,
    encoding: Encoding,
    train: &Dataset,
    test: &[(StateVector, bool)],
    config: &AuditConfig,
) -> Result<(f64, f64)> {
    let model = train_instance(index, encoding, train, config)?;
    let synth = SynthConfig {
        max_search_depth: config.max_search_depth,
        ..SynthConfig::default()
    };
    let server = ServerModel::compile(model, config.epsilon_budget, &synth)?;
    let stripped = strip_paulis(&server.circuit);
    Ok((
        circuit_accuracy(&server.circuit, server.model.readout, test)?,
        circuit_accuracy(&stripped, server.model.readout, test)?,
    ))
}

/// Trains `n_instances` independent models and compares each transpiled
/// circuit's test accuracy with that of its Pauli-stripped version.
///
/// A failing instance is recorded with NaN accuracies and its error.
pub fn privacy_audit(
    n_instances: usize,
    encoding: Encoding,
    train: &Dataset,
    test: &Dataset,
    config: &AuditConfig,
) -> Result<Vec<PrivacyRecord>> {
    if n_instances == 0 {
        return Err(Error::InvalidInput("n_instances must be >= 1".into()));
    }
    let test = prepared(test, encoding, config.n_qubits)?;
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    let mut out: Vec<PrivacyRecord> = (0..n_instances)
        .map(|i| match audit_instance(i, encoding, train, &test, config) {
            Ok((server_acc, non_pauli_acc)) => PrivacyRecord {
                index: i,
                server_acc,
                non_pauli_acc,
                abs_distance: (non_pauli_acc - 0.5).abs(),
                selected: false,
                error: None,
            },
            Err(e) => PrivacyRecord {
                index: i,
                server_acc: f64::NAN,
                non_pauli_acc: f64::NAN,
                abs_distance: f64::NAN,
                selected: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    if config.retrain_select {
        if let Some(best) = out
            .iter()
            .filter(|r| r.error.is_none())
            .min_by(|a, b| a.abs_distance.total_cmp(&b.abs_distance))
            .map(|r| r.index)
        {
            out[best].selected = true;
        }
    }
    Ok(out)
}

/// `index,server_acc,non_pauli_acc,abs_distance`
pub fn audit_csv(records: &[PrivacyRecord]) -> String {
    let mut s = String::from("index,server_acc,non_pauli_acc,abs_distance\n");
    for r in records {
        s += &format!(
            "{},{},{},{}\n",
            r.index, r.server_acc, r.non_pauli_acc, r.abs_distance
        );
    }
    s
}

/// Test accuracy of a plaintext model, for reporting alongside the audit.
pub fn model_accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    let spec = model.spec()?;
    accuracy(&spec, &model.theta, &prepared(data, model.encoding, model.n_qubits)?)
}
