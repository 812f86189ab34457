//! Reverse delegated training.
//!
//! The network owner holds the weights and plays the QHE server; each data
//! provider holds labelled samples and plays the QHE client. For every
//! scheduled parameter vector the provider encrypts its encoded sample, the
//! owner evaluates the transpiled circuit homomorphically, and the provider
//! decrypts the readout and returns only its partial loss, partial gradient
//! and sample count. The owner aggregates and takes an Adam step.

mod messages;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::qcnn::{
    cross_entropy, gradient_with, loss_factor, AdamState, AnsatzSpec, Encoding, Shift,
};
use crate::qhe::{run_protocol_counts, run_protocol_exact, KeySchedule};
use crate::rng::{child_rng, child_seed, label_tag, SimRng};
use crate::sim::{Circuit, StateVector};
use crate::synth::{transpile, SynthConfig};

pub use messages::{check_privacy, Direction, Payload, RoundMessage};

/// One labelled feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: bool,
}

/// A data provider's private samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientDataset {
    pub id: String,
    pub samples: Vec<Sample>,
}

impl ClientDataset {
    pub fn new(id: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let id = id.into();
        if samples.is_empty() {
            return Err(Error::InvalidInput(format!("client {id:?} has no samples")));
        }
        Ok(ClientDataset { id, samples })
    }
}

/// Rows of `data` as samples.
pub fn samples_of(data: &Dataset) -> Vec<Sample> {
    data.features
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| Sample { x: x.clone(), y })
        .collect()
}

/// Two providers holding one class each: `A` all label-0 rows, `B` all label-1 rows.
pub fn single_class_providers(data: &Dataset) -> Result<Vec<ClientDataset>> {
    Ok(vec![
        ClientDataset::new("A", samples_of(&data.class(false)))?,
        ClientDataset::new("B", samples_of(&data.class(true)))?,
    ])
}

/// How each scheduled circuit evaluation is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalBackend {
    /// Exact plaintext expectation on the untranspiled circuit (no encryption).
    Plain,
    /// Transpile, encrypt and evaluate homomorphically; exact readout probability.
    QheExact,
    /// Transpile, encrypt and evaluate homomorphically; sampled readout.
    QheShots,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_per_client: usize,
    pub shots: usize,
    /// Shots sharing one key; 0 means a fresh key per shot.
    pub shots_per_key: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// Total synthesis error budget per transpiled circuit.
    pub epsilon_budget: f64,
    pub max_search_depth: usize,
    pub backend: EvalBackend,
    pub encoding: Encoding,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 300,
            batch_per_client: 1,
            shots: 1024,
            shots_per_key: 0,
            alpha: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            epsilon_budget: 0.1,
            max_search_depth: SynthConfig::default().max_search_depth,
            backend: EvalBackend::QheShots,
            encoding: Encoding::Qubit,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_per_client == 0 {
            return bad("batch_per_client must be >= 1");
        }
        if self.shots == 0 {
            return bad("shots must be >= 1");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.eps_adam > 0.0) {
            return bad("eps_adam must be positive");
        }
        if !(self.epsilon_budget > 0.0 && self.epsilon_budget.is_finite()) {
            return bad("epsilon_budget must be positive");
        }
        self.synth_config().validate()
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            max_search_depth: self.max_search_depth,
            ..SynthConfig::default()
        }
    }

    fn schedule(&self) -> KeySchedule {
        match self.shots_per_key {
            0 => KeySchedule::FreshPerShot,
            k => KeySchedule::ShotsPerKey(k),
        }
    }
}

/// What one provider returns for one round, plus its undecrypted counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientPartial {
    pub client: String,
    /// `Σ l` over the batch.
    pub loss: f64,
    /// `Σ ∂l/∂θ` over the batch.
    pub grad: Vec<f64>,
    pub n_samples: usize,
    /// Same sums computed from encrypted (undecrypted) readouts.
    pub encrypted_loss: f64,
    pub encrypted_grad: Vec<f64>,
}

/// `(Σ L_k / Σ|X_k|, Σ ∇L_k / Σ|X_k|)`, summed in ascending client-id order.
pub fn aggregate(partials: &[(String, f64, Vec<f64>, usize)]) -> Result<(f64, Vec<f64>)> {
    if partials.is_empty() {
        return Err(Error::InvalidInput("no partial results to aggregate".into()));
    }
    let dim = partials[0].2.len();
    let mut order: Vec<usize> = (0..partials.len()).collect();
    order.sort_by(|&a, &b| partials[a].0.cmp(&partials[b].0));
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim];
    let mut n = 0usize;
    for i in order {
        let (_, l, g, k) = &partials[i];
        if g.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: g.len(),
            });
        }
        loss += l;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        n += k;
    }
    if n == 0 {
        return Err(Error::InvalidInput("total sample count is zero".into()));
    }
    grad.iter_mut().for_each(|g| *g /= n as f64);
    Ok((loss / n as f64, grad))
}

/// Decrypted and encrypted readout of one circuit evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Readout {
    decrypted: f64,
    encrypted: f64,
}

/// Server side: the bound circuit for one schedule entry, transpiled unless running plain.
fn server_circuit(
    spec: &AnsatzSpec,
    theta: &[f64],
    shift: Option<Shift>,
    config: &TrainConfig,
) -> Result<Circuit> {
    let bound = spec.bind_shifted(theta, shift)?;
    match config.backend {
        EvalBackend::Plain => Ok(bound),
        _ => Ok(transpile(&bound, Some(config.epsilon_budget), &config.synth_config())?.0),
    }
}

fn evaluate(
    circuit: &Circuit,
    input: &StateVector,
    readout: usize,
    config: &TrainConfig,
    rng: &mut SimRng,
) -> Result<Readout> {
    match config.backend {
        EvalBackend::Plain => {
            let mut s = input.clone();
            s.apply_circuit(circuit)?;
            let p = s.prob_one(readout)?;
            Ok(Readout {
                decrypted: p,
                encrypted: p,
            })
        }
        EvalBackend::QheExact => {
            let r = run_protocol_exact(circuit, input, readout, rng)?;
            Ok(Readout {
                decrypted: r.decrypted,
                encrypted: r.encrypted,
            })
        }
        EvalBackend::QheShots => {
            let c = run_protocol_counts(circuit, input, readout, config.shots, config.schedule(), rng)?;
            Ok(Readout {
                decrypted: c.decrypted_fraction(),
                encrypted: c.encrypted_fraction(),
            })
        }
    }
}

/// One provider's round over `batch`: every schedule entry is evaluated
/// through the protocol and combined into `l` and `∂l/∂θ` client-side.
///
/// `trace` receives the messages exchanged.
pub fn client_round(
    client_id: &str,
    batch: &[Sample],
    spec: &AnsatzSpec,
    theta: &[f64],
    config: &TrainConfig,
    rng: &mut SimRng,
    trace: &mut Vec<RoundMessage>,
) -> Result<ClientPartial> {
    let schedule = spec.shift_schedule();
    let mut circuits = Vec::with_capacity(schedule.len() + 1);
    circuits.push(server_circuit(spec, theta, None, config)?);
    for term in &schedule {
        circuits.push(server_circuit(spec, theta, Some(term.shift), config)?);
    }
    let mut out = ClientPartial {
        client: client_id.to_string(),
        loss: 0.0,
        grad: vec![0.0; spec.n_params()],
        n_samples: batch.len(),
        encrypted_loss: 0.0,
        encrypted_grad: vec![0.0; spec.n_params()],
    };
    for sample in batch {
        let input = config.encoding.prepare(&sample.x, spec.n_qubits)?;
        let mut reads = Vec::with_capacity(circuits.len());
        for (k, c) in circuits.iter().enumerate() {
            trace.push(RoundMessage::to_client(
                client_id,
                Payload::EvalRequest {
                    index: k,
                    param: k.checked_sub(1).map(|i| schedule[i].param),
                    shift: k.checked_sub(1).map(|i| schedule[i].shift.delta),
                },
            ));
            trace.push(RoundMessage::to_server(
                client_id,
                Payload::EncryptedState {
                    index: k,
                    n_qubits: spec.n_qubits,
                },
            ));
            reads.push(evaluate(c, &input, spec.readout_qubit, config, rng)?);
            trace.push(RoundMessage::to_client(
                client_id,
                Payload::EncryptedResult { index: k },
            ));
        }
        let mut idx = 1;
        let df = gradient_with(spec, |_| {
            idx += 1;
            Ok(reads[idx - 1].decrypted)
        })?;
        let mut idx = 1;
        let df_enc = gradient_with(spec, |_| {
            idx += 1;
            Ok(reads[idx - 1].encrypted)
        })?;
        let (f, f_enc) = (reads[0].decrypted, reads[0].encrypted);
        out.loss += cross_entropy(f, sample.y);
        out.encrypted_loss += cross_entropy(f_enc, sample.y);
        let (k, k_enc) = (loss_factor(f, sample.y), loss_factor(f_enc, sample.y));
        for i in 0..spec.n_params() {
            out.grad[i] += k * df[i];
            out.encrypted_grad[i] += k_enc * df_enc[i];
        }
    }
    trace.push(RoundMessage::to_server(
        client_id,
        Payload::PartialLoss { value: out.loss },
    ));
    trace.push(RoundMessage::to_server(
        client_id,
        Payload::PartialGradient {
            values: out.grad.clone(),
        },
    ));
    trace.push(RoundMessage::to_server(
        client_id,
        Payload::SampleSize { n: batch.len() },
    ));
    Ok(out)
}

/// Per-client contribution recorded in the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientContribution {
    pub client: String,
    pub loss: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss_decrypted: f64,
    pub loss_encrypted: f64,
    pub grad_norm: f64,
    /// Weights after this iteration's update.
    pub theta: Vec<f64>,
    pub clients: Vec<ClientContribution>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<IterationRecord>,
}

impl TrainingLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn decrypted_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss_decrypted).collect()
    }

    pub fn encrypted_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss_encrypted).collect()
    }

    /// `iteration,loss_decrypted,loss_encrypted,grad_norm,theta_0,...`
    pub fn to_csv(&self) -> String {
        let dim = self.records.first().map_or(0, |r| r.theta.len());
        let mut s = String::from("iteration,loss_decrypted,loss_encrypted,grad_norm");
        for i in 0..dim {
            s += &format!(",theta_{i}");
        }
        s.push('\n');
        for r in &self.records {
            s += &format!(
                "{},{},{},{}",
                r.iteration, r.loss_decrypted, r.loss_encrypted, r.grad_norm
            );
            for t in &r.theta {
                s += &format!(",{t}");
            }
            s.push('\n');
        }
        s
    }
}

/// Result of [`run_reverse_training`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub theta: Vec<f64>,
    pub log: TrainingLog,
    pub trace: Vec<RoundMessage>,
}

/// Per-client state: a seeded cursor over a shuffled copy of its data.
struct Cursor {
    order: Vec<usize>,
    pos: usize,
    rng: SimRng,
}

impl Cursor {
    fn next(&mut self) -> usize {
        if self.pos == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        self.pos += 1;
        self.order[self.pos - 1]
    }
}

/// Trains `theta0` with every provider contributing `batch_per_client` samples per iteration.
///
/// Client `c` draws its data order from stream `label_tag(c)` of the seed and
/// its protocol randomness for iteration `t` from a child of that stream, so
/// the result does not depend on the order clients are listed in.
pub fn run_reverse_training(
    spec: &AnsatzSpec,
    clients: &[ClientDataset],
    theta0: Vec<f64>,
    config: &TrainConfig,
) -> Result<TrainingRun> {
    config.validate()?;
    if clients.is_empty() {
        return Err(Error::InvalidInput("at least one client is required".into()));
    }
    if theta0.len() != spec.n_params() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_params(),
            found: theta0.len(),
        });
    }
    let mut sorted: Vec<&ClientDataset> = clients.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    if sorted.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::InvalidInput("client ids must be unique".into()));
    }
    let dim = sorted[0].samples[0].x.len();
    if let Some(c) = sorted
        .iter()
        .find(|c| c.samples.iter().any(|s| s.x.len() != dim))
    {
        return Err(Error::InvalidInput(format!(
            "client {:?} has samples of a different dimension than {dim}",
            c.id
        )));
    }
    let streams: Vec<u64> = sorted
        .iter()
        .map(|c| child_seed(config.seed, label_tag(&c.id)))
        .collect();
    let mut cursors: Vec<Cursor> = sorted
        .iter()
        .zip(&streams)
        .map(|(c, &s)| Cursor {
            order: (0..c.samples.len()).collect(),
            pos: c.samples.len(),
            rng: child_rng(s, u64::MAX),
        })
        .collect();

    let mut theta = theta0;
    let mut adam = AdamState::new(spec.n_params(), config.alpha);
    adam.beta1 = config.beta1;
    adam.beta2 = config.beta2;
    adam.eps = config.eps_adam;
    let mut log = TrainingLog::default();
    let mut trace = Vec::new();
    for it in 0..config.iterations {
        let wrap = |e: Error| Error::Training {
            iteration: it,
            source: Box::new(e),
        };
        let mut partials = Vec::with_capacity(sorted.len());
        for (ci, client) in sorted.iter().enumerate() {
            let batch: Vec<Sample> = (0..config.batch_per_client)
                .map(|_| client.samples[cursors[ci].next()].clone())
                .collect();
            let mut rng = child_rng(streams[ci], it as u64);
            partials.push(
                client_round(&client.id, &batch, spec, &theta, config, &mut rng, &mut trace)
                    .map_err(wrap)?,
            );
        }
        let plain: Vec<_> = partials
            .iter()
            .map(|p| (p.client.clone(), p.loss, p.grad.clone(), p.n_samples))
            .collect();
        let enc: Vec<_> = partials
            .iter()
            .map(|p| (p.client.clone(), p.encrypted_loss, p.encrypted_grad.clone(), p.n_samples))
            .collect();
        let (loss, grad) = aggregate(&plain).map_err(wrap)?;
        let (enc_loss, _) = aggregate(&enc).map_err(wrap)?;
        adam.step(&grad, &mut theta).map_err(wrap)?;
        trace.push(RoundMessage::broadcast(Payload::WeightsUpdated { iteration: it }));
        log.records.push(IterationRecord {
            iteration: it,
            loss_decrypted: loss,
            loss_encrypted: enc_loss,
            grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
            theta: theta.clone(),
            clients: partials
                .iter()
                .map(|p| ClientContribution {
                    client: p.client.clone(),
                    loss: p.loss,
                    n_samples: p.n_samples,
                })
                .collect(),
        });
    }
    check_privacy(&trace)?;
    Ok(TrainingRun { theta, log, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcnn::{build_ansatz, grad_parameter_shift, init_theta, EvalMode};
    use crate::rng::rng_from_seed;

    fn blobs_clients() -> Vec<ClientDataset> {
        let d = crate::data::synth_blobs(
            20,
            ([0.7, 0.7], [2.4, 2.4]),
            0.2,
            5,
        )
        .unwrap();
        let mk = |y: bool| {
            d.features
                .iter()
                .zip(&d.labels)
                .filter(|(_, &l)| l == y)
                .map(|(x, &l)| Sample { x: x.clone(), y: l })
                .collect()
        };
        vec![
            ClientDataset::new("B", mk(true)).unwrap(),
            ClientDataset::new("A", mk(false)).unwrap(),
        ]
    }

    #[test]
    fn aggregate_examples() {
        let (l, g) = aggregate(&[("A".into(), 2.0, vec![4.0], 2)]).unwrap();
        assert_eq!((l, g), (1.0, vec![2.0]));
        let (_, g) = aggregate(&[
            ("A".into(), 1.0, vec![0.3, -1.0], 1),
            ("B".into(), 1.0, vec![-0.3, 1.0], 1),
        ])
        .unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let (l, _) = aggregate(&[("B".into(), 0.4, vec![0.0], 1), ("A".into(), 1.0, vec![0.0], 1)]).unwrap();
        assert!((l - 0.7).abs() < 1e-15);
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[("A".into(), 0.0, vec![0.0], 1), ("B".into(), 0.0, vec![], 1)]).is_err());
    }

    #[test]
    fn aggregation_over_a_partition_is_linear() {
        let spec = build_ansatz(2).unwrap();
        let theta = init_theta(&spec, &mut rng_from_seed(3));
        let cfg = TrainConfig {
            backend: EvalBackend::Plain,
            ..TrainConfig::default()
        };
        let data = &blobs_clients()[0].samples[..6];
        let mut tr = Vec::new();
        let mut rng = rng_from_seed(0);
        let whole = client_round("X", data, &spec, &theta, &cfg, &mut rng, &mut tr).unwrap();
        let a = client_round("X1", &data[..2], &spec, &theta, &cfg, &mut rng, &mut tr).unwrap();
        let b = client_round("X2", &data[2..], &spec, &theta, &cfg, &mut rng, &mut tr).unwrap();
        let (l1, g1) = aggregate(&[("X".into(), whole.loss, whole.grad, 6)]).unwrap();
        let (l2, g2) = aggregate(&[("X1".into(), a.loss, a.grad, 2), ("X2".into(), b.loss, b.grad, 4)]).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_qhe_round_matches_plaintext_oracle() {
        let spec = build_ansatz(2).unwrap();
        let theta = init_theta(&spec, &mut rng_from_seed(8));
        let cfg = TrainConfig {
            backend: EvalBackend::QheExact,
            ..TrainConfig::default()
        };
        let sample = Sample { x: vec![0.4, 2.1], y: true };
        let got = client_round("A", &[sample.clone()], &spec, &theta, &cfg, &mut rng_from_seed(1), &mut Vec::new())
            .unwrap();
        // Oracle: same transpiled circuits, evaluated without encryption.
        let input = Encoding::Qubit.prepare(&sample.x, 2).unwrap();
        let run = |shift| {
            let c = server_circuit(&spec, &theta, shift, &cfg).unwrap();
            let mut s = input.clone();
            s.apply_circuit(&c).unwrap();
            s.prob_one(spec.readout_qubit).unwrap()
        };
        let f = run(None);
        let df = gradient_with(&spec, |sh| Ok(run(Some(sh)))).unwrap();
        assert!((got.loss - cross_entropy(f, true)).abs() < 1e-10);
        for i in 0..8 {
            assert!((got.grad[i] - loss_factor(f, true) * df[i]).abs() < 1e-10);
        }
        // Transpilation error only: close to the untranspiled gradient.
        let plain = grad_parameter_shift(&input, &spec, &theta, EvalMode::Exact, &mut rng_from_seed(0)).unwrap();
        for i in 0..8 {
            assert!((df[i] - plain[i]).abs() < 0.2);
        }
    }

    #[test]
    fn zero_iterations_returns_initial_weights() {
        let spec = build_ansatz(2).unwrap();
        let theta = vec![0.1; 8];
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let r = run_reverse_training(&spec, &blobs_clients(), theta.clone(), &cfg).unwrap();
        assert_eq!(r.theta, theta);
        assert!(r.log.is_empty());
    }

    #[test]
    fn plain_training_is_order_independent_and_deterministic() {
        let spec = build_ansatz(2).unwrap();
        let theta = init_theta(&spec, &mut rng_from_seed(4));
        let cfg = TrainConfig {
            iterations: 5,
            backend: EvalBackend::Plain,
            ..TrainConfig::default()
        };
        let mut clients = blobs_clients();
        let a = run_reverse_training(&spec, &clients, theta.clone(), &cfg).unwrap();
        clients.reverse();
        let b = run_reverse_training(&spec, &clients, theta, &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.log.to_csv(), b.log.to_csv());
        assert_eq!(a.log.len(), 5);
        assert!(a.log.to_csv().starts_with("iteration,loss_decrypted,loss_encrypted,grad_norm,theta_0,"));
        check_privacy(&a.trace).unwrap();
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { alpha: 0.0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { shots: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { batch_per_client: 0, ..TrainConfig::default() }.validate().is_err());
        let t: TrainConfig = toml_like("{\"iterations\": 3, \"backend\": \"qhe_exact\"}");
        assert_eq!(t.iterations, 3);
        assert_eq!(t.backend, EvalBackend::QheExact);
        assert!(serde_json::from_str::<TrainConfig>("{\"bogus\": 1}").is_err());
    }

    fn toml_like(s: &str) -> TrainConfig {
        serde_json::from_str(s).unwrap()
    }
}
