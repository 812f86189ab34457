use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ansatz::{AnsatzSpec, Shift};
use super::encoding::Encoding;
use crate::error::{Error, Result};
use crate::sim::matrix::C64;
use crate::sim::{Gate, StateVector};

/// Clipping applied to probabilities before any logarithm.
pub const PROB_CLIP: f64 = 1e-7;

/// How `f` is read from the final state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// `P(1)` on the readout qubit.
    Exact,
    /// Fraction of ones over this many samples.
    Shots(usize),
}

/// Readout of an already-bound circuit.
pub fn readout<R: Rng + ?Sized>(
    state: &StateVector,
    qubit: usize,
    mode: EvalMode,
    rng: &mut R,
) -> Result<f64> {
    match mode {
        EvalMode::Exact => state.prob_one(qubit),
        EvalMode::Shots(k) => {
            let ones = state
                .sample_indices(k, rng)?
                .into_iter()
                .filter(|i| i >> qubit & 1 == 1)
                .count();
            Ok(ones as f64 / k as f64)
        }
    }
}

fn evaluate<R: Rng + ?Sized>(
    state_in: &StateVector,
    spec: &AnsatzSpec,
    theta: &[f64],
    shift: Option<Shift>,
    mode: EvalMode,
    rng: &mut R,
) -> Result<f64> {
    if state_in.n_qubits() != spec.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: spec.n_qubits,
            found: state_in.n_qubits(),
        });
    }
    let mut s = state_in.clone();
    s.apply_circuit(&spec.bind_shifted(theta, shift)?)?;
    readout(&s, spec.readout_qubit, mode, rng)
}

/// `f(x, θ) = (1 − ⟨Z⟩)/2` on the readout qubit.
pub fn forward<R: Rng + ?Sized>(
    state_in: &StateVector,
    spec: &AnsatzSpec,
    theta: &[f64],
    mode: EvalMode,
    rng: &mut R,
) -> Result<f64> {
    evaluate(state_in, spec, theta, None, mode, rng)
}

fn clip(f: f64) -> f64 {
    f.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

/// Binary cross-entropy with `f` clipped to `[δ, 1 − δ]`.
pub fn cross_entropy(f: f64, y: bool) -> f64 {
    let f = clip(f);
    if y {
        -f.ln()
    } else {
        -(1.0 - f).ln()
    }
}

/// `∂l/∂f = (f − y) / (f(1 − f))` with the same clipping as [`cross_entropy`].
pub fn loss_factor(f: f64, y: bool) -> f64 {
    let f = clip(f);
    (f - y as u8 as f64) / (f * (1.0 - f))
}

/// Ties go to 0.
pub fn predict(f: f64) -> bool {
    f > 0.5
}

/// Assembles `∂f/∂θ` from the shift schedule, evaluating each shifted circuit with `eval`.
pub fn gradient_with<F>(spec: &AnsatzSpec, mut eval: F) -> Result<Vec<f64>>
where
    F: FnMut(Shift) -> Result<f64>,
{
    let mut grad = vec![0.0; spec.n_params()];
    for term in spec.shift_schedule() {
        grad[term.param] += term.coeff * eval(term.shift)?;
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    Ok(grad)
}

/// `∂f/∂θ` by the parameter-shift rule, summed over every occurrence of each shared parameter.
pub fn grad_parameter_shift<R: Rng + ?Sized>(
    state_in: &StateVector,
    spec: &AnsatzSpec,
    theta: &[f64],
    mode: EvalMode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    gradient_with(spec, |shift| {
        evaluate(state_in, spec, theta, Some(shift), mode, rng)
    })
}

/// Applies `dU/dθ · U†`, the generator `−i/2·P` restricted to the gate's active subspace.
fn apply_generator(state: &mut StateVector, gate: &Gate) {
    let half = C64::new(0.0, -0.5);
    let (target, control, gen): (usize, Option<(usize, bool)>, fn(C64, C64, C64) -> (C64, C64)) =
        match *gate {
            Gate::Ry(q, _) => (q, None, |a0, a1, _| (-a1 * 0.5, a0 * 0.5)),
            Gate::Crz { control, target, .. } => {
                (target, Some((control, true)), |a0, a1, h| (h * a0, -h * a1))
            }
            Gate::Acrx { control, target, .. } => {
                (target, Some((control, false)), |a0, a1, h| (h * a1, h * a0))
            }
            _ => unreachable!("only parameterized ansatz gates have generators"),
        };
    let tm = 1usize << target;
    let amps = state.amplitudes_mut();
    for i in 0..amps.len() {
        if i & tm != 0 {
            continue;
        }
        let active = control.map_or(true, |(c, on)| (i >> c & 1 == 1) == on);
        if active {
            let (b0, b1) = gen(amps[i], amps[i | tm], half);
            amps[i] = b0;
            amps[i | tm] = b1;
        } else {
            amps[i] = C64::new(0.0, 0.0);
            amps[i | tm] = C64::new(0.0, 0.0);
        }
    }
}

/// Exact `f` and `∂f/∂θ` by one forward and one reverse sweep.
///
/// Agrees with [`grad_parameter_shift`] in exact mode; used for plaintext training.
pub fn grad_adjoint(state_in: &StateVector, spec: &AnsatzSpec, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
    if state_in.n_qubits() != spec.n_qubits {
        return Err(Error::DimensionMismatch {
            expected: spec.n_qubits,
            found: state_in.n_qubits(),
        });
    }
    let circuit = spec.bind(theta)?;
    let mut psi = state_in.clone();
    psi.apply_circuit(&circuit)?;
    let f = psi.prob_one(spec.readout_qubit)?;
    let mut lambda = psi.clone();
    let rm = 1usize << spec.readout_qubit;
    for (i, a) in lambda.amplitudes_mut().iter_mut().enumerate() {
        if i & rm == 0 {
            *a = C64::new(0.0, 0.0);
        }
    }
    let param_of: Vec<Option<usize>> = {
        let mut v = vec![None; circuit.len()];
        for occ in spec.occurrences() {
            v[occ.gate_index] = Some(occ.param);
        }
        v
    };
    let mut grad = vec![0.0; spec.n_params()];
    for (k, gate) in circuit.gates().iter().enumerate().rev() {
        if let Some(p) = param_of[k] {
            let mut mu = psi.clone();
            apply_generator(&mut mu, gate);
            grad[p] += 2.0 * lambda.inner(&mu).re;
        }
        let inv = gate.dagger();
        psi.apply_gate(&inv)?;
        lambda.apply_gate(&inv)?;
    }
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    Ok((f, grad))
}

/// Adam optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(dim: usize, alpha: f64) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, grad: &[f64], theta: &mut [f64]) -> Result<()> {
        if grad.len() != self.m.len() || theta.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                found: if grad.len() != self.m.len() {
                    grad.len()
                } else {
                    theta.len()
                },
            });
        }
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..grad.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            theta[i] -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// A trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub n_qubits: usize,
    pub encoding: Encoding,
    pub theta: Vec<f64>,
    pub readout: usize,
}

impl Model {
    pub fn new(spec: &AnsatzSpec, encoding: Encoding, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != spec.n_params() {
            return Err(Error::DimensionMismatch {
                expected: spec.n_params(),
                found: theta.len(),
            });
        }
        Ok(Model {
            n_qubits: spec.n_qubits,
            encoding,
            theta,
            readout: spec.readout_qubit,
        })
    }

    /// The ansatz this model binds; checks the stored readout index against it.
    pub fn spec(&self) -> Result<AnsatzSpec> {
        let spec = super::build_ansatz(self.n_qubits)?;
        if spec.readout_qubit != self.readout || spec.n_params() != self.theta.len() {
            return Err(Error::InvalidInput(format!(
                "model does not match the {}-qubit ansatz (readout {}, {} parameters)",
                self.n_qubits,
                spec.readout_qubit,
                spec.n_params()
            )));
        }
        Ok(spec)
    }

    pub fn prepare(&self, x: &[f64]) -> Result<StateVector> {
        self.encoding.prepare(x, self.n_qubits)
    }

    /// Exact plaintext `f` for features `x`.
    pub fn forward_exact(&self, x: &[f64]) -> Result<f64> {
        let spec = self.spec()?;
        forward(
            &self.prepare(x)?,
            &spec,
            &self.theta,
            EvalMode::Exact,
            &mut rand::rngs::mock::StepRng::new(0, 0),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Model = serde_json::from_str(s)?;
        m.spec()?;
        Ok(m)
    }
}

/// Plaintext training settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub alpha: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 300,
            batch_size: 16,
            alpha: 0.05,
        }
    }
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta: Vec<f64>,
    /// Mean batch loss per iteration.
    pub losses: Vec<f64>,
}

/// Uniform initial weights in `[0, 2π)`.
pub fn init_theta<R: Rng + ?Sized>(spec: &AnsatzSpec, rng: &mut R) -> Vec<f64> {
    (0..spec.n_params())
        .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
        .collect()
}

/// Plaintext mini-batch training with exact expectations and Adam.
///
/// Batches cycle through a fresh shuffle of the data each epoch.
pub fn fit<R: Rng + ?Sized>(
    spec: &AnsatzSpec,
    data: &[(StateVector, bool)],
    theta0: Vec<f64>,
    config: &FitConfig,
    rng: &mut R,
) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    if config.batch_size == 0 || !(config.alpha > 0.0) {
        return Err(Error::Config(
            "batch_size must be >= 1 and alpha > 0".into(),
        ));
    }
    let mut theta = theta0;
    let mut adam = AdamState::new(spec.n_params(), config.alpha);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(config.iterations);
    for it in 0..config.iterations {
        let mut grad = vec![0.0; spec.n_params()];
        let mut loss = 0.0;
        for _ in 0..config.batch_size {
            if cursor == order.len() {
                order.shuffle(rng);
                cursor = 0;
            }
            let (state, y) = &data[order[cursor]];
            cursor += 1;
            let (f, df) = grad_adjoint(state, spec, &theta).map_err(|e| Error::Training {
                iteration: it,
                source: Box::new(e),
            })?;
            loss += cross_entropy(f, *y);
            let k = loss_factor(f, *y);
            for (g, d) in grad.iter_mut().zip(df) {
                *g += k * d;
            }
        }
        let b = config.batch_size as f64;
        grad.iter_mut().for_each(|g| *g /= b);
        adam.step(&grad, &mut theta).map_err(|e| Error::Training {
            iteration: it,
            source: Box::new(e),
        })?;
        losses.push(loss / b);
    }
    Ok(FitResult { theta, losses })
}

/// Fraction of samples whose exact prediction matches the label.
pub fn accuracy(spec: &AnsatzSpec, theta: &[f64], data: &[(StateVector, bool)]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let mut none = rand::rngs::mock::StepRng::new(0, 0);
    let mut hits = 0;
    for (s, y) in data {
        if predict(forward(s, spec, theta, EvalMode::Exact, &mut none)?) == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}
