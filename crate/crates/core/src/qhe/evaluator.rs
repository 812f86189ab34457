//! Server-side homomorphic evaluation.
//!
//! The server holds the encrypted register plus a fixed two-qubit Bell
//! workspace. Clifford gates act directly on the ciphertext; each T gate runs
//! the teleportation gadget, which needs the current x key bit of its qubit.
//! That bit is obtained only through a client-owned [`KeyOracle`].

use rand::Rng;

use super::key::PauliKey;
use super::program::{apply_step, step_for_gate, BellOutcomes, KeyUpdateProgram, KeyUpdateStep};
use crate::error::{Error, Result};
use crate::sim::matrix::{C64, ZERO};
use crate::sim::{Circuit, Gate, StateVector, MAX_QUBITS};

/// Client side of the evaluation: answers x-bit queries and follows the emitted steps.
pub trait KeyOracle {
    /// Current x key bit of logical qubit `q`.
    fn x_bit(&self, q: usize) -> bool;
    /// Called once per emitted step, with the Bell outcome `(r_a, r_b)` for T steps.
    fn observe(&mut self, step: &KeyUpdateStep, bell: Option<(bool, bool)>) -> Result<()>;
}

/// Key tracker the client runs alongside the server.
#[derive(Debug, Clone)]
pub struct ClientKeyTracker {
    key: PauliKey,
    bell: BellOutcomes,
}

impl ClientKeyTracker {
    pub fn new(initial: PauliKey) -> Self {
        ClientKeyTracker {
            key: initial,
            bell: Vec::new(),
        }
    }

    pub fn key(&self) -> &PauliKey {
        &self.key
    }

    pub fn bell(&self) -> &[(bool, bool)] {
        &self.bell
    }

    pub fn into_key(self) -> PauliKey {
        self.key
    }
}

impl KeyOracle for ClientKeyTracker {
    fn x_bit(&self, q: usize) -> bool {
        self.key.x()[q]
    }

    fn observe(&mut self, step: &KeyUpdateStep, bell: Option<(bool, bool)>) -> Result<()> {
        match (step, bell) {
            (KeyUpdateStep::T { bell: m, .. }, Some(outcome)) => {
                if *m != self.bell.len() + 1 {
                    return Err(Error::MalformedProgram(format!(
                        "T step uses Bell register {m}, expected {}",
                        self.bell.len() + 1
                    )));
                }
                self.bell.push(outcome);
                apply_step(&mut self.key, step, &self.bell)
            }
            (KeyUpdateStep::T { .. }, None) => Err(Error::MalformedProgram(format!(
                "{step} arrived without a Bell outcome"
            ))),
            (_, None) => self.key.update_clifford(step),
            (_, Some(_)) => Err(Error::MalformedProgram(format!(
                "{step} carries an unexpected Bell outcome"
            ))),
        }
    }
}

/// Encrypted register plus Bell workspace, with logical-to-physical wire relabeling.
///
/// Logical wires `0..n` are data, `n` and `n + 1` the Bell workspace. Swaps are
/// performed by permuting `wires`, so the workspace drifts across physical
/// qubits. Between gadgets the workspace is `|00⟩`, so gates only touch the
/// `2^n` amplitudes listed in `live`.
#[derive(Debug, Clone)]
pub struct EvalRegister {
    n: usize,
    state: StateVector,
    wires: Vec<usize>,
    live: Vec<usize>,
    ancilla_clean: bool,
}

/// Inserts a zero bit at position `pos`.
fn insert_zero(k: usize, pos: usize) -> usize {
    let low = k & ((1 << pos) - 1);
    ((k >> pos) << (pos + 1)) | low
}

impl EvalRegister {
    pub fn new(enc_state: &StateVector) -> Result<Self> {
        let n = enc_state.n_qubits();
        if n + 2 > MAX_QUBITS {
            return Err(Error::QubitCount(n + 2));
        }
        let mut reg = EvalRegister {
            n,
            state: enc_state.extend_zeros(2)?,
            wires: (0..n + 2).collect(),
            live: Vec::new(),
            ancilla_clean: true,
        };
        reg.refresh_live();
        Ok(reg)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// Physical qubit currently carrying each logical wire.
    pub fn wires(&self) -> &[usize] {
        &self.wires
    }

    fn refresh_live(&mut self) {
        let (a, b) = (self.wires[self.n], self.wires[self.n + 1]);
        let (lo, hi) = (a.min(b), a.max(b));
        self.live.clear();
        self.live
            .extend((0..1usize << self.n).map(|k| insert_zero(insert_zero(k, lo), hi)));
    }

    /// Probability mass outside the `|00⟩` workspace subspace.
    pub fn ancilla_leakage(&self) -> f64 {
        1.0 - self
            .live
            .iter()
            .map(|&i| self.state.amplitudes()[i].norm_sqr())
            .sum::<f64>()
    }

    /// Applies a Pauli or Clifford gate on logical wires. T gates must go through [`Self::t_gadget`].
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n)?;
        let amps = self.state.amplitudes_mut();
        match *gate {
            Gate::X(q) => {
                let m = 1 << self.wires[q];
                for &i in &self.live {
                    if i & m == 0 {
                        amps.swap(i, i | m);
                    }
                }
            }
            Gate::Z(q) => phase_live(amps, &self.live, 1 << self.wires[q], C64::new(-1.0, 0.0)),
            Gate::S(q) => phase_live(amps, &self.live, 1 << self.wires[q], C64::new(0.0, 1.0)),
            Gate::H(q) => {
                let m = 1 << self.wires[q];
                let r = std::f64::consts::FRAC_1_SQRT_2;
                for &i in &self.live {
                    if i & m == 0 {
                        let (a0, a1) = (amps[i], amps[i | m]);
                        amps[i] = (a0 + a1) * r;
                        amps[i | m] = (a0 - a1) * r;
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let cm = 1 << self.wires[control];
                let tm = 1 << self.wires[target];
                for &i in &self.live {
                    if i & cm != 0 && i & tm == 0 {
                        amps.swap(i, i | tm);
                    }
                }
            }
            _ => {
                return Err(Error::NotCliffordStep(format!(
                    "{} is not applied directly by the server",
                    gate.kind().name()
                )))
            }
        }
        Ok(())
    }

    /// Homomorphic T on logical qubit `q` whose current x key bit is `a`.
    ///
    /// Gate sequence: T on `q`; H, CNOT on the workspace to form a Bell pair;
    /// swap `q` with workspace qubit 1 (relabel only); `S^a` on workspace qubit 1;
    /// CNOT, H; measure workspace qubit 1 (`r_b`) and 2 (`r_a`); reset both.
    /// Afterwards `q` holds `X^{a⊕r_a} Z^{a⊕b⊕r_b} T|φ⟩`. Returns `(r_a, r_b)`.
    pub fn t_gadget<R: Rng + ?Sized>(&mut self, q: usize, a: bool, rng: &mut R) -> Result<(bool, bool)> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits: self.n,
            });
        }
        if !self.ancilla_clean {
            return Err(Error::AncillaNotReset);
        }
        // Local 3-qubit block: bit 0 = data (later workspace 1), bit 1 = workspace 1
        // (later data), bit 2 = workspace 2.
        let masks = [
            1usize << self.wires[q],
            1usize << self.wires[self.n],
            1usize << self.wires[self.n + 1],
        ];
        let mut offs = [0usize; 8];
        for (j, o) in offs.iter_mut().enumerate() {
            *o = (0..3).filter(|b| j >> b & 1 == 1).map(|b| masks[b]).sum();
        }
        let gather = |base: usize, j: usize| base | offs[j];
        let t_phase = C64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let s_phase = if a { C64::new(0.0, 1.0) } else { C64::new(1.0, 0.0) };
        let amps = self.state.amplitudes_mut();
        let mut probs = [0.0f64; 4];
        self.ancilla_clean = false;
        for &base in &self.live {
            if base & masks[0] != 0 {
                continue;
            }
            let mut blk = [ZERO; 8];
            for (j, v) in blk.iter_mut().enumerate() {
                *v = amps[gather(base, j)];
            }
            local_phase(&mut blk, 0, t_phase);
            local_h(&mut blk, 1);
            local_cnot(&mut blk, 1, 2);
            // After the relabeling swap, bit 0 is workspace qubit 1.
            local_phase(&mut blk, 0, s_phase);
            local_cnot(&mut blk, 0, 2);
            local_h(&mut blk, 0);
            for (j, v) in blk.iter().enumerate() {
                probs[outcome_of(j)] += v.norm_sqr();
                amps[gather(base, j)] = *v;
            }
        }
        let outcome = sample_outcome(&probs, rng)?;
        let (r_a, r_b) = (outcome >> 1 == 1, outcome & 1 == 1);
        let scale = 1.0 / probs[outcome].sqrt();
        for &base in &self.live {
            if base & masks[0] != 0 {
                continue;
            }
            for j in 0..8 {
                let idx = gather(base, j);
                let v = amps[idx];
                amps[idx] = ZERO;
                if outcome_of(j) == outcome {
                    // Collapse, then X-reset the measured qubits to |0⟩.
                    amps[gather(base, j & 0b010)] = v * scale;
                }
            }
        }
        self.wires.swap(q, self.n);
        self.refresh_live();
        self.ancilla_clean = true;
        Ok((r_a, r_b))
    }

    /// Logical data register with the workspace discarded.
    pub fn into_state(self) -> StateVector {
        let amps = self.state.amplitudes();
        let out: Vec<C64> = (0..1usize << self.n)
            .map(|k| {
                let phys: usize = (0..self.n)
                    .filter(|l| k >> l & 1 == 1)
                    .map(|l| 1usize << self.wires[l])
                    .sum();
                amps[phys]
            })
            .collect();
        StateVector::from_amplitudes_unchecked(self.n, out)
    }
}

fn phase_live(amps: &mut [C64], live: &[usize], mask: usize, phase: C64) {
    for &i in live {
        if i & mask != 0 {
            amps[i] *= phase;
        }
    }
}

/// Joint outcome index `(r_a << 1) | r_b` of local block entry `j`.
fn outcome_of(j: usize) -> usize {
    ((j >> 2 & 1) << 1) | (j & 1)
}

fn local_phase(blk: &mut [C64; 8], bit: usize, phase: C64) {
    for (j, v) in blk.iter_mut().enumerate() {
        if j >> bit & 1 == 1 {
            *v *= phase;
        }
    }
}

fn local_h(blk: &mut [C64; 8], bit: usize) {
    let m = 1 << bit;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..8 {
        if j & m == 0 {
            let (a0, a1) = (blk[j], blk[j | m]);
            blk[j] = (a0 + a1) * r;
            blk[j | m] = (a0 - a1) * r;
        }
    }
}

fn local_cnot(blk: &mut [C64; 8], c: usize, t: usize) {
    for j in 0..8 {
        if j >> c & 1 == 1 && j >> t & 1 == 0 {
            blk.swap(j, j | 1 << t);
        }
    }
}

/// Draws a joint two-qubit outcome with one uniform variate.
pub(crate) fn sample_outcome<R: Rng + ?Sized>(probs: &[f64; 4], rng: &mut R) -> Result<usize> {
    let total: f64 = probs.iter().sum();
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (o, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last = Some(o);
        }
        acc += p;
        if u < acc && *p > 0.0 {
            return Ok(o);
        }
    }
    last.ok_or(Error::DegenerateBranch)
}

/// Output of [`server_evaluate`].
#[derive(Debug, Clone)]
pub struct ServerOutput {
    pub state: StateVector,
    pub program: KeyUpdateProgram,
    pub bell: BellOutcomes,
}

/// Evaluates a Clifford+T circuit on an encrypted state.
///
/// Paulis are applied without emitting a step; H, S and CNOT emit their step;
/// each T runs the gadget with the x bit supplied by `oracle` and emits a T step.
pub fn server_evaluate<O, R>(
    circuit: &Circuit,
    enc_state: &StateVector,
    oracle: &mut O,
    rng: &mut R,
) -> Result<ServerOutput>
where
    O: KeyOracle + ?Sized,
    R: Rng + ?Sized,
{
    circuit.check_clifford_t()?;
    if circuit.n_qubits() != enc_state.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: enc_state.n_qubits(),
            found: circuit.n_qubits(),
        });
    }
    let mut reg = EvalRegister::new(enc_state)?;
    let mut program = KeyUpdateProgram::with_capacity(circuit.n_qubits(), circuit.len());
    let mut bell = BellOutcomes::with_capacity(circuit.t_count());
    for g in circuit.gates() {
        let step = step_for_gate(g, bell.len() + 1);
        let outcome = match *g {
            Gate::T(q) => {
                let a = oracle.x_bit(q);
                let o = reg.t_gadget(q, a, rng)?;
                bell.push(o);
                Some(o)
            }
            _ => {
                reg.apply(g)?;
                None
            }
        };
        if let Some(step) = step {
            program.push(step)?;
            oracle.observe(&step, outcome)?;
        }
    }
    Ok(ServerOutput {
        state: reg.into_state(),
        program,
        bell,
    })
}
