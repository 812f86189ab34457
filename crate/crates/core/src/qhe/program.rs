use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use super::key::PauliKey;
use crate::error::{Error, Result};
use crate::sim::{Circuit, Gate};

/// One key-update function emitted by the server. `X` and `Z` gates emit nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum KeyUpdateStep {
    H { q: usize },
    S { q: usize },
    #[serde(rename = "CNOT")]
    Cnot { c: usize, t: usize },
    /// T gadget on `q` using the `bell`-th Bell register (1-based).
    T { q: usize, bell: usize },
}

impl fmt::Display for KeyUpdateStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyUpdateStep::H { q } => write!(f, "H({q})"),
            KeyUpdateStep::S { q } => write!(f, "S({q})"),
            KeyUpdateStep::Cnot { c, t } => write!(f, "CNOT({c},{t})"),
            KeyUpdateStep::T { q, bell } => write!(f, "T({q};{bell})"),
        }
    }
}

impl KeyUpdateStep {
    /// The gate this step reveals to the client.
    pub fn gate(&self) -> Gate {
        match *self {
            KeyUpdateStep::H { q } => Gate::H(q),
            KeyUpdateStep::S { q } => Gate::S(q),
            KeyUpdateStep::Cnot { c, t } => Gate::Cnot { control: c, target: t },
            KeyUpdateStep::T { q, .. } => Gate::T(q),
        }
    }
}

/// Measurement results `(r_a, r_b)` of each Bell register, indexed by T step order.
pub type BellOutcomes = Vec<(bool, bool)>;

/// Replayable sequence of key updates for an `n`-qubit register.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyUpdateProgram {
    n: usize,
    steps: Vec<KeyUpdateStep>,
    #[serde(skip)]
    t_count: usize,
}

impl KeyUpdateProgram {
    pub fn new(n: usize) -> Self {
        KeyUpdateProgram {
            n,
            steps: Vec::new(),
            t_count: 0,
        }
    }

    pub(crate) fn with_capacity(n: usize, steps: usize) -> Self {
        KeyUpdateProgram {
            n,
            steps: Vec::with_capacity(steps),
            t_count: 0,
        }
    }

    /// Validates qubit bounds and that T steps number their Bell registers 1, 2, …
    pub fn from_steps(n: usize, steps: Vec<KeyUpdateStep>) -> Result<Self> {
        let mut program = KeyUpdateProgram::new(n);
        for s in steps {
            program.push(s)?;
        }
        Ok(program)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[KeyUpdateStep] {
        &self.steps
    }

    pub fn t_count(&self) -> usize {
        self.t_count
    }

    pub fn push(&mut self, step: KeyUpdateStep) -> Result<()> {
        let bad = |m: String| Err(Error::MalformedProgram(m));
        let in_range = |q: usize| q < self.n;
        match step {
            KeyUpdateStep::H { q } | KeyUpdateStep::S { q } if !in_range(q) => {
                return bad(format!("{step} outside {}-qubit register", self.n))
            }
            KeyUpdateStep::Cnot { c, t } if !in_range(c) || !in_range(t) || c == t => {
                return bad(format!("invalid {step} on {}-qubit register", self.n))
            }
            KeyUpdateStep::T { q, bell } => {
                if !in_range(q) {
                    return bad(format!("{step} outside {}-qubit register", self.n));
                }
                if bell != self.t_count + 1 {
                    return bad(format!(
                        "T step uses Bell register {bell}, expected {}",
                        self.t_count + 1
                    ));
                }
                self.t_count += 1;
            }
            _ => {}
        }
        self.steps.push(step);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Deserialize)]
struct ProgramRecord {
    n: usize,
    steps: Vec<KeyUpdateStep>,
}

impl<'de> Deserialize<'de> for KeyUpdateProgram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = ProgramRecord::deserialize(d)?;
        KeyUpdateProgram::from_steps(rec.n, rec.steps).map_err(serde::de::Error::custom)
    }
}

/// The program a server emits for `circuit`, without running it.
/// Bell registers are numbered in T-gate order.
pub fn emit_program(circuit: &Circuit) -> Result<KeyUpdateProgram> {
    circuit.check_clifford_t()?;
    let mut program = KeyUpdateProgram::new(circuit.n_qubits());
    for g in circuit.gates() {
        if let Some(step) = step_for_gate(g, program.t_count() + 1) {
            program.push(step)?;
        }
    }
    Ok(program)
}

/// Key-update step for a Clifford+T gate; `None` for Paulis.
pub(crate) fn step_for_gate(g: &Gate, next_bell: usize) -> Option<KeyUpdateStep> {
    match *g {
        Gate::H(q) => Some(KeyUpdateStep::H { q }),
        Gate::S(q) => Some(KeyUpdateStep::S { q }),
        Gate::Cnot { control, target } => Some(KeyUpdateStep::Cnot {
            c: control,
            t: target,
        }),
        Gate::T(q) => Some(KeyUpdateStep::T { q, bell: next_bell }),
        _ => None,
    }
}

/// Folds the program over `initial`, consuming one Bell outcome per T step.
pub fn replay_key(
    program: &KeyUpdateProgram,
    initial: &PauliKey,
    bell: &[(bool, bool)],
) -> Result<PauliKey> {
    if bell.len() != program.t_count() {
        return Err(Error::BellLengthMismatch {
            expected: program.t_count(),
            found: bell.len(),
        });
    }
    if initial.len() != program.n() {
        return Err(Error::DimensionMismatch {
            expected: program.n(),
            found: initial.len(),
        });
    }
    let mut key = initial.clone();
    for step in program.steps() {
        apply_step(&mut key, step, bell)?;
    }
    Ok(key)
}

pub(crate) fn apply_step(
    key: &mut PauliKey,
    step: &KeyUpdateStep,
    bell: &[(bool, bool)],
) -> Result<()> {
    match *step {
        KeyUpdateStep::T { q, bell: m } => {
            let (r_a, r_b) = bell.get(m - 1).copied().ok_or(Error::BellLengthMismatch {
                expected: m,
                found: bell.len(),
            })?;
            key.update_t(q, r_a, r_b)
        }
        _ => key.update_clifford(step),
    }
}
