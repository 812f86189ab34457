use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::matrix::C64;
use crate::sim::{Circuit, Gate, StateVector};

/// How classical features enter the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    /// One `R_Y(x_i)` per qubit.
    Qubit,
    /// Features as normalized amplitudes, zero-padded to `2^n`.
    Amplitude,
}

impl Encoding {
    /// Client-side input state for `x` on `n` qubits.
    pub fn prepare(self, x: &[f64], n: usize) -> Result<StateVector> {
        match self {
            Encoding::Qubit => {
                if x.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: x.len(),
                    });
                }
                let mut s = StateVector::new(n)?;
                s.apply_circuit(&encode_qubit(x)?)?;
                Ok(s)
            }
            Encoding::Amplitude => encode_amplitude(x, n),
        }
    }
}

impl std::fmt::Display for Encoding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Encoding::Qubit => "qubit",
            Encoding::Amplitude => "amplitude",
        })
    }
}

impl std::str::FromStr for Encoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qubit" => Ok(Encoding::Qubit),
            "amplitude" => Ok(Encoding::Amplitude),
            other => Err(Error::InvalidInput(format!(
                "unknown encoding {other:?} (expected qubit or amplitude)"
            ))),
        }
    }
}

/// `R_Y(x_i)` on qubit `i`; every feature must lie in `[0, π]`.
pub fn encode_qubit(x: &[f64]) -> Result<Circuit> {
    if x.is_empty() {
        return Err(Error::InvalidInput("empty feature vector".into()));
    }
    if let Some((i, v)) = x
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=PI).contains(*v))
    {
        return Err(Error::InvalidInput(format!(
            "feature {i} = {v} outside [0, pi]"
        )));
    }
    Circuit::from_gates(
        x.len(),
        x.iter().enumerate().map(|(q, &a)| Gate::Ry(q, a)).collect(),
    )
}

/// `Σ x_i |i⟩ / ‖x‖` over `n` qubits, zero-padded.
pub fn encode_amplitude(x: &[f64], n: usize) -> Result<StateVector> {
    let dim = 1usize.checked_shl(n as u32).unwrap_or(0);
    if x.len() > dim || n == 0 {
        return Err(Error::InvalidInput(format!(
            "{} features do not fit in {n} qubits",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature".into()));
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidInput("zero feature vector".into()));
    }
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for (a, v) in amps.iter_mut().zip(x) {
        *a = C64::new(v / norm, 0.0);
    }
    StateVector::from_amplitudes(amps)
}
