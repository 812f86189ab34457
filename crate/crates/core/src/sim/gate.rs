use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate kinds understood by the simulator.
///
/// `Sdg`/`Tdg` and the rotation kinds exist only before transpilation; the
/// homomorphic evaluator accepts `{X, Z, H, S, T, CNOT}` alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    X,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    Cnot,
    Swap,
    Rx,
    Ry,
    Rz,
    Crz,
    Acrx,
}

impl GateKind {
    pub const ALL: [GateKind; 14] = [
        GateKind::X,
        GateKind::Z,
        GateKind::H,
        GateKind::S,
        GateKind::Sdg,
        GateKind::T,
        GateKind::Tdg,
        GateKind::Cnot,
        GateKind::Swap,
        GateKind::Rx,
        GateKind::Ry,
        GateKind::Rz,
        GateKind::Crz,
        GateKind::Acrx,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateKind::X => "X",
            GateKind::Z => "Z",
            GateKind::H => "H",
            GateKind::S => "S",
            GateKind::Sdg => "SDG",
            GateKind::T => "T",
            GateKind::Tdg => "TDG",
            GateKind::Cnot => "CNOT",
            GateKind::Swap => "SWAP",
            GateKind::Rx => "RX",
            GateKind::Ry => "RY",
            GateKind::Rz => "RZ",
            GateKind::Crz => "CRZ",
            GateKind::Acrx => "ACRX",
        }
    }

    pub fn from_name(name: &str) -> Option<GateKind> {
        GateKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot | GateKind::Swap | GateKind::Crz | GateKind::Acrx => 2,
            _ => 1,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(
            self,
            GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Crz | GateKind::Acrx
        )
    }

    /// Member of the homomorphically evaluable set `{X, Z, H, S, T, CNOT}`.
    pub fn is_clifford_t(self) -> bool {
        matches!(
            self,
            GateKind::X | GateKind::Z | GateKind::H | GateKind::S | GateKind::T | GateKind::Cnot
        )
    }

    pub fn is_pauli(self) -> bool {
        matches!(self, GateKind::X | GateKind::Z)
    }
}

/// A gate with its operands. Two-qubit gates list `[control, target]`
/// (`SWAP` is symmetric).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X(usize),
    Z(usize),
    H(usize),
    S(usize),
    Sdg(usize),
    T(usize),
    Tdg(usize),
    Cnot { control: usize, target: usize },
    Swap(usize, usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    /// Controlled `R_Z`: rotation on `target` when `control` is 1.
    Crz { control: usize, target: usize, angle: f64 },
    /// Anti-controlled `R_X`: rotation on `target` when `control` is 0.
    Acrx { control: usize, target: usize, angle: f64 },
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::X(_) => GateKind::X,
            Gate::Z(_) => GateKind::Z,
            Gate::H(_) => GateKind::H,
            Gate::S(_) => GateKind::S,
            Gate::Sdg(_) => GateKind::Sdg,
            Gate::T(_) => GateKind::T,
            Gate::Tdg(_) => GateKind::Tdg,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Swap(..) => GateKind::Swap,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Crz { .. } => GateKind::Crz,
            Gate::Acrx { .. } => GateKind::Acrx,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self.operands() {
            (q, None) => vec![q],
            (a, Some(b)) => vec![a, b],
        }
    }

    /// First operand and, for two-qubit gates, the second.
    fn operands(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::X(q)
            | Gate::Z(q)
            | Gate::H(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::T(q)
            | Gate::Tdg(q)
            | Gate::Rx(q, _)
            | Gate::Ry(q, _)
            | Gate::Rz(q, _) => (q, None),
            Gate::Cnot { control, target }
            | Gate::Crz { control, target, .. }
            | Gate::Acrx { control, target, .. } => (control, Some(target)),
            Gate::Swap(a, b) => (a, Some(b)),
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(_, a) | Gate::Ry(_, a) | Gate::Rz(_, a) => Some(a),
            Gate::Crz { angle, .. } | Gate::Acrx { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Same gate with its rotation angle replaced; non-rotations are returned unchanged.
    pub fn with_angle(&self, angle: f64) -> Gate {
        match *self {
            Gate::Rx(q, _) => Gate::Rx(q, angle),
            Gate::Ry(q, _) => Gate::Ry(q, angle),
            Gate::Rz(q, _) => Gate::Rz(q, angle),
            Gate::Crz { control, target, .. } => Gate::Crz { control, target, angle },
            Gate::Acrx { control, target, .. } => Gate::Acrx { control, target, angle },
            g => g,
        }
    }

    /// Builds a gate from its kind, operand list and optional angle.
    pub fn from_parts(kind: GateKind, qubits: &[usize], angle: Option<f64>) -> Result<Gate> {
        let bad = |message: String| Error::InvalidGate { index: 0, message };
        if qubits.len() != kind.arity() {
            return Err(bad(format!(
                "{} expects {} qubit(s), got {}",
                kind.name(),
                kind.arity(),
                qubits.len()
            )));
        }
        match (kind.is_rotation(), angle) {
            (true, None) => return Err(bad(format!("{} requires an angle", kind.name()))),
            (false, Some(_)) => return Err(bad(format!("{} takes no angle", kind.name()))),
            _ => {}
        }
        let q = qubits[0];
        let a = angle.unwrap_or(0.0);
        let gate = match kind {
            GateKind::X => Gate::X(q),
            GateKind::Z => Gate::Z(q),
            GateKind::H => Gate::H(q),
            GateKind::S => Gate::S(q),
            GateKind::Sdg => Gate::Sdg(q),
            GateKind::T => Gate::T(q),
            GateKind::Tdg => Gate::Tdg(q),
            GateKind::Cnot => Gate::Cnot { control: q, target: qubits[1] },
            GateKind::Swap => Gate::Swap(q, qubits[1]),
            GateKind::Rx => Gate::Rx(q, a),
            GateKind::Ry => Gate::Ry(q, a),
            GateKind::Rz => Gate::Rz(q, a),
            GateKind::Crz => Gate::Crz { control: q, target: qubits[1], angle: a },
            GateKind::Acrx => Gate::Acrx { control: q, target: qubits[1], angle: a },
        };
        Ok(gate)
    }

    /// Checks operand bounds, distinctness and angle finiteness.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let (a, b) = self.operands();
        for q in std::iter::once(a).chain(b) {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
        }
        if b == Some(a) {
            return Err(Error::RepeatedQubit {
                gate: self.kind().name(),
                qubit: a,
            });
        }
        if let Some(a) = self.angle() {
            if !a.is_finite() {
                return Err(Error::NonFiniteAngle {
                    gate: self.kind().name(),
                    angle: a,
                });
            }
        }
        Ok(())
    }

    /// Adjoint gate.
    pub fn dagger(&self) -> Gate {
        match *self {
            Gate::S(q) => Gate::Sdg(q),
            Gate::Sdg(q) => Gate::S(q),
            Gate::T(q) => Gate::Tdg(q),
            Gate::Tdg(q) => Gate::T(q),
            g if g.angle().is_some() => g.with_angle(-g.angle().unwrap_or(0.0)),
            g => g,
        }
    }

    /// The same gate acting on relabeled qubits (`map[old] = new`).
    pub fn remap(&self, map: &[usize]) -> Gate {
        match *self {
            Gate::X(q) => Gate::X(map[q]),
            Gate::Z(q) => Gate::Z(map[q]),
            Gate::H(q) => Gate::H(map[q]),
            Gate::S(q) => Gate::S(map[q]),
            Gate::Sdg(q) => Gate::Sdg(map[q]),
            Gate::T(q) => Gate::T(map[q]),
            Gate::Tdg(q) => Gate::Tdg(map[q]),
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map[control],
                target: map[target],
            },
            Gate::Swap(a, b) => Gate::Swap(map[a], map[b]),
            Gate::Rx(q, a) => Gate::Rx(map[q], a),
            Gate::Ry(q, a) => Gate::Ry(map[q], a),
            Gate::Rz(q, a) => Gate::Rz(map[q], a),
            Gate::Crz { control, target, angle } => Gate::Crz {
                control: map[control],
                target: map[target],
                angle,
            },
            Gate::Acrx { control, target, angle } => Gate::Acrx {
                control: map[control],
                target: map[target],
                angle,
            },
        }
    }
}

/// Serialized gate record: `{"kind": "RZ", "q": [2], "angle": 0.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: String,
    pub q: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl From<&Gate> for GateRecord {
    fn from(g: &Gate) -> Self {
        GateRecord {
            kind: g.kind().name().to_string(),
            q: g.qubits(),
            angle: g.angle(),
        }
    }
}

impl GateRecord {
    /// Converts to a gate; `index` is the record's position, used in errors.
    pub fn to_gate(&self, index: usize) -> Result<Gate> {
        let kind = GateKind::from_name(&self.kind).ok_or_else(|| Error::InvalidGate {
            index,
            message: format!("unknown gate kind {:?}", self.kind),
        })?;
        Gate::from_parts(kind, &self.q, self.angle).map_err(|e| match e {
            Error::InvalidGate { message, .. } => Error::InvalidGate { index, message },
            other => other,
        })
    }
}
