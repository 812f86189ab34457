use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::gate::{Gate, GateKind, GateRecord};
use crate::error::{Error, Result};

/// Ordered gate list over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
        }
    }

    /// Builds a circuit, validating every gate against `n_qubits`.
    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for (index, g) in gates.iter().enumerate() {
            g.validate(n_qubits).map_err(|e| Error::InvalidGate {
                index,
                message: e.to_string(),
            })?;
        }
        Ok(Circuit { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(())
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) -> Result<()> {
        for g in gates {
            self.push(g)?;
        }
        Ok(())
    }

    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        self.gates.extend_from_slice(&other.gates);
        Ok(())
    }

    /// Reversed circuit with every gate daggered.
    pub fn inverse(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::dagger).collect(),
        }
    }

    pub fn is_clifford_t_only(&self) -> bool {
        self.gates.iter().all(|g| g.kind().is_clifford_t())
    }

    /// Errors with the first gate outside `{X, Z, H, S, T, CNOT}`.
    pub fn check_clifford_t(&self) -> Result<()> {
        match self
            .gates
            .iter()
            .position(|g| !g.kind().is_clifford_t())
        {
            Some(index) => Err(Error::NotCliffordT {
                index,
                kind: self.gates[index].kind().name(),
            }),
            None => Ok(()),
        }
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }

    pub fn t_count(&self) -> usize {
        self.count(GateKind::T)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("circuit serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Circuit> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CircuitRecord {
    n_qubits: usize,
    gates: Vec<GateRecord>,
}

impl Serialize for Circuit {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CircuitRecord {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().map(GateRecord::from).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = CircuitRecord::deserialize(d)?;
        if rec.n_qubits == 0 || rec.n_qubits > super::MAX_QUBITS {
            return Err(D::Error::custom(Error::QubitCount(rec.n_qubits)));
        }
        let gates = rec
            .gates
            .iter()
            .enumerate()
            .map(|(i, r)| r.to_gate(i))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        Circuit::from_gates(rec.n_qubits, gates).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let c = Circuit::from_gates(
            3,
            vec![
                Gate::H(0),
                Gate::Cnot { control: 0, target: 1 },
                Gate::Rz(2, 0.5),
            ],
        )
        .unwrap();
        let s = c.to_json();
        assert_eq!(
            s,
            r#"{"n_qubits":3,"gates":[{"kind":"H","q":[0]},{"kind":"CNOT","q":[0,1]},{"kind":"RZ","q":[2],"angle":0.5}]}"#
        );
        assert_eq!(Circuit::from_json(&s).unwrap(), c);
    }

    #[test]
    fn unknown_kind_reports_position() {
        let s = r#"{"n_qubits":1,"gates":[{"kind":"H","q":[0]},{"kind":"U3","q":[0]}]}"#;
        let err = Circuit::from_json(s).unwrap_err().to_string();
        assert!(err.contains("gate 1"), "{err}");
        assert!(err.contains("U3"), "{err}");
    }

    #[test]
    fn out_of_range_qubit_rejected() {
        let s = r#"{"n_qubits":1,"gates":[{"kind":"CNOT","q":[0,1]}]}"#;
        assert!(Circuit::from_json(s).is_err());
    }

    #[test]
    fn clifford_t_check_names_offender() {
        let c = Circuit::from_gates(1, vec![Gate::H(0), Gate::Sdg(0)]).unwrap();
        assert!(!c.is_clifford_t_only());
        match c.check_clifford_t() {
            Err(Error::NotCliffordT { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
    }
}
