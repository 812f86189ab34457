use crate::error::{Error, Result};
use crate::sim::{Circuit, Gate};

/// Controlled-R_Z(θ): CNOT, R_Z(−θ/2) on the target, CNOT, R_Z(θ/2).
fn controlled_rz(control: usize, target: usize, theta: f64, out: &mut Vec<Gate>) {
    out.extend([
        Gate::Cnot { control, target },
        Gate::Rz(target, -theta / 2.0),
        Gate::Cnot { control, target },
        Gate::Rz(target, theta / 2.0),
    ]);
}

/// Anti-controlled-R_X(θ): the controlled-R_Z pattern conjugated by H on the
/// target and by X on the control.
fn anti_controlled_rx(control: usize, target: usize, theta: f64, out: &mut Vec<Gate>) {
    out.push(Gate::X(control));
    out.push(Gate::H(target));
    controlled_rz(control, target, theta, out);
    out.push(Gate::H(target));
    out.push(Gate::X(control));
}

/// Pooling pair CRZ(θ₁) then ACRX(θ₂) on `(control, target)` as CNOT/R_Z/H/X gates.
/// Contains exactly four R_Z gates.
pub fn decompose_controlled(control: usize, target: usize, theta1: f64, theta2: f64) -> Result<Vec<Gate>> {
    if control == target {
        return Err(Error::RepeatedQubit {
            gate: "CRZ",
            qubit: control,
        });
    }
    let mut out = Vec::with_capacity(14);
    controlled_rz(control, target, theta1, &mut out);
    anti_controlled_rx(control, target, theta2, &mut out);
    Ok(out)
}

/// Rewrites every rotation into R_Z plus {X, Z, H, S, T, CNOT}.
///
/// `R_X(θ) = H R_Z(θ) H` and `R_Y(θ) = S H R_Z(θ) H S Z` (operator order, so
/// the emitted time order is Z, S, H, R_Z, H, S). Controlled rotations are
/// expanded first; `S†`, `T†` and SWAP are lowered to {Z, S, T, CNOT}.
pub fn rewrite_rotations(circuit: &Circuit) -> Result<Circuit> {
    let mut out = Vec::with_capacity(circuit.len() * 3);
    for g in circuit.gates() {
        match *g {
            Gate::Rx(q, a) => out.extend([Gate::H(q), Gate::Rz(q, a), Gate::H(q)]),
            Gate::Ry(q, a) => out.extend([
                Gate::Z(q),
                Gate::S(q),
                Gate::H(q),
                Gate::Rz(q, a),
                Gate::H(q),
                Gate::S(q),
            ]),
            Gate::Crz {
                control,
                target,
                angle,
            } => controlled_rz(control, target, angle, &mut out),
            Gate::Acrx {
                control,
                target,
                angle,
            } => anti_controlled_rx(control, target, angle, &mut out),
            Gate::Sdg(q) => out.extend([Gate::Z(q), Gate::S(q)]),
            Gate::Tdg(q) => out.extend([Gate::Z(q), Gate::S(q), Gate::T(q)]),
            Gate::Swap(a, b) => out.extend([
                Gate::Cnot { control: a, target: b },
                Gate::Cnot { control: b, target: a },
                Gate::Cnot { control: a, target: b },
            ]),
            other => out.push(other),
        }
    }
    Circuit::from_gates(circuit.n_qubits(), out)
}

/// `R_C(2n − 3) + R_P(n − 1)`: R_Z count of an `n`-qubit QCNN ansatz whose
/// convolution and pooling subunits contain `r_c` and `r_p` rotations.
pub fn predicted_rz_count(n: usize, r_c: usize, r_p: usize) -> Result<usize> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "qubit count {n} is not a power of two >= 2"
        )));
    }
    Ok(r_c * (2 * n - 3) + r_p * (n - 1))
}

/// Drops standalone X and Z gates, keeping the order of everything else.
pub fn strip_paulis(circuit: &Circuit) -> Circuit {
    let gates = circuit
        .gates()
        .iter()
        .filter(|g| !g.kind().is_pauli())
        .copied()
        .collect();
    Circuit::from_gates(circuit.n_qubits(), gates).expect("subset of a valid circuit")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::matrix::{circuit_distance, circuit_unitary, dense_distance, C64};
    use crate::sim::GateKind;

    #[test]
    fn rx_and_ry_rewrites() {
        let c = Circuit::from_gates(1, vec![Gate::Rx(0, 0.4)]).unwrap();
        let r = rewrite_rotations(&c).unwrap();
        assert_eq!(r.gates(), &[Gate::H(0), Gate::Rz(0, 0.4), Gate::H(0)]);
        assert!(circuit_distance(&c, &r).unwrap() < 1e-12);

        let c = Circuit::from_gates(1, vec![Gate::Ry(0, -1.3)]).unwrap();
        let r = rewrite_rotations(&c).unwrap();
        assert_eq!(r.count(GateKind::Rz), 1);
        assert!(circuit_distance(&c, &r).unwrap() < 1e-12);
    }

    #[test]
    fn lowering_of_daggers_and_swap() {
        let c = Circuit::from_gates(
            2,
            vec![Gate::Sdg(0), Gate::Tdg(1), Gate::Swap(0, 1), Gate::Tdg(0)],
        )
        .unwrap();
        let r = rewrite_rotations(&c).unwrap();
        assert!(r.is_clifford_t_only());
        assert!(circuit_distance(&c, &r).unwrap() < 1e-12);
    }

    #[test]
    fn pooling_pair_matches_controlled_rotations() {
        for (t1, t2) in [(0.0, 0.0), (0.3, -1.7), (2.5, 0.9), (-3.0, 3.1)] {
            let gates = decompose_controlled(0, 1, t1, t2).unwrap();
            assert_eq!(gates.iter().filter(|g| g.kind() == GateKind::Rz).count(), 4);
            let got = Circuit::from_gates(2, gates).unwrap();
            let want = Circuit::from_gates(
                2,
                vec![
                    Gate::Crz { control: 0, target: 1, angle: t1 },
                    Gate::Acrx { control: 0, target: 1, angle: t2 },
                ],
            )
            .unwrap();
            assert!(circuit_distance(&got, &want).unwrap() < 1e-10);
        }
        let zero = Circuit::from_gates(2, decompose_controlled(1, 0, 0.0, 0.0).unwrap()).unwrap();
        let mut eye = vec![C64::new(0.0, 0.0); 16];
        for i in 0..4 {
            eye[i * 5] = C64::new(1.0, 0.0);
        }
        assert!(dense_distance(&circuit_unitary(&zero).unwrap(), &eye, 4) < 1e-12);
        assert!(decompose_controlled(1, 1, 0.1, 0.2).is_err());
    }

    #[test]
    fn rz_count_closed_form() {
        assert_eq!(predicted_rz_count(2, 6, 4).unwrap(), 10);
        assert_eq!(predicted_rz_count(4, 6, 4).unwrap(), 42);
        assert_eq!(predicted_rz_count(8, 6, 4).unwrap(), 106);
        assert_eq!(predicted_rz_count(4, 15, 15).unwrap(), 120);
        assert!(predicted_rz_count(6, 6, 4).is_err());
    }

    #[test]
    fn strip_removes_only_paulis() {
        let c = Circuit::from_gates(1, vec![Gate::X(0), Gate::H(0), Gate::Z(0), Gate::T(0)]).unwrap();
        assert_eq!(strip_paulis(&c).gates(), &[Gate::H(0), Gate::T(0)]);
        let clean = Circuit::from_gates(1, vec![Gate::H(0), Gate::S(0)]).unwrap();
        assert_eq!(strip_paulis(&clean), clean);
    }
}
