use rand::seq::SliceRandom;
use rand::Rng;

use super::{Circuit, Gate};
use crate::error::{Error, Result};

/// Random circuit over {X, Z, H, S, T, CNOT} with exactly `t_gates` T gates
/// and `clifford_gates` other gates, in random order.
///
/// CNOT is drawn only when `n_qubits >= 2`.
pub fn random_clifford_t<R: Rng + ?Sized>(
    n_qubits: usize,
    t_gates: usize,
    clifford_gates: usize,
    rng: &mut R,
) -> Result<Circuit> {
    if n_qubits == 0 || n_qubits > super::MAX_QUBITS {
        return Err(Error::QubitCount(n_qubits));
    }
    let mut is_t = vec![true; t_gates];
    is_t.extend(std::iter::repeat(false).take(clifford_gates));
    is_t.shuffle(rng);
    let kinds = if n_qubits >= 2 { 5 } else { 4 };
    let gates = is_t
        .into_iter()
        .map(|t| {
            let q = rng.gen_range(0..n_qubits);
            if t {
                return Gate::T(q);
            }
            match rng.gen_range(0..kinds) {
                0 => Gate::X(q),
                1 => Gate::Z(q),
                2 => Gate::H(q),
                3 => Gate::S(q),
                _ => {
                    let target = (q + rng.gen_range(1..n_qubits)) % n_qubits;
                    Gate::Cnot { control: q, target }
                }
            }
        })
        .collect();
    Circuit::from_gates(n_qubits, gates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::sim::GateKind;

    #[test]
    fn counts_and_gate_set() {
        let mut rng = rng_from_seed(4);
        for n in 1..=4 {
            let c = random_clifford_t(n, 7, 20, &mut rng).unwrap();
            assert_eq!(c.len(), 27);
            assert_eq!(c.count(GateKind::T), 7);
            assert!(c.is_clifford_t_only());
            if n == 1 {
                assert_eq!(c.count(GateKind::Cnot), 0);
            }
        }
        assert!(random_clifford_t(0, 1, 1, &mut rng).is_err());
    }
}
