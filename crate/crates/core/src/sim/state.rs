use std::collections::BTreeMap;

use rand::Rng;

use super::circuit::Circuit;
use super::gate::Gate;
use super::matrix::{self, Mat2, C64, ONE, ZERO};
use super::MAX_QUBITS;
use crate::error::{Error, Result};

/// Dense statevector. Qubit 0 is the least-significant bit of the amplitude index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
}

/// Renders basis index `index` as a bitstring, qubit 0 first.
pub fn bitstring(index: usize, n_qubits: usize) -> String {
    (0..n_qubits)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn check_count(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::QubitCount(n_qubits));
    }
    Ok(())
}

impl StateVector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index,
            });
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(StateVector { n_qubits, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two and the norm 1 within 1e-9.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let dim = amps.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidInput(format!(
                "amplitude count {dim} is not a power of two >= 2"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_count(n_qubits)?;
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(StateVector { n_qubits, amps })
    }

    /// Wraps amplitudes already known to be normalized over `n_qubits` qubits.
    pub(crate) fn from_amplitudes_unchecked(n_qubits: usize, amps: Vec<C64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << n_qubits);
        StateVector { n_qubits, amps }
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Tensor product `self ⊗ |0…0⟩` with `extra` fresh qubits placed above the existing ones.
    pub fn extend_zeros(&self, extra: usize) -> Result<StateVector> {
        check_count(self.n_qubits + extra)?;
        let mut amps = vec![ZERO; self.amps.len() << extra];
        amps[..self.amps.len()].copy_from_slice(&self.amps);
        Ok(StateVector {
            n_qubits: self.n_qubits + extra,
            amps,
        })
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits: self.n_qubits,
            });
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_gate_unchecked(gate);
        Ok(())
    }

    /// Applies a gate whose operands are already known to be valid.
    pub(crate) fn apply_gate_unchecked(&mut self, gate: &Gate) {
        match *gate {
            Gate::X(q) => self.apply_x(q),
            Gate::Z(q) => self.apply_phase(q, C64::new(-1.0, 0.0)),
            Gate::H(q) => self.apply_h(q),
            Gate::S(q) => self.apply_phase(q, matrix::I),
            Gate::Sdg(q) => self.apply_phase(q, -matrix::I),
            Gate::T(q) => self.apply_phase(q, C64::from_polar(1.0, std::f64::consts::FRAC_PI_4)),
            Gate::Tdg(q) => {
                self.apply_phase(q, C64::from_polar(1.0, -std::f64::consts::FRAC_PI_4))
            }
            Gate::Rz(q, a) => self.apply_diag(
                q,
                C64::from_polar(1.0, -a / 2.0),
                C64::from_polar(1.0, a / 2.0),
            ),
            Gate::Rx(q, a) => self.apply_matrix(q, &matrix::rx(a)),
            Gate::Ry(q, a) => self.apply_matrix(q, &matrix::ry(a)),
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
            Gate::Swap(a, b) => self.apply_swap(a, b),
            Gate::Crz {
                control,
                target,
                angle,
            } => self.apply_controlled(control, true, target, &matrix::rz(angle)),
            Gate::Acrx {
                control,
                target,
                angle,
            } => self.apply_controlled(control, false, target, &matrix::rx(angle)),
        }
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                found: circuit.n_qubits(),
            });
        }
        // Circuits validate their gates on construction.
        for g in circuit.gates() {
            self.apply_gate_unchecked(g);
        }
        Ok(())
    }

    pub(crate) fn apply_matrix(&mut self, q: usize, m: &Mat2) {
        let mask = 1usize << q;
        let dim = self.amps.len();
        let mut hi = 0;
        while hi < dim {
            for i in hi..hi + mask {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mask];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
            }
            hi += mask << 1;
        }
    }

    fn apply_h(&mut self, q: usize) {
        let mask = 1usize << q;
        let dim = self.amps.len();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut hi = 0;
        while hi < dim {
            for i in hi..hi + mask {
                let a0 = self.amps[i];
                let a1 = self.amps[i | mask];
                self.amps[i] = (a0 + a1) * r;
                self.amps[i | mask] = (a0 - a1) * r;
            }
            hi += mask << 1;
        }
    }

    pub(crate) fn apply_x(&mut self, q: usize) {
        let mask = 1usize << q;
        let dim = self.amps.len();
        let mut hi = 0;
        while hi < dim {
            for i in hi..hi + mask {
                self.amps.swap(i, i | mask);
            }
            hi += mask << 1;
        }
    }

    /// Multiplies every amplitude whose qubit `q` is 1 by `phase`.
    fn apply_phase(&mut self, q: usize, phase: C64) {
        let mask = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask != 0 {
                *a *= phase;
            }
        }
    }

    fn apply_diag(&mut self, q: usize, d0: C64, d1: C64) {
        let mask = 1usize << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & mask != 0 { d1 } else { d0 };
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & cm != 0 && i & tm == 0 {
                self.amps.swap(i, i | tm);
            }
        }
    }

    fn apply_swap(&mut self, a: usize, b: usize) {
        let am = 1usize << a;
        let bm = 1usize << b;
        for i in 0..self.amps.len() {
            if i & am != 0 && i & bm == 0 {
                self.amps.swap(i, (i & !am) | bm);
            }
        }
    }

    /// Applies `m` to `target` on the subspace where `control` equals `control_value`.
    fn apply_controlled(&mut self, control: usize, control_value: bool, target: usize, m: &Mat2) {
        let cm = 1usize << control;
        let tm = 1usize << target;
        for i in 0..self.amps.len() {
            if i & tm == 0 && ((i & cm != 0) == control_value) {
                let a0 = self.amps[i];
                let a1 = self.amps[i | tm];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | tm] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
    }

    /// Marginal probability of reading 1 on `qubit`.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        Ok(self.prob_one_unchecked(qubit))
    }

    pub(crate) fn prob_one_unchecked(&self, qubit: usize) -> f64 {
        let mask = 1usize << qubit;
        let p: f64 = self
            .amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        p.clamp(0.0, 1.0)
    }

    /// `⟨Z_qubit⟩ = 1 − 2·P(1)`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        Ok(1.0 - 2.0 * self.prob_one(qubit)?)
    }

    /// Projective Z measurement of one qubit; collapses and renormalizes in place.
    pub fn measure_qubit<R: Rng + ?Sized>(&mut self, qubit: usize, rng: &mut R) -> Result<bool> {
        self.check_qubit(qubit)?;
        Ok(self.measure_unchecked(qubit, rng)?)
    }

    pub(crate) fn measure_unchecked<R: Rng + ?Sized>(
        &mut self,
        qubit: usize,
        rng: &mut R,
    ) -> Result<bool> {
        let p1 = self.prob_one_unchecked(qubit);
        let outcome = rng.gen::<f64>() < p1;
        let kept = if outcome { p1 } else { 1.0 - p1 };
        if kept <= 0.0 {
            return Err(Error::DegenerateBranch);
        }
        let mask = 1usize << qubit;
        let scale = 1.0 / kept.sqrt();
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & mask != 0) == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(outcome)
    }

    /// Draws one basis index from `|amps|²` without collapsing.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_nonzero = 0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p > 0.0 {
                last_nonzero = i;
            }
            acc += p;
            if r < acc {
                return i;
            }
        }
        last_nonzero
    }

    /// Draws `shots` indices using a cumulative table.
    pub fn sample_indices<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Result<Vec<usize>> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let mut cdf = Vec::with_capacity(self.amps.len());
        let mut acc = 0.0;
        for a in &self.amps {
            acc += a.norm_sqr();
            cdf.push(acc);
        }
        let total = acc;
        let last_nonzero = self
            .amps
            .iter()
            .rposition(|a| a.norm_sqr() > 0.0)
            .unwrap_or(0);
        Ok((0..shots)
            .map(|_| {
                let r = rng.gen::<f64>() * total;
                cdf.partition_point(|&c| c <= r).min(last_nonzero)
            })
            .collect())
    }

    /// Histogram of full-register measurement outcomes keyed by bitstring (qubit 0 first).
    pub fn sample_counts<R: Rng + ?Sized>(
        &self,
        shots: usize,
        rng: &mut R,
    ) -> Result<BTreeMap<String, usize>> {
        let mut counts = BTreeMap::new();
        for idx in self.sample_indices(shots, rng)? {
            *counts.entry(bitstring(idx, self.n_qubits)).or_insert(0) += 1;
        }
        Ok(counts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_3, FRAC_PI_4};

    fn plus() -> StateVector {
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(&Gate::H(0)).unwrap();
        s
    }

    #[test]
    fn new_state_is_all_zeros() {
        assert_eq!(StateVector::new(1).unwrap().amplitudes(), &[ONE, ZERO]);
        assert_eq!(
            StateVector::new(2).unwrap().amplitudes(),
            &[ONE, ZERO, ZERO, ZERO]
        );
        assert!(matches!(StateVector::new(25), Err(Error::QubitCount(25))));
        assert!(StateVector::new(0).is_err());
    }

    #[test]
    fn basic_gate_actions() {
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(&Gate::X(0)).unwrap();
        assert_eq!(s.amplitudes(), &[ZERO, ONE]);

        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(&Gate::H(0)).unwrap();
        s.apply_gate(&Gate::H(0)).unwrap();
        assert!((s.fidelity(&StateVector::new(1).unwrap()) - 1.0).abs() < 1e-12);

        let mut s = plus();
        s.apply_gate(&Gate::T(0)).unwrap();
        let a = s.amplitudes();
        assert!((a[0] - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((a[1] - C64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4)).norm() < 1e-15);

        assert!(s.apply_gate(&Gate::X(1)).is_err());
    }

    #[test]
    fn bell_pair_from_circuit() {
        let c = Circuit::from_gates(2, vec![Gate::H(0), Gate::Cnot { control: 0, target: 1 }])
            .unwrap();
        let mut s = StateVector::new(2).unwrap();
        s.apply_circuit(&Circuit::new(2)).unwrap();
        assert_eq!(s, StateVector::new(2).unwrap());
        s.apply_circuit(&c).unwrap();
        let a = s.amplitudes();
        assert!((a[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((a[3].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(a[1].norm() < 1e-15 && a[2].norm() < 1e-15);
        assert!(s.apply_circuit(&Circuit::new(3)).is_err());
    }

    #[test]
    fn probabilities_and_expectations() {
        let zero = StateVector::new(1).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_eq!(zero.prob_one(0).unwrap(), 0.0);
        assert!((plus().prob_one(0).unwrap() - 0.5).abs() < 1e-15);
        let mut s = StateVector::new(1).unwrap();
        s.apply_gate(&Gate::Ry(0, FRAC_PI_3)).unwrap();
        assert!((s.prob_one(0).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(zero.expectation_z(0).unwrap(), 1.0);
        assert_eq!(one.expectation_z(0).unwrap(), -1.0);
        assert!(plus().expectation_z(0).unwrap().abs() < 1e-15);
        assert!(zero.prob_one(1).is_err());
        assert!(zero.expectation_z(3).is_err());
    }

    #[test]
    fn deterministic_measurements() {
        let mut rng = rng_from_seed(1);
        let mut one = StateVector::basis(1, 1).unwrap();
        assert!(one.measure_qubit(0, &mut rng).unwrap());
        assert_eq!(one, StateVector::basis(1, 1).unwrap());
        let mut zero = StateVector::new(1).unwrap();
        assert!(!zero.measure_qubit(0, &mut rng).unwrap());
        assert_eq!(zero, StateVector::new(1).unwrap());
    }

    #[test]
    fn bell_measurement_collapses_partner() {
        let c = Circuit::from_gates(2, vec![Gate::H(0), Gate::Cnot { control: 0, target: 1 }])
            .unwrap();
        let mut bell = StateVector::new(2).unwrap();
        bell.apply_circuit(&c).unwrap();
        let mut seen = [false; 2];
        for seed in 0..40 {
            let mut s = bell.clone();
            let b = s.measure_qubit(0, &mut rng_from_seed(seed)).unwrap();
            // Oracle: conditioning the Bell state on qubit 0 = b leaves |bb⟩.
            let expect = StateVector::basis(2, if b { 3 } else { 0 }).unwrap();
            assert!((s.fidelity(&expect) - 1.0).abs() < 1e-12);
            assert_eq!(s.prob_one(1).unwrap(), if b { 1.0 } else { 0.0 });
            seen[b as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn sampling_counts() {
        let mut rng = rng_from_seed(3);
        let one = StateVector::basis(1, 1).unwrap();
        let counts = one.sample_counts(100, &mut rng).unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts["1"], 100);
        assert!(matches!(one.sample_counts(0, &mut rng), Err(Error::ZeroShots)));

        let mut bell = StateVector::new(2).unwrap();
        bell.apply_gate(&Gate::H(0)).unwrap();
        bell.apply_gate(&Gate::Cnot { control: 0, target: 1 }).unwrap();
        let counts = bell.sample_counts(2000, &mut rng).unwrap();
        assert!(counts.keys().all(|k| k == "00" || k == "11"));

        // Binomial 5σ bound: sqrt(1e5 · 0.25 · 0.75) ≈ 137, 5σ ≈ 685 < 1500.
        let mut uni = StateVector::new(2).unwrap();
        uni.apply_gate(&Gate::H(0)).unwrap();
        uni.apply_gate(&Gate::H(1)).unwrap();
        let counts = uni.sample_counts(100_000, &mut rng).unwrap();
        assert_eq!(counts.values().sum::<usize>(), 100_000);
        for k in ["00", "01", "10", "11"] {
            assert!((counts[k] as i64 - 25_000).abs() <= 1500, "{k}: {}", counts[k]);
        }
    }

    #[test]
    fn bitstrings_are_qubit_zero_first() {
        assert_eq!(bitstring(1, 3), "100");
        assert_eq!(bitstring(6, 3), "011");
    }
}
