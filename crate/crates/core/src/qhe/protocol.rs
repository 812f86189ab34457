//! End-to-end protocol runs: keygen, encryption, server evaluation, readout and decryption.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::evaluator::{server_evaluate, ClientKeyTracker, ServerOutput};
use super::key::{keygen, qotp_apply, PauliKey};
use super::program::{emit_program, replay_key, KeyUpdateProgram};
use crate::error::{Error, Result};
use crate::rng::{child_rng, SimRng};
use crate::sim::{Circuit, StateVector};

/// How many readout shots share one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeySchedule {
    /// A full protocol run per shot.
    FreshPerShot,
    /// One protocol run per this many shots. Valid because the decrypted
    /// readout distribution does not depend on the key.
    ShotsPerKey(usize),
}

impl KeySchedule {
    fn runs(self, shots: usize) -> Result<Vec<usize>> {
        let per = match self {
            KeySchedule::FreshPerShot => 1,
            KeySchedule::ShotsPerKey(0) => {
                return Err(Error::Config("shots_per_key must be at least 1".into()))
            }
            KeySchedule::ShotsPerKey(k) => k,
        };
        let mut sizes = vec![per; shots / per];
        if shots % per != 0 {
            sizes.push(shots % per);
        }
        Ok(sizes)
    }
}

/// One key's worth of shots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRun {
    pub initial_key: PauliKey,
    #[serde(with = "bell_pairs")]
    pub bell: Vec<(bool, bool)>,
    pub final_key: PauliKey,
    /// Readout bitstrings of the encrypted state, readout order.
    pub encrypted: Vec<String>,
    pub decrypted: Vec<String>,
}

/// Full record of a protocol execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTranscript {
    pub program: KeyUpdateProgram,
    pub readout: Vec<usize>,
    pub runs: Vec<KeyRun>,
}

impl ProtocolTranscript {
    pub fn shots(&self) -> usize {
        self.runs.iter().map(|r| r.encrypted.len()).sum()
    }

    pub fn encrypted_counts(&self) -> BTreeMap<String, usize> {
        tally(self.runs.iter().flat_map(|r| &r.encrypted))
    }

    pub fn decrypted_counts(&self) -> BTreeMap<String, usize> {
        tally(self.runs.iter().flat_map(|r| &r.decrypted))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcript serialization is infallible")
    }
}

fn tally<'a>(it: impl Iterator<Item = &'a String>) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for s in it {
        *m.entry(s.clone()).or_insert(0) += 1;
    }
    m
}

mod bell_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[(bool, bool)], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&(a, b)| [a as u8, b as u8])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(bool, bool)>, D::Error> {
        let raw = Vec::<[u8; 2]>::deserialize(d)?;
        raw.into_iter()
            .map(|[a, b]| match (a, b) {
                (0 | 1, 0 | 1) => Ok((a == 1, b == 1)),
                _ => Err(serde::de::Error::custom("bell outcome bits must be 0 or 1")),
            })
            .collect()
    }
}

/// One protocol run under a single key.
#[derive(Debug, Clone)]
pub struct EvaluatedKey {
    pub initial: PauliKey,
    pub output: ServerOutput,
    pub final_key: PauliKey,
}

impl EvaluatedKey {
    /// The server's final state with the final key removed.
    pub fn decrypted_state(&self) -> Result<StateVector> {
        qotp_apply(&self.output.state, &self.final_key)
    }
}

/// One key: keygen, encrypt, evaluate, replay.
pub fn evaluate_with_fresh_key(
    circuit: &Circuit,
    plain: &StateVector,
    rng: &mut SimRng,
) -> Result<EvaluatedKey> {
    let initial = keygen(plain.n_qubits(), rng)?;
    let enc = qotp_apply(plain, &initial)?;
    let mut tracker = ClientKeyTracker::new(initial.clone());
    let output = server_evaluate(circuit, &enc, &mut tracker, rng)?;
    let final_key = tracker.into_key();
    debug_assert_eq!(
        replay_key(&output.program, &initial, &output.bell).ok().as_ref(),
        Some(&final_key)
    );
    Ok(EvaluatedKey {
        initial,
        output,
        final_key,
    })
}

fn check_inputs(circuit: &Circuit, plain: &StateVector, readout: &[usize]) -> Result<()> {
    circuit.check_clifford_t()?;
    if circuit.n_qubits() != plain.n_qubits() {
        return Err(Error::DimensionMismatch {
            expected: circuit.n_qubits(),
            found: plain.n_qubits(),
        });
    }
    if readout.is_empty() {
        return Err(Error::InvalidInput("readout set is empty".into()));
    }
    if let Some(&q) = readout.iter().find(|&&q| q >= plain.n_qubits()) {
        return Err(Error::QubitOutOfRange {
            index: q,
            n_qubits: plain.n_qubits(),
        });
    }
    Ok(())
}

/// Runs the protocol for `shots` readouts of `readout` (bitstrings in `readout` order).
///
/// Run `r` uses the child stream `r` of a seed drawn from `rng`.
pub fn run_protocol<R: Rng + ?Sized>(
    circuit: &Circuit,
    plain_init: &StateVector,
    readout: &[usize],
    shots: usize,
    schedule: KeySchedule,
    rng: &mut R,
) -> Result<ProtocolTranscript> {
    check_inputs(circuit, plain_init, readout)?;
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let program = emit_program(circuit)?;
    let base: u64 = rng.gen();
    let mut runs = Vec::new();
    for (r, size) in schedule.runs(shots)?.into_iter().enumerate() {
        let mut run_rng = child_rng(base, r as u64);
        let ev = evaluate_with_fresh_key(circuit, plain_init, &mut run_rng)?;
        let mut encrypted = Vec::with_capacity(size);
        let mut decrypted = Vec::with_capacity(size);
        for idx in ev.output.state.sample_indices(size, &mut run_rng)? {
            let bits: Vec<bool> = readout.iter().map(|&q| idx >> q & 1 == 1).collect();
            let x: Vec<bool> = readout.iter().map(|&q| ev.final_key.x()[q]).collect();
            encrypted.push(render(&bits));
            decrypted.push(render(&super::key::decrypt_bits(&bits, &x)?));
        }
        runs.push(KeyRun {
            initial_key: ev.initial,
            bell: ev.output.bell,
            final_key: ev.final_key,
            encrypted,
            decrypted,
        });
    }
    Ok(ProtocolTranscript {
        program,
        readout: readout.to_vec(),
        runs,
    })
}

fn render(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Exact readout probabilities for one key, without sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactReadout {
    /// `P(1)` on the readout qubit of the encrypted final state.
    pub encrypted: f64,
    /// `P(1)` after decrypting with the final x bit.
    pub decrypted: f64,
}

/// Runs the protocol once and reads the exact probability of 1 on `readout`.
pub fn run_protocol_exact<R: Rng + ?Sized>(
    circuit: &Circuit,
    plain_init: &StateVector,
    readout: usize,
    rng: &mut R,
) -> Result<ExactReadout> {
    check_inputs(circuit, plain_init, &[readout])?;
    let mut run_rng = child_rng(rng.gen(), 0);
    let ev = evaluate_with_fresh_key(circuit, plain_init, &mut run_rng)?;
    let p = ev.output.state.prob_one(readout)?;
    Ok(ExactReadout {
        encrypted: p,
        decrypted: if ev.final_key.x()[readout] { 1.0 - p } else { p },
    })
}

/// Ones counted on a single readout qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OnesCount {
    pub shots: usize,
    pub encrypted: usize,
    pub decrypted: usize,
}

impl OnesCount {
    pub fn encrypted_fraction(&self) -> f64 {
        self.encrypted as f64 / self.shots as f64
    }

    pub fn decrypted_fraction(&self) -> f64 {
        self.decrypted as f64 / self.shots as f64
    }
}

/// Same stream layout as [`run_protocol`] for a single readout qubit, keeping only counts.
pub fn run_protocol_counts<R: Rng + ?Sized>(
    circuit: &Circuit,
    plain_init: &StateVector,
    readout: usize,
    shots: usize,
    schedule: KeySchedule,
    rng: &mut R,
) -> Result<OnesCount> {
    check_inputs(circuit, plain_init, &[readout])?;
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    let base: u64 = rng.gen();
    let mut out = OnesCount {
        shots,
        ..OnesCount::default()
    };
    for (r, size) in schedule.runs(shots)?.into_iter().enumerate() {
        let mut run_rng = child_rng(base, r as u64);
        let ev = evaluate_with_fresh_key(circuit, plain_init, &mut run_rng)?;
        let flip = ev.final_key.x()[readout];
        for idx in ev.output.state.sample_indices(size, &mut run_rng)? {
            let bit = idx >> readout & 1 == 1;
            out.encrypted += bit as usize;
            out.decrypted += (bit ^ flip) as usize;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::sim::Gate;

    #[test]
    fn identity_on_one_decrypts_to_one() {
        let c = Circuit::new(1);
        let one = StateVector::basis(1, 1).unwrap();
        let t = run_protocol(&c, &one, &[0], 2000, KeySchedule::FreshPerShot, &mut rng_from_seed(1))
            .unwrap();
        assert_eq!(t.runs.len(), 2000);
        assert_eq!(t.decrypted_counts().get("1"), Some(&2000));
        // σ = sqrt(0.25/2000) ≈ 0.011, tolerance 0.05.
        let enc_ones = *t.encrypted_counts().get("1").unwrap_or(&0) as f64 / 2000.0;
        assert!((enc_ones - 0.5).abs() < 0.05, "{enc_ones}");
    }

    #[test]
    fn bell_circuit_keeps_correlations() {
        let c = Circuit::from_gates(2, vec![Gate::H(0), Gate::Cnot { control: 0, target: 1 }])
            .unwrap();
        let zero = StateVector::new(2).unwrap();
        let t = run_protocol(&c, &zero, &[0, 1], 500, KeySchedule::FreshPerShot, &mut rng_from_seed(2))
            .unwrap();
        for k in t.decrypted_counts().keys() {
            assert!(k == "00" || k == "11", "{k}");
        }
    }

    #[test]
    fn single_t_records_one_bell_pair_per_run() {
        let c = Circuit::from_gates(1, vec![Gate::H(0), Gate::T(0)]).unwrap();
        let zero = StateVector::new(1).unwrap();
        let t = run_protocol(&c, &zero, &[0], 10, KeySchedule::ShotsPerKey(4), &mut rng_from_seed(3))
            .unwrap();
        assert_eq!(t.runs.iter().map(|r| r.encrypted.len()).collect::<Vec<_>>(), [4, 4, 2]);
        assert!(t.runs.iter().all(|r| r.bell.len() == 1));
        assert_eq!(t.program.t_count(), 1);
        for run in &t.runs {
            assert_eq!(replay_key(&t.program, &run.initial_key, &run.bell).unwrap(), run.final_key);
        }
    }

    #[test]
    fn counts_match_transcript_streams() {
        let c = Circuit::from_gates(2, vec![Gate::H(1), Gate::T(1), Gate::H(1), Gate::Cnot { control: 1, target: 0 }])
            .unwrap();
        let zero = StateVector::new(2).unwrap();
        let sched = KeySchedule::ShotsPerKey(8);
        let t = run_protocol(&c, &zero, &[0], 100, sched, &mut rng_from_seed(4)).unwrap();
        let n = run_protocol_counts(&c, &zero, 0, 100, sched, &mut rng_from_seed(4)).unwrap();
        assert_eq!(n.encrypted, *t.encrypted_counts().get("1").unwrap_or(&0));
        assert_eq!(n.decrypted, *t.decrypted_counts().get("1").unwrap_or(&0));
    }

    #[test]
    fn exact_readout_decrypts() {
        let c = Circuit::from_gates(1, vec![Gate::H(0), Gate::T(0), Gate::H(0)]).unwrap();
        let zero = StateVector::new(1).unwrap();
        let mut plain = zero.clone();
        plain.apply_circuit(&c).unwrap();
        let want = plain.prob_one(0).unwrap();
        let mut rng = rng_from_seed(5);
        for _ in 0..20 {
            let r = run_protocol_exact(&c, &zero, 0, &mut rng).unwrap();
            assert!((r.decrypted - want).abs() < 1e-12);
        }
    }

    #[test]
    fn transcript_json_round_trip() {
        let c = Circuit::from_gates(1, vec![Gate::T(0)]).unwrap();
        let zero = StateVector::new(1).unwrap();
        let t = run_protocol(&c, &zero, &[0], 2, KeySchedule::FreshPerShot, &mut rng_from_seed(6))
            .unwrap();
        let s = t.to_json();
        assert!(s.contains(r#""bell":[["#));
        let back: ProtocolTranscript = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = Circuit::new(1);
        let zero = StateVector::new(1).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(run_protocol(&c, &zero, &[0], 0, KeySchedule::FreshPerShot, &mut rng).is_err());
        assert!(run_protocol(&c, &zero, &[1], 1, KeySchedule::FreshPerShot, &mut rng).is_err());
        assert!(run_protocol(&c, &zero, &[0], 1, KeySchedule::ShotsPerKey(0), &mut rng).is_err());
    }
}
