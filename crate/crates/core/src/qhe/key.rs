use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::program::KeyUpdateStep;
use crate::error::{Error, Result};
use crate::sim::StateVector;

/// Client secret: one X bit and one Z bit per qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliKey {
    x: Vec<bool>,
    z: Vec<bool>,
}

fn bits_to_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub(crate) fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidInput(format!("bad bit character {other:?}"))),
        })
        .collect()
}

impl PauliKey {
    pub fn new(x: Vec<bool>, z: Vec<bool>) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: z.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::InvalidInput("key must cover at least one qubit".into()));
        }
        Ok(PauliKey { x, z })
    }

    pub fn zeros(n: usize) -> Self {
        PauliKey {
            x: vec![false; n],
            z: vec![false; n],
        }
    }

    /// Parses the `"0110"`-style strings used in transcripts (qubit 0 first).
    pub fn from_strings(x: &str, z: &str) -> Result<Self> {
        Self::new(parse_bits(x)?, parse_bits(z)?)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x(&self) -> &[bool] {
        &self.x
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn x_string(&self) -> String {
        bits_to_string(&self.x)
    }

    pub fn z_string(&self) -> String {
        bits_to_string(&self.z)
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.len() {
            return Err(Error::QubitOutOfRange {
                index: q,
                n_qubits: self.len(),
            });
        }
        Ok(())
    }

    /// Key update for an `H`, `S` or `CNOT` step.
    pub fn update_clifford(&mut self, step: &KeyUpdateStep) -> Result<()> {
        match *step {
            KeyUpdateStep::H { q } => {
                self.check(q)?;
                std::mem::swap(&mut self.x[q], &mut self.z[q]);
            }
            KeyUpdateStep::S { q } => {
                self.check(q)?;
                self.z[q] ^= self.x[q];
            }
            KeyUpdateStep::Cnot { c, t } => {
                self.check(c)?;
                self.check(t)?;
                if c == t {
                    return Err(Error::MalformedProgram(format!("CNOT on repeated qubit {c}")));
                }
                self.z[c] ^= self.z[t];
                self.x[t] ^= self.x[c];
            }
            KeyUpdateStep::T { .. } => return Err(Error::NotCliffordStep(step.to_string())),
        }
        Ok(())
    }

    /// Key update after the T gadget on `q` with Bell outcomes `(r_a, r_b)`:
    /// `(x, z) → (x ⊕ r_a, x ⊕ z ⊕ r_b)`.
    pub fn update_t(&mut self, q: usize, r_a: bool, r_b: bool) -> Result<()> {
        self.check(q)?;
        let x = self.x[q];
        self.x[q] = x ^ r_a;
        self.z[q] = x ^ self.z[q] ^ r_b;
        Ok(())
    }
}

impl fmt::Display for PauliKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x={} z={}", self.x_string(), self.z_string())
    }
}

#[derive(Serialize, Deserialize)]
struct KeyRecord {
    x: String,
    z: String,
}

impl Serialize for PauliKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KeyRecord {
            x: self.x_string(),
            z: self.z_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PauliKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = KeyRecord::deserialize(d)?;
        PauliKey::from_strings(&rec.x, &rec.z).map_err(serde::de::Error::custom)
    }
}

/// Draws `2n` independent uniform key bits.
pub fn keygen<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<PauliKey> {
    if n == 0 {
        return Err(Error::InvalidInput("key length must be at least 1".into()));
    }
    let x = (0..n).map(|_| rng.gen::<bool>()).collect();
    let z = (0..n).map(|_| rng.gen::<bool>()).collect();
    Ok(PauliKey { x, z })
}

/// Applies `⊗ X_i^{x_i} Z_i^{z_i}`. Encryption and decryption are the same map.
pub fn qotp_apply(state: &StateVector, key: &PauliKey) -> Result<StateVector> {
    let mut out = state.clone();
    qotp_apply_in_place(&mut out, key)?;
    Ok(out)
}

pub fn qotp_apply_in_place(state: &mut StateVector, key: &PauliKey) -> Result<()> {
    if state.n_qubits() != key.len() {
        return Err(Error::DimensionMismatch {
            expected: state.n_qubits(),
            found: key.len(),
        });
    }
    for q in 0..key.len() {
        if key.z[q] {
            state.apply_gate_unchecked(&crate::sim::Gate::Z(q));
        }
        if key.x[q] {
            state.apply_x(q);
        }
    }
    Ok(())
}

/// Decrypts a computational-basis readout: XOR with the final x bits.
/// Z bits do not affect basis measurements and are ignored here.
pub fn decrypt_bits(bits: &[bool], final_x: &[bool]) -> Result<Vec<bool>> {
    if bits.len() != final_x.len() {
        return Err(Error::DimensionMismatch {
            expected: final_x.len(),
            found: bits.len(),
        });
    }
    Ok(bits.iter().zip(final_x).map(|(b, x)| b ^ x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn pair(x: bool, z: bool) -> PauliKey {
        PauliKey::new(vec![x], vec![z]).unwrap()
    }

    #[test]
    fn keygen_is_reproducible_and_rejects_zero() {
        let a = keygen(2, &mut rng_from_seed(11)).unwrap();
        let b = keygen(2, &mut rng_from_seed(11)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(keygen(0, &mut rng_from_seed(0)).is_err());
    }

    #[test]
    fn keygen_bits_are_balanced() {
        // 1e5 draws: binomial σ = sqrt(0.25/1e5) ≈ 0.0016, tolerance 0.01 ≈ 6σ.
        let mut rng = rng_from_seed(5);
        let draws = 100_000;
        let mut ones = [0usize; 4];
        for _ in 0..draws {
            let k = keygen(2, &mut rng).unwrap();
            for (slot, bit) in k.x().iter().chain(k.z()).enumerate() {
                ones[slot] += *bit as usize;
            }
        }
        for c in ones {
            let f = c as f64 / draws as f64;
            assert!((f - 0.5).abs() < 0.01, "{f}");
        }
    }

    #[test]
    fn table_rows() {
        let mut k = pair(true, false);
        k.update_clifford(&KeyUpdateStep::H { q: 0 }).unwrap();
        assert_eq!(k, pair(false, true));

        let mut k = pair(true, true);
        k.update_clifford(&KeyUpdateStep::S { q: 0 }).unwrap();
        assert_eq!(k, pair(true, false));

        let mut k = PauliKey::new(vec![true, false], vec![false, true]).unwrap();
        k.update_clifford(&KeyUpdateStep::Cnot { c: 0, t: 1 }).unwrap();
        assert_eq!(k, PauliKey::new(vec![true, true], vec![true, true]).unwrap());

        let err = pair(false, false).update_clifford(&KeyUpdateStep::T { q: 0, bell: 1 });
        assert!(matches!(err, Err(Error::NotCliffordStep(_))));
    }

    #[test]
    fn t_update_rule() {
        let mut k = pair(true, false);
        k.update_t(0, true, false).unwrap();
        assert_eq!(k, pair(false, true));
        let mut k = pair(false, false);
        k.update_t(0, false, false).unwrap();
        assert_eq!(k, pair(false, false));
        // (1,1) with r = (0,1): x stays 1, z = 1 ⊕ 1 ⊕ 1 = 1.
        let mut k = pair(true, true);
        k.update_t(0, false, true).unwrap();
        assert_eq!(k, pair(true, true));
        assert!(pair(false, false).update_t(1, false, false).is_err());
    }

    #[test]
    fn qotp_cases() {
        let zero = StateVector::new(1).unwrap();
        let enc = qotp_apply(&zero, &pair(true, false)).unwrap();
        assert_eq!(enc, StateVector::basis(1, 1).unwrap());
        assert_eq!(qotp_apply(&zero, &PauliKey::zeros(1)).unwrap(), zero);
        assert!(qotp_apply(&zero, &PauliKey::zeros(2)).is_err());
    }

    #[test]
    fn decrypt_bits_is_xor() {
        let out = decrypt_bits(&[false, true], &[true, true]).unwrap();
        assert_eq!(out, vec![true, false]);
        assert_eq!(decrypt_bits(&[true], &[false]).unwrap(), vec![true]);
        let twice = decrypt_bits(&out, &[true, true]).unwrap();
        assert_eq!(twice, vec![false, true]);
        assert!(decrypt_bits(&[true], &[true, false]).is_err());
    }

    #[test]
    fn key_json_uses_bit_strings() {
        let k = PauliKey::from_strings("10", "01").unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert_eq!(s, r#"{"x":"10","z":"01"}"#);
        assert_eq!(serde_json::from_str::<PauliKey>(&s).unwrap(), k);
    }
}
