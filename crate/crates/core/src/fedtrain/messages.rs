use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    ClientToServer,
    ServerToClient,
}

/// Classical content of a protocol message. Quantum payloads appear only as opaque markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    /// Server asks for evaluation `index` of the round's schedule (0 = unshifted).
    EvalRequest {
        index: usize,
        param: Option<usize>,
        shift: Option<f64>,
    },
    /// Client hands over its QOTP-encrypted input register.
    EncryptedState { index: usize, n_qubits: usize },
    /// Server returns the encrypted output register and key-update program.
    EncryptedResult { index: usize },
    PartialLoss { value: f64 },
    PartialGradient { values: Vec<f64> },
    SampleSize { n: usize },
    /// Server announces that it applied its update.
    WeightsUpdated { iteration: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMessage {
    pub direction: Direction,
    /// The client sending or receiving; empty for broadcasts.
    pub client: String,
    pub payload: Payload,
}

impl RoundMessage {
    pub fn to_server(client: &str, payload: Payload) -> Self {
        RoundMessage {
            direction: Direction::ClientToServer,
            client: client.to_string(),
            payload,
        }
    }

    pub fn to_client(client: &str, payload: Payload) -> Self {
        RoundMessage {
            direction: Direction::ServerToClient,
            client: client.to_string(),
            payload,
        }
    }

    pub fn broadcast(payload: Payload) -> Self {
        RoundMessage {
            direction: Direction::ServerToClient,
            client: String::new(),
            payload,
        }
    }
}

/// Rejects any client-to-server message other than an encrypted register or
/// aggregate statistics; the payload types carry no features, labels or keys.
pub fn check_privacy(trace: &[RoundMessage]) -> Result<()> {
    for (i, m) in trace.iter().enumerate() {
        let allowed = match m.direction {
            Direction::ClientToServer => matches!(
                m.payload,
                Payload::EncryptedState { .. }
                    | Payload::PartialLoss { .. }
                    | Payload::PartialGradient { .. }
                    | Payload::SampleSize { .. }
            ),
            Direction::ServerToClient => matches!(
                m.payload,
                Payload::EvalRequest { .. }
                    | Payload::EncryptedResult { .. }
                    | Payload::WeightsUpdated { .. }
            ),
        };
        if !allowed {
            return Err(Error::InvalidInput(format!(
                "message {i} ({:?} from/to {:?}) violates the privacy boundary",
                m.direction, m.client
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_check() {
        let ok = vec![
            RoundMessage::to_server("A", Payload::PartialLoss { value: 0.3 }),
            RoundMessage::to_client("A", Payload::EvalRequest { index: 0, param: None, shift: None }),
        ];
        check_privacy(&ok).unwrap();
        let bad = vec![RoundMessage::to_server("A", Payload::EvalRequest { index: 0, param: None, shift: None })];
        assert!(check_privacy(&bad).is_err());
        let j = serde_json::to_string(&ok[0]).unwrap();
        assert_eq!(j, r#"{"direction":"client_to_server","client":"A","payload":{"kind":"partial_loss","value":0.3}}"#);
    }
}
