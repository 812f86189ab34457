//! Quantum one-time-pad homomorphic encryption.
//!
//! The client encrypts with a random Pauli key, the server evaluates a
//! Clifford+T circuit and emits a key-update program, and the client replays
//! that program (using the Bell outcomes of each T gadget) to obtain the final
//! decryption key. Only x bits matter for computational-basis readout; z bits
//! are tracked for completeness and for state-level decryption.

mod evaluator;
mod key;
mod program;
mod protocol;

pub use evaluator::{server_evaluate, ClientKeyTracker, EvalRegister, KeyOracle, ServerOutput};
pub use key::{decrypt_bits, keygen, qotp_apply, qotp_apply_in_place, PauliKey};
pub use program::{emit_program, replay_key, BellOutcomes, KeyUpdateProgram, KeyUpdateStep};
pub use protocol::{
    evaluate_with_fresh_key, run_protocol, run_protocol_counts, run_protocol_exact, EvaluatedKey,
    ExactReadout, KeyRun, KeySchedule,
    OnesCount, ProtocolTranscript,
};
