//! Quantum homomorphic encryption for quantum convolutional neural networks.
//!
//! The crate simulates the one-time-pad based QHE scheme end to end on a dense
//! statevector simulator: client key generation and encryption, server-side
//! homomorphic evaluation of Clifford+T circuits (T gates through a
//! teleportation gadget), key-update programs and decryption. On top of it sit
//! a Clifford+T transpiler, a QCNN model with parameter-shift training, a
//! federated trainer where data providers only ever send encrypted states, and
//! private inference with a Pauli-stripping privacy audit.

pub mod data;
pub mod error;
pub mod fedtrain;
pub mod privinf;
pub mod qcnn;
pub mod qhe;
pub mod rng;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
pub use sim::{Circuit, Gate, GateKind, StateVector};
