//! Dense statevector simulation.

mod circuit;
mod gate;
pub mod matrix;
mod random;
mod state;

pub use circuit::Circuit;
pub use gate::{Gate, GateKind, GateRecord};
pub use random::random_clifford_t;
pub use state::{bitstring, StateVector};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 24;
