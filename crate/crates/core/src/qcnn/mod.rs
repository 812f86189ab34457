//! Quantum convolutional neural network.
//!
//! Each layer applies a two-qubit SO(4) convolution subunit to every
//! cyclically adjacent pair of active qubits, then a CRZ + anti-controlled RX
//! pooling subunit to consecutive pairs; the control of each pooling pair is
//! dropped. All subunits of a layer share the layer's eight parameters. The
//! single survivor is read out as `f = P(1)`.

mod ansatz;
mod encoding;
mod train;

pub use ansatz::{
    build_ansatz, AnsatzSpec, LayerSpec, Occurrence, Shift, ShiftRule, ShiftTerm,
    PARAMS_PER_LAYER,
};
pub use encoding::{encode_amplitude, encode_qubit, Encoding};
pub use train::{
    accuracy, cross_entropy, fit, forward, grad_adjoint, grad_parameter_shift, gradient_with, init_theta,
    loss_factor, predict, readout, AdamState, EvalMode, FitConfig, FitResult, Model, PROB_CLIP,
};
