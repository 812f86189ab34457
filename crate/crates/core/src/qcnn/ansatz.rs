use std::f64::consts::{FRAC_PI_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Circuit, Gate};

/// Parameters per layer: six for the convolution subunit, two for pooling.
pub const PARAMS_PER_LAYER: usize = 8;

/// One convolution + pooling layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub conv_param_base: usize,
    pub pool_param_base: usize,
    /// Effective qubits entering this layer.
    pub active: Vec<usize>,
}

impl LayerSpec {
    /// Cyclic nearest-neighbour pairs; a single pair when two qubits remain.
    pub fn conv_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.active.len();
        if m == 2 {
            return vec![(self.active[0], self.active[1])];
        }
        (0..m)
            .map(|j| (self.active[j], self.active[(j + 1) % m]))
            .collect()
    }

    /// Non-overlapping `(control, target)` pairs; targets survive.
    pub fn pool_pairs(&self) -> Vec<(usize, usize)> {
        self.active.chunks(2).map(|p| (p[0], p[1])).collect()
    }
}

/// QCNN layout with layer-shared parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub layers: Vec<LayerSpec>,
    pub readout_qubit: usize,
}

/// How a rotation occurrence is differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftRule {
    /// `½[f(θ + π/2) − f(θ − π/2)]`.
    TwoTerm,
    /// `c₊[f(θ + π/2) − f(θ − π/2)] − c₋[f(θ + 3π/2) − f(θ − 3π/2)]`.
    FourTerm,
}

/// A parameterized gate in the bound circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occurrence {
    pub param: usize,
    /// Index of the gate in [`bind`]'s output.
    pub gate_index: usize,
    pub rule: ShiftRule,
}

/// Offset added to a single occurrence's angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shift {
    pub occurrence: usize,
    pub delta: f64,
}

/// One circuit evaluation of the gradient schedule and its weight in `∂f/∂θ_param`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftTerm {
    pub param: usize,
    pub shift: Shift,
    pub coeff: f64,
}

pub fn build_ansatz(n: usize) -> Result<AnsatzSpec> {
    if n < 2 || !n.is_power_of_two() || n > crate::sim::MAX_QUBITS {
        return Err(Error::InvalidInput(format!(
            "QCNN width {n} is not a power of two in 2..=16"
        )));
    }
    let mut layers = Vec::new();
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        let l = layers.len();
        let layer = LayerSpec {
            conv_param_base: PARAMS_PER_LAYER * l,
            pool_param_base: PARAMS_PER_LAYER * l + 6,
            active: active.clone(),
        };
        active = layer.pool_pairs().into_iter().map(|(_, t)| t).collect();
        layers.push(layer);
    }
    Ok(AnsatzSpec {
        n_qubits: n,
        layers,
        readout_qubit: active[0],
    })
}

impl AnsatzSpec {
    pub fn n_params(&self) -> usize {
        PARAMS_PER_LAYER * self.layers.len()
    }

    /// Qubits dropped by pooling, with the index of the layer that drops them.
    pub fn discarded(&self) -> Vec<(usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| layer.pool_pairs().into_iter().map(move |(c, _)| (c, l)))
            .collect()
    }

    fn gates_with_params(&self) -> Vec<(Gate, Option<usize>)> {
        let mut out = Vec::new();
        for layer in &self.layers {
            let p = layer.conv_param_base;
            for (a, b) in layer.conv_pairs() {
                out.push((Gate::Ry(a, 0.0), Some(p)));
                out.push((Gate::Ry(b, 0.0), Some(p + 1)));
                out.push((Gate::Cnot { control: a, target: b }, None));
                out.push((Gate::Ry(a, 0.0), Some(p + 2)));
                out.push((Gate::Ry(b, 0.0), Some(p + 3)));
                out.push((Gate::Cnot { control: a, target: b }, None));
                out.push((Gate::Ry(a, 0.0), Some(p + 4)));
                out.push((Gate::Ry(b, 0.0), Some(p + 5)));
            }
            let p = layer.pool_param_base;
            for (c, t) in layer.pool_pairs() {
                out.push((
                    Gate::Crz {
                        control: c,
                        target: t,
                        angle: 0.0,
                    },
                    Some(p),
                ));
                out.push((
                    Gate::Acrx {
                        control: c,
                        target: t,
                        angle: 0.0,
                    },
                    Some(p + 1),
                ));
            }
        }
        out
    }

    /// Every parameterized gate in bind order.
    pub fn occurrences(&self) -> Vec<Occurrence> {
        self.gates_with_params()
            .into_iter()
            .enumerate()
            .filter_map(|(i, (g, p))| {
                p.map(|param| Occurrence {
                    param,
                    gate_index: i,
                    rule: match g {
                        Gate::Crz { .. } | Gate::Acrx { .. } => ShiftRule::FourTerm,
                        _ => ShiftRule::TwoTerm,
                    },
                })
            })
            .collect()
    }

    /// The shifted evaluations whose weighted sum is the gradient.
    pub fn shift_schedule(&self) -> Vec<ShiftTerm> {
        let c_plus = (SQRT_2 + 1.0) / (4.0 * SQRT_2);
        let c_minus = (SQRT_2 - 1.0) / (4.0 * SQRT_2);
        let mut out = Vec::new();
        for (k, occ) in self.occurrences().into_iter().enumerate() {
            let term = |delta: f64, coeff: f64| ShiftTerm {
                param: occ.param,
                shift: Shift {
                    occurrence: k,
                    delta,
                },
                coeff,
            };
            match occ.rule {
                ShiftRule::TwoTerm => {
                    out.push(term(FRAC_PI_2, 0.5));
                    out.push(term(-FRAC_PI_2, -0.5));
                }
                ShiftRule::FourTerm => {
                    out.push(term(FRAC_PI_2, c_plus));
                    out.push(term(-FRAC_PI_2, -c_plus));
                    out.push(term(3.0 * FRAC_PI_2, -c_minus));
                    out.push(term(-3.0 * FRAC_PI_2, c_minus));
                }
            }
        }
        out
    }

    pub fn bind(&self, theta: &[f64]) -> Result<Circuit> {
        self.bind_shifted(theta, None)
    }

    /// Binds `theta`, adding `shift.delta` to one occurrence only.
    pub fn bind_shifted(&self, theta: &[f64], shift: Option<Shift>) -> Result<Circuit> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                found: theta.len(),
            });
        }
        if let Some(i) = theta.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidInput(format!("theta[{i}] is not finite")));
        }
        let mut occurrence = 0;
        let gates = self
            .gates_with_params()
            .into_iter()
            .map(|(g, p)| match p {
                Some(param) => {
                    let mut a = theta[param];
                    if let Some(s) = shift.filter(|s| s.occurrence == occurrence) {
                        a += s.delta;
                    }
                    occurrence += 1;
                    g.with_angle(a)
                }
                None => g,
            })
            .collect();
        Circuit::from_gates(self.n_qubits, gates)
    }
}
