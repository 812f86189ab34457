use serde::{Deserialize, Serialize};

use super::{rewrite_rotations, Synthesizer, SynthConfig};
use crate::error::{Error, Result};
use crate::sim::{Circuit, Gate, GateKind};

/// Counts and error accounting of one transpilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranspileReport {
    /// R_Z gates after rotation rewriting, dyadic ones included.
    pub r_z_count: usize,
    /// T gates in the output circuit: `Σ per_rotation_t + passthrough_t`.
    pub t_count: usize,
    pub per_gate_epsilon: f64,
    pub total_budget: f64,
    pub per_rotation_t: Vec<usize>,
    pub per_rotation_distance: Vec<f64>,
    /// T gates present in the input (after lowering `T†`), not produced by synthesis.
    pub passthrough_t: usize,
    /// Sum of per-rotation distances; bounds the end-to-end distance.
    pub distance_bound: f64,
}

/// Lowers `circuit` to {X, Z, H, S, T, CNOT}.
///
/// With `total_budget = Some(ϵ)` every R_Z gets `ϵ / r_z_count` (capped at 0.5);
/// with `None` every R_Z gets `config.epsilon`.
pub fn transpile(
    circuit: &Circuit,
    total_budget: Option<f64>,
    config: &SynthConfig,
) -> Result<(Circuit, TranspileReport)> {
    transpile_with(Synthesizer::global(), circuit, total_budget, config)
}

pub(crate) fn transpile_with(
    synth: &Synthesizer,
    circuit: &Circuit,
    total_budget: Option<f64>,
    config: &SynthConfig,
) -> Result<(Circuit, TranspileReport)> {
    let rewritten = rewrite_rotations(circuit)?;
    let r_z_count = rewritten.count(GateKind::Rz);
    let per_gate_epsilon = match total_budget {
        Some(b) if !(b > 0.0 && b.is_finite()) => {
            return Err(Error::Config(format!("total budget {b} must be positive")))
        }
        Some(b) if r_z_count > 0 => (b / r_z_count as f64).min(0.5),
        _ => config.epsilon,
    };
    let gate_config = SynthConfig {
        epsilon: per_gate_epsilon,
        ..*config
    };
    gate_config.validate()?;

    let mut gates = Vec::with_capacity(rewritten.len() * 8);
    let mut per_rotation_t = Vec::with_capacity(r_z_count);
    let mut per_rotation_distance = Vec::with_capacity(r_z_count);
    let mut passthrough_t = 0;
    for g in rewritten.gates() {
        match *g {
            Gate::Rz(q, theta) => {
                let w = synth.synthesize(theta, &gate_config)?;
                gates.extend(w.gates(q));
                per_rotation_t.push(w.t_count);
                per_rotation_distance.push(w.distance);
            }
            Gate::T(_) => {
                passthrough_t += 1;
                gates.push(*g);
            }
            other => gates.push(other),
        }
    }
    let out = Circuit::from_gates(circuit.n_qubits(), gates)?;
    let report = TranspileReport {
        r_z_count,
        t_count: out.t_count(),
        per_gate_epsilon,
        total_budget: total_budget.unwrap_or(per_gate_epsilon * r_z_count as f64),
        distance_bound: per_rotation_distance.iter().sum(),
        per_rotation_t,
        per_rotation_distance,
        passthrough_t,
    };
    debug_assert_eq!(
        report.t_count,
        report.per_rotation_t.iter().sum::<usize>() + report.passthrough_t
    );
    Ok((out, report))
}
