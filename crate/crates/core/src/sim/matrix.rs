//! Small dense unitaries and the phase-invariant distance.
//!
//! Distances use `d(U, V) = sqrt(1 - |tr(U^† V)| / N)`, evaluated in the
//! equivalent form `min_φ ‖U − e^{iφ}V‖_F / sqrt(2N)` so that values near zero
//! keep full precision. For single-qubit operators `d ≤ min_φ ‖U − e^{iφ}V‖_op / √2`,
//! so a word with `d ≤ ε` is also within `√2·ε` in phase-optimized operator norm.

use num_complex::Complex64;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use super::circuit::Circuit;
use super::gate::Gate;
use super::state::StateVector;
use crate::error::Result;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Row-major 2×2 complex matrix.
pub type Mat2 = [[C64; 2]; 2];

pub const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

pub fn mat_dagger(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn rz(theta: f64) -> Mat2 {
    [
        [C64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, C64::from_polar(1.0, theta / 2.0)],
    ]
}

pub fn rx(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::new(c, 0.0)]]
}

pub fn ry(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [[C64::new(c, 0.0), C64::new(-s, 0.0)], [C64::new(s, 0.0), C64::new(c, 0.0)]]
}

pub fn diag(d1: C64) -> Mat2 {
    [[ONE, ZERO], [ZERO, d1]]
}

pub const H: Mat2 = [
    [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(FRAC_1_SQRT_2, 0.0)],
    [C64::new(FRAC_1_SQRT_2, 0.0), C64::new(-FRAC_1_SQRT_2, 0.0)],
];
pub const X: Mat2 = [[ZERO, ONE], [ONE, ZERO]];
pub const Z: Mat2 = [[ONE, ZERO], [ZERO, C64::new(-1.0, 0.0)]];
pub const S: Mat2 = [[ONE, ZERO], [ZERO, I]];

pub fn t() -> Mat2 {
    diag(C64::from_polar(1.0, FRAC_PI_4))
}

/// Matrix of a single-qubit gate; `None` for multi-qubit kinds.
pub fn gate_matrix(g: &Gate) -> Option<Mat2> {
    Some(match *g {
        Gate::X(_) => X,
        Gate::Z(_) => Z,
        Gate::H(_) => H,
        Gate::S(_) => S,
        Gate::Sdg(_) => diag(-I),
        Gate::T(_) => t(),
        Gate::Tdg(_) => diag(C64::from_polar(1.0, -FRAC_PI_4)),
        Gate::Rx(_, a) => rx(a),
        Gate::Ry(_, a) => ry(a),
        Gate::Rz(_, a) => rz(a),
        _ => return None,
    })
}

/// Phase-invariant distance between 2×2 unitaries.
pub fn phase_distance(u: &Mat2, v: &Mat2) -> f64 {
    let flat_u = [u[0][0], u[0][1], u[1][0], u[1][1]];
    let flat_v = [v[0][0], v[0][1], v[1][0], v[1][1]];
    dense_distance(&flat_u, &flat_v, 2)
}

/// Phase-invariant distance between two row-major `dim × dim` unitaries.
pub fn dense_distance(u: &[C64], v: &[C64], dim: usize) -> f64 {
    debug_assert_eq!(u.len(), dim * dim);
    debug_assert_eq!(v.len(), dim * dim);
    let tr: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    let phase = if tr.norm() > 0.0 { tr.conj() / tr.norm() } else { ONE };
    let frob: f64 = u
        .iter()
        .zip(v)
        .map(|(a, b)| (a - phase * b).norm_sqr())
        .sum();
    (frob / (2.0 * dim as f64)).sqrt()
}

/// Dense unitary of a small circuit, row-major. Column `j` is the image of `|j⟩`.
pub fn circuit_unitary(circuit: &Circuit) -> Result<Vec<C64>> {
    let n = circuit.n_qubits();
    let dim = 1usize << n;
    let mut u = vec![ZERO; dim * dim];
    for col in 0..dim {
        let mut st = StateVector::basis(n, col)?;
        st.apply_circuit(circuit)?;
        for (row, a) in st.amplitudes().iter().enumerate() {
            u[row * dim + col] = *a;
        }
    }
    Ok(u)
}

/// Phase-invariant distance between the unitaries of two circuits on the same register.
pub fn circuit_distance(a: &Circuit, b: &Circuit) -> Result<f64> {
    let dim = 1usize << a.n_qubits();
    Ok(dense_distance(&circuit_unitary(a)?, &circuit_unitary(b)?, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_is_phase_invariant_and_precise() {
        let u = rz(0.3);
        let mut v = u;
        for row in v.iter_mut() {
            for x in row.iter_mut() {
                *x *= C64::from_polar(1.0, 1.1);
            }
        }
        assert!(phase_distance(&u, &v) < 1e-15);
        // T equals R_Z(π/4) up to phase.
        assert!(phase_distance(&t(), &rz(FRAC_PI_4)) < 1e-15);
    }

    #[test]
    fn distance_matches_trace_formula() {
        let u = rx(0.7);
        let v = ry(-0.2);
        let tr: C64 = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| u[i][j].conj() * v[i][j])
            .sum();
        let expect = (1.0 - tr.norm() / 2.0).sqrt();
        assert!((phase_distance(&u, &v) - expect).abs() < 1e-12);
    }
}
