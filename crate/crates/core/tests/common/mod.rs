#![allow(dead_code)]

use qhenn_core::sim::matrix::C64;
use qhenn_core::StateVector;
use rand::Rng;
use rand_distr::StandardNormal;

/// Haar-ish random state from Gaussian amplitudes.
pub fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
    let raw: Vec<C64> = (0..1 << n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = raw.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(raw.into_iter().map(|a| a / norm).collect()).unwrap()
}

/// `max_i |a_i − e^{iφ} b_i|` with `φ` aligning the two states' overlap.
pub fn phase_aligned_error(a: &StateVector, b: &StateVector) -> f64 {
    let ov = b.inner(a);
    let phase = if ov.norm() > 1e-300 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
    a.amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}
