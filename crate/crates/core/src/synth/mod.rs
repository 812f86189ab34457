//! Clifford+T transpilation.
//!
//! Rotations are rewritten to `R_Z`, controlled rotations are expanded, and
//! each `R_Z(θ)` becomes a word over {X, Z, H, S, T}. Multiples of π/4 map to
//! exact words; other angles go through a meet-in-the-middle search that
//! returns the minimum T-count word within the per-gate tolerance.
//!
//! Tolerances use the phase-invariant distance `d(U, V) = sqrt(1 − |tr(U†V)|/2)`.
//! For single-qubit operators `d ≤ min_φ ‖U − e^{iφ}V‖ / √2`, and `d` is
//! subadditive under composition, so per-gate tolerances add up to a bound on
//! the whole circuit.

mod rewrite;
mod search;
mod transpile;

use std::f64::consts::{FRAC_PI_4, TAU};
use std::num::NonZeroUsize;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::matrix::{gate_matrix, mat_mul, phase_distance, rz, IDENTITY};
use crate::sim::{Gate, GateKind};

pub use rewrite::{decompose_controlled, predicted_rz_count, rewrite_rotations, strip_paulis};
pub use search::MAX_REACHABLE_DEPTH;
pub use transpile::{transpile, TranspileReport};

/// How non-dyadic angles are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Only multiples of π/4 are accepted.
    ExactDyadic,
    /// Multiples of π/4 exactly, everything else by search.
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub epsilon: f64,
    pub backend: Backend,
    /// Largest total T-count the search explores.
    pub max_search_depth: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            epsilon: 1e-2,
            backend: Backend::Search,
            max_search_depth: 34,
        }
    }
}

impl SynthConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        SynthConfig {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.5) {
            return Err(Error::Config(format!(
                "epsilon {} outside (0, 0.5]",
                self.epsilon
            )));
        }
        if self.max_search_depth > 40 {
            return Err(Error::Config(format!(
                "max_search_depth {} exceeds 40",
                self.max_search_depth
            )));
        }
        Ok(())
    }
}

/// A synthesized `R_Z` replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthWord {
    /// Single-qubit gates in time order.
    pub word: Vec<GateKind>,
    pub t_count: usize,
    /// Verified phase-invariant distance to the requested rotation.
    pub distance: f64,
}

impl SynthWord {
    pub fn len(&self) -> usize {
        self.word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }

    pub fn gates(&self, qubit: usize) -> impl Iterator<Item = Gate> + '_ {
        self.word.iter().map(move |&k| {
            Gate::from_parts(k, &[qubit], None).expect("single-qubit Clifford+T kind")
        })
    }
}

/// Unitary of a time-ordered single-qubit word.
pub fn word_matrix(word: &[GateKind]) -> crate::sim::matrix::Mat2 {
    word.iter().fold(IDENTITY, |acc, &k| {
        let g = Gate::from_parts(k, &[0], None).expect("single-qubit fixed gate");
        mat_mul(&gate_matrix(&g).expect("single-qubit gate"), &acc)
    })
}

/// Exact word for `R_Z(k·π/4)`.
pub fn dyadic_word(k: usize) -> Vec<GateKind> {
    use GateKind::{S, T, Z};
    match k % 8 {
        0 => vec![],
        1 => vec![T],
        2 => vec![S],
        3 => vec![S, T],
        4 => vec![Z],
        5 => vec![Z, T],
        6 => vec![Z, S],
        _ => vec![Z, S, T],
    }
}

/// `Some(k)` when `theta ≡ k·π/4 (mod 2π)` within 1e-12.
pub fn dyadic_index(theta: f64) -> Option<usize> {
    let x = theta.rem_euclid(TAU) / FRAC_PI_4;
    let k = x.round();
    ((x - k).abs() * FRAC_PI_4 <= 1e-12).then_some(k as usize % 8)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct CacheKey {
    angle: i64,
    epsilon: u64,
    depth: usize,
}

struct Inner {
    tables: search::SearchTables,
    cache: lru::LruCache<CacheKey, SynthWord>,
}

/// Search tables plus a bounded LRU cache of synthesized angles.
pub struct Synthesizer {
    inner: Mutex<Inner>,
}

impl Synthesizer {
    pub fn new(cache_capacity: usize) -> Self {
        Synthesizer {
            inner: Mutex::new(Inner {
                tables: search::SearchTables::new(),
                cache: lru::LruCache::new(
                    NonZeroUsize::new(cache_capacity.max(1)).expect("nonzero"),
                ),
            }),
        }
    }

    /// Process-wide instance used by [`synthesize_rz`] and [`transpile`].
    pub fn global() -> &'static Synthesizer {
        static GLOBAL: OnceLock<Synthesizer> = OnceLock::new();
        GLOBAL.get_or_init(|| Synthesizer::new(1 << 16))
    }

    pub fn synthesize(&self, theta: f64, config: &SynthConfig) -> Result<SynthWord> {
        config.validate()?;
        if !theta.is_finite() {
            return Err(Error::NonFiniteAngle {
                gate: "RZ",
                angle: theta,
            });
        }
        let target = rz(theta);
        if let Some(k) = dyadic_index(theta) {
            let word = dyadic_word(k);
            return Ok(SynthWord {
                t_count: word.iter().filter(|&&g| g == GateKind::T).count(),
                distance: phase_distance(&word_matrix(&word), &target),
                word,
            });
        }
        if config.backend == Backend::ExactDyadic {
            return Err(Error::Config(format!(
                "angle {theta} is not a multiple of pi/4 and the backend is exact_dyadic"
            )));
        }
        let key = CacheKey {
            angle: (theta.rem_euclid(TAU) * 1e9).round() as i64,
            epsilon: config.epsilon.to_bits(),
            depth: config.max_search_depth,
        };
        let mut inner = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(hit) = inner.cache.get(&key) {
            let d = phase_distance(&word_matrix(&hit.word), &target);
            if d <= config.epsilon {
                return Ok(SynthWord {
                    distance: d,
                    ..hit.clone()
                });
            }
        }
        match inner
            .tables
            .search(&target, config.epsilon, config.max_search_depth)
        {
            search::SearchOutcome::Found(f) => {
                let distance = phase_distance(&word_matrix(&f.word), &target);
                if distance > config.epsilon {
                    // The search accepts on quaternion distance; the matrix check is authoritative.
                    return Err(Error::SynthesisExhausted {
                        theta,
                        epsilon: config.epsilon,
                        depth: config.max_search_depth,
                        best: distance,
                    });
                }
                let out = SynthWord {
                    word: f.word,
                    t_count: f.t_count,
                    distance,
                };
                inner.cache.put(key, out.clone());
                Ok(out)
            }
            search::SearchOutcome::Exhausted { best } => Err(Error::SynthesisExhausted {
                theta,
                epsilon: config.epsilon,
                depth: config.max_search_depth,
                best,
            }),
        }
    }
}

/// Word over {X, Z, H, S, T} within `config.epsilon` of `R_Z(theta)`, using the global synthesizer.
pub fn synthesize_rz(theta: f64, config: &SynthConfig) -> Result<SynthWord> {
    Synthesizer::global().synthesize(theta, config)
}
