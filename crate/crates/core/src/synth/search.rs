//! Meet-in-the-middle search for Clifford+T approximations of `R_Z(θ)`.
//!
//! Every single-qubit Clifford+T operator has, up to phase, a unique
//! Matsumoto–Amano normal form `(T|ε)(HT|SHT)^j C` with `C` one of the 24
//! Cliffords; its T-count is the number of `T` letters. The right table holds
//! complete normal forms, the left table holds Clifford-free prefixes. An
//! operator of T-count `t ≤ A + B` always splits into a left prefix of
//! T-count `min(t, A)` and a right remainder of T-count at most `B`, so a scan
//! over left prefixes against a proximity index of the right table finds the
//! exact minimum T-count approximation within the searched depth.
//!
//! Right entries are stored as unit quaternions of their SU(2) representative.
//! For unit quaternions `p, q` the phase-invariant distance is
//! `min(‖p − q‖, ‖p + q‖) / √2`, so a query of radius `√2·ε` in a grid of
//! cell size `2√2·ε` touches 16 cells.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use crate::sim::matrix::{mat_dagger, mat_mul, t, Mat2, C64, H, IDENTITY, S, X, Z};
use crate::sim::GateKind;

/// Deepest right-table level built; deeper searches extend only the left table.
pub(crate) const RIGHT_LEVEL_CAP: usize = 15;
/// Deepest left-table level built.
pub(crate) const LEFT_LEVEL_CAP: usize = 19;
/// Largest total T-count any search can reach.
pub const MAX_REACHABLE_DEPTH: usize = RIGHT_LEVEL_CAP + LEFT_LEVEL_CAP;

pub(crate) type Quat = [f64; 4];

/// SU(2) representative of `u` as `(a, b, c, d)` with `u ∝ aI − i(bX + cY + dZ)`.
pub(crate) fn to_quat(u: &Mat2) -> Quat {
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let inv = C64::new(1.0, 0.0) / det.sqrt();
    let a00 = u[0][0] * inv;
    let a10 = u[1][0] * inv;
    [a00.re, -a10.im, a10.re, -a00.im]
}

/// Phase-invariant distance between operators given by unit quaternions.
pub(crate) fn quat_distance(p: &Quat, q: &Quat) -> f64 {
    let (mut minus, mut plus) = (0.0, 0.0);
    for i in 0..4 {
        minus += (p[i] - q[i]).powi(2);
        plus += (p[i] + q[i]).powi(2);
    }
    (minus.min(plus) / 2.0).sqrt()
}

/// Clifford-free normal-form prefix `(T|ε)(HT|SHT)^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Form {
    lead_t: bool,
    /// Bit `i` set means syllable `i` is `SHT`, clear means `HT`.
    syllables: u64,
    len: u8,
}

impl Form {
    const EMPTY: Form = Form {
        lead_t: false,
        syllables: 0,
        len: 0,
    };

    #[cfg(test)]
    fn t_count(&self) -> usize {
        self.lead_t as usize + self.len as usize
    }

    /// Letters in operator-product order (leftmost acts last).
    pub(crate) fn letters(&self, out: &mut Vec<GateKind>) {
        if self.lead_t {
            out.push(GateKind::T);
        }
        for i in 0..self.len {
            if self.syllables >> i & 1 == 1 {
                out.push(GateKind::S);
            }
            out.push(GateKind::H);
            out.push(GateKind::T);
        }
    }
}

/// The 24 single-qubit Cliffords modulo phase, each with a shortest word over {H, S, X, Z}.
pub(crate) struct CliffordTable {
    pub(crate) mats: Vec<Mat2>,
    /// Operator-product order.
    pub(crate) words: Vec<Vec<GateKind>>,
}

fn quat_key(q: &Quat) -> [i64; 4] {
    let sign = q
        .iter()
        .find(|x| x.abs() > 1e-9)
        .map_or(1.0, |x| x.signum());
    q.map(|x| (x * sign * 1e6).round() as i64)
}

impl CliffordTable {
    pub(crate) fn build() -> Self {
        let gens = [
            (GateKind::H, H),
            (GateKind::S, S),
            (GateKind::X, X),
            (GateKind::Z, Z),
        ];
        let mut seen = HashMap::new();
        let mut mats = vec![IDENTITY];
        let mut words: Vec<Vec<GateKind>> = vec![Vec::new()];
        seen.insert(quat_key(&to_quat(&IDENTITY)), 0usize);
        let mut head = 0;
        while head < mats.len() {
            for (kind, g) in &gens {
                let m = mat_mul(&mats[head], g);
                let key = quat_key(&to_quat(&m));
                if !seen.contains_key(&key) {
                    seen.insert(key, mats.len());
                    let mut w = words[head].clone();
                    w.push(*kind);
                    mats.push(m);
                    words.push(w);
                }
            }
            head += 1;
        }
        debug_assert_eq!(mats.len(), 24);
        CliffordTable { mats, words }
    }
}

/// Normal-form prefixes by T-count, with their matrices.
pub(crate) struct FormTable {
    pub(crate) forms: Vec<Vec<Form>>,
    pub(crate) mats: Vec<Vec<Mat2>>,
}

impl FormTable {
    fn new() -> Self {
        FormTable {
            forms: vec![vec![Form::EMPTY]],
            mats: vec![vec![IDENTITY]],
        }
    }

    pub(crate) fn levels(&self) -> usize {
        self.forms.len() - 1
    }

    fn extend_to(&mut self, level: usize) {
        let ht = mat_mul(&H, &t());
        let sht = mat_mul(&S, &ht);
        while self.levels() < level {
            let k = self.levels() + 1;
            let mut forms = Vec::with_capacity(3 << (k - 1));
            let mut mats = Vec::with_capacity(3 << (k - 1));
            if k == 1 {
                forms.push(Form {
                    lead_t: true,
                    syllables: 0,
                    len: 0,
                });
                mats.push(t());
            }
            let (prev_f, prev_m) = (&self.forms[k - 1], &self.mats[k - 1]);
            for (f, m) in prev_f.iter().zip(prev_m) {
                for (bit, syl) in [(0u64, &ht), (1u64, &sht)] {
                    forms.push(Form {
                        lead_t: f.lead_t,
                        syllables: f.syllables | bit << f.len,
                        len: f.len + 1,
                    });
                    mats.push(mat_mul(m, syl));
                }
            }
            self.forms.push(forms);
            self.mats.push(mats);
        }
    }
}

/// Complete normal forms `form · C`, flattened in level order.
pub(crate) struct RightTable {
    pub(crate) quats: Vec<Quat>,
    /// `(level, form index within level, Clifford index)`.
    pub(crate) codes: Vec<(u8, u32, u8)>,
    /// `level_start[k]..level_start[k + 1]` indexes level `k`.
    pub(crate) level_start: Vec<usize>,
}

impl RightTable {
    pub(crate) fn levels(&self) -> usize {
        self.level_start.len() - 2
    }
}

/// Proximity index over the right table for one radius.
pub(crate) struct Grid {
    cell: f64,
    heads: HashMap<u64, u32>,
    /// Right-table index of each point and the next point in the same bucket.
    points: Vec<(u32, u32)>,
    /// Right-table prefix already inserted.
    indexed: usize,
}

const NIL: u32 = u32::MAX;

fn cell_hash(c: &[i64; 4]) -> u64 {
    let mut h = DefaultHasher::new();
    c.hash(&mut h);
    h.finish()
}

impl Grid {
    fn new(epsilon: f64) -> Self {
        Grid {
            cell: 2.0 * std::f64::consts::SQRT_2 * epsilon,
            heads: HashMap::new(),
            points: Vec::new(),
            indexed: 0,
        }
    }

    fn cell_of(&self, q: &Quat) -> [i64; 4] {
        q.map(|x| (x / self.cell).floor() as i64)
    }

    fn insert(&mut self, q: &Quat, idx: u32) {
        let key = cell_hash(&self.cell_of(q));
        let next = *self.heads.get(&key).unwrap_or(&NIL);
        self.heads.insert(key, self.points.len() as u32);
        self.points.push((idx, next));
    }

    fn index_levels(&mut self, right: &RightTable, upto: usize) {
        let hi = right.level_start[upto + 1];
        for i in self.indexed..hi {
            let q = right.quats[i];
            self.insert(&q, i as u32);
            self.insert(&q.map(|x| -x), i as u32);
        }
        self.indexed = self.indexed.max(hi);
    }

    /// Calls `f` with every right index stored in the 16 cells around `q`.
    /// Hash collisions only add candidates, which callers re-check exactly.
    fn for_each_near(&self, q: &Quat, mut f: impl FnMut(usize)) {
        let mut base = [0i64; 4];
        let mut other = [0i64; 4];
        for i in 0..4 {
            let s = q[i] / self.cell;
            base[i] = s.floor() as i64;
            other[i] = if s - s.floor() < 0.5 { base[i] - 1 } else { base[i] + 1 };
        }
        for corner in 0..16u32 {
            let mut c = base;
            for i in 0..4 {
                if corner >> i & 1 == 1 {
                    c[i] = other[i];
                }
            }
            let mut p = *self.heads.get(&cell_hash(&c)).unwrap_or(&NIL);
            while p != NIL {
                let (idx, next) = self.points[p as usize];
                f(idx as usize);
                p = next;
            }
        }
    }
}

/// Best word found by [`SearchTables::search`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Found {
    /// Time order.
    pub(crate) word: Vec<GateKind>,
    pub(crate) t_count: usize,
}

/// Result of a search: a word within `epsilon`, or the best distance observed.
pub(crate) enum SearchOutcome {
    Found(Found),
    Exhausted { best: f64 },
}

/// Lazily grown tables shared by all searches.
pub(crate) struct SearchTables {
    cliffords: CliffordTable,
    left: FormTable,
    right: RightTable,
    grids: lru::LruCache<u64, Grid>,
}

impl Default for SearchTables {
    fn default() -> Self {
        Self::new()
    }
}

impl SearchTables {
    pub(crate) fn new() -> Self {
        SearchTables {
            cliffords: CliffordTable::build(),
            left: FormTable::new(),
            right: RightTable {
                quats: Vec::new(),
                codes: Vec::new(),
                level_start: vec![0, 0],
            },
            grids: lru::LruCache::new(std::num::NonZeroUsize::new(4).expect("nonzero")),
        }
    }

    fn extend_right(&mut self, level: usize) {
        self.left.extend_to(level);
        while self.right.levels() < level || self.right.quats.is_empty() {
            let k = if self.right.quats.is_empty() { 0 } else { self.right.levels() + 1 };
            for (fi, fm) in self.left.mats[k].iter().enumerate() {
                for (ci, cm) in self.cliffords.mats.iter().enumerate() {
                    self.right.quats.push(to_quat(&mat_mul(fm, cm)));
                    self.right.codes.push((k as u8, fi as u32, ci as u8));
                }
            }
            if k == 0 {
                self.right.level_start[1] = self.right.quats.len();
            } else {
                self.right.level_start.push(self.right.quats.len());
            }
        }
    }

    fn right_word(&self, idx: usize, out: &mut Vec<GateKind>) {
        let (lvl, fi, ci) = self.right.codes[idx];
        self.left.forms[lvl as usize][fi as usize].letters(out);
        out.extend_from_slice(&self.cliffords.words[ci as usize]);
    }

    fn right_lead_t(&self, idx: usize) -> bool {
        let (lvl, fi, _) = self.right.codes[idx];
        self.left.forms[lvl as usize][fi as usize].lead_t
    }

    /// Minimum-T-count word within `epsilon` of `target`, searching total T-count up to `max_depth`.
    /// Ties go to the shorter word, then to the lexicographically smaller word.
    pub(crate) fn search(&mut self, target: &Mat2, epsilon: f64, max_depth: usize) -> SearchOutcome {
        let target_q = to_quat(target);
        let max_depth = max_depth.min(MAX_REACHABLE_DEPTH);
        let mut best_seen = f64::INFINITY;
        let mut depth = 0;
        while depth < max_depth {
            depth = (depth + 2).min(max_depth);
            let b = (depth / 2).min(RIGHT_LEVEL_CAP);
            let a = (depth - b).min(LEFT_LEVEL_CAP);
            self.extend_right(b);
            self.left.extend_to(a);
            let key = epsilon.to_bits();
            if !self.grids.contains(&key) {
                self.grids.put(key, Grid::new(epsilon));
            }
            let mut grid = self.grids.pop(&key).expect("grid present");
            grid.index_levels(&self.right, b);
            let found = self.scan(&grid, target, epsilon, a, b, &mut best_seen);
            self.grids.put(key, grid);
            if let Some(f) = found {
                return SearchOutcome::Found(f);
            }
        }
        // Nothing within reach: report the closest right-table entry as well.
        for q in &self.right.quats {
            best_seen = best_seen.min(quat_distance(q, &target_q));
        }
        SearchOutcome::Exhausted { best: best_seen }
    }

    fn scan(
        &self,
        grid: &Grid,
        target: &Mat2,
        epsilon: f64,
        a: usize,
        b: usize,
        best_seen: &mut f64,
    ) -> Option<Found> {
        // (left level, left index, right index) of candidates at the current best T.
        let mut best_t = usize::MAX;
        let mut hits: Vec<(usize, usize, usize)> = Vec::new();
        for tl in 0..=a {
            if tl > best_t {
                break;
            }
            for (li, lm) in self.left.mats[tl].iter().enumerate() {
                let query = to_quat(&mat_mul(&mat_dagger(lm), target));
                let max_tr = b.min(best_t.saturating_sub(tl));
                let limit = self.right.level_start[max_tr + 1];
                grid.for_each_near(&query, |ri| {
                    if ri >= limit || (tl > 0 && self.right_lead_t(ri)) {
                        return;
                    }
                    let d = quat_distance(&self.right.quats[ri], &query);
                    if d < *best_seen {
                        *best_seen = d;
                    }
                    if d > epsilon {
                        return;
                    }
                    let total = tl + self.right.codes[ri].0 as usize;
                    if total < best_t {
                        best_t = total;
                        hits.clear();
                    }
                    if total == best_t {
                        hits.push((tl, li, ri));
                    }
                });
            }
        }
        hits.into_iter()
            .map(|(tl, li, ri)| {
                let mut ops = Vec::new();
                self.left.forms[tl][li].letters(&mut ops);
                self.right_word(ri, &mut ops);
                ops.reverse();
                ops
            })
            .min_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)))
            .map(|word| Found {
                t_count: best_t,
                word,
            })
    }
}
