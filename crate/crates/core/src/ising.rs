// SPDX-License-Identifier: Apache-2.0

//! Ising problem representation: coupling matrices, spin states, the
//! Hamiltonian, an exhaustive ground-state oracle, random instances and the
//! edge-list problem file.
//!
//! Energies follow the full double sum `-Σ_i Σ_j J_ij s_i s_j - Σ_i h_i s_i`,
//! so every unordered pair contributes twice relative to the pairwise
//! convention.

use std::fmt;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Per-cell coupling limit of the array; a coefficient may use two cells.
pub const DEFAULT_C_MAX: i32 = 7;

/// Largest spin count the exhaustive oracle accepts.
pub const MAX_BRUTE_FORCE_SPINS: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IsingError {
    #[error("size mismatch: expected {expected} spins, got {got}")]
    Size { expected: usize, got: usize },
    #[error("brute force supports at most {max} spins, got {n}")]
    Capacity { n: usize, max: usize },
    #[error("coupling matrix is not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("nonzero diagonal entry at {0}")]
    Diagonal(usize),
    #[error("coupling {value} at ({i}, {j}) exceeds the limit {limit}")]
    Range { i: usize, j: usize, value: i32, limit: i32 },
    #[error("invalid problem parameters: {0}")]
    Params(String),
    #[error("problem file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

/// A vector of ±1 spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct SpinState(Vec<i8>);

impl SpinState {
    pub fn new(spins: Vec<i8>) -> Self {
        debug_assert!(spins.iter().all(|&s| s == 1 || s == -1));
        Self(spins)
    }

    pub fn all_up(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    /// Inverts every spin.
    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    /// Applies the global-flip symmetry so that spin 0 reads +1.
    pub fn normalized(&self) -> Self {
        match self.0.first() {
            Some(-1) => self.flipped(),
            _ => self.clone(),
        }
    }

    /// Builds a state from the low `n` bits of `bits` (bit set means -1).
    pub fn from_bits(bits: u64, n: usize) -> Self {
        Self((0..n).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect())
    }
}

impl fmt::Display for SpinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Symmetric integer couplings `J` (zero diagonal) and an integer field `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingMatrix {
    n: usize,
    j: Vec<i32>,
    h: Vec<i32>,
}

impl CouplingMatrix {
    /// A problem with no couplings and no field.
    pub fn zeros(n: usize) -> Self {
        Self { n, j: vec![0; n * n], h: vec![0; n] }
    }

    /// Validates `j` (row-major, `n*n`) and `h` against the default limit.
    pub fn new(n: usize, j: Vec<i32>, h: Vec<i32>) -> Result<Self, IsingError> {
        Self::with_limit(n, j, h, 2 * DEFAULT_C_MAX)
    }

    pub fn with_limit(n: usize, j: Vec<i32>, h: Vec<i32>, limit: i32) -> Result<Self, IsingError> {
        if j.len() != n * n {
            return Err(IsingError::Size { expected: n * n, got: j.len() });
        }
        if h.len() != n {
            return Err(IsingError::Size { expected: n, got: h.len() });
        }
        for i in 0..n {
            if j[i * n + i] != 0 {
                return Err(IsingError::Diagonal(i));
            }
            for k in (i + 1)..n {
                let v = j[i * n + k];
                if v != j[k * n + i] {
                    return Err(IsingError::Asymmetric { i, j: k });
                }
                if v.abs() > limit {
                    return Err(IsingError::Range { i, j: k, value: v, limit });
                }
            }
        }
        Ok(Self { n, j, h })
    }

    /// Builds a matrix from upper-triangle edges `(i, j, J)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, i32)]) -> Result<Self, IsingError> {
        let mut m = Self::zeros(n);
        for &(a, b, v) in edges {
            if a >= n || b >= n || a == b {
                return Err(IsingError::Params(format!("bad edge ({a}, {b})")));
            }
            m.j[a * n + b] = v;
            m.j[b * n + a] = v;
        }
        Self::new(n, m.j, m.h)
    }

    /// Every off-diagonal coupling set to `value`.
    pub fn uniform(n: usize, value: i32) -> Self {
        let mut m = Self::zeros(n);
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    m.j[a * n + b] = value;
                }
            }
        }
        m
    }

    pub fn with_field(mut self, h: Vec<i32>) -> Result<Self, IsingError> {
        if h.len() != self.n {
            return Err(IsingError::Size { expected: self.n, got: h.len() });
        }
        self.h = h;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn j(&self, a: usize, b: usize) -> i32 {
        self.j[a * self.n + b]
    }

    pub fn h(&self, a: usize) -> i32 {
        self.h[a]
    }

    pub fn field(&self) -> &[i32] {
        &self.h
    }

    pub fn has_field(&self) -> bool {
        self.h.iter().any(|&v| v != 0)
    }

    /// Nonzero upper-triangle couplings.
    pub fn edges(&self) -> Vec<(usize, usize, i32)> {
        let mut out = Vec::new();
        for a in 0..self.n {
            for b in (a + 1)..self.n {
                let v = self.j(a, b);
                if v != 0 {
                    out.push((a, b, v));
                }
            }
        }
        out
    }

    /// Fraction of the `n(n-1)/2` possible pairs that carry a coupling.
    pub fn density(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let pairs = self.n * (self.n - 1) / 2;
        self.edges().len() as f64 / pairs as f64
    }

    /// Canonical problem-file text.
    pub fn to_problem_text(&self) -> String {
        let mut s = format!("ising {}\n", self.n);
        for (a, b, v) in self.edges() {
            s.push_str(&format!("{a} {b} {v}\n"));
        }
        for (a, &v) in self.h.iter().enumerate() {
            if v != 0 {
                s.push_str(&format!("h {a} {v}\n"));
            }
        }
        s
    }

    /// Hex SHA-256 of the canonical problem text; identifies a problem across files.
    pub fn problem_hash(&self) -> String {
        let digest = Sha256::digest(self.to_problem_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parse_problem(text: &str) -> Result<Self, IsingError> {
        let mut n = None;
        let mut edges: Vec<(usize, usize, usize, i32)> = Vec::new();
        let mut fields: Vec<(usize, usize, i32)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| IsingError::Parse { line: line_no, message };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if n.is_none() {
                if toks.len() != 2 || toks[0] != "ising" {
                    return Err(parse_err("expected header `ising <n>`".into()));
                }
                let v: usize = toks[1].parse().map_err(|_| parse_err(format!("bad spin count `{}`", toks[1])))?;
                if v == 0 {
                    return Err(parse_err("spin count must be positive".into()));
                }
                n = Some(v);
                continue;
            }
            let int = |t: &str| t.parse::<i64>().map_err(|_| parse_err(format!("bad integer `{t}`")));
            match toks.as_slice() {
                ["h", i, v] => {
                    let i = int(i)?;
                    let v = int(v)?;
                    if i < 0 {
                        return Err(parse_err("negative index".into()));
                    }
                    fields.push((line_no, i as usize, v as i32));
                }
                [i, j, v] => {
                    let (i, j, v) = (int(i)?, int(j)?, int(v)?);
                    if i < 0 || j < 0 {
                        return Err(parse_err("negative index".into()));
                    }
                    if i >= j {
                        return Err(parse_err(format!("edge ({i}, {j}) must satisfy i < j")));
                    }
                    edges.push((line_no, i as usize, j as usize, v as i32));
                }
                _ => return Err(parse_err(format!("unrecognized line `{line}`"))),
            }
        }
        let n = n.ok_or(IsingError::Parse { line: 0, message: "missing `ising <n>` header".into() })?;
        let mut m = Self::zeros(n);
        for (line, a, b, v) in edges {
            if b >= n {
                return Err(IsingError::Parse { line, message: format!("index {b} out of range for n={n}") });
            }
            if v.abs() > 2 * DEFAULT_C_MAX {
                return Err(IsingError::Parse { line, message: format!("coupling {v} exceeds limit {}", 2 * DEFAULT_C_MAX) });
            }
            m.j[a * n + b] = v;
            m.j[b * n + a] = v;
        }
        for (line, a, v) in fields {
            if a >= n {
                return Err(IsingError::Parse { line, message: format!("index {a} out of range for n={n}") });
            }
            m.h[a] = v;
        }
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IsingError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| IsingError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse_problem(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IsingError> {
        fs::write(path.as_ref(), self.to_problem_text()).map_err(|e| IsingError::Io(format!("{}: {e}", path.as_ref().display())))
    }
}

/// Evaluates the full double-sum Ising energy of `s`.
pub fn hamiltonian(m: &CouplingMatrix, s: &SpinState) -> Result<i64, IsingError> {
    if s.len() != m.n {
        return Err(IsingError::Size { expected: m.n, got: s.len() });
    }
    let spins = s.as_slice();
    let mut e = 0i64;
    for a in 0..m.n {
        let row = &m.j[a * m.n..(a + 1) * m.n];
        let local: i64 = row.iter().zip(spins).map(|(&j, &sb)| j as i64 * sb as i64).sum();
        e -= local * spins[a] as i64;
        e -= m.h[a] as i64 * spins[a] as i64;
    }
    Ok(e)
}

/// Exhaustive search for a minimum-energy state.
///
/// States are visited in Gray-code order so each step flips one spin and
/// updates the energy from cached local fields. With no field the reference
/// spin is pinned to +1 and only half the space is enumerated.
pub fn brute_force_ground_state(m: &CouplingMatrix) -> Result<(SpinState, i64), IsingError> {
    let n = m.n;
    if n > MAX_BRUTE_FORCE_SPINS {
        return Err(IsingError::Capacity { n, max: MAX_BRUTE_FORCE_SPINS });
    }
    let pinned = !m.has_field();
    // Free spins are 1..n when pinned, 0..n otherwise.
    let first_free = usize::from(pinned && n > 0);
    let free = n - first_free;

    let mut spins = vec![1i8; n];
    let mut local: Vec<i64> = (0..n).map(|a| (0..n).map(|b| m.j(a, b) as i64).sum()).collect();
    let mut energy = hamiltonian(m, &SpinState(spins.clone()))?;
    let mut best = (energy, spins.clone());

    for step in 1u64..(1u64 << free) {
        let k = first_free + step.trailing_zeros() as usize;
        let sk = spins[k] as i64;
        energy += 4 * sk * local[k] + 2 * m.h[k] as i64 * sk;
        spins[k] = -spins[k];
        for (b, l) in local.iter_mut().enumerate() {
            *l -= 2 * sk * m.j(b, k) as i64;
        }
        if energy < best.0 {
            best = (energy, spins.clone());
        }
    }
    Ok((SpinState(best.1), best.0))
}

/// Random instance with exactly `round(density * n(n-1)/2)` couplings drawn
/// uniformly from `[-j_max, j_max] \ {0}`.
pub fn random_problem(n: usize, density: f64, j_max: i32, seed: u64) -> Result<CouplingMatrix, IsingError> {
    if n < 2 {
        return Err(IsingError::Params(format!("need at least 2 spins, got {n}")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(IsingError::Params(format!("density {density} outside [0, 1]")));
    }
    if !(1..=2 * DEFAULT_C_MAX).contains(&j_max) {
        return Err(IsingError::Params(format!("j_max {j_max} outside [1, {}]", 2 * DEFAULT_C_MAX)));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
    let count = (density * pairs.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, pairs.len(), count).into_vec();
    chosen.sort_unstable();
    let mut m = CouplingMatrix::zeros(n);
    for idx in chosen {
        let (a, b) = pairs[idx];
        let mag = rng.gen_range(1..=j_max);
        let v = if rng.gen_bool(0.5) { mag } else { -mag };
        m.j[a * n + b] = v;
        m.j[b * n + a] = v;
    }
    Ok(m)
}
