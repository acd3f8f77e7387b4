// SPDX-License-Identifier: Apache-2.0

//! Solution-quality histograms and distances between sample sets.
//!
//! Energies are normalized by the optimum (`energy / optimum`, so the
//! optimum maps to 1.0) and binned on a fixed grid of width 0.05 whose bins
//! are centred on `1.0 - m * 0.05`.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ising::{brute_force_ground_state, CouplingMatrix, SpinState, MAX_BRUTE_FORCE_SPINS};
use crate::sim::SimResult;

pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("histograms use different binnings (anchor {a_anchor} width {a_width} vs anchor {b_anchor} width {b_width})")]
    Binning { a_anchor: f64, a_width: f64, b_anchor: f64, b_width: f64 },
    #[error("histogram is empty")]
    Empty,
    #[error("optimum energy must be nonzero")]
    ZeroOptimum,
    #[error("cycle {cycle} is beyond the {available} recorded cycles")]
    Range { cycle: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimumSource {
    Oracle,
    BestSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Optimum {
    pub energy: i64,
    pub source: OptimumSource,
}

/// Exhaustive optimum when the problem is small enough, else the lowest
/// sampled energy.
pub fn best_known_optimum(m: &CouplingMatrix, sampled: &[i64]) -> Option<Optimum> {
    if m.n() <= MAX_BRUTE_FORCE_SPINS {
        let (_, e) = brute_force_ground_state(m).ok()?;
        return Some(Optimum { energy: e, source: OptimumSource::Oracle });
    }
    sampled.iter().min().map(|&e| Optimum { energy: e, source: OptimumSource::BestSample })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSample {
    pub index: usize,
    pub seed: u64,
    pub spins: SpinState,
    pub energy: i64,
    pub normalized_energy: f64,
    pub reason: String,
    pub events_processed: u64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Centre of bin 0.
    pub anchor: f64,
    pub width: f64,
    /// Index of `counts[0]`; bin `b` covers `anchor + (b -/+ 0.5) * width`.
    pub first_bin: i64,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    pub fn new(anchor: f64, width: f64) -> Self {
        assert!(width > 0.0, "bin width must be positive");
        Self { anchor, width, first_bin: 0, counts: Vec::new(), total: 0 }
    }

    pub fn bin_of(&self, x: f64) -> i64 {
        ((x - self.anchor) / self.width).round() as i64
    }

    pub fn add(&mut self, x: f64) {
        let b = self.bin_of(x);
        if self.counts.is_empty() {
            self.first_bin = b;
            self.counts.push(0);
        } else if b < self.first_bin {
            let grow = (self.first_bin - b) as usize;
            self.counts.splice(0..0, std::iter::repeat_n(0, grow));
            self.first_bin = b;
        } else if b >= self.first_bin + self.counts.len() as i64 {
            self.counts.resize((b - self.first_bin + 1) as usize, 0);
        }
        self.counts[(b - self.first_bin) as usize] += 1;
        self.total += 1;
    }

    pub fn count_at(&self, bin: i64) -> u64 {
        let i = bin - self.first_bin;
        if i < 0 || i >= self.counts.len() as i64 {
            0
        } else {
            self.counts[i as usize]
        }
    }

    /// `(left, right)` edges of bin `b`.
    pub fn edges(&self, b: i64) -> (f64, f64) {
        let c = self.anchor + b as f64 * self.width;
        (c - self.width / 2.0, c + self.width / 2.0)
    }

    /// `bin_left,bin_right,count`, one row per bin from lowest to highest.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            let (l, r) = self.edges(self.first_bin + i as i64);
            let _ = writeln!(s, "{l:.6},{r:.6},{c}");
        }
        s
    }
}

/// Bins `energy / optimum` for each sample.
pub fn normalize_and_bin(energies: &[i64], optimum: i64) -> Result<Histogram, AnalysisError> {
    if optimum == 0 {
        return Err(AnalysisError::ZeroOptimum);
    }
    let mut h = Histogram::new(1.0, DEFAULT_BIN_WIDTH);
    for &e in energies {
        h.add(e as f64 / optimum as f64);
    }
    Ok(h)
}

/// One-dimensional earth mover's distance between two histograms on the
/// same grid, with each normalized to unit mass.
pub fn emd_1d(a: &Histogram, b: &Histogram) -> Result<f64, AnalysisError> {
    if a.anchor != b.anchor || a.width != b.width {
        return Err(AnalysisError::Binning { a_anchor: a.anchor, a_width: a.width, b_anchor: b.anchor, b_width: b.width });
    }
    if a.total == 0 || b.total == 0 {
        return Err(AnalysisError::Empty);
    }
    let lo = a.first_bin.min(b.first_bin);
    let hi = (a.first_bin + a.counts.len() as i64).max(b.first_bin + b.counts.len() as i64);
    let (na, nb) = (a.total as i128, b.total as i128);
    let (mut ca, mut cb) = (0i128, 0i128);
    let mut work: i128 = 0;
    for bin in lo..hi {
        ca += a.count_at(bin) as i128;
        cb += b.count_at(bin) as i128;
        work += (ca * nb - cb * na).abs();
    }
    // work * width / (na * nb), with one rounding when 1 / width is integral
    let inv = 1.0 / a.width;
    if (inv - inv.round()).abs() < 1e-9 && inv.round() >= 1.0 {
        Ok(work as f64 / (na * nb * inv.round() as i128) as f64)
    } else {
        Ok(work as f64 * a.width / (na * nb) as f64)
    }
}

/// Phase of every RO relative to RO 0, in `[0, 2 pi)`, at each requested
/// reference cycle. Earlier edges map to larger phases.
pub fn phase_snapshots(result: &SimResult, cycles: &[usize]) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let available = result.ref_edges.iter().map(Vec::len).min().unwrap_or(0);
    let e0 = &result.ref_edges[0];
    cycles
        .iter()
        .map(|&c| {
            if c >= available {
                return Err(AnalysisError::Range { cycle: c, available });
            }
            let period = if c + 1 < e0.len() {
                e0[c + 1] - e0[c]
            } else if c > 0 {
                e0[c] - e0[c - 1]
            } else {
                result.nominal_period
            };
            Ok(result
                .ref_edges
                .iter()
                .map(|e| {
                    let p = (-TAU * (e[c] - e0[c]) / period).rem_euclid(TAU);
                    if p >= TAU {
                        0.0
                    } else {
                        p
                    }
                })
                .collect())
        })
        .collect()
}
