// SPDX-License-Identifier: Apache-2.0

//! Many independent solver runs on one problem.
//!
//! Sample `k` of a batch uses `derive_seed(master, k)`, so any sample can be
//! reproduced on its own. Samples run on a worker pool; results come back in
//! sample order.

use std::f64::consts::TAU;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::SolutionSample;
use crate::genadler::{dt_phase_step, genadler_step, spins_from_phases, table_couplings, wrap, PhaseState};
use crate::ising::{hamiltonian, CouplingMatrix, IsingError, SpinState};
use crate::netlist::{build_a2a, NetlistError};
use crate::sim::{nominal_period, simulate, SimConfig, SimError, Termination};
use crate::timing::{TimingError, TimingFile};

#[derive(Debug, Error)]
pub enum BatchError {
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Timing(#[from] TimingError),
    #[error(transparent)]
    Ising(#[from] IsingError),
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Event,
    Genadler,
    Dtphase,
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "event" => Ok(Solver::Event),
            "genadler" => Ok(Solver::Genadler),
            "dtphase" => Ok(Solver::Dtphase),
            _ => Err(format!("unknown solver {s:?} (expected event, genadler or dtphase)")),
        }
    }
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Event => "event",
            Solver::Genadler => "genadler",
            Solver::Dtphase => "dtphase",
        }
    }
}

/// SplitMix64 output for counter `k` of stream `master`.
pub fn derive_seed(master: u64, k: u64) -> u64 {
    let mut z = master.wrapping_add(k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs `f(k, seed_k)` for `k in 0..samples` on `workers` threads.
pub fn run_indexed<T, F>(samples: usize, master: u64, workers: usize, f: F) -> Result<Vec<T>, BatchError>
where
    T: Send,
    F: Fn(usize, u64) -> T + Sync,
{
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().map_err(|e| BatchError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..samples).into_par_iter().map(|k| f(k, derive_seed(master, k as u64))).collect()))
}

/// Settings shared by every sample of a batch.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub solver: Solver,
    pub dim: usize,
    pub max_time: f64,
    pub tolerance: f64,
    pub sync_window: usize,
}

impl RunSettings {
    pub fn new(solver: Solver, dim: usize) -> Self {
        let d = SimConfig::default();
        Self { solver, dim, max_time: d.max_time, tolerance: d.tolerance, sync_window: d.sync_window }
    }
}

/// Seed and outcome of every sample, in sample order.
pub type BatchOutcomes = Vec<(u64, Result<RunOutcome, String>)>;

/// Outcome of one solver run, before normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub spins: SpinState,
    pub energy: i64,
    pub reason: Termination,
    pub events_processed: u64,
    pub wall_time_ms: f64,
}

/// Matrix on oscillators: the problem itself, or the problem behind an extra
/// reference oscillator 0 that carries `h / 2` couplings.
pub fn oscillator_problem(m: &CouplingMatrix) -> Result<(CouplingMatrix, usize), BatchError> {
    if !m.has_field() {
        return Ok((m.clone(), 0));
    }
    let n = m.n() + 1;
    let mut edges = Vec::new();
    for (i, j, v) in m.edges() {
        edges.push((i + 1, j + 1, v));
    }
    for (k, &h) in m.field().iter().enumerate() {
        if h % 2 != 0 {
            return Err(NetlistError::OddField { index: k, value: h }.into());
        }
        if h != 0 {
            edges.push((0, k + 1, h / 2));
        }
    }
    Ok((CouplingMatrix::from_edges(n, &edges)?, 1))
}

/// Solves `m` once with the given seed.
pub fn run_one(m: &CouplingMatrix, tf: &TimingFile, settings: &RunSettings, seed: u64) -> Result<RunOutcome, BatchError> {
    let start = Instant::now();
    let nl = build_a2a(settings.dim.max(m.n() + usize::from(m.has_field())), m, tf)?;
    let (spins, reason, events) = match settings.solver {
        Solver::Event => {
            let cfg = SimConfig {
                max_time: settings.max_time,
                tolerance: settings.tolerance,
                sync_window: settings.sync_window,
                seed,
                ..Default::default()
            };
            let r = simulate(&nl, tf, &cfg)?;
            (r.spins, r.reason, r.events_processed)
        }
        Solver::Genadler | Solver::Dtphase => {
            let period = nominal_period(&nl, tf, 0)?;
            let (osc, offset) = oscillator_problem(m)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi: Vec<f64> = (0..osc.n()).map(|_| rng.gen_range(0.0..TAU)).collect();
            let f = table_couplings(tf, &osc, period, 4096)?;
            let cycles = (settings.max_time / period).floor().max(0.0) as usize;
            let s = PhaseState::identical(phi, period);
            let (state, reason) = if settings.solver == Solver::Dtphase {
                run_dt(s, &f, cycles, settings.tolerance * TAU / period)
            } else {
                run_ct(s, &f.scaled(1.0 / TAU), cycles, settings.tolerance * TAU / period)
            };
            let all = spins_from_phases(&state.phi);
            (SpinState::new(all.as_slice()[offset..].to_vec()), reason, 0)
        }
    };
    let energy = hamiltonian(m, &spins)?;
    Ok(RunOutcome { spins, energy, reason, events_processed: events, wall_time_ms: start.elapsed().as_secs_f64() * 1e3 })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Per-cycle recursion until every per-cycle phase change agrees within
/// `tol` radians, or `cycles` cycles.
pub fn run_dt(mut s: PhaseState, f: &crate::genadler::CouplingFunction, cycles: usize, tol: f64) -> (PhaseState, Termination) {
    for _ in 0..cycles {
        let next = dt_phase_step(&s, f);
        let d: Vec<f64> = next.phi.iter().zip(&s.phi).map(|(a, b)| a - b).collect();
        s = next;
        let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
        if d.iter().all(|x| (x - mean).abs() <= tol) {
            s.phi = s.phi.into_iter().map(wrap).collect();
            return (s, Termination::Synchronized);
        }
    }
    s.phi = s.phi.into_iter().map(wrap).collect();
    (s, Termination::Timeout)
}

/// RK4 with 50 steps per period; the convergence test is applied once per
/// period to the per-period phase change.
pub fn run_ct(mut s: PhaseState, c: &crate::genadler::CouplingFunction, cycles: usize, tol: f64) -> (PhaseState, Termination) {
    let period = TAU / s.omega_star;
    let dt = period / 50.0;
    for _ in 0..cycles {
        let before = s.phi.clone();
        for _ in 0..50 {
            s = genadler_step(&s, c, dt);
        }
        let d: Vec<f64> = s.phi.iter().zip(&before).map(|(a, b)| a - b).collect();
        let mean = d.iter().sum::<f64>() / d.len().max(1) as f64;
        if max_abs_diff(&d, &vec![mean; d.len()]) <= tol {
            s.phi = s.phi.into_iter().map(wrap).collect();
            return (s, Termination::Synchronized);
        }
    }
    s.phi = s.phi.into_iter().map(wrap).collect();
    (s, Termination::Timeout)
}

/// Runs `samples` seeds derived from `master`. Failures are kept per sample.
pub fn run_batch(
    m: &CouplingMatrix,
    tf: &TimingFile,
    settings: &RunSettings,
    samples: usize,
    master: u64,
    workers: usize,
) -> Result<BatchOutcomes, BatchError> {
    run_indexed(samples, master, workers, |_, seed| (seed, run_one(m, tf, settings, seed).map_err(|e| e.to_string())))
}

/// Turns successful outcomes into normalized samples.
pub fn to_samples(outcomes: &[(u64, Result<RunOutcome, String>)], optimum: i64) -> Vec<SolutionSample> {
    outcomes
        .iter()
        .enumerate()
        .filter_map(|(index, (seed, r))| {
            let o = r.as_ref().ok()?;
            Some(SolutionSample {
                index,
                seed: *seed,
                spins: o.spins.clone(),
                energy: o.energy,
                normalized_energy: if optimum != 0 { o.energy as f64 / optimum as f64 } else { f64::NAN },
                reason: o.reason.as_str().to_string(),
                events_processed: o.events_processed,
                wall_time_ms: o.wall_time_ms,
            })
        })
        .collect()
}
