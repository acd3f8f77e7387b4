// SPDX-License-Identifier: Apache-2.0

//! Phase-model references for coupled oscillators.
//!
//! Phases follow the lead convention `phi = -2 pi t / T`: an oscillator whose
//! edges come earlier has the larger phase, and `phi_ij = phi_i - phi_j`.
//!
//! * [`genadler_step`] integrates the continuous model
//!   `dphi_i/dt = (w_i - w*) + w_i * sum_j c_ij(phi_ij)` with one RK4 step.
//! * [`dt_phase_step`] applies the per-cycle recursion
//!   `dphi_i = (w_i - w*) T_i + sum_j f_ij(phi_ij)`.
//!
//! Per-cycle shifts `f` come from the timing tables ([`table_coupling`]); the
//! continuous model uses `c = f / 2 pi` so both share fixed points.

use std::f64::consts::{PI, TAU};

use crate::ising::{CouplingMatrix, SpinState};
use crate::netlist::split_coefficient;
use crate::timing::{CellKind, PolPair, Polarity, TimingError, TimingFile};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    /// Phases in radians, kept in `[0, 2 pi)`.
    pub phi: Vec<f64>,
    /// Natural frequency per oscillator (rad/ps).
    pub omega: Vec<f64>,
    /// Datum frequency (rad/ps).
    pub omega_star: f64,
    /// Time (ps).
    pub t: f64,
}

impl PhaseState {
    /// Identical oscillators of period `period` starting at `phi`.
    pub fn identical(phi: Vec<f64>, period: f64) -> Self {
        let w = TAU / period;
        let n = phi.len();
        Self { phi: phi.into_iter().map(wrap).collect(), omega: vec![w; n], omega_star: w, t: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Maps to `[0, 2 pi)`.
pub fn wrap(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Maps to `[-pi, pi)`.
pub fn wrap_signed(phi: f64) -> f64 {
    wrap(phi + PI) - PI
}

/// A 2 pi-periodic coupling shape.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// `-j * scale * tanh(sin(phi) / width)`.
    Tanh { j: f64, scale: f64, width: f64 },
    /// Uniform samples over `[0, 2 pi)`, linearly interpolated.
    Sampled(Vec<f64>),
}

impl Shape {
    pub fn eval(&self, phi: f64) -> f64 {
        match self {
            Shape::Tanh { j, scale, width } => -j * scale * (phi.sin() / width).tanh(),
            Shape::Sampled(v) => {
                let n = v.len();
                let x = wrap(phi) / TAU * n as f64;
                let i = (x.floor() as usize).min(n - 1);
                let f = x - i as f64;
                v[i] + (v[(i + 1) % n] - v[i]) * f
            }
        }
    }

    pub fn scaled(&self, s: f64) -> Shape {
        match self {
            Shape::Tanh { j, scale, width } => Shape::Tanh { j: *j, scale: scale * s, width: *width },
            Shape::Sampled(v) => Shape::Sampled(v.iter().map(|x| x * s).collect()),
        }
    }
}

/// `c(phi) = -j * scale * tanh(sin(phi) / width)`: odd, zero at 0 and pi,
/// pulling positive `j` toward alignment.
pub fn tanh_coupling(j: f64, scale: f64, width: f64) -> Shape {
    assert!(width > 0.0, "tanh width must be positive");
    Shape::Tanh { j, scale, width }
}

/// Directed couplings: `terms[i]` lists `(j, c_ij)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingFunction {
    pub terms: Vec<Vec<(usize, Shape)>>,
}

impl CouplingFunction {
    pub fn new(n: usize) -> Self {
        Self { terms: vec![Vec::new(); n] }
    }

    /// Adds the same shape in both directions.
    pub fn add_symmetric(&mut self, i: usize, j: usize, shape: Shape) {
        self.terms[i].push((j, shape.clone()));
        self.terms[j].push((i, shape));
    }

    /// One term per nonzero coupling of `m`, built by `shape(J_ij)`.
    pub fn from_matrix(m: &CouplingMatrix, mut shape: impl FnMut(i32) -> Shape) -> Self {
        let mut cf = Self::new(m.n());
        for (i, j, v) in m.edges() {
            cf.add_symmetric(i, j, shape(v));
        }
        cf
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|t| t.iter().map(|(j, c)| (*j, c.scaled(s))).collect()).collect() }
    }

    /// `sum_j c_ij(phi_i - phi_j)` for every `i`.
    pub fn sums(&self, phi: &[f64]) -> Vec<f64> {
        self.terms.iter().enumerate().map(|(i, t)| t.iter().map(|(j, c)| c.eval(phi[i] - phi[*j])).sum()).collect()
    }
}

fn rhs(state: &PhaseState, cf: &CouplingFunction, phi: &[f64]) -> Vec<f64> {
    cf.sums(phi).into_iter().enumerate().map(|(i, s)| (state.omega[i] - state.omega_star) + state.omega[i] * s).collect()
}

/// One classical RK4 step of the continuous phase model.
pub fn genadler_step(state: &PhaseState, cf: &CouplingFunction, dt: f64) -> PhaseState {
    assert!(dt > 0.0, "step must be positive");
    let axpy = |a: &[f64], k: &[f64], h: f64| a.iter().zip(k).map(|(x, y)| x + h * y).collect::<Vec<_>>();
    let p = &state.phi;
    let k1 = rhs(state, cf, p);
    let k2 = rhs(state, cf, &axpy(p, &k1, dt / 2.0));
    let k3 = rhs(state, cf, &axpy(p, &k2, dt / 2.0));
    let k4 = rhs(state, cf, &axpy(p, &k3, dt));
    let phi = (0..p.len()).map(|i| p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
    PhaseState { phi, omega: state.omega.clone(), omega_star: state.omega_star, t: state.t + dt }
}

/// Integrates `steps` RK4 steps; phases are wrapped at the end only.
pub fn integrate(state: &PhaseState, cf: &CouplingFunction, dt: f64, steps: usize) -> PhaseState {
    let mut s = state.clone();
    for _ in 0..steps {
        s = genadler_step(&s, cf, dt);
    }
    s.phi = s.phi.into_iter().map(wrap).collect();
    s
}

/// One cycle of the discrete recursion with per-edge shifts `f` (radians).
pub fn dt_phase_step(state: &PhaseState, f: &CouplingFunction) -> PhaseState {
    let sums = f.sums(&state.phi);
    let period = TAU / state.omega_star;
    let phi =
        state.phi.iter().zip(&state.omega).zip(&sums).map(|((p, w), s)| p + (w - state.omega_star) * (TAU / w) + s).collect();
    PhaseState { phi, omega: state.omega.clone(), omega_star: state.omega_star, t: state.t + period }
}

/// `+1` iff the phase offset to oscillator 0 is strictly closer to 0 than to pi.
pub fn spins_from_phases(phi: &[f64]) -> SpinState {
    let base = phi.first().copied().unwrap_or(0.0);
    SpinState::new(
        phi.iter()
            .map(|p| {
                let d = wrap(p - base);
                let to_zero = d.min(TAU - d);
                if to_zero < (d - PI).abs() {
                    1
                } else {
                    -1
                }
            })
            .collect(),
    )
}

/// Delay change (ps) of one coupled edge of polarity `pol` at cell level
/// `level`, when the partner's same-polarity edge arrives `delta` ps later
/// and its opposite edge half a period away.
pub fn edge_shift(tf: &TimingFile, level: i32, pol: Polarity, delta: f64, period: f64) -> Result<f64, TimingError> {
    if level == 0 {
        return Ok(0.0);
    }
    let tt0 = tf.nominal().tt0;
    let w = tf.window_w();
    let half = period / 2.0;
    let same = (delta + half).rem_euclid(period) - half;
    let opposite = (delta + period).rem_euclid(period) - half;
    let base = tf.lookup_uncoupled(CellKind::Coupling, pol, tt0)?.delay;
    let t = if same.abs() <= w {
        tf.lookup_coupled(level, PolPair::of(pol, pol), tt0, tt0, same)?
    } else if opposite.abs() <= w {
        tf.lookup_coupled(level, PolPair::of(pol, pol.inverted()), tt0, tt0, opposite)?
    } else {
        tf.lookup_saturated(CellKind::Coupling, level, pol, tt0, same > 0.0)?
    };
    Ok(t.delay - base)
}

/// Per-cycle phase shift `f_J` (radians) of an oscillator coupled with
/// coefficient `j`, sampled at `samples` phases. A coefficient is split over
/// two cells as in the array; each cell contributes its rise and fall shifts.
pub fn table_coupling(tf: &TimingFile, j: i32, period: f64, samples: usize) -> Result<Shape, TimingError> {
    let (a, b) = split_coefficient(j);
    let mut v = Vec::with_capacity(samples);
    for s in 0..samples {
        let phi = TAU * s as f64 / samples as f64;
        // phi_ij > 0: this oscillator leads, so the partner arrives later.
        let delta = wrap_signed(phi) * period / TAU;
        let mut shift = 0.0;
        for level in [a, b] {
            for pol in [Polarity::Rise, Polarity::Fall] {
                shift += edge_shift(tf, level, pol, delta, period)?;
            }
        }
        v.push(-TAU / period * shift);
    }
    Ok(Shape::Sampled(v))
}

/// Table-derived per-cycle couplings for every edge of `m`.
pub fn table_couplings(
    tf: &TimingFile,
    m: &CouplingMatrix,
    period: f64,
    samples: usize,
) -> Result<CouplingFunction, TimingError> {
    let mut cache: Vec<(i32, Shape)> = Vec::new();
    let mut cf = CouplingFunction::new(m.n());
    for (i, j, v) in m.edges() {
        let shape = match cache.iter().find(|(k, _)| *k == v) {
            Some((_, s)) => s.clone(),
            None => {
                let s = table_coupling(tf, v, period, samples)?;
                cache.push((v, s.clone()));
                s
            }
        };
        cf.add_symmetric(i, j, shape);
    }
    Ok(cf)
}

/// Least-squares fit of `-a * tanh(sin(phi) / w)` to `f` at `samples`
/// evenly spaced phases. Returns `(a, w, max_residual)`.
pub fn fit_tanh(f: &Shape, samples: usize) -> (f64, f64, f64) {
    let phis: Vec<f64> = (0..samples).map(|s| TAU * s as f64 / samples as f64).collect();
    let ys: Vec<f64> = phis.iter().map(|&p| f.eval(p)).collect();
    let mut best = (0.0, 1.0, f64::INFINITY, f64::INFINITY);
    for step in 1..=400 {
        let w = step as f64 * 0.005;
        let basis: Vec<f64> = phis.iter().map(|p| -(p.sin() / w).tanh()).collect();
        let bb: f64 = basis.iter().map(|b| b * b).sum();
        if bb == 0.0 {
            continue;
        }
        let a = basis.iter().zip(&ys).map(|(b, y)| b * y).sum::<f64>() / bb;
        let sse: f64 = basis.iter().zip(&ys).map(|(b, y)| (a * b - y).powi(2)).sum();
        if sse < best.2 {
            let max = basis.iter().zip(&ys).map(|(b, y)| (a * b - y).abs()).fold(0.0, f64::max);
            best = (a, w, sse, max);
        }
    }
    (best.0, best.1, best.3)
}
