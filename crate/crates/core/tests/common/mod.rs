// SPDX-License-Identifier: Apache-2.0

#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ro_ising::netlist::{build_rings, Netlist, StageCoupling};
use ro_ising::sim::{simulate, Kernel, SimConfig, SimResult};
use ro_ising::timing::{characterize_surrogate, Polarity, SurrogateParams, TimingFile};

pub fn surrogate() -> TimingFile {
    characterize_surrogate(&SurrogateParams::default(), 7).unwrap()
}

/// Random coupled rings: each RO pair is coupled with probability 0.7 on
/// free non-enable stages, level uniform in +-1..=7.
pub fn random_rings(tf: &TimingFile, n_ros: usize, stages: usize, seed: u64) -> (Netlist, Vec<StageCoupling>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut free: Vec<Vec<usize>> = vec![(1..stages).collect(); n_ros];
    let mut cs = Vec::new();
    for a in 0..n_ros {
        for b in a + 1..n_ros {
            if rng.gen_bool(0.7) && !free[a].is_empty() && !free[b].is_empty() {
                let ia = rng.gen_range(0..free[a].len());
                let stage_a = free[a].remove(ia);
                let ib = rng.gen_range(0..free[b].len());
                let stage_b = free[b].remove(ib);
                let mut level = rng.gen_range(1..=7);
                if rng.gen_bool(0.5) {
                    level = -level;
                }
                cs.push(StageCoupling { ro_a: a, stage_a, ro_b: b, stage_b, level });
            }
        }
    }
    let nl = build_rings(n_ros, stages, &cs, tf).unwrap();
    let period = 2.0 * stages as f64 * tf.nominal().d0;
    let stagger = (0..n_ros).map(|_| rng.gen_range(0.0..period)).collect();
    (nl, cs, stagger)
}

/// Config that never stops on synchronization.
pub fn free_running(max_time: f64, stagger: Vec<f64>) -> SimConfig {
    SimConfig { max_time, sync_window: usize::MAX, stagger: Some(stagger), ..Default::default() }
}

/// Signed reference-edge offset of RO `i` against RO `j` per cycle, in
/// `[-T/2, T/2)`.
pub fn pair_offsets(r: &SimResult, i: usize, j: usize, period: f64) -> Vec<f64> {
    let n = r.ref_edges[i].len().min(r.ref_edges[j].len());
    (0..n)
        .map(|c| {
            let d = r.ref_edges[i][c] - r.ref_edges[j][c];
            d - period * (d / period).round()
        })
        .collect()
}

/// Longest stretch of consecutive cycles inside `+-band` that is followed by
/// a cycle outside it, as `(first_cycle, length)`.
pub fn band_exit(offsets: &[f64], band: f64) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (c, d) in offsets.iter().enumerate() {
        if d.abs() <= band {
            start.get_or_insert(c);
        } else if let Some(s) = start.take() {
            if best.is_none_or(|(_, l)| c - s > l) {
                best = Some((s, c - s));
            }
        }
    }
    best
}

/// Seeded 4-RO instance whose RO 0 / RO 1 phase difference sits inside
/// +-0.05 T for close to 300 cycles and then leaves.
pub const MERGE_SEED: u64 = 29;

/// Causality and polarity alternation over a recorded trace.
pub fn check_trace(nl: &Netlist, r: &SimResult) -> Result<(), TestCaseError> {
    let mut last: HashMap<usize, (f64, Polarity)> = HashMap::new();
    for f in &r.trace {
        let arc = &nl.arcs[f.arc];
        let (d_min, _) = nl.delay_bounds(arc.cell);
        prop_assert!(f.output_arrival >= f.input_arrival + d_min - 1e-9, "arc {} fired early: {:?}", f.arc, f);
        let out = f.polarity.inverted();
        if let Some((t, pol)) = last.insert(arc.output, (f.output_arrival, out)) {
            prop_assert!(f.output_arrival > t, "net {} went back in time", arc.output);
            prop_assert_ne!(pol, out, "net {} repeated a polarity", arc.output);
        }
    }
    Ok(())
}

/// Steps a kernel to the end, checking event conservation after every step.
pub fn run_checked(nl: &Netlist, tf: &TimingFile, cfg: SimConfig) -> Result<SimResult, TestCaseError> {
    let mut k = Kernel::new(nl, tf, cfg).unwrap();
    let reason = loop {
        let s = k.stats();
        prop_assert_eq!(s.created, s.consumed + s.queued + s.parked);
        if let Some(reason) = k.step().unwrap() {
            break reason;
        }
    };
    let r = k.finish(reason);
    let s = r.stats;
    prop_assert_eq!(s.created, s.consumed + s.queued + s.parked);
    prop_assert_eq!(r.net2event.len() as u64, s.queued + s.parked);
    Ok(r)
}

/// One randomized coupled-ring case: invariants plus replay.
pub fn ring_case(tf: &TimingFile, seed: u64, n_ros: usize, stages: usize, cycles: u32) -> Result<(), TestCaseError> {
    let (nl, _, stagger) = random_rings(tf, n_ros, stages, seed);
    let period = 2.0 * stages as f64 * tf.nominal().d0;
    let cfg = SimConfig { record_trace: true, ..free_running(cycles as f64 * period, stagger) };
    let a = run_checked(&nl, tf, cfg.clone())?;
    check_trace(&nl, &a)?;
    let b = simulate(&nl, tf, &cfg).unwrap();
    prop_assert_eq!(a, b);
    Ok(())
}
