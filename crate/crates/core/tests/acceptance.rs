// SPDX-License-Identifier: Apache-2.0

//! Acceptance criteria A1-A9. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ro_ising::analysis::{emd_1d, normalize_and_bin, Histogram, DEFAULT_BIN_WIDTH};
use ro_ising::batch::{derive_seed, run_batch, run_one, RunSettings, Solver};
use ro_ising::genadler::{dt_phase_step, table_coupling, CouplingFunction, PhaseState};
use ro_ising::ising::{brute_force_ground_state, random_problem, CouplingMatrix};
use ro_ising::netlist::{build_a2a, build_ring_pair, build_rings, Netlist};
use ro_ising::sim::{simulate, SimConfig, Termination};
use ro_ising::timing::{CellKind, Polarity, TimingFile};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn a1(tf: &TimingFile) -> Outcome {
    let period = 500.0;
    let offset = 170.0;
    let nl = build_ring_pair(5, &[(1, 1, 1)], tf).map_err(|e| e.to_string())?;
    let r = simulate(&nl, tf, &common::free_running(60.0 * period, vec![0.0, offset])).map_err(|e| e.to_string())?;
    let d = common::pair_offsets(&r, 1, 0, period);

    // RO 0 leads: its edges see the partner still pending, RO 1 sees it done
    let tt0 = tf.nominal().tt0;
    let mut expected = 0.0;
    for pol in [Polarity::Rise, Polarity::Fall] {
        let base = tf.lookup_uncoupled(CellKind::Coupling, pol, tt0).unwrap().delay;
        let lead = tf.lookup_saturated(CellKind::Coupling, 1, pol, tt0, true).unwrap().delay;
        let lag = tf.lookup_saturated(CellKind::Coupling, 1, pol, tt0, false).unwrap().delay;
        expected += (lead - base) + (base - lag);
    }
    let w = tf.window_w();
    let mut cycles = 0;
    for c in 0..d.len() - 1 {
        if d[c + 1].abs() <= w || (period / 2.0 - d[c].abs()).abs() <= w {
            break;
        }
        let dec = d[c] - d[c + 1];
        if (dec - expected).abs() > 0.01 * expected.abs() {
            return Err(format!("cycle {c}: decrease {dec:.4} ps, table sum {expected:.4} ps"));
        }
        cycles += 1;
    }
    if cycles < 10 {
        return Err(format!("only {cycles} out-of-window cycles"));
    }
    Ok(format!("{cycles} cycles at {expected:.3} ps/cycle"))
}

fn table_delay(tf: &TimingFile, kind: CellKind, pol: Polarity) -> f64 {
    let t = tf.tables_1d().iter().find(|t| t.kind == kind && t.polarity == pol).unwrap();
    let i = t.tt_in.iter().position(|&x| x == tf.nominal().tt0).unwrap();
    t.delay[i]
}

fn a2(tf: &TimingFile) -> Outcome {
    let check = |nl: &Netlist, label: &str| -> Outcome {
        let r = simulate(nl, tf, &common::free_running(40_000.0, vec![0.0; nl.ro_count()])).map_err(|e| e.to_string())?;
        let mut worst: f64 = 0.0;
        for (ro, osc) in nl.ros.iter().enumerate() {
            let sum: f64 =
                osc.loops[0].iter().map(|&net| table_delay(tf, nl.cells[nl.receiver(net).cell].kind, Polarity::Rise)).sum();
            let fall: f64 =
                osc.loops[0].iter().map(|&net| table_delay(tf, nl.cells[nl.receiver(net).cell].kind, Polarity::Fall)).sum();
            let expected = sum + fall;
            for &(_, p) in &r.periods[ro] {
                worst = worst.max((p - expected).abs());
            }
        }
        if worst > 0.01 {
            return Err(format!("{label}: period off by {worst} ps"));
        }
        Ok(format!("{label} {worst:.1e}"))
    };
    let ring = check(&build_rings(1, 5, &[], tf).unwrap(), "5-stage")?;
    let ring7 = check(&build_rings(1, 7, &[], tf).unwrap(), "7-stage")?;
    let array = check(&build_a2a(5, &CouplingMatrix::zeros(5), tf).unwrap(), "5x5 J=0")?;
    Ok(format!("max error {ring}, {ring7}, {array}"))
}

fn a3(tf: &TimingFile) -> Outcome {
    let m = CouplingMatrix::uniform(5, 1);
    let (_, opt) = brute_force_ground_state(&m).unwrap();
    let mut s = RunSettings::new(Solver::Event, 5);
    s.max_time = 2_000_000.0;
    let out = run_batch(&m, tf, &s, 100, 2024, 1).map_err(|e| e.to_string())?;
    let good = out
        .iter()
        .filter(|(_, r)| {
            matches!(r, Ok(o) if o.reason == Termination::Synchronized
                && o.spins.as_slice().iter().all(|&x| x == o.spins.get(0))
                && o.energy == opt)
        })
        .count();
    if good < 95 {
        return Err(format!("{good}/100 synchronized at the optimum"));
    }
    Ok(format!("{good}/100 synchronized at the optimum"))
}

fn a4(tf: &TimingFile) -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for p in 0..20u64 {
        let density = 0.4 + 0.6 * p as f64 / 19.0;
        let m = random_problem(8, density, 7, 1000 + p).unwrap();
        let (_, opt) = brute_force_ground_state(&m).unwrap();
        let mut s = RunSettings::new(Solver::Event, 8);
        s.max_time = 1_000_000.0;
        let out = run_batch(&m, tf, &s, 50, p, 1).map_err(|e| e.to_string())?;
        let best = out.iter().filter_map(|(_, r)| r.as_ref().ok().map(|o| o.energy)).min();
        if best == Some(opt) {
            hits += 1;
        } else {
            misses.push(p);
        }
    }
    let msg = format!("{hits}/20 problems reached the optimum (missed {misses:?})");
    if hits >= 18 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_hist(rng: &mut ChaCha8Rng) -> Histogram {
    let mut h = Histogram::new(1.0, DEFAULT_BIN_WIDTH);
    for _ in 0..rng.gen_range(1..200) {
        h.add(1.0 - DEFAULT_BIN_WIDTH * rng.gen_range(0..12) as f64);
    }
    h
}

fn a5() -> Outcome {
    let a = normalize_and_bin(&vec![-100; 100], -100).unwrap();
    let mut moved = vec![-100; 91];
    moved.extend([-90; 9]);
    let b = normalize_and_bin(&moved, -100).unwrap();
    let e = emd_1d(&a, &b).unwrap();
    if e != 0.009 {
        return Err(format!("calibration pair gave {e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..100 {
        let (x, y, z) = (random_hist(&mut rng), random_hist(&mut rng), random_hist(&mut rng));
        let xy = emd_1d(&x, &y).unwrap();
        if xy != emd_1d(&y, &x).unwrap() || emd_1d(&x, &x).unwrap() != 0.0 || xy < 0.0 {
            return Err(format!("pair {k}: symmetry or identity"));
        }
        if xy > emd_1d(&x, &z).unwrap() + emd_1d(&z, &y).unwrap() + 1e-12 {
            return Err(format!("pair {k}: triangle inequality"));
        }
    }
    Ok("EMD 0.009, axioms on 100 pairs".into())
}

fn a6(tf: &TimingFile) -> Outcome {
    let m = random_problem(16, 0.5, 7, 77).unwrap();
    let (_, opt) = brute_force_ground_state(&m).unwrap();
    let mut s = RunSettings::new(Solver::Event, 16);
    s.max_time = 1_000_000.0;
    let mut hists = Vec::new();
    for master in [1u64, 2] {
        let out = run_batch(&m, tf, &s, 100, master, 1).map_err(|e| e.to_string())?;
        let es: Vec<i64> = out.iter().filter_map(|(_, r)| r.as_ref().ok().map(|o| o.energy)).collect();
        if es.len() != 100 {
            return Err(format!("master {master}: {} of 100 samples succeeded", es.len()));
        }
        hists.push(normalize_and_bin(&es, opt).unwrap());
    }
    let e = emd_1d(&hists[0], &hists[1]).unwrap();
    if e <= 0.05 {
        Ok(format!("EMD {e:.4}"))
    } else {
        Err(format!("EMD {e:.4}"))
    }
}

fn a7(tf: &TimingFile) -> Outcome {
    let mut rows = Vec::new();
    for (dim, budget) in [(5usize, 10u64), (20, 60), (50, 900)] {
        let m = random_problem(dim, 0.5, 7, dim as u64).unwrap();
        let nl = build_a2a(dim, &m, tf).unwrap();
        let t = Instant::now();
        let r = simulate(&nl, tf, &SimConfig { max_time: 100_000.0, sync_window: usize::MAX, seed: 1, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let el = t.elapsed();
        if el > Duration::from_secs(budget) {
            return Err(format!("{dim}x{dim} took {el:?}"));
        }
        rows.push((dim, r.events_processed, el));
    }
    for w in rows.windows(2) {
        let slope = (w[1].1 as f64 / w[0].1 as f64).ln() / (w[1].0 as f64 / w[0].0 as f64).ln();
        if slope > 2.0 {
            return Err(format!("events grow with exponent {slope:.2} from {} to {}", w[0].0, w[1].0));
        }
    }
    let summary: Vec<String> = rows.iter().map(|(d, e, t)| format!("{d}x{d}: {e} events {t:.2?}")).collect();
    Ok(summary.join(", "))
}

fn a8(tf: &TimingFile) -> Outcome {
    let mut runner = TestRunner::new(Config { cases: 1000, failure_persistence: None, ..Config::default() });
    runner
        .run(&(proptest::num::u64::ANY, 2usize..=4, 1usize..=3, 5u32..40), |(seed, n, half, cycles)| {
            common::ring_case(tf, seed, n, 2 * half + 1, cycles)
        })
        .map_err(|e| e.to_string())?;

    let (nl, _, stagger) = common::random_rings(tf, 4, 5, common::MERGE_SEED);
    let r = simulate(&nl, tf, &common::free_running(200_000.0, stagger)).map_err(|e| e.to_string())?;
    let d = common::pair_offsets(&r, 0, 1, r.nominal_period);
    match common::band_exit(&d, 0.05 * r.nominal_period) {
        Some((start, len)) if len >= 50 => Ok(format!("1000 cases; RO0/RO1 in band {len} cycles from {start}, then left")),
        other => Err(format!("no-merge scenario: {other:?}")),
    }
}

fn a9(tf: &TimingFile) -> Outcome {
    let mut agree = 0;
    for p in 0..20u64 {
        let m = random_problem(6, 0.6, 7, 500 + p).unwrap();
        let mut spins = Vec::new();
        for solver in [Solver::Dtphase, Solver::Genadler] {
            let mut s = RunSettings::new(solver, 6);
            s.max_time = 1_000_000.0;
            spins.push(run_one(&m, tf, &s, derive_seed(9, p)).map_err(|e| e.to_string())?.spins.normalized());
        }
        agree += usize::from(spins[0] == spins[1]);
    }
    if agree < 16 {
        return Err(format!("DT and CT agree on {agree}/20"));
    }

    let period = 500.0;
    let offset = 170.0;
    let nl = build_ring_pair(5, &[(1, 1, 1)], tf).unwrap();
    let r = simulate(&nl, tf, &common::free_running(60.0 * period, vec![0.0, offset])).map_err(|e| e.to_string())?;
    let measured = common::pair_offsets(&r, 1, 0, period);
    let mut f = CouplingFunction::new(2);
    f.add_symmetric(0, 1, table_coupling(tf, 1, period, 4096).unwrap());
    let mut s = PhaseState::identical(vec![0.0, -TAU * offset / period], period);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let w = tf.window_w();
    for c in 0..measured.len() - 1 {
        let next = dt_phase_step(&s, &f);
        let model = (next.phi[1] - s.phi[1] - (next.phi[0] - s.phi[0])) * period / TAU;
        s = next;
        if measured[c + 1].abs() <= w || (period / 2.0 - measured[c].abs()).abs() <= w {
            break;
        }
        let dk = measured[c] - measured[c + 1];
        worst = worst.max((dk - model).abs() / dk.abs());
        checked += 1;
    }
    if checked < 10 || worst > 0.05 {
        return Err(format!("trajectory: {checked} cycles, worst relative error {worst:.4}"));
    }
    Ok(format!("{agree}/20 spin agreement; trajectory within {:.2}% over {checked} cycles", worst * 100.0))
}

fn main() {
    let tf = common::surrogate();
    let criteria: Vec<Criterion> = vec![
        ("A1 closed-form phase recursion", Box::new(|| a1(&tf))),
        ("A2 free-running period", Box::new(|| a2(&tf))),
        ("A3 ferromagnet ground state", Box::new(|| a3(&tf))),
        ("A4 oracle proximity", Box::new(|| a4(&tf))),
        ("A5 EMD calibration", Box::new(a5)),
        ("A6 self-consistency EMD", Box::new(|| a6(&tf))),
        ("A7 runtime scaling", Box::new(|| a7(&tf))),
        ("A8 kernel invariants", Box::new(|| a8(&tf))),
        ("A9 DT/CT correspondence", Box::new(|| a9(&tf))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let t = Instant::now();
        let outcome = run();
        let el = t.elapsed();
        match outcome {
            Ok(msg) => println!("PASS {name}: {msg} [{el:.2?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg} [{el:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
