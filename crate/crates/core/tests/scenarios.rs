// SPDX-License-Identifier: Apache-2.0

mod common;

use ro_ising::ising::{brute_force_ground_state, hamiltonian, CouplingMatrix, SpinState};
use ro_ising::netlist::{build_ring_pair, build_rings, StageCoupling};
use ro_ising::sim::{simulate, SimConfig, Termination};

#[test]
fn coupling_site_offsets_accumulate_upstream_shifts() {
    let tf = common::surrogate();
    let nl = build_ring_pair(5, &[(1, 1, 6), (2, 2, 6), (3, 3, -6)], &tf).unwrap();
    let cfg = SimConfig { record_trace: true, ..common::free_running(3000.0, vec![0.0, 40.0]) };
    let r = simulate(&nl, &tf, &cfg).unwrap();
    // RO 0 firings of coupled stages in the first cycle, in stage order
    let site = |stage: usize, ro: usize| {
        r.trace
            .iter()
            .find(|f| {
                let a = &nl.arcs[f.arc];
                a.ro == ro && nl.cells[a.cell].position == Some((0, stage)) && f.delta_a.is_some()
            })
            .copied()
            .unwrap_or_else(|| panic!("no interacting firing at stage {stage} of RO {ro}"))
    };
    let mut prev: Option<(f64, f64)> = None;
    let mut offsets = Vec::new();
    for stage in 1..=3 {
        let (a, b) = (site(stage, 0), site(stage, 1));
        let da = a.delta_a.unwrap();
        assert!((da - (b.input_arrival - a.input_arrival)).abs() < 1e-9);
        if let Some((prev_da, shift)) = prev {
            assert!((da - (prev_da + shift)).abs() < 1e-9, "stage {stage}: {da} vs {prev_da} + {shift}");
        }
        let shift = (b.output_arrival - b.input_arrival) - (a.output_arrival - a.input_arrival);
        prev = Some((da, shift));
        offsets.push(da);
    }
    // the enable stages are identical, so the first site sees the launch offset
    assert!((offsets[0] - 40.0).abs() < 1e-9);
    assert!(offsets.windows(2).all(|w| (w[0] - w[1]).abs() > 0.5), "{offsets:?}");
}

#[test]
fn apparent_lock_can_break() {
    let tf = common::surrogate();
    let (nl, _, stagger) = common::random_rings(&tf, 4, 5, common::MERGE_SEED);
    let r = simulate(&nl, &tf, &common::free_running(200_000.0, stagger)).unwrap();
    let d = common::pair_offsets(&r, 0, 1, r.nominal_period);
    let (start, len) = common::band_exit(&d, 0.05 * r.nominal_period).expect("pair never leaves the band");
    assert!(len >= 50, "only {len} in-band cycles from {start}");
    assert!(d[start + len].abs() > 0.05 * r.nominal_period);
}

#[test]
fn three_ring_example_settles_to_its_ground_state() {
    let tf = common::surrogate();
    let cs = [
        StageCoupling { ro_a: 0, stage_a: 1, ro_b: 1, stage_b: 1, level: 3 },
        StageCoupling { ro_a: 1, stage_a: 2, ro_b: 2, stage_b: 3, level: 3 },
    ];
    let nl = build_rings(3, 5, &cs, &tf).unwrap();
    let mut edges = Vec::new();
    for c in &cs {
        edges.push((c.ro_a, c.ro_b, c.ising_sign()));
    }
    let m = CouplingMatrix::from_edges(3, &edges).unwrap();
    let (ground, e_min) = brute_force_ground_state(&m).unwrap();
    assert_eq!(ground.normalized(), SpinState::new(vec![1, 1, -1]));
    for seed in 0..10 {
        let r = simulate(&nl, &tf, &SimConfig { seed, max_time: 400_000.0, ..Default::default() }).unwrap();
        assert_eq!(r.reason, Termination::Synchronized, "seed {seed}");
        assert_eq!(r.spins.normalized(), SpinState::new(vec![1, 1, -1]), "seed {seed}");
        assert_eq!(hamiltonian(&m, &r.spins).unwrap(), e_min);
    }
}

#[test]
fn out_of_window_drift_predicts_the_locking_cycle() {
    let tf = common::surrogate();
    let nl = build_ring_pair(5, &[(1, 1, 1)], &tf).unwrap();
    let period = 500.0;
    // same- and opposite-polarity edges both start outside the window
    let offset = 170.0;
    let r = simulate(&nl, &tf, &common::free_running(100.0 * period, vec![0.0, offset])).unwrap();
    let d = common::pair_offsets(&r, 1, 0, period);
    let per_cycle = d[0] - d[1];
    assert!(per_cycle > 0.0);
    // first cycle whose offset falls inside the window
    let predicted = ((offset - tf.window_w()) / per_cycle).ceil() as usize;
    let measured = d.iter().position(|x| x.abs() <= tf.window_w()).unwrap();
    assert!(predicted.abs_diff(measured) <= 2, "predicted {predicted}, measured {measured}");
}
