// SPDX-License-Identifier: Apache-2.0

mod common;

use common::{check_trace, run_checked};
use proptest::prelude::*;
use ro_ising::ising::random_problem;
use ro_ising::netlist::build_a2a;
use ro_ising::sim::{simulate, SimConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coupled_rings_keep_kernel_invariants(seed in any::<u64>(), n_ros in 2usize..=4, half in 1usize..=3, cycles in 5u32..40) {
        common::ring_case(&common::surrogate(), seed, n_ros, 2 * half + 1, cycles)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn a2a_keeps_kernel_invariants(seed in any::<u64>(), n in 2usize..=5, density in 0.2f64..1.0) {
        let tf = common::surrogate();
        let m = random_problem(n, density, 14, seed).unwrap();
        let nl = build_a2a(n, &m, &tf).unwrap();
        let cfg = SimConfig { max_time: 30_000.0, seed, record_trace: true, ..Default::default() };
        let a = run_checked(&nl, &tf, cfg.clone())?;
        check_trace(&nl, &a)?;
        let b = simulate(&nl, &tf, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}
