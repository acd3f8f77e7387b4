// SPDX-License-Identifier: Apache-2.0

//! Event-driven timing simulation of coupled ring-oscillator Ising machines.

pub mod analysis;
pub mod batch;
pub mod genadler;
pub mod ising;
pub mod netlist;
pub mod sim;
pub mod timing;
