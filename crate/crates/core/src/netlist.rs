// SPDX-License-Identifier: Apache-2.0

//! Cell-level netlists for coupled ring-oscillator arrays.
//!
//! Every timing arc is inverting and drives exactly one net; every net has
//! exactly one driver arc and one receiver arc. Coupling happens inside
//! cells: the forward h and v arcs of a coupling or shorting cell form an
//! interacting pair.
//!
//! Each oscillator owns one or more loops. An all-to-all array gives RO `i`
//! a horizontal loop (enable, then row `i` forward, then row `i` reversed)
//! and a vertical loop through column `i`, tied by the shorting cell at
//! `(i, i)`. The ring testbench gives every RO a single loop.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ising::CouplingMatrix;
use crate::timing::{CellKind, Polarity, TimingFile};

pub type NetId = usize;
pub type CellId = usize;
pub type ArcId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum NetlistError {
    #[error("coupling level {level} exceeds the cell range ±{c_max}")]
    Level { level: i32, c_max: i32 },
    #[error("Hamiltonian coefficient {j} between spins {a} and {b} exceeds ±{limit}")]
    Coefficient { a: usize, b: usize, j: i32, limit: i32 },
    #[error("array dimension {dim} cannot hold a {n}-spin problem{}", if *.ancilla { " plus a field reference" } else { "" })]
    Capacity { dim: usize, n: usize, ancilla: bool },
    #[error("odd field value h[{index}] = {value} cannot be split onto a reference coupling")]
    OddField { index: usize, value: i32 },
    #[error("ring needs an odd stage count >= 3, got {0}")]
    Oscillation(usize),
    #[error("invalid coupling: {0}")]
    Coupling(String),
}

/// Which pin pair of its cell an arc connects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pin {
    /// Enable cell, driving the horizontal loop (or the only loop of a ring).
    Enable,
    /// Enable cell, driving the vertical loop.
    EnablePad,
    HForward,
    VForward,
    HReverse,
    VReverse,
}

impl Pin {
    pub fn is_forward(self) -> bool {
        matches!(self, Pin::HForward | Pin::VForward)
    }

    fn label(self) -> &'static str {
        match self {
            Pin::Enable => "inp->outp",
            Pin::EnablePad => "pad_inp->pad_outp",
            Pin::HForward => "h_in^f->h_out^f",
            Pin::VForward => "v_in^f->v_out^f",
            Pin::HReverse => "h_in^r->h_out^r",
            Pin::VReverse => "v_in^r->v_out^r",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub cell: CellId,
    pub pin: Pin,
    pub input: NetId,
    pub output: NetId,
    pub ro: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    /// `(row, col)` for array cells; `(ro, stage)` in the ring testbench.
    pub position: Option<(usize, usize)>,
    /// Physical coupling level: positive slows an edge whose partner is late.
    pub level: i32,
    pub arcs: Vec<ArcId>,
    /// Forward h and v arcs when they interact.
    pub forward_pair: Option<[ArcId; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Net {
    pub driver: ArcId,
    pub receiver: ArcId,
    pub ro: usize,
    /// Logic level before the first transition reaches this net.
    pub initial_level: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Oscillator {
    pub reference_net: NetId,
    /// Polarity of the edges counted as one cycle at the reference net.
    pub reference_polarity: Polarity,
    /// Nets carrying the initial wave of each loop, with its polarity.
    pub seeds: Vec<(NetId, Polarity)>,
    /// Added to this RO's stagger so nominal reference arrivals line up.
    pub seed_offset: f64,
    /// Loop nets in propagation order, one list per loop.
    pub loops: Vec<Vec<NetId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub cells: Vec<Cell>,
    pub arcs: Vec<Arc>,
    pub nets: Vec<Net>,
    pub ros: Vec<Oscillator>,
    /// RO index of each problem spin.
    pub spin_ros: Vec<usize>,
    /// Whether RO 0 is an extra reference carrying the field terms.
    pub field_reference: bool,
    /// Per-cell `(d_min, d_max)` resolved from the timing file.
    pub cell_bounds: Vec<(f64, f64)>,
}

impl Netlist {
    pub fn ro_count(&self) -> usize {
        self.ros.len()
    }

    pub fn net_count(&self) -> usize {
        self.nets.len()
    }

    /// Upstream net and the cell whose arc drives `net`.
    pub fn predecessor(&self, net: NetId) -> Option<(NetId, CellId)> {
        let arc = &self.arcs[*self.nets.get(net).map(|n| &n.driver)?];
        Some((arc.input, arc.cell))
    }

    /// The arc receiving events on `net`.
    pub fn receiver(&self, net: NetId) -> &Arc {
        &self.arcs[self.nets[net].receiver]
    }

    /// The other input of the interacting pair that `arc` belongs to.
    pub fn partner_arc(&self, arc: ArcId) -> Option<ArcId> {
        let a = &self.arcs[arc];
        if !a.pin.is_forward() {
            return None;
        }
        let [h, v] = self.cells[a.cell].forward_pair?;
        Some(if h == arc { v } else { h })
    }

    pub fn delay_bounds(&self, cell: CellId) -> (f64, f64) {
        self.cell_bounds[cell]
    }

    pub fn count_kind(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|c| c.kind == kind).count()
    }

    /// One line per cell: kind, position, level, then `pin:in->out` per arc.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (id, c) in self.cells.iter().enumerate() {
            let pos = c.position.map(|(r, q)| format!("({r},{q})")).unwrap_or_else(|| "-".into());
            let _ = write!(s, "cell {id} {} {pos} level={}", c.kind, c.level);
            for &a in &c.arcs {
                let arc = &self.arcs[a];
                let _ = write!(s, " {}:n{}->n{}", arc.pin.label(), arc.input, arc.output);
            }
            s.push('\n');
        }
        s
    }
}

struct Builder {
    cells: Vec<Cell>,
    arcs: Vec<Arc>,
    nets: Vec<Net>,
}

impl Builder {
    fn new() -> Self {
        Self { cells: Vec::new(), arcs: Vec::new(), nets: Vec::new() }
    }

    fn cell(&mut self, kind: CellKind, position: Option<(usize, usize)>, level: i32) -> CellId {
        self.cells.push(Cell { kind, position, level, arcs: Vec::new(), forward_pair: None });
        self.cells.len() - 1
    }

    /// Wires `stages` into a closed loop whose first net carries a seed edge
    /// of polarity `seed`. Returns the loop nets in order.
    fn close_loop(&mut self, ro: usize, stages: &[(CellId, Pin)], seed: Polarity) -> Vec<NetId> {
        let base = self.nets.len();
        let len = stages.len();
        let mut pol = seed;
        let mut nets = Vec::with_capacity(len);
        for m in 0..len {
            let arc = self.arcs.len() + m;
            let driver = self.arcs.len() + (m + len - 1) % len;
            self.nets.push(Net { driver, receiver: arc, ro, initial_level: !pol.final_level() });
            pol = pol.inverted();
            nets.push(base + m);
        }
        for (m, &(cell, pin)) in stages.iter().enumerate() {
            let id = self.arcs.len();
            self.arcs.push(Arc { cell, pin, input: base + m, output: base + (m + 1) % len, ro });
            self.cells[cell].arcs.push(id);
        }
        nets
    }

    /// Records the forward pair of every interacting cell.
    fn pair_forward_arcs(&mut self) {
        for c in &mut self.cells {
            let interacting = match c.kind {
                CellKind::Enable => false,
                CellKind::Coupling => c.level != 0,
                CellKind::Shorting => true,
            };
            if !interacting {
                continue;
            }
            let h = c.arcs.iter().copied().find(|&a| self.arcs[a].pin == Pin::HForward);
            let v = c.arcs.iter().copied().find(|&a| self.arcs[a].pin == Pin::VForward);
            if let (Some(h), Some(v)) = (h, v) {
                c.forward_pair = Some([h, v]);
            }
        }
    }

    fn finish(mut self, ros: Vec<Oscillator>, spin_ros: Vec<usize>, field_reference: bool, tf: &TimingFile) -> Netlist {
        self.pair_forward_arcs();
        let cell_bounds = self
            .cells
            .iter()
            .map(|c| {
                let level = match c.kind {
                    CellKind::Coupling if c.forward_pair.is_some() => c.level,
                    _ => 0,
                };
                tf.level_bounds(c.kind, level).unwrap_or((tf.nominal().d0, tf.nominal().d0))
            })
            .collect();
        Netlist { cells: self.cells, arcs: self.arcs, nets: self.nets, ros, spin_ros, field_reference, cell_bounds }
    }
}

/// Splits a Hamiltonian coefficient over cells `(a, b)` and `(b, a)`, `a < b`.
pub fn split_coefficient(j: i32) -> (i32, i32) {
    let hi = j.div_euclid(2) + j.rem_euclid(2);
    (hi, j - hi)
}

/// Builds an `dim x dim` all-to-all array programmed with `m`.
///
/// Problem spin `k` lives on RO `k`, or on RO `k + 1` when `m` has a field;
/// RO 0 is then an extra reference coupled to spin `k` with `h[k] / 2`.
pub fn build_a2a(dim: usize, m: &CouplingMatrix, tf: &TimingFile) -> Result<Netlist, NetlistError> {
    let ancilla = m.has_field();
    let offset = usize::from(ancilla);
    if m.n() + offset > dim || dim == 0 {
        return Err(NetlistError::Capacity { dim, n: m.n(), ancilla });
    }
    let c_max = tf.c_max();
    let mut coeff = vec![0i32; dim * dim];
    for a in 0..m.n() {
        for b in 0..m.n() {
            coeff[(a + offset) * dim + b + offset] = m.j(a, b);
        }
        if ancilla {
            let h = m.field()[a];
            if h % 2 != 0 {
                return Err(NetlistError::OddField { index: a, value: h });
            }
            coeff[a + offset] = h / 2;
            coeff[(a + offset) * dim] = h / 2;
        }
    }

    let mut b = Builder::new();
    let enables: Vec<CellId> = (0..dim).map(|_| b.cell(CellKind::Enable, None, 0)).collect();
    let mut grid = vec![0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            grid[i * dim + j] = if i == j {
                b.cell(CellKind::Shorting, Some((i, i)), tf.shorting_level())
            } else {
                let (lo, hi) = (i.min(j), i.max(j));
                let jv = coeff[lo * dim + hi];
                if jv.abs() > 2 * c_max {
                    return Err(NetlistError::Coefficient { a: lo, b: hi, j: jv, limit: 2 * c_max });
                }
                let (first, second) = split_coefficient(jv);
                let ising = if i < j { first } else { second };
                let level = if (i + j) % 2 == 0 { ising } else { -ising };
                if level.abs() > c_max {
                    return Err(NetlistError::Level { level, c_max });
                }
                b.cell(CellKind::Coupling, Some((i, j)), level)
            };
        }
    }

    let d0 = tf.nominal().d0;
    let seed = Polarity::Fall;
    let mut ros = Vec::with_capacity(dim);
    for i in 0..dim {
        let mut h: Vec<(CellId, Pin)> = vec![(enables[i], Pin::Enable)];
        h.extend((0..dim).map(|c| (grid[i * dim + c], Pin::HForward)));
        h.extend((0..dim).rev().map(|c| (grid[i * dim + c], Pin::HReverse)));
        let mut v: Vec<(CellId, Pin)> = vec![(enables[i], Pin::EnablePad)];
        v.extend((0..dim).map(|r| (grid[r * dim + i], Pin::VForward)));
        v.extend((0..dim).rev().map(|r| (grid[r * dim + i], Pin::VReverse)));
        let h_nets = b.close_loop(i, &h, seed);
        let v_nets = b.close_loop(i, &v, seed);
        // Input of the reverse h arc at column i: the arrival there is
        // (enable time - i * d0) up to a constant, the quantity that the
        // couplings of RO i equalize.
        let hop = 2 * dim - i;
        let reference_polarity = if hop.is_multiple_of(2) { seed } else { seed.inverted() };
        ros.push(Oscillator {
            reference_net: h_nets[hop],
            reference_polarity,
            seeds: vec![(h_nets[0], seed), (v_nets[0], seed)],
            seed_offset: i as f64 * d0,
            loops: vec![h_nets, v_nets],
        });
    }
    let spin_ros = (0..m.n()).map(|k| k + offset).collect();
    Ok(b.finish(ros, spin_ros, ancilla, tf))
}

/// A resistive coupling between stage `stage_a` of RO `ro_a` and stage
/// `stage_b` of RO `ro_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageCoupling {
    pub ro_a: usize,
    pub stage_a: usize,
    pub ro_b: usize,
    pub stage_b: usize,
    pub level: i32,
}

impl StageCoupling {
    /// +1 for same-parity stages (in-phase preferring), -1 otherwise.
    pub fn ising_sign(&self) -> i32 {
        let parity = if (self.stage_a + self.stage_b).is_multiple_of(2) { 1 } else { -1 };
        parity * self.level.signum()
    }
}

/// Plain inverter rings with an enable stage at position 0. Stage `s`
/// receives the output of stage `s - 1`; a coupled stage pair shares one
/// coupling cell whose forward h arc is `stage_a` and v arc is `stage_b`.
pub fn build_rings(n_ros: usize, stages: usize, couplings: &[StageCoupling], tf: &TimingFile) -> Result<Netlist, NetlistError> {
    if stages < 3 || stages.is_multiple_of(2) {
        return Err(NetlistError::Oscillation(stages));
    }
    if n_ros == 0 {
        return Err(NetlistError::Coupling("need at least one RO".into()));
    }
    let mut b = Builder::new();
    let mut slot: Vec<Option<(CellId, Pin)>> = vec![None; n_ros * stages];
    for c in couplings {
        let bad = |m: &str| Err(NetlistError::Coupling(format!("{c:?}: {m}")));
        if c.ro_a >= n_ros || c.ro_b >= n_ros || c.stage_a >= stages || c.stage_b >= stages {
            return bad("index out of range");
        }
        if c.ro_a == c.ro_b {
            return bad("both stages in one RO");
        }
        if c.stage_a == 0 || c.stage_b == 0 {
            return bad("the enable stage cannot be coupled");
        }
        if c.level == 0 || c.level.abs() > tf.c_max() {
            return Err(NetlistError::Level { level: c.level, c_max: tf.c_max() });
        }
        let (sa, sb) = (c.ro_a * stages + c.stage_a, c.ro_b * stages + c.stage_b);
        if slot[sa].is_some() || slot[sb].is_some() {
            return bad("stage already coupled");
        }
        let cell = b.cell(CellKind::Coupling, Some((c.ro_a, c.stage_a)), c.level);
        slot[sa] = Some((cell, Pin::HForward));
        slot[sb] = Some((cell, Pin::VForward));
    }
    let seed = Polarity::Fall;
    let mut ros = Vec::with_capacity(n_ros);
    for r in 0..n_ros {
        let mut chain = Vec::with_capacity(stages);
        for s in 0..stages {
            let stage = match slot[r * stages + s] {
                Some(x) => x,
                None if s == 0 => (b.cell(CellKind::Enable, Some((r, 0)), 0), Pin::Enable),
                None => (b.cell(CellKind::Coupling, Some((r, s)), 0), Pin::HForward),
            };
            chain.push(stage);
        }
        let nets = b.close_loop(r, &chain, seed);
        ros.push(Oscillator {
            reference_net: nets[1],
            reference_polarity: seed.inverted(),
            seeds: vec![(nets[0], seed)],
            seed_offset: 0.0,
            loops: vec![nets],
        });
    }
    Ok(b.finish(ros, (0..n_ros).collect(), false, tf))
}

/// Two rings of `stages` stages with the given `(stage_0, stage_1, level)` couplings.
pub fn build_ring_pair(stages: usize, couplings: &[(usize, usize, i32)], tf: &TimingFile) -> Result<Netlist, NetlistError> {
    let cs: Vec<StageCoupling> =
        couplings.iter().map(|&(stage_a, stage_b, level)| StageCoupling { ro_a: 0, stage_a, ro_b: 1, stage_b, level }).collect();
    build_rings(2, stages, &cs, tf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timing::{characterize_surrogate, Nominal, PolPair, SurrogateParams, Table1d, Table3d};

    fn tf() -> TimingFile {
        characterize_surrogate(&SurrogateParams::default(), 7).unwrap()
    }

    fn inversions_around(nl: &Netlist, start: NetId) -> usize {
        let mut net = start;
        let mut hops = 0;
        loop {
            net = nl.receiver(net).output;
            hops += 1;
            if net == start {
                return hops;
            }
        }
    }

    #[test]
    fn three_ro_array_structure() {
        let m = CouplingMatrix::from_edges(3, &[(0, 1, 1), (0, 2, -1)]).unwrap();
        let nl = build_a2a(3, &m, &tf()).unwrap();
        assert_eq!(nl.count_kind(CellKind::Shorting), 3);
        assert_eq!(nl.count_kind(CellKind::Coupling), 6);
        assert_eq!(nl.count_kind(CellKind::Enable), 3);
        for c in nl.cells.iter().filter(|c| c.position.is_some()) {
            let (r, q) = c.position.unwrap();
            assert_eq!(r == q, c.kind == CellKind::Shorting);
        }
        // every net: one driver, one receiver
        for (id, n) in nl.nets.iter().enumerate() {
            assert_eq!(nl.arcs[n.driver].output, id);
            assert_eq!(nl.arcs[n.receiver].input, id);
        }
    }

    #[test]
    fn every_loop_is_odd() {
        let m = crate::ising::random_problem(5, 1.0, 14, 3).unwrap();
        let nl = build_a2a(5, &m, &tf()).unwrap();
        for ro in &nl.ros {
            for l in &ro.loops {
                let len = inversions_around(&nl, l[0]);
                assert_eq!(len, l.len());
                assert_eq!(len % 2, 1);
            }
        }
    }

    #[test]
    fn levels_sum_to_the_coefficient() {
        let m = crate::ising::random_problem(6, 1.0, 14, 11).unwrap();
        let nl = build_a2a(6, &m, &tf()).unwrap();
        let level_at = |r: usize, c: usize| {
            let cell = nl.cells.iter().find(|x| x.position == Some((r, c))).unwrap();
            cell.level * if (r + c).is_multiple_of(2) { 1 } else { -1 }
        };
        for a in 0..6 {
            for b in a + 1..6 {
                assert_eq!(level_at(a, b) + level_at(b, a), m.j(a, b));
            }
        }
        assert_eq!(split_coefficient(-1), (0, -1));
        assert_eq!(split_coefficient(7), (4, 3));
        assert_eq!(split_coefficient(-14), (-7, -7));
    }

    #[test]
    fn coefficient_out_of_range() {
        let m = CouplingMatrix::with_limit(2, vec![0, 15, 15, 0], vec![0, 0], 16).unwrap();
        assert!(matches!(build_a2a(2, &m, &tf()), Err(NetlistError::Coefficient { .. })));
    }

    #[test]
    fn predecessor_walks_the_ring() {
        let nl = build_a2a(4, &CouplingMatrix::zeros(4), &tf()).unwrap();
        for ro in &nl.ros {
            for l in &ro.loops {
                let start = l[3];
                let mut net = start;
                for _ in 0..l.len() {
                    net = nl.predecessor(net).unwrap().0;
                }
                assert_eq!(net, start);
            }
        }
        let ring = build_ring_pair(5, &[], &tf()).unwrap();
        let r = &ring.ros[0];
        let (pred, cell) = ring.predecessor(r.reference_net).unwrap();
        assert_eq!(pred, r.seeds[0].0);
        assert_eq!(ring.cells[cell].kind, CellKind::Enable);
        // output of stage 1 comes from the input net of stage 1
        assert_eq!(ring.predecessor(r.loops[0][2]).unwrap().0, r.loops[0][1]);
    }

    #[test]
    fn ring_validation_and_signs() {
        let t = tf();
        assert_eq!(build_ring_pair(4, &[], &t), Err(NetlistError::Oscillation(4)));
        assert!(build_ring_pair(1, &[], &t).is_err());
        let pos = StageCoupling { ro_a: 0, stage_a: 1, ro_b: 1, stage_b: 1, level: 1 };
        let neg = StageCoupling { ro_a: 1, stage_a: 2, ro_b: 2, stage_b: 3, level: 1 };
        assert_eq!(pos.ising_sign(), 1);
        assert_eq!(neg.ising_sign(), -1);
        let nl = build_rings(3, 5, &[pos, neg], &t).unwrap();
        assert_eq!(nl.cells.iter().filter(|c| c.forward_pair.is_some()).count(), 2);
        assert!(build_rings(3, 5, &[pos, pos], &t).is_err());
    }

    #[test]
    fn bounds_come_from_the_timing_file() {
        let t = tf();
        let nl = build_ring_pair(5, &[(1, 1, 3)], &t).unwrap();
        let coupled = nl.cells.iter().position(|c| c.forward_pair.is_some()).unwrap();
        let plain = nl.cells.iter().position(|c| c.kind == CellKind::Coupling && c.level == 0).unwrap();
        let (lo, hi) = nl.delay_bounds(plain);
        assert_eq!((lo, hi), (48.0, 55.0));
        let (a, b) = nl.delay_bounds(coupled);
        assert!((a - 45.0).abs() < 1e-9 && (b - 58.0).abs() < 1e-9);

        let flat = |v: f64, n: usize| vec![v; n];
        let axis = vec![20.0, 60.0];
        let t1: Vec<Table1d> = [CellKind::Enable, CellKind::Coupling, CellKind::Shorting]
            .into_iter()
            .flat_map(|kind| [Polarity::Rise, Polarity::Fall].map(|polarity| (kind, polarity)))
            .map(|(kind, polarity)| Table1d {
                kind,
                polarity,
                tt_in: axis.clone(),
                delay: vec![64.0, 66.0],
                tt_out: flat(30.0, 2),
            })
            .collect();
        let t3 = vec![Table3d {
            kind: CellKind::Coupling,
            level: 1,
            pair: PolPair::Rr,
            tt_self: axis.clone(),
            tt_other: axis.clone(),
            delta_a: vec![-75.0, 75.0],
            delay: vec![60.0, 70.0, 60.0, 70.0, 60.0, 70.0, 60.0, 70.0],
            tt_out: flat(30.0, 8),
        }];
        let hand = TimingFile::from_tables(75.0, 1, 2, Nominal { d0: 65.0, tt0: 30.0 }, t1, t3).unwrap();
        let nl = build_ring_pair(3, &[(1, 1, 1)], &hand).unwrap();
        let coupled = nl.cells.iter().position(|c| c.forward_pair.is_some()).unwrap();
        assert_eq!(nl.delay_bounds(coupled), (60.0, 70.0));
    }

    #[test]
    fn field_uses_a_reference_ro() {
        let m = CouplingMatrix::from_edges(2, &[(0, 1, 2)]).unwrap().with_field(vec![4, -2]).unwrap();
        assert!(build_a2a(2, &m, &tf()).is_err());
        let nl = build_a2a(3, &m, &tf()).unwrap();
        assert!(nl.field_reference);
        assert_eq!(nl.spin_ros, vec![1, 2]);
        let odd = CouplingMatrix::zeros(2).with_field(vec![1, 0]).unwrap();
        assert!(matches!(build_a2a(3, &odd, &tf()), Err(NetlistError::OddField { .. })));
    }

    #[test]
    fn dump_has_a_line_per_cell() {
        let nl = build_a2a(3, &CouplingMatrix::zeros(3), &tf()).unwrap();
        let d = nl.dump();
        assert_eq!(d.lines().count(), nl.cells.len());
        assert!(d.contains("shorting (1,1) level=14"));
    }
}
