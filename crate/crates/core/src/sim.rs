// SPDX-License-Identifier: Apache-2.0

//! Event-driven simulation of a ring-oscillator netlist.
//!
//! Events (one transition on one net) are popped from a time-ordered queue
//! and propagated through the receiving arc. Forward arcs of a coupling or
//! shorting cell look for an event on the partner input: within the
//! interaction window the pair is evaluated jointly from the 3-D tables;
//! outside it, the partner's stable logic level selects a saturated shift.
//! When the partner event is not known yet but an upstream event could still
//! produce it inside the window, the event is parked until that partner
//! event is generated.
//!
//! No phase shortcut is taken: every edge of every loop is propagated.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ising::SpinState;
use crate::netlist::{ArcId, NetId, Netlist};
use crate::timing::{ArcTiming, CellKind, PolPair, Polarity, TimingError, TimingFile};

pub type EventId = usize;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("deadlock: queue empty with events parked on nets {nets:?}")]
    Deadlock { nets: Vec<NetId> },
    #[error("weak coupling violated: net {net} already holds an unconsumed event at {existing} ps, new event at {new} ps")]
    WeakCoupling { net: NetId, existing: f64, new: f64 },
    #[error("causality violated on net {net}: output at {output} ps precedes input at {input} ps")]
    Causality { net: NetId, input: f64, output: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Timing(#[from] TimingError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub net: NetId,
    pub arrival: f64,
    pub transition_time: f64,
    pub polarity: Polarity,
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Queued,
    Parked,
    Consumed,
}

#[derive(Debug, Clone)]
struct Slot {
    event: Event,
    status: Status,
    /// Set by the watchdog; a released event skips the look-back.
    released: bool,
}

#[derive(Debug, Clone, Copy)]
struct Key {
    arrival: f64,
    net: NetId,
    seq: u64,
    id: EventId,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    // Reversed so that `BinaryHeap` pops the earliest (arrival, net, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.arrival.total_cmp(&self.arrival).then_with(|| other.net.cmp(&self.net)).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Stop once the next event lies beyond this time (ps).
    pub max_time: f64,
    /// Allowed spread of periods for synchronization (ps).
    pub tolerance: f64,
    /// Consecutive cycles that must satisfy the tolerance.
    pub sync_window: usize,
    /// Seeds the default enable stagger.
    pub seed: u64,
    /// Per-RO enable delay (ps); drawn uniformly in `[0, T)` when `None`.
    pub stagger: Option<Vec<f64>>,
    /// Release parked events whose trigger can no longer arrive in time.
    pub watchdog: bool,
    /// Keep a record of every arc evaluation.
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { max_time: 100_000.0, tolerance: 0.1, sync_window: 5, seed: 0, stagger: None, watchdog: true, record_trace: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Synchronized,
    Timeout,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Synchronized => "synchronized",
            Termination::Timeout => "timeout",
        }
    }
}

/// One arc evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcFiring {
    pub arc: ArcId,
    pub input_arrival: f64,
    pub output_arrival: f64,
    pub polarity: Polarity,
    /// `partner - self` arrival difference when evaluated jointly.
    pub delta_a: Option<f64>,
    /// Partner still to make the same transition, for saturated lookups.
    pub partner_pending: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EventStats {
    pub created: u64,
    pub consumed: u64,
    pub queued: u64,
    pub parked: u64,
    pub processed: u64,
    pub parks: u64,
    pub releases: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Problem spins; the reference RO reads +1.
    pub spins: SpinState,
    /// Spin of every RO relative to RO 0.
    pub ro_spins: Vec<i8>,
    pub reason: Termination,
    /// Per RO, `(cycle, period)` with cycle counted from 1.
    pub periods: Vec<Vec<(usize, f64)>>,
    /// Per RO, arrival times of the counted reference edges.
    pub ref_edges: Vec<Vec<f64>>,
    pub events_processed: u64,
    pub stats: EventStats,
    /// Unconsumed events at termination, by net.
    pub net2event: Vec<Event>,
    pub stagger: Vec<f64>,
    pub nominal_period: f64,
    /// Time of the last processed event.
    pub end_time: f64,
    pub trace: Vec<ArcFiring>,
}

/// Uncoupled oscillation period of loop 0 of RO `ro` at the nominal
/// transition time.
pub fn nominal_period(nl: &Netlist, tf: &TimingFile, ro: usize) -> Result<f64, TimingError> {
    let tt0 = tf.nominal().tt0;
    let mut t = 0.0;
    for &net in &nl.ros[ro].loops[0] {
        let arc = nl.receiver(net);
        let kind = nl.cells[arc.cell].kind;
        for pol in [Polarity::Rise, Polarity::Fall] {
            t += tf.lookup_uncoupled(kind, pol, tt0)?.delay;
        }
    }
    Ok(t)
}

/// Spin of every RO from its last reference edge: +1 iff the offset to RO 0,
/// taken modulo `period`, is strictly closer to 0 than to half a period.
pub fn spins_from_edges(last_edges: &[Option<f64>], period: f64) -> Vec<i8> {
    let base = last_edges.first().copied().flatten().unwrap_or(0.0);
    last_edges
        .iter()
        .map(|e| match e {
            None => 1,
            Some(t) => {
                let p = (t - base).rem_euclid(period);
                let to_zero = p.min(period - p);
                if to_zero < (p - period / 2.0).abs() {
                    1
                } else {
                    -1
                }
            }
        })
        .collect()
}

/// A simulation in progress. [`simulate`] drives it to termination; the
/// step-level API exists for tests and tools.
pub struct Kernel<'a> {
    nl: &'a Netlist,
    tf: &'a TimingFile,
    cfg: SimConfig,
    w: f64,
    slots: Vec<Slot>,
    queue: BinaryHeap<Key>,
    net2event: Vec<Option<EventId>>,
    pending: Vec<Option<EventId>>,
    deadlines: BTreeSet<(u64, EventId)>,
    level: Vec<bool>,
    last_polarity: Vec<Option<Polarity>>,
    ref_of_net: Vec<Option<usize>>,
    ref_edges: Vec<Vec<f64>>,
    seq: u64,
    clock: f64,
    stats: EventStats,
    synchronized: bool,
    trace: Vec<ArcFiring>,
    stagger: Vec<f64>,
    period: f64,
}

impl<'a> Kernel<'a> {
    /// Builds a kernel with no events in flight.
    pub fn empty(nl: &'a Netlist, tf: &'a TimingFile, cfg: SimConfig) -> Result<Self, SimError> {
        if cfg.tolerance.is_nan() || cfg.tolerance < 0.0 || cfg.sync_window == 0 || cfg.max_time.is_nan() {
            return Err(SimError::Config("tolerance must be >= 0, sync_window >= 1, max_time a number".into()));
        }
        let period = nominal_period(nl, tf, 0)?;
        let n_nets = nl.net_count();
        let mut ref_of_net = vec![None; n_nets];
        for (r, ro) in nl.ros.iter().enumerate() {
            ref_of_net[ro.reference_net] = Some(r);
        }
        let stagger = match &cfg.stagger {
            Some(s) if s.len() != nl.ro_count() => {
                return Err(SimError::Config(format!("stagger has {} entries for {} ROs", s.len(), nl.ro_count())))
            }
            Some(s) if s.iter().any(|x| !x.is_finite() || *x < 0.0) => {
                return Err(SimError::Config("stagger entries must be finite and >= 0".into()))
            }
            Some(s) => s.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                (0..nl.ro_count()).map(|_| rng.gen_range(0.0..period)).collect()
            }
        };
        Ok(Self {
            nl,
            tf,
            w: tf.window_w(),
            cfg,
            slots: Vec::new(),
            queue: BinaryHeap::new(),
            net2event: vec![None; n_nets],
            pending: vec![None; n_nets],
            deadlines: BTreeSet::new(),
            level: nl.nets.iter().map(|n| n.initial_level).collect(),
            last_polarity: vec![None; n_nets],
            ref_of_net,
            ref_edges: vec![Vec::new(); nl.ro_count()],
            seq: 0,
            clock: 0.0,
            stats: EventStats::default(),
            synchronized: false,
            trace: Vec::new(),
            stagger,
            period,
        })
    }

    /// Builds a kernel and schedules the enable edge of every loop.
    pub fn new(nl: &'a Netlist, tf: &'a TimingFile, cfg: SimConfig) -> Result<Self, SimError> {
        let mut k = Self::empty(nl, tf, cfg)?;
        let tt0 = tf.nominal().tt0;
        for (r, ro) in nl.ros.iter().enumerate() {
            let t = k.stagger[r] + ro.seed_offset;
            for &(net, pol) in &ro.seeds {
                k.inject(net, t, tt0, pol)?;
            }
        }
        Ok(k)
    }

    /// Schedules an event on `net`.
    pub fn inject(&mut self, net: NetId, arrival: f64, transition_time: f64, polarity: Polarity) -> Result<EventId, SimError> {
        if let Some(prev) = self.last_polarity[net] {
            debug_assert_ne!(prev, polarity, "polarity must alternate on net {net}");
        }
        if let Some(existing) = self.net2event[net] {
            return Err(SimError::WeakCoupling { net, existing: self.slots[existing].event.arrival, new: arrival });
        }
        let id = self.slots.len();
        let event = Event { net, arrival, transition_time, polarity, seq: self.seq };
        self.seq += 1;
        self.slots.push(Slot { event, status: Status::Queued, released: false });
        self.net2event[net] = Some(id);
        self.last_polarity[net] = Some(polarity);
        self.queue.push(Key { arrival, net, seq: event.seq, id });
        self.stats.created += 1;
        self.stats.queued += 1;
        if let Some(r) = self.ref_of_net[net] {
            if polarity == self.nl.ros[r].reference_polarity {
                self.ref_edges[r].push(arrival);
                self.check_sync_after(r);
            }
        }
        if let Some(p) = self.pending[net].take() {
            self.unpark(p);
            self.requeue(p);
        }
        Ok(id)
    }

    pub fn event(&self, id: EventId) -> &Event {
        &self.slots[id].event
    }

    pub fn stats(&self) -> EventStats {
        self.stats
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn is_synchronized(&self) -> bool {
        self.synchronized
    }

    pub fn is_parked(&self, id: EventId) -> bool {
        self.slots[id].status == Status::Parked
    }

    pub fn ref_edges(&self) -> &[Vec<f64>] {
        &self.ref_edges
    }

    /// Earliest live queue entry, discarding stale ones.
    fn head(&mut self) -> Option<Key> {
        while let Some(k) = self.queue.peek().copied() {
            let s = &self.slots[k.id];
            if s.status == Status::Queued && s.event.seq == k.seq {
                return Some(k);
            }
            self.queue.pop();
        }
        None
    }

    pub fn next_arrival(&mut self) -> Option<f64> {
        self.head().map(|k| k.arrival)
    }

    fn requeue(&mut self, id: EventId) {
        let e = self.slots[id].event;
        self.slots[id].status = Status::Queued;
        self.stats.queued += 1;
        self.queue.push(Key { arrival: e.arrival, net: e.net, seq: e.seq, id });
    }

    fn unpark(&mut self, id: EventId) {
        if let Some(d) = self.deadline_key(id) {
            self.deadlines.remove(&d);
        }
        self.stats.parked -= 1;
    }

    fn deadline_key(&self, id: EventId) -> Option<(u64, EventId)> {
        let e = &self.slots[id].event;
        let partner = self.nl.arcs[self.nl.partner_arc(self.nl.nets[e.net].receiver)?].input;
        let (_, pred_cell) = self.nl.predecessor(partner)?;
        let deadline = e.arrival + self.w + self.nl.delay_bounds(pred_cell).1;
        Some((deadline.to_bits(), id))
    }

    fn consume(&mut self, id: EventId) {
        let s = &mut self.slots[id];
        match s.status {
            Status::Queued => self.stats.queued -= 1,
            Status::Parked => self.stats.parked -= 1,
            Status::Consumed => unreachable!("event {id} consumed twice"),
        }
        s.status = Status::Consumed;
        let e = s.event;
        if self.net2event[e.net] == Some(id) {
            self.net2event[e.net] = None;
        }
        self.level[e.net] = e.polarity.final_level();
        self.stats.consumed += 1;
    }

    /// Whether an event that is not generated yet could reach `net` inside
    /// `(left, right)`, judged from the nearest upstream event.
    pub fn look_back(&self, net: NetId, left: f64, right: f64, threshold: f64, exclude: Option<EventId>) -> bool {
        let (mut net, mut left, mut right) = (net, left, right);
        for _ in 0..=self.nl.net_count() {
            if right < threshold {
                return false;
            }
            if let Some(id) = self.net2event[net] {
                if Some(id) == exclude {
                    return false;
                }
                let a = self.slots[id].event.arrival;
                return left < a && a < right;
            }
            let Some((pred, cell)) = self.nl.predecessor(net) else {
                return false;
            };
            let (d_min, d_max) = self.nl.delay_bounds(cell);
            net = pred;
            left -= d_max;
            right -= d_min;
        }
        false
    }

    fn cell_level(&self, cell: usize) -> i32 {
        let c = &self.nl.cells[cell];
        match c.kind {
            CellKind::Shorting => self.tf.shorting_level(),
            _ => c.level,
        }
    }

    fn emit(
        &mut self,
        arc: ArcId,
        input: &Event,
        t: ArcTiming,
        delta_a: Option<f64>,
        partner_pending: Option<bool>,
    ) -> Result<(), SimError> {
        let out = self.nl.arcs[arc].output;
        let arrival = input.arrival + t.delay;
        if arrival.is_nan() || arrival <= input.arrival {
            return Err(SimError::Causality { net: out, input: input.arrival, output: arrival });
        }
        if self.cfg.record_trace {
            self.trace.push(ArcFiring {
                arc,
                input_arrival: input.arrival,
                output_arrival: arrival,
                polarity: input.polarity,
                delta_a,
                partner_pending,
            });
        }
        self.inject(out, arrival, t.tt_out, input.polarity.inverted())?;
        Ok(())
    }

    fn saturated(&self, arc: ArcId, e: &Event, partner_level: bool) -> Result<(ArcTiming, bool), SimError> {
        let cell = self.nl.arcs[arc].cell;
        let pending = partner_level != e.polarity.final_level();
        let t =
            self.tf.lookup_saturated(self.nl.cells[cell].kind, self.cell_level(cell), e.polarity, e.transition_time, pending)?;
        Ok((t, pending))
    }

    fn process(&mut self, id: EventId) -> Result<(), SimError> {
        self.stats.processed += 1;
        let e = self.slots[id].event;
        let arc_id = self.nl.nets[e.net].receiver;
        let arc = &self.nl.arcs[arc_id];
        let cell = arc.cell;
        let kind = self.nl.cells[cell].kind;

        let Some(partner_arc) = self.nl.partner_arc(arc_id) else {
            let t = self.tf.lookup_uncoupled(kind, e.polarity, e.transition_time)?;
            self.emit(arc_id, &e, t, None, None)?;
            self.consume(id);
            return Ok(());
        };
        let pnet = self.nl.arcs[partner_arc].input;

        if let Some(pid) = self.net2event[pnet] {
            let p = self.slots[pid].event;
            let delta = p.arrival - e.arrival;
            let level = self.cell_level(cell);
            if delta.abs() <= self.w {
                let fwd = PolPair::of(e.polarity, p.polarity);
                let rev = PolPair::of(p.polarity, e.polarity);
                if self.tf.has_table_3d(kind, level, fwd) && self.tf.has_table_3d(kind, level, rev) {
                    let te = self.tf.lookup_interaction(kind, level, fwd, e.transition_time, p.transition_time, delta)?;
                    let tp = self.tf.lookup_interaction(kind, level, rev, p.transition_time, e.transition_time, -delta)?;
                    self.emit(arc_id, &e, te, Some(delta), None)?;
                    self.emit(partner_arc, &p, tp, Some(-delta), None)?;
                } else {
                    // No joint table for this polarity pair: each edge sees
                    // the other as a stable level on its own side of it.
                    let p_level_for_e = if delta > 0.0 { !p.polarity.final_level() } else { p.polarity.final_level() };
                    let e_level_for_p = if delta < 0.0 { !e.polarity.final_level() } else { e.polarity.final_level() };
                    let (te, pe) = self.saturated(arc_id, &e, p_level_for_e)?;
                    let (tp, pp) = self.saturated(partner_arc, &p, e_level_for_p)?;
                    self.emit(arc_id, &e, te, None, Some(pe))?;
                    self.emit(partner_arc, &p, tp, None, Some(pp))?;
                }
                if self.slots[pid].status == Status::Parked {
                    self.pending[e.net] = None;
                    self.unpark(pid);
                    self.slots[pid].status = Status::Queued;
                    self.stats.queued += 1;
                }
                self.consume(id);
                self.consume(pid);
                return Ok(());
            }
            let partner_level = if delta > 0.0 { !p.polarity.final_level() } else { p.polarity.final_level() };
            let (t, pending) = self.saturated(arc_id, &e, partner_level)?;
            self.emit(arc_id, &e, t, None, Some(pending))?;
            self.consume(id);
            return Ok(());
        }

        if !self.slots[id].released {
            let (left, right) = (e.arrival - self.w, e.arrival + self.w);
            if self.look_back(pnet, left, right, left, Some(id)) {
                if let Some(other) = self.pending[pnet] {
                    return Err(SimError::Config(format!("net {pnet} already triggers parked event {other}")));
                }
                self.slots[id].status = Status::Parked;
                self.stats.queued -= 1;
                self.stats.parked += 1;
                self.stats.parks += 1;
                self.pending[pnet] = Some(id);
                if let Some(d) = self.deadline_key(id) {
                    self.deadlines.insert(d);
                }
                return Ok(());
            }
        }
        let (t, pending) = self.saturated(arc_id, &e, self.level[pnet])?;
        self.emit(arc_id, &e, t, None, Some(pending))?;
        self.consume(id);
        Ok(())
    }

    fn release_due(&mut self, head: Option<f64>) -> bool {
        let Some(&(bits, id)) = self.deadlines.first() else {
            return false;
        };
        // an empty queue means every live event waits on another parked one
        if matches!(head, Some(h) if h <= f64::from_bits(bits)) {
            return false;
        }
        self.deadlines.remove(&(bits, id));
        let net = self.slots[id].event.net;
        let pnet = self.nl.arcs[self.nl.partner_arc(self.nl.nets[net].receiver).expect("parked on a forward arc")].input;
        self.pending[pnet] = None;
        self.stats.parked -= 1;
        self.stats.releases += 1;
        self.slots[id].released = true;
        self.requeue(id);
        true
    }

    /// Pops and processes one event. Returns the termination reason once
    /// the run should stop.
    pub fn step(&mut self) -> Result<Option<Termination>, SimError> {
        if self.synchronized {
            return Ok(Some(Termination::Synchronized));
        }
        loop {
            let head = self.head();
            if self.cfg.watchdog && self.release_due(head.map(|k| k.arrival)) {
                continue;
            }
            let Some(k) = head else {
                if self.stats.parked > 0 {
                    let mut nets: Vec<NetId> =
                        self.slots.iter().filter(|s| s.status == Status::Parked).map(|s| s.event.net).collect();
                    nets.sort_unstable();
                    return Err(SimError::Deadlock { nets });
                }
                return Ok(Some(Termination::Timeout));
            };
            if k.arrival > self.cfg.max_time {
                return Ok(Some(Termination::Timeout));
            }
            self.queue.pop();
            self.clock = self.clock.max(k.arrival);
            self.process(k.id)?;
            return Ok(self.synchronized.then_some(Termination::Synchronized));
        }
    }

    fn check_sync_after(&mut self, _ro: usize) {
        let w = self.cfg.sync_window;
        if self.ref_edges.iter().any(|e| e.len() <= w) {
            return;
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for e in &self.ref_edges {
            let n = e.len();
            for k in n - w..n {
                sum += e[k] - e[k - 1];
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let tol = self.cfg.tolerance;
        self.synchronized = self.ref_edges.iter().all(|e| {
            let n = e.len();
            (n - w..n).all(|k| ((e[k] - e[k - 1]) - mean).abs() <= tol)
        });
    }

    /// Mean of the most recent period of every RO, or the nominal period.
    pub fn current_period(&self) -> f64 {
        let last: Vec<f64> = self.ref_edges.iter().filter(|e| e.len() >= 2).map(|e| e[e.len() - 1] - e[e.len() - 2]).collect();
        if last.len() == self.ref_edges.len() && !last.is_empty() {
            last.iter().sum::<f64>() / last.len() as f64
        } else {
            self.period
        }
    }

    pub fn finish(mut self, reason: Termination) -> SimResult {
        let last: Vec<Option<f64>> = self.ref_edges.iter().map(|e| e.last().copied()).collect();
        let ro_spins = spins_from_edges(&last, self.current_period());
        let spins = SpinState::new(self.nl.spin_ros.iter().map(|&r| ro_spins[r]).collect());
        let periods =
            self.ref_edges.iter().map(|e| e.windows(2).enumerate().map(|(k, w)| (k + 1, w[1] - w[0])).collect()).collect();
        let mut net2event: Vec<Event> = self.net2event.iter().flatten().map(|&id| self.slots[id].event).collect();
        net2event.sort_by_key(|e| e.net);
        SimResult {
            spins,
            ro_spins,
            reason,
            periods,
            events_processed: self.stats.processed,
            stats: self.stats,
            net2event,
            stagger: std::mem::take(&mut self.stagger),
            nominal_period: self.period,
            end_time: self.clock,
            trace: std::mem::take(&mut self.trace),
            ref_edges: std::mem::take(&mut self.ref_edges),
        }
    }
}

/// Runs the netlist until the periods synchronize or the time limit passes.
pub fn simulate(nl: &Netlist, tf: &TimingFile, cfg: &SimConfig) -> Result<SimResult, SimError> {
    let mut k = Kernel::new(nl, tf, cfg.clone())?;
    loop {
        if let Some(reason) = k.step()? {
            return Ok(k.finish(reason));
        }
    }
}
