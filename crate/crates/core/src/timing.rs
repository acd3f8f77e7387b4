// SPDX-License-Identifier: Apache-2.0

//! Lookup-table timing models for the array cells.
//!
//! Every timing arc maps an input event (transition time, polarity) to an
//! output delay and output transition time. Arcs that do not interact use a
//! one-dimensional table over the input transition time. Interacting forward
//! arcs use three-dimensional tables indexed by the transition times of both
//! inputs and the arrival-time difference `delta_a = other - self`, which
//! ranges over the interaction window `[-W, +W]`.
//!
//! [`characterize_surrogate`] fills the tables from a closed-form delay model
//! so the rest of the stack can run without transistor-level characterization.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack used when checking `|delta_a| <= W` against floating arithmetic.
const WINDOW_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("invalid surrogate parameters: {0}")]
    Params(String),
    #[error("timing file parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("no {0} in timing file")]
    MissingTable(String),
    #[error("arrival difference {delta_a} ps lies outside the interaction window ±{window} ps")]
    OutsideWindow { delta_a: f64, window: f64 },
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Enable,
    Coupling,
    Shorting,
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Enable => "enable",
            CellKind::Coupling => "coupling",
            CellKind::Shorting => "shorting",
        })
    }
}

/// Direction of a transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Rise,
    Fall,
}

impl Polarity {
    pub fn inverted(self) -> Self {
        match self {
            Polarity::Rise => Polarity::Fall,
            Polarity::Fall => Polarity::Rise,
        }
    }

    /// Logic level after the transition completes (`true` = high).
    pub fn final_level(self) -> bool {
        matches!(self, Polarity::Rise)
    }
}

/// Input polarities of the (self, other) events on an interacting pair of arcs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolPair {
    Rr,
    Ff,
    Rf,
    Fr,
}

impl PolPair {
    pub const ALL: [PolPair; 4] = [PolPair::Rr, PolPair::Ff, PolPair::Rf, PolPair::Fr];

    pub fn of(this: Polarity, other: Polarity) -> Self {
        match (this, other) {
            (Polarity::Rise, Polarity::Rise) => PolPair::Rr,
            (Polarity::Fall, Polarity::Fall) => PolPair::Ff,
            (Polarity::Rise, Polarity::Fall) => PolPair::Rf,
            (Polarity::Fall, Polarity::Rise) => PolPair::Fr,
        }
    }

    pub fn this(self) -> Polarity {
        match self {
            PolPair::Rr | PolPair::Rf => Polarity::Rise,
            PolPair::Ff | PolPair::Fr => Polarity::Fall,
        }
    }

    pub fn same_polarity(self) -> bool {
        matches!(self, PolPair::Rr | PolPair::Ff)
    }
}

/// Delay and output transition time produced by one arc evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcTiming {
    pub delay: f64,
    pub tt_out: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nominal {
    #[serde(rename = "d0_ps")]
    pub d0: f64,
    #[serde(rename = "tt0_ps")]
    pub tt0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBound {
    pub kind: CellKind,
    #[serde(rename = "d_min_ps")]
    pub d_min: f64,
    #[serde(rename = "d_max_ps")]
    pub d_max: f64,
}

/// Input transition time -> (delay, output transition time), keyed by the
/// input-edge polarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1d {
    pub kind: CellKind,
    pub polarity: Polarity,
    #[serde(rename = "tt_in_ps")]
    pub tt_in: Vec<f64>,
    #[serde(rename = "delay_ps")]
    pub delay: Vec<f64>,
    #[serde(rename = "tt_out_ps")]
    pub tt_out: Vec<f64>,
}

/// (tt_self, tt_other, delta_a) -> (delay_self, tt_out_self); values are
/// row-major with `delta_a` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3d {
    pub kind: CellKind,
    pub level: i32,
    pub pair: PolPair,
    #[serde(rename = "tt_self_ps")]
    pub tt_self: Vec<f64>,
    #[serde(rename = "tt_other_ps")]
    pub tt_other: Vec<f64>,
    #[serde(rename = "delta_a_ps")]
    pub delta_a: Vec<f64>,
    #[serde(rename = "delay_ps")]
    pub delay: Vec<f64>,
    #[serde(rename = "tt_out_ps")]
    pub tt_out: Vec<f64>,
}

impl Table3d {
    fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.tt_other.len() + b) * self.delta_a.len() + c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TimingRepr {
    window_w_ps: f64,
    c_max: i32,
    shorting_level: i32,
    nominal: Nominal,
    #[serde(default)]
    bounds: Vec<DelayBound>,
    #[serde(default)]
    table1d: Vec<Table1d>,
    #[serde(default)]
    table3d: Vec<Table3d>,
}

/// The complete timing view of the array cells. Immutable once built.
#[derive(Debug, Clone)]
pub struct TimingFile {
    repr: TimingRepr,
    index1d: HashMap<(CellKind, Polarity), usize>,
    index3d: HashMap<(CellKind, i32, PolPair), usize>,
}

impl PartialEq for TimingFile {
    fn eq(&self, other: &Self) -> bool {
        self.repr == other.repr
    }
}

impl TimingFile {
    /// Assembles a timing file from explicit tables, validating every
    /// structural invariant. Per-kind delay bounds are derived from the tables.
    pub fn from_tables(
        window_w: f64,
        c_max: i32,
        shorting_level: i32,
        nominal: Nominal,
        tables_1d: Vec<Table1d>,
        tables_3d: Vec<Table3d>,
    ) -> Result<Self, TimingError> {
        let mut repr = TimingRepr {
            window_w_ps: window_w,
            c_max,
            shorting_level,
            nominal,
            bounds: Vec::new(),
            table1d: tables_1d,
            table3d: tables_3d,
        };
        repr.bounds = derive_bounds(&repr);
        Self::from_repr(repr)
    }

    fn from_repr(mut repr: TimingRepr) -> Result<Self, TimingError> {
        if repr.bounds.is_empty() {
            repr.bounds = derive_bounds(&repr);
        }
        validate(&repr)?;
        let mut index1d = HashMap::new();
        for (i, t) in repr.table1d.iter().enumerate() {
            if index1d.insert((t.kind, t.polarity), i).is_some() {
                return Err(parse_err(format!("table1d[{i}]"), "duplicate (kind, polarity) table"));
            }
        }
        let mut index3d = HashMap::new();
        for (i, t) in repr.table3d.iter().enumerate() {
            if index3d.insert((t.kind, t.level, t.pair), i).is_some() {
                return Err(parse_err(format!("table3d[{i}]"), "duplicate (kind, level, pair) table"));
            }
        }
        Ok(Self { repr, index1d, index3d })
    }

    pub fn window_w(&self) -> f64 {
        self.repr.window_w_ps
    }

    pub fn c_max(&self) -> i32 {
        self.repr.c_max
    }

    /// Coupling level used for the diagonal shorting tables.
    pub fn shorting_level(&self) -> i32 {
        self.repr.shorting_level
    }

    pub fn nominal(&self) -> Nominal {
        self.repr.nominal
    }

    pub fn tables_1d(&self) -> &[Table1d] {
        &self.repr.table1d
    }

    pub fn tables_3d(&self) -> &[Table3d] {
        &self.repr.table3d
    }

    /// Stored `(d_min, d_max)` over every table entry of `kind`.
    pub fn delay_bounds(&self, kind: CellKind) -> Option<(f64, f64)> {
        self.repr.bounds.iter().find(|b| b.kind == kind).map(|b| (b.d_min, b.d_max))
    }

    /// Delay range of a cell of `kind` programmed to `level`: the 1-D tables
    /// of that kind plus, for interacting cells, every table of that level.
    pub fn level_bounds(&self, kind: CellKind, level: i32) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for t in self.repr.table1d.iter().filter(|t| t.kind == kind) {
            for &d in &t.delay {
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        let interacting = match kind {
            CellKind::Enable => None,
            CellKind::Coupling if level == 0 => None,
            CellKind::Coupling => Some(level),
            CellKind::Shorting => Some(self.repr.shorting_level),
        };
        if let Some(level) = interacting {
            for t in self.repr.table3d.iter().filter(|t| t.kind == kind && t.level == level) {
                for &d in &t.delay {
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    pub fn has_table_3d(&self, kind: CellKind, level: i32, pair: PolPair) -> bool {
        self.index3d.contains_key(&(kind, level, pair))
    }

    /// Single-input arc timing by linear interpolation; `tt_in` is clamped
    /// to the table axis.
    pub fn lookup_uncoupled(&self, kind: CellKind, polarity: Polarity, tt_in: f64) -> Result<ArcTiming, TimingError> {
        let t = self
            .index1d
            .get(&(kind, polarity))
            .map(|&i| &self.repr.table1d[i])
            .ok_or_else(|| TimingError::MissingTable(format!("1-D {kind} {polarity:?} table")))?;
        let (i, f) = locate(&t.tt_in, tt_in);
        Ok(ArcTiming { delay: lerp(t.delay[i], t.delay[i + 1], f), tt_out: lerp(t.tt_out[i], t.tt_out[i + 1], f) })
    }

    /// Interacting coupling-cell arc at level `k`.
    pub fn lookup_coupled(
        &self,
        k: i32,
        pair: PolPair,
        tt_self: f64,
        tt_other: f64,
        delta_a: f64,
    ) -> Result<ArcTiming, TimingError> {
        self.lookup_interaction(CellKind::Coupling, k, pair, tt_self, tt_other, delta_a)
    }

    /// Trilinear interpolation on the table selected by `(kind, level, pair)`.
    /// `delta_a` must lie within the interaction window.
    pub fn lookup_interaction(
        &self,
        kind: CellKind,
        level: i32,
        pair: PolPair,
        tt_self: f64,
        tt_other: f64,
        delta_a: f64,
    ) -> Result<ArcTiming, TimingError> {
        let w = self.repr.window_w_ps;
        if delta_a.abs() > w + WINDOW_EPS {
            return Err(TimingError::OutsideWindow { delta_a, window: w });
        }
        let t = self
            .index3d
            .get(&(kind, level, pair))
            .map(|&i| &self.repr.table3d[i])
            .ok_or_else(|| TimingError::MissingTable(format!("3-D {kind} level {level} {pair:?} table")))?;
        let (ia, fa) = locate(&t.tt_self, tt_self);
        let (ib, fb) = locate(&t.tt_other, tt_other);
        let (ic, fc) = locate(&t.delta_a, delta_a.clamp(-w, w));
        let interp = |vals: &[f64]| {
            let at = |a, b, c| vals[t.index(a, b, c)];
            let c00 = lerp(at(ia, ib, ic), at(ia, ib, ic + 1), fc);
            let c01 = lerp(at(ia, ib + 1, ic), at(ia, ib + 1, ic + 1), fc);
            let c10 = lerp(at(ia + 1, ib, ic), at(ia + 1, ib, ic + 1), fc);
            let c11 = lerp(at(ia + 1, ib + 1, ic), at(ia + 1, ib + 1, ic + 1), fc);
            lerp(lerp(c00, c01, fb), lerp(c10, c11, fb), fa)
        };
        Ok(ArcTiming { delay: interp(&t.delay), tt_out: interp(&t.tt_out) })
    }

    /// Arc timing when the partner input is stable for the whole transition.
    ///
    /// The saturated end columns of the same-polarity table hold this case:
    /// `+W` when the partner has yet to make the same transition (it still
    /// sits at the opposite level), `-W` when it already has.
    pub fn lookup_saturated(
        &self,
        kind: CellKind,
        level: i32,
        this: Polarity,
        tt_self: f64,
        partner_pending: bool,
    ) -> Result<ArcTiming, TimingError> {
        let w = self.repr.window_w_ps;
        let delta_a = if partner_pending { w } else { -w };
        self.lookup_interaction(kind, level, PolPair::of(this, this), tt_self, self.repr.nominal.tt0, delta_a)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(&self.repr).expect("timing tables serialize")
    }

    pub fn parse(text: &str) -> Result<Self, TimingError> {
        let repr: TimingRepr = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => format!("line {}", text[..span.start.min(text.len())].matches('\n').count() + 1),
                None => "file".to_string(),
            };
            TimingError::Parse { location, message: e.message().to_string() }
        })?;
        Self::from_repr(repr)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TimingError> {
        fs::write(path.as_ref(), self.to_text()).map_err(|e| TimingError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TimingError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| TimingError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }
}

pub fn save_timing(tf: &TimingFile, path: impl AsRef<Path>) -> Result<(), TimingError> {
    tf.save(path)
}

pub fn load_timing(path: impl AsRef<Path>) -> Result<TimingFile, TimingError> {
    TimingFile::load(path)
}

fn parse_err(location: String, message: &str) -> TimingError {
    TimingError::Parse { location, message: message.to_string() }
}

fn check_axis(location: String, axis: &[f64]) -> Result<(), TimingError> {
    if axis.len() < 2 {
        return Err(parse_err(location, "axis needs at least two points"));
    }
    if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(parse_err(location, "axis must be finite and strictly increasing"));
    }
    Ok(())
}

fn check_values(location: String, vals: &[f64], expected: usize, positive: bool) -> Result<(), TimingError> {
    if vals.len() != expected {
        return Err(TimingError::Parse { location, message: format!("expected {expected} values, found {}", vals.len()) });
    }
    if vals.iter().any(|v| !v.is_finite() || (positive && *v <= 0.0)) {
        return Err(parse_err(location, "values must be finite and strictly positive"));
    }
    Ok(())
}

fn validate(repr: &TimingRepr) -> Result<(), TimingError> {
    let w = repr.window_w_ps;
    if !(w.is_finite() && w > 0.0) {
        return Err(parse_err("window_w_ps".into(), "must be positive"));
    }
    if repr.c_max < 0 {
        return Err(parse_err("c_max".into(), "must be nonnegative"));
    }
    if !(repr.nominal.d0 > 0.0 && repr.nominal.tt0 > 0.0) {
        return Err(parse_err("nominal".into(), "d0_ps and tt0_ps must be positive"));
    }
    for (i, t) in repr.table1d.iter().enumerate() {
        check_axis(format!("table1d[{i}].tt_in_ps"), &t.tt_in)?;
        check_values(format!("table1d[{i}].delay_ps"), &t.delay, t.tt_in.len(), true)?;
        check_values(format!("table1d[{i}].tt_out_ps"), &t.tt_out, t.tt_in.len(), true)?;
    }
    for (i, t) in repr.table3d.iter().enumerate() {
        let level_ok = match t.kind {
            CellKind::Coupling => t.level != 0 && t.level.abs() <= repr.c_max,
            CellKind::Shorting => t.level == repr.shorting_level,
            CellKind::Enable => false,
        };
        if !level_ok {
            return Err(parse_err(format!("table3d[{i}].level"), "level out of range for this cell kind"));
        }
        check_axis(format!("table3d[{i}].tt_self_ps"), &t.tt_self)?;
        check_axis(format!("table3d[{i}].tt_other_ps"), &t.tt_other)?;
        check_axis(format!("table3d[{i}].delta_a_ps"), &t.delta_a)?;
        let (lo, hi) = (t.delta_a[0], *t.delta_a.last().unwrap());
        if (lo + w).abs() > WINDOW_EPS || (hi - w).abs() > WINDOW_EPS {
            return Err(parse_err(format!("table3d[{i}].delta_a_ps"), "axis must span exactly [-W, +W]"));
        }
        let n = t.tt_self.len() * t.tt_other.len() * t.delta_a.len();
        check_values(format!("table3d[{i}].delay_ps"), &t.delay, n, true)?;
        check_values(format!("table3d[{i}].tt_out_ps"), &t.tt_out, n, true)?;
    }
    for (i, b) in repr.bounds.iter().enumerate() {
        if !(b.d_min > 0.0 && b.d_min <= b.d_max) {
            return Err(parse_err(format!("bounds[{i}]"), "need 0 < d_min <= d_max"));
        }
        let all = repr
            .table1d
            .iter()
            .filter(|t| t.kind == b.kind)
            .flat_map(|t| t.delay.iter())
            .chain(repr.table3d.iter().filter(|t| t.kind == b.kind).flat_map(|t| t.delay.iter()));
        for &d in all {
            if d < b.d_min || d > b.d_max {
                return Err(TimingError::Parse {
                    location: format!("bounds[{i}]"),
                    message: format!("{} delay {d} outside stored bounds", b.kind),
                });
            }
        }
    }
    Ok(())
}

fn derive_bounds(repr: &TimingRepr) -> Vec<DelayBound> {
    let mut out = Vec::new();
    for kind in [CellKind::Enable, CellKind::Coupling, CellKind::Shorting] {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let delays = repr
            .table1d
            .iter()
            .filter(|t| t.kind == kind)
            .flat_map(|t| t.delay.iter())
            .chain(repr.table3d.iter().filter(|t| t.kind == kind).flat_map(|t| t.delay.iter()));
        for &d in delays {
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if lo <= hi {
            out.push(DelayBound { kind, d_min: lo, d_max: hi });
        }
    }
    out
}

/// Segment index and fraction for `x` on `axis`, clamped to the ends.
fn locate(axis: &[f64], x: f64) -> (usize, f64) {
    let last = axis.len() - 1;
    if x <= axis[0] {
        return (0, 0.0);
    }
    if x >= axis[last] {
        return (last - 1, 1.0);
    }
    let i = axis.partition_point(|&a| a <= x).saturating_sub(1).min(last - 1);
    (i, (x - axis[i]) / (axis[i + 1] - axis[i]))
}

fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else if f == 1.0 {
        b
    } else {
        a + (b - a) * f
    }
}

/// Rounds to the six fractional digits the file format carries, so that
/// generated tables survive a save/load cycle unchanged.
fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Constants of the closed-form surrogate delay model.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateParams {
    /// Uncoupled stage delay at the nominal input transition time (ps).
    pub d0: f64,
    /// Nominal transition time (ps).
    pub tt0: f64,
    /// Saturated delay shift per unit of coupling level (ps).
    pub delta0: f64,
    /// Delay sensitivity to the input transition time.
    pub k_tt: f64,
    /// Relative output transition-time perturbation at saturation.
    pub rho: f64,
    /// Interaction window half-width (ps).
    pub window_w: f64,
    /// Points on each transition-time axis.
    pub tt_points: usize,
    /// Points on the arrival-difference axis; odd so that 0 is a grid point.
    pub delta_points: usize,
    /// Transition-time axis range (ps).
    pub tt_range: (f64, f64),
    /// Level of the diagonal shorting cells; `None` means `2 * c_max`.
    pub shorting_level: Option<i32>,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self {
            d0: 50.0,
            tt0: 40.0,
            delta0: 1.0,
            k_tt: 0.1,
            rho: 0.05,
            window_w: 75.0,
            tt_points: 8,
            delta_points: 17,
            tt_range: (20.0, 90.0),
            shorting_level: None,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self, c_max: i32) -> Result<(), TimingError> {
        let err = |m: String| Err(TimingError::Params(m));
        if c_max < 0 {
            return err(format!("c_max {c_max} is negative"));
        }
        if !(self.d0 > 0.0 && self.tt0 > 0.0 && self.delta0 >= 0.0 && self.window_w > 0.0) {
            return err("d0, tt0, window_w must be positive and delta0 nonnegative".into());
        }
        let shorting = self.shorting_level.unwrap_or(2 * c_max);
        let strongest = (2 * c_max).max(shorting);
        if self.delta0 * strongest as f64 >= self.d0 {
            return err(format!(
                "weak coupling violated: delta0 * {strongest} = {} ps is not below d0 = {} ps",
                self.delta0 * strongest as f64,
                self.d0
            ));
        }
        if self.tt_points < 2 || self.delta_points < 3 || self.delta_points.is_multiple_of(2) {
            return err("need >= 2 transition-time points and an odd count >= 3 of arrival points".into());
        }
        let (lo, hi) = self.tt_range;
        if !(lo > 0.0 && lo < hi && (lo..=hi).contains(&self.tt0)) {
            return err("transition-time range must be positive and contain tt0".into());
        }
        if self.rho < 0.0 || self.k_tt < 0.0 {
            return err("rho and k_tt must be nonnegative".into());
        }
        let d_low = self.d0 + self.k_tt * (lo - self.tt0) - self.delta0 * strongest as f64;
        if d_low <= 0.0 {
            return err(format!("surrogate delay {d_low} ps is not positive at the axis end"));
        }
        Ok(())
    }

    /// Uncoupled delay for input transition time `tt_in`.
    pub fn uncoupled_delay(&self, tt_in: f64) -> f64 {
        self.d0 + self.k_tt * (tt_in - self.tt0)
    }

    /// Coupled delay shift for level `k` and `delta_a = other - self`; the
    /// sign flips for opposite-polarity pairs.
    pub fn shift(&self, k: i32, pair: PolPair, delta_a: f64) -> f64 {
        let s = k as f64 * self.delta0 * (delta_a / self.window_w).clamp(-1.0, 1.0);
        if pair.same_polarity() {
            s
        } else {
            -s
        }
    }

    pub fn coupled_tt_out(&self, delta_a: f64) -> f64 {
        self.tt0 * (1.0 + self.rho * (delta_a / self.window_w).clamp(-1.0, 1.0).abs())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| quantize(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
    }
}

/// Generates a complete timing file from the surrogate model.
///
/// Coupling cells get four polarity-pair tables for every nonzero level in
/// `[-c_max, c_max]`; shorting cells get same-polarity tables at their
/// fixed level. With `c_max == 0` only the 1-D tables are emitted.
pub fn characterize_surrogate(p: &SurrogateParams, c_max: i32) -> Result<TimingFile, TimingError> {
    p.validate(c_max)?;
    // the window is written with table precision, so the axis must match it
    let p = &SurrogateParams { window_w: quantize(p.window_w), ..p.clone() };
    let tt_axis = SurrogateParams::axis(p.tt_range.0, p.tt_range.1, p.tt_points);
    let da_axis = SurrogateParams::axis(-p.window_w, p.window_w, p.delta_points);
    let shorting_level = p.shorting_level.unwrap_or(2 * c_max);

    let mut t1 = Vec::new();
    for kind in [CellKind::Enable, CellKind::Coupling, CellKind::Shorting] {
        for polarity in [Polarity::Rise, Polarity::Fall] {
            t1.push(Table1d {
                kind,
                polarity,
                tt_in: tt_axis.clone(),
                delay: tt_axis.iter().map(|&tt| quantize(p.uncoupled_delay(tt))).collect(),
                tt_out: vec![quantize(p.tt0); tt_axis.len()],
            });
        }
    }

    let table = |kind: CellKind, level: i32, pair: PolPair| {
        let mut delay = Vec::with_capacity(tt_axis.len() * tt_axis.len() * da_axis.len());
        let mut tt_out = Vec::with_capacity(delay.capacity());
        for &ts in &tt_axis {
            for _ in &tt_axis {
                for &da in &da_axis {
                    delay.push(quantize(p.uncoupled_delay(ts) + p.shift(level, pair, da)));
                    tt_out.push(quantize(p.coupled_tt_out(da)));
                }
            }
        }
        Table3d {
            kind,
            level,
            pair,
            tt_self: tt_axis.clone(),
            tt_other: tt_axis.clone(),
            delta_a: da_axis.clone(),
            delay,
            tt_out,
        }
    };

    let mut t3 = Vec::new();
    if c_max > 0 {
        for level in (-c_max..=c_max).filter(|&k| k != 0) {
            for pair in PolPair::ALL {
                t3.push(table(CellKind::Coupling, level, pair));
            }
        }
        if shorting_level != 0 {
            for pair in [PolPair::Rr, PolPair::Ff] {
                t3.push(table(CellKind::Shorting, shorting_level, pair));
            }
        }
    }

    TimingFile::from_tables(p.window_w, c_max, shorting_level, Nominal { d0: quantize(p.d0), tt0: quantize(p.tt0) }, t1, t3)
}
