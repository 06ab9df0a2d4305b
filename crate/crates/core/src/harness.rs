//! Machine checks of the semigroup's quantitative properties.
//!
//! Each check produces one [`TheoremReport`]. Margins are signed slacks,
//! positive when the inequality holds, and a check passes when its worst
//! margin is at least `-tolerance`. Exact statements use tolerance 0;
//! statements that go through floating-point algebra use relative
//! tolerances; finite-difference and surrogate checks use looser ones.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FiberBackend;
use crate::hopflax::{formula_from, Semigroup, Side, SweepTable, TGrid};
use crate::lipschitz::{self, RadiusSchedule};
use crate::scenario::Scenario;
use crate::sections::{min_component, oscillation};

/// Relative step of the derivative finite differences.
pub const FD_STEP: f64 = 1e-6;
/// Guard band around switching times, in units of the finite-difference step.
pub const GUARD_STEPS: f64 = 10.0;
pub const FD_TOLERANCE: f64 = 1e-3;
pub const ALGEBRAIC_TOLERANCE: f64 = 1e-12;
pub const PAIR_SLOPE_TOLERANCE: f64 = 1e-9;
pub const HJ_TOLERANCE: f64 = 1e-6;
pub const DUALITY_TOLERANCE: f64 = 1e-9;

const MAX_DETAILS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "P_BOUNDS")]
    PBounds,
    #[serde(rename = "P_T0")]
    PT0,
    #[serde(rename = "P_TLIP")]
    PTlip,
    #[serde(rename = "P_DPM_MONO")]
    PDpmMono,
    #[serde(rename = "P_DERIV")]
    PDeriv,
    #[serde(rename = "P_2TL")]
    P2tl,
    #[serde(rename = "P_PAIR_SLOPE")]
    PPairSlope,
    #[serde(rename = "C_HJ")]
    CHj,
    #[serde(rename = "T_DUALITY")]
    TDuality,
    #[serde(rename = "R_GLOBAL_LIP")]
    RGlobalLip,
    #[serde(rename = "R_AE_EQUAL")]
    RAeEqual,
    #[serde(rename = "O_CLASSICAL")]
    OClassical,
}

impl TheoremId {
    pub const ALL: [TheoremId; 12] = [
        TheoremId::PBounds,
        TheoremId::PT0,
        TheoremId::PTlip,
        TheoremId::PDpmMono,
        TheoremId::PDeriv,
        TheoremId::P2tl,
        TheoremId::PPairSlope,
        TheoremId::CHj,
        TheoremId::TDuality,
        TheoremId::RGlobalLip,
        TheoremId::RAeEqual,
        TheoremId::OClassical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::PBounds => "P_BOUNDS",
            TheoremId::PT0 => "P_T0",
            TheoremId::PTlip => "P_TLIP",
            TheoremId::PDpmMono => "P_DPM_MONO",
            TheoremId::PDeriv => "P_DERIV",
            TheoremId::P2tl => "P_2TL",
            TheoremId::PPairSlope => "P_PAIR_SLOPE",
            TheoremId::CHj => "C_HJ",
            TheoremId::TDuality => "T_DUALITY",
            TheoremId::RGlobalLip => "R_GLOBAL_LIP",
            TheoremId::RAeEqual => "R_AE_EQUAL",
            TheoremId::OClassical => "O_CLASSICAL",
        }
    }

    /// Surrogate checks report margins but never fail a verification run.
    pub fn is_hard(self) -> bool {
        !matches!(self, TheoremId::CHj)
    }

    pub fn parse_list(list: &str) -> Result<Vec<TheoremId>> {
        if list.trim() == "all" {
            return Ok(Self::ALL.to_vec());
        }
        let mut out: Vec<TheoremId> = list
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidScenario(format!("unknown check `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellViolation {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<usize>,
    pub margin: f64,
    pub note: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremReport {
    pub theorem_id: TheoremId,
    pub scenario_id: String,
    pub passed: bool,
    /// Whether a failure fails the verification run.
    pub hard: bool,
    pub applicable: bool,
    /// Most-violating slack; positive means satisfied, infinite when nothing was checked.
    pub worst_margin: f64,
    pub tolerance: f64,
    pub cells_checked: usize,
    pub violations: usize,
    pub details: Vec<CellViolation>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub extra: serde_json::Value,
}

/// Running minimum of margins for one check.
#[derive(Clone, Debug)]
struct Tally {
    tolerance: f64,
    worst: f64,
    checked: usize,
    violations: usize,
    details: Vec<CellViolation>,
}

impl Tally {
    fn new(tolerance: f64) -> Self {
        Self { tolerance, worst: f64::INFINITY, checked: 0, violations: 0, details: Vec::new() }
    }

    fn record(&mut self, margin: f64, at: impl FnOnce() -> CellViolation) {
        self.checked += 1;
        // NaN margins count as violations
        if margin < self.worst || margin.is_nan() {
            self.worst = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        }
        if !(margin >= -self.tolerance) {
            self.violations += 1;
            if self.details.len() < MAX_DETAILS {
                let mut v = at();
                v.margin = margin;
                self.details.push(v);
            }
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.checked += other.checked;
        self.violations += other.violations;
        if other.worst < self.worst {
            self.worst = other.worst;
        }
        let room = MAX_DETAILS.saturating_sub(self.details.len());
        self.details.extend(other.details.into_iter().take(room));
        self
    }

    fn report(self, id: TheoremId, scenario: &str) -> TheoremReport {
        TheoremReport {
            theorem_id: id,
            scenario_id: scenario.to_string(),
            passed: self.violations == 0,
            hard: id.is_hard(),
            applicable: true,
            worst_margin: self.worst,
            tolerance: self.tolerance,
            cells_checked: self.checked,
            violations: self.violations,
            details: self.details,
            extra: serde_json::Value::Null,
        }
    }
}

fn at(t: f64, y: usize, note: &'static str) -> CellViolation {
    CellViolation { t: Some(t), y: Some(y), z: None, margin: 0.0, note }
}

fn at_pair(t: f64, y: usize, z: usize, note: &'static str) -> CellViolation {
    CellViolation { t: Some(t), y: Some(y), z: Some(z), margin: 0.0, note }
}

/// Checks for one scenario on one time grid. The sweep table and derived
/// constants are computed once and shared by every check.
pub struct Harness<'a> {
    s: &'a Scenario,
    sg: Semigroup<'a>,
    grid: TGrid,
    table: SweepTable,
    schedule: RadiusSchedule,
    osc: f64,
    k: f64,
    inf_min: f64,
    sup_max: f64,
    switching: OnceLock<Vec<Vec<f64>>>,
    slopes: OnceLock<Vec<f64>>,
}

impl<'a> Harness<'a> {
    pub fn new(s: &'a Scenario, grid: &TGrid) -> Result<Self> {
        let schedule = RadiusSchedule::default_for(s.quotient().sample().bounding_box());
        Self::with_schedule(s, grid, schedule)
    }

    pub fn with_schedule(s: &'a Scenario, grid: &TGrid, schedule: RadiusSchedule) -> Result<Self> {
        let sg = Semigroup::new(s);
        let table = sg.sweep(grid, 0.0)?;
        let n = s.len();
        Ok(Self {
            s,
            sg,
            grid: grid.clone(),
            table,
            schedule,
            osc: oscillation(s.section()),
            k: lipschitz::k_bound(s),
            inf_min: (0..n).map(|y| min_component(s.section(), y)).fold(f64::INFINITY, f64::min),
            sup_max: s.max_comps().iter().copied().fold(f64::NEG_INFINITY, f64::max),
            switching: OnceLock::new(),
            slopes: OnceLock::new(),
        })
    }

    pub fn table(&self) -> &SweepTable {
        &self.table
    }

    pub fn semigroup(&self) -> &Semigroup<'a> {
        &self.sg
    }

    pub fn schedule(&self) -> &RadiusSchedule {
        &self.schedule
    }

    fn times(&self) -> &[f64] {
        self.grid.times()
    }

    fn switching(&self) -> &[Vec<f64>] {
        self.switching.get_or_init(|| {
            (0..self.s.len())
                .into_par_iter()
                .map(|y| self.sg.switching_times(y).expect("index in range"))
                .collect()
        })
    }

    fn slopes(&self) -> &[f64] {
        self.slopes.get_or_init(|| {
            (0..self.s.len())
                .into_par_iter()
                .map(|y| lipschitz::intrinsic_slope(self.s, y, &self.schedule))
                .collect()
        })
    }

    /// Runs every check in `ids`, in the order given.
    pub fn run(&self, ids: &[TheoremId]) -> Vec<TheoremReport> {
        ids.iter().map(|&id| self.check(id)).collect()
    }

    pub fn check(&self, id: TheoremId) -> TheoremReport {
        match id {
            TheoremId::PBounds => self.check_bounds(),
            TheoremId::PT0 => self.check_t_to_0(),
            TheoremId::PTlip => self.check_time_lipschitz(self.grid.smallest()),
            TheoremId::PDpmMono => self.check_dpm_monotone(),
            TheoremId::PDeriv => self.check_derivative_formula(),
            TheoremId::P2tl => self.check_2tl(),
            TheoremId::PPairSlope => self.check_pair_slope(),
            TheoremId::CHj => self.check_hj_subsolution(),
            TheoremId::TDuality => self.check_duality(),
            TheoremId::RGlobalLip => self.check_global_lipschitz(),
            TheoremId::RAeEqual => self.check_ae_equal(),
            TheoremId::OClassical => self.classical_oracle(),
        }
    }

    /// Per-point tallies over all grid times, merged in point order.
    fn per_point<F>(&self, tolerance: f64, f: F) -> Tally
    where
        F: Fn(usize, &mut Tally) + Sync,
    {
        (0..self.s.len())
            .into_par_iter()
            .map(|y| {
                let mut t = Tally::new(tolerance);
                f(y, &mut t);
                t
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(Tally::new(tolerance), Tally::merge)
    }

    /// `inf min f_j ≤ iQ_t f(y) ≤ max_j f_j(y) ≤ sup max f_j`, and `0 ≤ iD⁻ ≤ iD⁺`.
    pub fn check_bounds(&self) -> TheoremReport {
        let tally = self.per_point(0.0, |y, tally| {
            let hy = self.s.max_comp(y);
            for (ti, &t) in self.times().iter().enumerate() {
                let c = self.table.cell(ti, y);
                tally.record(c.value - self.inf_min, || at(t, y, "value below inf min f_j"));
                tally.record(hy - c.value, || at(t, y, "value above max_j f_j(y)"));
                tally.record(self.sup_max - hy, || at(t, y, "max_j f_j(y) above sup"));
                tally.record(c.d_minus, || at(t, y, "negative d_minus"));
                tally.record(c.d_plus - c.d_minus, || at(t, y, "d_plus below d_minus"));
            }
        });
        tally.report(TheoremId::PBounds, self.s.id())
    }

    /// `iQ_t f(y) = max_j f_j(y)` at half the freeze time, or on the whole grid
    /// when the freeze time is infinite.
    pub fn check_t_to_0(&self) -> TheoremReport {
        let tally = self.per_point(0.0, |y, tally| {
            let hy = self.s.max_comp(y);
            let t0 = self.sg.freeze_time(y).expect("index in range");
            if t0.is_infinite() {
                for (ti, &t) in self.times().iter().enumerate() {
                    let v = self.table.cell(ti, y).value;
                    tally.record(-(v - hy).abs(), || at(t, y, "value differs from max_j f_j(y)"));
                }
            } else if t0 > 0.0 {
                let t = 0.5 * t0;
                let v = self.sg.value(t, y).expect("valid time");
                tally.record(-(v - hy).abs(), || at(t, y, "value differs from max_j f_j(y) below freeze time"));
            } else {
                tally.record(f64::NEG_INFINITY, || at(t0, y, "zero freeze time: overlapping fibers"));
            }
        });
        tally.report(TheoremId::PT0, self.s.id())
    }

    /// `|iQ_t f(y) − iQ_s f(y)| ≤ (s − t)/δ · Osc(f)` for grid times `δ ≤ t < s`.
    pub fn check_time_lipschitz(&self, delta: f64) -> TheoremReport {
        let times = self.times();
        let tally = self.per_point(ALGEBRAIC_TOLERANCE, |y, tally| {
            for i in 0..times.len() {
                if times[i] < delta {
                    continue;
                }
                let vi = self.table.cell(i, y).value;
                for j in i + 1..times.len() {
                    let vj = self.table.cell(j, y).value;
                    let diff = (vi - vj).abs();
                    let bound = (times[j] - times[i]) / delta * self.osc;
                    let scale = 1f64.max(vi.abs()).max(vj.abs()).max(bound);
                    tally.record((bound - diff) / scale, || at_pair(times[i], y, j, "time-Lipschitz bound exceeded"));
                }
            }
        });
        let mut r = tally.report(TheoremId::PTlip, self.s.id());
        r.extra = serde_json::json!({ "delta": delta, "oscillation": self.osc });
        r
    }

    /// `iD⁺f(y, t) ≤ iD⁻f(y, s)` for grid times `t < s`.
    pub fn check_dpm_monotone(&self) -> TheoremReport {
        let times = self.times();
        let tally = self.per_point(0.0, |y, tally| {
            let mut earlier = f64::NEG_INFINITY;
            for (j, &s) in times.iter().enumerate() {
                let c = self.table.cell(j, y);
                if j > 0 {
                    tally.record(c.d_minus - earlier, || at(s, y, "d_plus at an earlier time exceeds d_minus"));
                }
                earlier = earlier.max(c.d_plus);
            }
        });
        tally.report(TheoremId::PDpmMono, self.s.id())
    }

    /// One-sided finite differences against `−(iD∓)²/2t²` away from switching
    /// times, plus a soft second-difference semiconcavity probe.
    pub fn check_derivative_formula(&self) -> TheoremReport {
        let switching = self.switching();
        let times = self.times();
        let k2 = self.k * self.k;
        let results: Vec<(Tally, usize, usize)> = (0..self.s.len())
            .into_par_iter()
            .map(|y| {
                let mut tally = Tally::new(FD_TOLERANCE);
                let (mut skipped, mut soft) = (0usize, 0usize);
                for (ti, &t) in times.iter().enumerate() {
                    let h = FD_STEP * t;
                    let band = GUARD_STEPS * h;
                    if switching[y].iter().any(|&sw| (sw - t).abs() <= band) {
                        skipped += 1;
                        continue;
                    }
                    let c = self.table.cell(ti, y);
                    let before = self.sg.value(t - h, y).expect("valid time");
                    let after = self.sg.value(t + h, y).expect("valid time");
                    let left = (c.value - before) / h;
                    let right = (after - c.value) / h;
                    for (fd, side, note) in [
                        (left, Side::Left, "left difference disagrees with -(d_minus)^2/2t^2"),
                        (right, Side::Right, "right difference disagrees with -(d_plus)^2/2t^2"),
                    ] {
                        let formula = formula_from(c, side);
                        let err = (fd - formula).abs() / (1.0 + formula.abs());
                        tally.record(-err, || at(t, y, note));
                    }
                    // second derivative of each envelope piece is d²/t³ ≤ K²/(t − h)³
                    let second = before + after - 2.0 * c.value;
                    let bound = k2 / (t - h).powi(3) * h * h;
                    let noise = 8.0 * f64::EPSILON * (1.0 + c.value.abs());
                    if second > bound + noise {
                        soft += 1;
                    }
                }
                (tally, skipped, soft)
            })
            .collect();
        let skipped: usize = results.iter().map(|r| r.1).sum();
        let soft: usize = results.iter().map(|r| r.2).sum();
        if soft > 0 {
            log::warn!("{}: semiconcavity probe exceeded its bound at {soft} cell(s)", self.s.id());
        }
        let tally = results.into_iter().map(|r| r.0).fold(Tally::new(FD_TOLERANCE), Tally::merge);
        let mut r = tally.report(TheoremId::PDeriv, self.s.id());
        r.extra = serde_json::json!({
            "guard_skipped_cells": skipped,
            "semiconcavity_warnings": soft,
            "switching_times_total": switching.iter().map(Vec::len).sum::<usize>(),
        });
        r
    }

    /// `iD⁺f(y, t) ≤ 2tL` with `L = ILS(f)`, and `iD⁺f(y, t) ≤ K`.
    pub fn check_2tl(&self) -> TheoremReport {
        let lipschitz_const = if self.s.len() < 2 { Ok(1.0) } else { lipschitz::global_ils(self.s) };
        let l = match lipschitz_const {
            Ok(l) => l,
            Err(e) => {
                let mut r = Tally::new(0.0).report(TheoremId::P2tl, self.s.id());
                r.passed = false;
                r.worst_margin = f64::NEG_INFINITY;
                r.extra = serde_json::json!({ "error": e.to_string() });
                return r;
            }
        };
        let tally = self.per_point(0.0, |y, tally| {
            for (ti, &t) in self.times().iter().enumerate() {
                let c = self.table.cell(ti, y);
                tally.record(2.0 * t * l - c.d_plus, || at(t, y, "d_plus exceeds 2tL"));
                tally.record(self.k - c.d_plus, || at(t, y, "d_plus exceeds K"));
            }
        });
        let mut r = tally.report(TheoremId::P2tl, self.s.id());
        r.extra = serde_json::json!({ "ils_global": l, "k_bound": self.k });
        r
    }

    /// `iQ_t f(z) − iQ_t f(y) ≤ d (iD⁻f(y,t)/t + d/2t)` with `d = d(f(z), π⁻¹(y))`,
    /// for every ordered pair and grid time. The mirrored distance
    /// `d(f(y), π⁻¹(z))` is evaluated too and reported in `extra`.
    pub fn check_pair_slope(&self) -> TheoremReport {
        let times = self.times();
        let n = self.s.len();
        let results: Vec<(Tally, f64)> = (0..n)
            .into_par_iter()
            .map(|y| {
                let mut tally = Tally::new(PAIR_SLOPE_TOLERANCE);
                let mut mirrored = f64::INFINITY;
                for (ti, &t) in times.iter().enumerate() {
                    let row = self.table.row(ti);
                    let (vy, dm) = (row[y].value, row[y].d_minus);
                    for z in (0..n).filter(|&z| z != y) {
                        let lhs = row[z].value - vy;
                        let d = self.s.fiber_dist(z, y);
                        tally.record(d * (dm / t + d / (2.0 * t)) - lhs, || at_pair(t, y, z, "pairwise slope bound exceeded"));
                        let e = self.s.fiber_dist(y, z);
                        mirrored = mirrored.min(e * (dm / t + e / (2.0 * t)) - lhs);
                    }
                }
                (tally, mirrored)
            })
            .collect();
        let mirrored = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let tally = results.into_iter().map(|r| r.0).fold(Tally::new(PAIR_SLOPE_TOLERANCE), Tally::merge);
        let mut r = tally.report(TheoremId::PPairSlope, self.s.id());
        r.extra = serde_json::json!({ "mirrored_orientation_worst_margin": finite_or_null(mirrored) });
        r
    }

    /// Discrete Hamilton-Jacobi surrogate
    /// `−(iD⁺)²/2t² + ½·slope² ≤ tol·(1 + scale)`.
    ///
    /// The upper slope is taken in two orientations: ascending,
    /// `max_z (iQ(z) − iQ(y))⁺ / d(f(y), π⁻¹(z))`, and descending,
    /// `max_z (iQ(y) − iQ(z))⁺ / d(f(z), π⁻¹(y))`. Both are computed for every
    /// scheduled radius. The verdict uses the ascending orientation at the
    /// smallest radius that captures a neighbor of `y`.
    pub fn check_hj_subsolution(&self) -> TheoremReport {
        let radii = self.schedule.radii().to_vec();
        let nr = radii.len();
        let times = self.times();
        let n = self.s.len();
        let capture: Vec<Option<usize>> = (0..n)
            .map(|y| {
                lipschitz::capture_radius(self.s, y, &self.schedule)
                    .and_then(|r| radii.iter().position(|&x| x == r))
            })
            .collect();
        let normalized = |dt: f64, slope: f64| {
            let half = 0.5 * slope * slope;
            -(dt + half) / (1.0 + dt.abs() + half)
        };
        let results: Vec<(Tally, Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|y| {
                let mut tally = Tally::new(HJ_TOLERANCE);
                let mut worst_up = vec![f64::INFINITY; nr];
                let mut worst_down = vec![f64::INFINITY; nr];
                let dist: Vec<f64> = (0..n).map(|z| self.s.base_dist(y, z)).collect();
                for (ti, &t) in times.iter().enumerate() {
                    let row = self.table.row(ti);
                    let vy = row[y].value;
                    let dt = formula_from(&row[y], Side::Right);
                    let mut up = vec![0.0f64; nr];
                    let mut down = vec![0.0f64; nr];
                    for z in (0..n).filter(|&z| z != y) {
                        let a = (row[z].value - vy).max(0.0) / self.s.fiber_dist(y, z);
                        let b = (vy - row[z].value).max(0.0) / self.s.fiber_dist(z, y);
                        for k in 0..nr {
                            if dist[z] <= radii[k] {
                                up[k] = up[k].max(a);
                                down[k] = down[k].max(b);
                            }
                        }
                    }
                    for k in 0..nr {
                        worst_up[k] = worst_up[k].min(normalized(dt, up[k]));
                        worst_down[k] = worst_down[k].min(normalized(dt, down[k]));
                    }
                    let verdict = capture[y].map_or(0.0, |k| up[k]);
                    tally.record(normalized(dt, verdict), || at(t, y, "HJ surrogate positive at the capturing radius"));
                }
                (tally, worst_up, worst_down)
            })
            .collect();
        let mut up = vec![f64::INFINITY; nr];
        let mut down = vec![f64::INFINITY; nr];
        for (_, u, d) in &results {
            for k in 0..nr {
                up[k] = up[k].min(u[k]);
                down[k] = down[k].min(d[k]);
            }
        }
        let tally = results.into_iter().map(|r| r.0).fold(Tally::new(HJ_TOLERANCE), Tally::merge);
        let mut r = tally.report(TheoremId::CHj, self.s.id());
        r.extra = serde_json::json!({
            "surrogate": true,
            "radii": radii,
            "ascending_worst_margin_per_radius": up.iter().map(|&v| finite_or_null(v)).collect::<Vec<_>>(),
            "descending_worst_margin_per_radius": down.iter().map(|&v| finite_or_null(v)).collect::<Vec<_>>(),
        });
        r
    }

    /// Duality margin at `y` at the smallest grid time above its freeze time:
    /// `(Ils(f)(y)² − 2(max_j f_j(y) − iQ_t f(y))/t) / (1 + Ils²)`.
    /// `None` when the freeze time is infinite or above the grid.
    pub fn duality_margin(&self, y: usize) -> Option<(f64, f64)> {
        let t0 = self.sg.freeze_time(y).ok()?;
        let ti = self.times().iter().position(|&t| t > t0)?;
        let t = self.times()[ti];
        let lhs = 2.0 * (self.s.max_comp(y) - self.table.cell(ti, y).value) / t;
        let ils2 = self.slopes()[y].powi(2);
        Some((t, (ils2 - lhs) / (1.0 + ils2)))
    }

    /// `Ils(f)(y)² ≥ 2 (max_j f_j(y) − iQ_t f(y)) / t` at the first grid time past freeze.
    pub fn check_duality(&self) -> TheoremReport {
        let vacuous = std::sync::atomic::AtomicUsize::new(0);
        let tally = self.per_point(DUALITY_TOLERANCE, |y, tally| match self.duality_margin(y) {
            Some((t, m)) => tally.record(m, || at(t, y, "duality inequality violated")),
            None => {
                vacuous.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
        });
        let mut r = tally.report(TheoremId::TDuality, self.s.id());
        r.extra = serde_json::json!({ "vacuous_points": vacuous.into_inner() });
        r
    }

    /// For grid times `t < s`:
    /// `iD⁺(t)²/2 (1/t − 1/s) ≤ iQ_t − iQ_s ≤ iD⁻(s)²/2 (1/t − 1/s) ≤ K²(s − t)/2δ²`.
    pub fn check_global_lipschitz(&self) -> TheoremReport {
        let times = self.times();
        let delta = self.grid.smallest();
        let k2 = self.k * self.k;
        let tally = self.per_point(ALGEBRAIC_TOLERANCE, |y, tally| {
            for i in 0..times.len() {
                let ci = self.table.cell(i, y);
                for j in i + 1..times.len() {
                    let cj = self.table.cell(j, y);
                    let (t, s) = (times[i], times[j]);
                    let gap = 1.0 / t - 1.0 / s;
                    let drop = ci.value - cj.value;
                    let lower = 0.5 * ci.d_plus * ci.d_plus * gap;
                    let upper = 0.5 * cj.d_minus * cj.d_minus * gap;
                    let global = k2 * (s - t) / (2.0 * delta * delta);
                    let scale = 1f64.max(ci.value.abs()).max(cj.value.abs()).max(upper);
                    tally.record((drop - lower) / scale, || at_pair(t, y, j, "value drop below d_plus(t)^2 bracket"));
                    tally.record((upper - drop) / scale, || at_pair(t, y, j, "value drop above d_minus(s)^2 bracket"));
                    tally.record((global - drop) / scale, || at_pair(t, y, j, "global Lipschitz bound exceeded"));
                }
            }
        });
        let mut r = tally.report(TheoremId::RGlobalLip, self.s.id());
        r.extra = serde_json::json!({ "global_constant": k2 / (2.0 * delta * delta) });
        r
    }

    /// `iD⁻ = iD⁺` off a finite set: at most `n − 1` switching times per point,
    /// at most `n` grid cells per point with `iD⁻ ≠ iD⁺`, and each such cell
    /// sits on an exact switching time.
    pub fn check_ae_equal(&self) -> TheoremReport {
        let switching = self.switching();
        let n = self.s.len();
        let unequal_total = std::sync::atomic::AtomicUsize::new(0);
        let tally = self.per_point(0.0, |y, tally| {
            let sw = &switching[y];
            tally.record((n as f64 - 1.0) - sw.len() as f64, || CellViolation {
                t: None,
                y: Some(y),
                z: None,
                margin: 0.0,
                note: "more switching times than sample points",
            });
            let mut unequal = 0usize;
            for (ti, &t) in self.times().iter().enumerate() {
                let c = self.table.cell(ti, y);
                if c.d_minus != c.d_plus {
                    unequal += 1;
                    let on_switch = sw.iter().any(|&s| (s - t).abs() <= 1e-9 * t);
                    tally.record(if on_switch { 0.0 } else { -1.0 }, || at(t, y, "d_minus != d_plus away from a switching time"));
                }
            }
            tally.record(n as f64 - unequal as f64, || CellViolation {
                t: None,
                y: Some(y),
                z: None,
                margin: 0.0,
                note: "too many cells with d_minus != d_plus",
            });
            unequal_total.fetch_add(unequal, std::sync::atomic::Ordering::Relaxed);
        });
        let mut r = tally.report(TheoremId::RAeEqual, self.s.id());
        let unequal = unequal_total.into_inner();
        r.extra = serde_json::json!({
            "unequal_cells": unequal,
            "unequal_fraction": unequal as f64 / (n * self.times().len()) as f64,
        });
        r
    }

    /// Classical Hopf-Lax enumeration `min_z h(z) + |z − y|²/2t` over base
    /// coordinates, compared with the table. Affine-graph backend only.
    pub fn classical_oracle(&self) -> TheoremReport {
        let FiberBackend::AffineGraph { base_dim } = *self.s.quotient().backend() else {
            let mut r = Tally::new(ALGEBRAIC_TOLERANCE).report(TheoremId::OClassical, self.s.id());
            r.applicable = false;
            return r;
        };
        let points = self.s.quotient().sample().points();
        let heights: Vec<f64> = self
            .s
            .section()
            .values()
            .iter()
            .map(|v| v.coords().iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let tally = self.per_point(ALGEBRAIC_TOLERANCE, |y, tally| {
            for (ti, &t) in self.times().iter().enumerate() {
                let classical = points
                    .iter()
                    .zip(&heights)
                    .map(|(z, h)| {
                        let sq: f64 = (0..base_dim).map(|i| (z[i] - points[y][i]).powi(2)).sum();
                        h + sq / (2.0 * t)
                    })
                    .fold(f64::INFINITY, f64::min);
                let v = self.table.cell(ti, y).value;
                let rel = (classical - v).abs() / 1f64.max(v.abs());
                tally.record(-rel, || at(t, y, "classical enumeration disagrees"));
            }
        });
        tally.report(TheoremId::OClassical, self.s.id())
    }
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() { serde_json::json!(v) } else { serde_json::Value::Null }
}

/// Duality margins along a chain of nested samples, coarse to fine.
#[derive(Clone, Debug, Serialize)]
pub struct RefinementReport {
    pub scenario_ids: Vec<String>,
    pub sizes: Vec<usize>,
    /// Minimum over tested points of `Ils² + tol − 2(max f − iQ_t f)/t`, per level.
    pub min_margins: Vec<f64>,
    pub tested_points: usize,
    /// Points whose own margin increased from one level to the next.
    pub pointwise_increases: usize,
    pub nonnegative: bool,
    pub monotone: bool,
    pub passed: bool,
}

/// Tested points are the coarse-level points with a finite freeze time that
/// falls inside the grid. Each is evaluated at one fixed time, the first
/// coarse-level grid time past its freeze time, on every level. Levels must
/// be nested: every coarse point reappears, with identical coordinates, in
/// each finer sample.
pub fn duality_refinement(levels: &[Scenario], grid: &TGrid) -> Result<RefinementReport> {
    let Some(coarse) = levels.first() else {
        return Err(Error::InvalidScenario("refinement needs at least one level".into()));
    };
    let harnesses = levels
        .iter()
        .map(|s| Harness::new(s, grid))
        .collect::<Result<Vec<_>>>()?;
    let key = |p: &[f64]| p.iter().map(|c| c.to_bits()).collect::<Vec<_>>();
    let tested: Vec<(usize, f64)> = (0..coarse.len())
        .filter_map(|y| {
            let t0 = harnesses[0].sg.freeze_time(y).ok()?;
            let t = grid.times().iter().copied().find(|&t| t > t0)?;
            Some((y, t))
        })
        .collect();
    let mut margins = vec![vec![0.0; tested.len()]; levels.len()];
    for (lvl, (s, h)) in levels.iter().zip(&harnesses).enumerate() {
        let index: HashMap<Vec<u64>, usize> = s
            .quotient()
            .sample()
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| (key(p), i))
            .collect();
        for (k, &(y, t)) in tested.iter().enumerate() {
            let p = coarse.quotient().sample().point(y);
            let fy = *index.get(&key(p)).ok_or_else(|| {
                Error::InvalidScenario(format!("level {lvl} does not contain coarse point {y}"))
            })?;
            let lhs = 2.0 * (s.max_comp(fy) - h.sg.value(t, fy)?) / t;
            margins[lvl][k] = h.slopes()[fy].powi(2) + DUALITY_TOLERANCE - lhs;
        }
    }
    let min_margins: Vec<f64> = margins
        .iter()
        .map(|m| m.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let pointwise_increases = (1..levels.len())
        .map(|l| (0..tested.len()).filter(|&k| margins[l][k] > margins[l - 1][k]).count())
        .sum();
    let nonnegative = margins.iter().flatten().all(|&m| m >= 0.0);
    let monotone = min_margins.windows(2).all(|w| w[1] <= w[0]);
    Ok(RefinementReport {
        scenario_ids: levels.iter().map(|s| s.id().to_string()).collect(),
        sizes: levels.iter().map(Scenario::len).collect(),
        min_margins,
        tested_points: tested.len(),
        pointwise_increases,
        nonnegative,
        monotone,
        passed: nonnegative && monotone,
    })
}

/// One line per check: id, scenarios passed / total, worst margin.
pub fn summary_table(reports: &[TheoremReport]) -> String {
    let mut rows: Vec<(TheoremId, usize, usize, f64, bool)> = Vec::new();
    for r in reports {
        match rows.iter_mut().find(|row| row.0 == r.theorem_id) {
            Some(row) => {
                row.1 += r.passed as usize;
                row.2 += 1;
                row.3 = row.3.min(r.worst_margin);
            }
            None => rows.push((r.theorem_id, r.passed as usize, 1, r.worst_margin, r.hard)),
        }
    }
    rows.sort_by_key(|row| row.0);
    let mut out = format!("{:<14} {:>9} {:>24}  {}\n", "theorem", "passed", "worst_margin", "kind");
    for (id, passed, total, worst, hard) in rows {
        out.push_str(&format!(
            "{:<14} {:>9} {:>24}  {}\n",
            id.name(),
            format!("{passed}/{total}"),
            crate::fmt_float(worst),
            if hard { "hard" } else { "surrogate" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{graph_scenario, two_point};

    fn grid() -> TGrid {
        TGrid::log(1e-3, 10.0, 50).unwrap()
    }

    #[test]
    fn theorem_ids_round_trip_names() {
        for id in TheoremId::ALL {
            assert_eq!(id.name().parse::<TheoremId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{}\"", id.name()));
        }
        assert!("P_NOPE".parse::<TheoremId>().is_err());
        assert_eq!(TheoremId::parse_list("all").unwrap().len(), 12);
        assert_eq!(
            TheoremId::parse_list("P_2TL,P_BOUNDS").unwrap(),
            vec![TheoremId::PBounds, TheoremId::P2tl]
        );
    }

    #[test]
    fn two_point_passes_hard_checks() {
        let s = two_point();
        let h = Harness::new(&s, &TGrid::new(vec![0.1, 0.3, 1.0]).unwrap()).unwrap();
        for r in h.run(&TheoremId::ALL) {
            if r.theorem_id != TheoremId::CHj {
                assert!(r.passed, "{r:#?}");
            }
        }
    }

    #[test]
    fn duality_two_point_hand_values() {
        // at y = 1, t = 0.3 > t₀ = 0.25: 2(2 − 1/0.6)/0.3 ≈ 2.22 against Ils² = 5
        let s = two_point();
        let h = Harness::new(&s, &TGrid::new(vec![0.1, 0.3, 1.0]).unwrap()).unwrap();
        let (t, m) = h.duality_margin(1).unwrap();
        assert_eq!(t, 0.3);
        let lhs = 2.0 * (2.0 - 1.0 / 0.6) / 0.3;
        assert!((m - (5.0 - lhs) / 6.0).abs() < 1e-12);
        assert!(h.duality_margin(0).is_none());
    }

    #[test]
    fn zero_graph_frozen_and_dual() {
        let us: Vec<f64> = (1..=50).map(|i| i as f64 / 50.0).collect();
        let s = graph_scenario(&us, |_| 0.0);
        let h = Harness::new(&s, &grid()).unwrap();
        for id in [TheoremId::PBounds, TheoremId::PT0, TheoremId::TDuality, TheoremId::OClassical] {
            assert!(h.check(id).passed, "{id}");
        }
    }

    #[test]
    fn hj_surrogate_two_point_at_unit_time() {
        // at t = 1 the ascending slope at y = 0 is 0.5 with iD⁺ = 0
        let s = two_point();
        let h = Harness::new(&s, &TGrid::new(vec![1.0]).unwrap()).unwrap();
        let r = h.check_hj_subsolution();
        let down = &r.extra["descending_worst_margin_per_radius"];
        assert!(down[0].as_f64().unwrap() >= 0.0);
        assert!(!r.passed);
    }

    #[test]
    fn time_lipschitz_two_point_with_explicit_delta() {
        let s = two_point();
        let h = Harness::new(&s, &TGrid::new(vec![0.1, 0.2, 0.3, 0.5, 1.0, 2.0]).unwrap()).unwrap();
        let r = h.check_time_lipschitz(0.1);
        assert!(r.passed, "{r:#?}");
        assert_eq!(r.cells_checked, 2 * 15);
    }

    #[test]
    fn single_point_is_trivial() {
        let s = graph_scenario(&[0.5], |_| 1.0);
        let h = Harness::new(&s, &grid()).unwrap();
        for id in [TheoremId::PBounds, TheoremId::PT0, TheoremId::PDpmMono, TheoremId::P2tl, TheoremId::RAeEqual] {
            assert!(h.check(id).passed, "{id}");
        }
        assert!(h.table().cells().iter().all(|c| c.d_minus == 0.0 && c.d_plus == 0.0));
    }

    #[test]
    fn unchecked_report_serializes_infinite_margin_as_null() {
        let r = Tally::new(0.0).report(TheoremId::PBounds, "empty");
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["worst_margin"].is_null());
        assert_eq!(json["theorem_id"], "P_BOUNDS");
    }

    #[test]
    fn summary_lists_each_theorem_once() {
        let s = two_point();
        let h = Harness::new(&s, &TGrid::new(vec![0.1, 1.0]).unwrap()).unwrap();
        let reports = h.run(&TheoremId::ALL);
        let table = summary_table(&reports);
        assert_eq!(table.lines().count(), 13);
    }
}
