//! The intrinsic Hopf-Lax semigroup on a finite sample.
//!
//! For a section `f` and base point `y`,
//!
//! ```text
//!     F(t, y, z) = max_j f_j(z) + d²(f(z), π⁻¹(y)) / 2t
//!     iQ_t f(y)  = min_z F(t, y, z)
//! ```
//!
//! The minimum is taken over the whole sample in index order, so it is always
//! attained. The near-minimizer set `{z : F(t, y, z) ≤ iQ_t f(y) + ε}` stands
//! in for minimizing sequences; with `ε = 0` its smallest and largest fiber
//! distances are `iD⁻f(y, t)` and `iD⁺f(y, t)`.
//!
//! As a function of `u = 1/2t`, each `F(·, y, z)` is a line with slope
//! `d²(f(z), π⁻¹(y))`, so `t ↦ iQ_t f(y)` is the lower envelope of finitely
//! many lines. [`Semigroup::switching_times`] computes its breakpoints exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::TheoremId;
use crate::lipschitz;
use crate::scenario::Scenario;
use crate::sections::oscillation;

/// Strictly increasing positive times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TGrid(Vec<f64>);

impl TGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("time grid is empty".into()));
        }
        if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidGrid(format!("time {t} is not positive and finite")));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be strictly increasing".into()));
        }
        Ok(Self(times))
    }

    pub fn linear(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        Self::spaced(t_min, t_max, count, |a, b, s| a + (b - a) * s)
    }

    /// Geometric spacing with both endpoints hit exactly.
    pub fn log(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0) {
            return Err(Error::InvalidGrid("log spacing needs t_min > 0".into()));
        }
        Self::spaced(t_min, t_max, count, |a, b, s| (a.ln() + (b.ln() - a.ln()) * s).exp())
    }

    fn spaced(t_min: f64, t_max: f64, count: usize, at: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        match count {
            0 => Err(Error::InvalidGrid("count must be positive".into())),
            1 => Self::new(vec![t_min]),
            _ => {
                let last = count - 1;
                let times = (0..count)
                    .map(|k| match k {
                        0 => t_min,
                        k if k == last => t_max,
                        k => at(t_min, t_max, k as f64 / last as f64),
                    })
                    .collect();
                Self::new(times)
            }
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn smallest(&self) -> f64 {
        self.0[0]
    }
}

/// One evaluation cell `(t, y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemigroupPoint {
    pub t: f64,
    pub y_index: usize,
    pub value: f64,
    pub argmin_eps: f64,
    pub argmin_indices: Vec<usize>,
    pub d_minus: f64,
    pub d_plus: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug)]
enum Corruption {
    None,
    // value(target) -= rate * t
    ValueDrift { target: usize, rate: f64 },
    // d_plus(target) += lift + 2 t slope
    DistanceInflate { target: usize, lift: f64, slope: f64 },
}

/// Evaluator for one scenario. Honors the scenario's fault-injection target,
/// if any, by corrupting its own output.
#[derive(Clone, Debug)]
pub struct Semigroup<'a> {
    s: &'a Scenario,
    corruption: Corruption,
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidTime(t))
    }
}

impl<'a> Semigroup<'a> {
    pub fn new(s: &'a Scenario) -> Self {
        let corruption = match s.fault() {
            None => Corruption::None,
            Some(fault) => {
                // the point with the largest max-component has a finite freeze time
                // whenever the section is not flat
                let target = (0..s.len())
                    .fold(0, |best, y| if s.max_comp(y) > s.max_comp(best) { y } else { best });
                let k = lipschitz::k_bound(s);
                match fault {
                    TheoremId::PDpmMono | TheoremId::P2tl | TheoremId::RAeEqual => Corruption::DistanceInflate {
                        target,
                        lift: k + 1.0,
                        slope: lipschitz::global_ils(s).unwrap_or(1.0),
                    },
                    _ => Corruption::ValueDrift {
                        target,
                        rate: 1e12 * (1.0 + oscillation(s.section()) + k * k),
                    },
                }
            }
        };
        Self { s, corruption }
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.s
    }

    /// `F(t, y, z) = max_j f_j(z) + d²(f(z), π⁻¹(y)) / 2t`.
    pub fn big_f(&self, t: f64, y: usize, z: usize) -> Result<f64> {
        check_time(t)?;
        self.s.check_index(y)?;
        self.s.check_index(z)?;
        Ok(objective(self.s.max_comp(z), self.s.fiber_dist(z, y), t))
    }

    /// `iQ_t f(y)` with its `ε`-near-minimizer statistics.
    pub fn iq(&self, t: f64, y: usize, eps: f64) -> Result<SemigroupPoint> {
        check_time(t)?;
        self.s.check_index(y)?;
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidScenario(format!("eps must be nonnegative, got {eps}")));
        }
        let mut cell = self.exact(t, y, eps);
        match self.corruption {
            Corruption::ValueDrift { target, rate } if target == y => cell.value -= rate * t,
            Corruption::DistanceInflate { target, lift, slope } if target == y => {
                cell.d_plus += lift + 2.0 * t * slope
            }
            _ => {}
        }
        Ok(cell)
    }

    fn exact(&self, t: f64, y: usize, eps: f64) -> SemigroupPoint {
        let h = self.s.max_comps();
        let d = self.s.fiber_row(y);
        let value = h
            .iter()
            .zip(d)
            .map(|(&hz, &dz)| objective(hz, dz, t))
            .fold(f64::INFINITY, f64::min);
        let cutoff = value + eps;
        let mut argmin = Vec::new();
        let (mut d_minus, mut d_plus) = (f64::INFINITY, f64::NEG_INFINITY);
        for (z, (&hz, &dz)) in h.iter().zip(d).enumerate() {
            if objective(hz, dz, t) <= cutoff {
                argmin.push(z);
                d_minus = d_minus.min(dz);
                d_plus = d_plus.max(dz);
            }
        }
        SemigroupPoint {
            t,
            y_index: y,
            value,
            argmin_eps: eps,
            argmin_indices: argmin,
            d_minus,
            d_plus,
        }
    }

    pub fn value(&self, t: f64, y: usize) -> Result<f64> {
        Ok(self.iq(t, y, 0.0)?.value)
    }

    /// Largest `t₀` with `iQ_t f(y) = max_j f_j(y)` for all `t ≤ t₀`; infinite
    /// when no sample point has a smaller max-component than `y`.
    pub fn freeze_time(&self, y: usize) -> Result<f64> {
        self.s.check_index(y)?;
        let hy = self.s.max_comp(y);
        let d = self.s.fiber_row(y);
        Ok(self
            .s
            .max_comps()
            .iter()
            .zip(d)
            .enumerate()
            .filter(|&(z, (&hz, _))| z != y && hz < hy)
            .map(|(_, (&hz, &dz))| dz * dz / (2.0 * (hy - hz)))
            .fold(f64::INFINITY, f64::min))
    }

    /// Supremum of times with `iQ_t f(y) > −∞`. Bounded sections on finite
    /// samples never reach `−∞`.
    pub fn t_star(&self, y: usize) -> Result<f64> {
        self.s.check_index(y)?;
        Ok(f64::INFINITY)
    }

    /// One-sided time derivative `−(iD^∓f(y,t))² / 2t²`.
    pub fn dt_formula(&self, t: f64, y: usize, side: Side) -> Result<f64> {
        let cell = self.iq(t, y, 0.0)?;
        Ok(formula_from(&cell, side))
    }

    pub fn dt_finite_difference(&self, t: f64, y: usize, h: f64, side: Side) -> Result<f64> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidTime(h));
        }
        match side {
            Side::Left => Ok((self.value(t, y)? - self.value(t - h, y)?) / h),
            Side::Right => Ok((self.value(t + h, y)? - self.value(t, y)?) / h),
        }
    }

    /// Every `(t, y)` cell, time-major. Output is independent of scheduling.
    pub fn sweep(&self, grid: &TGrid, eps: f64) -> Result<SweepTable> {
        let n = self.s.len();
        let cells = grid
            .times()
            .par_iter()
            .flat_map_iter(|&t| (0..n).map(move |y| (t, y)))
            .map(|(t, y)| {
                self.iq(t, y, eps).map_err(|e| Error::Cell { t, y, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SweepTable { times: grid.times().to_vec(), n, cells })
    }

    /// Exact breakpoints of `t ↦ iQ_t f(y)`, increasing. At each breakpoint the
    /// `ε = 0` argmin set holds lines of different slope.
    pub fn switching_times(&self, y: usize) -> Result<Vec<f64>> {
        self.s.check_index(y)?;
        let mut lines: Vec<(f64, f64)> = self
            .s
            .fiber_row(y)
            .iter()
            .zip(self.s.max_comps())
            .map(|(&d, &h)| (d * d, h))
            .collect();
        Ok(envelope_breakpoints(&mut lines)
            .into_iter()
            .map(|u| 1.0 / (2.0 * u))
            .rev()
            .collect())
    }

    /// Limits of `iD⁻(y, t − h)` and `iD⁺(y, t + h)` along `h = t·10⁻ᵏ`,
    /// `k = 3..=9`. Left-continuity of `iD⁻` and right-continuity of `iD⁺`
    /// mean the last entries equal `iD⁻(y, t)` and `iD⁺(y, t)`.
    pub fn one_sided_limits(&self, t: f64, y: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        check_time(t)?;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for k in 3..=9 {
            let h = t * 10f64.powi(-k);
            left.push(self.iq(t - h, y, 0.0)?.d_minus);
            right.push(self.iq(t + h, y, 0.0)?.d_plus);
        }
        Ok((left, right))
    }
}

#[inline]
fn objective(max_comp: f64, fiber_dist: f64, t: f64) -> f64 {
    max_comp + fiber_dist * fiber_dist / (2.0 * t)
}

pub(crate) fn formula_from(cell: &SemigroupPoint, side: Side) -> f64 {
    let d = match side {
        Side::Left => cell.d_minus,
        Side::Right => cell.d_plus,
    };
    -(d * d) / (2.0 * cell.t * cell.t)
}

/// Breakpoints `u > 0` of the lower envelope of the lines `b + a·u`, given as
/// `(a, b)` pairs, in increasing `u`.
fn envelope_breakpoints(lines: &mut Vec<(f64, f64)>) -> Vec<f64> {
    // decreasing slope; for equal slopes keep the lowest intercept
    lines.sort_by(|p, q| q.0.total_cmp(&p.0).then(p.1.total_cmp(&q.1)));
    lines.dedup_by(|later, kept| later.0 == kept.0);
    let cross = |p: (f64, f64), q: (f64, f64)| (q.1 - p.1) / (p.0 - q.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(lines.len());
    for &l in lines.iter() {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // b is never strictly below both a and l
            if cross(a, l) <= cross(a, b) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(l);
    }
    hull.windows(2)
        .map(|w| cross(w[0], w[1]))
        .filter(|&u| u > 0.0 && u.is_finite())
        .collect()
}

/// Row-complete sweep output.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    times: Vec<f64>,
    n: usize,
    cells: Vec<SemigroupPoint>,
}

impl SweepTable {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> usize {
        self.n
    }

    pub fn cells(&self) -> &[SemigroupPoint] {
        &self.cells
    }

    pub fn cell(&self, time_index: usize, y: usize) -> &SemigroupPoint {
        &self.cells[time_index * self.n + y]
    }

    pub fn row(&self, time_index: usize) -> &[SemigroupPoint] {
        &self.cells[time_index * self.n..(time_index + 1) * self.n]
    }

    /// Columns `t, y_index, value, d_minus, d_plus, argmin_size`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,y_index,value,d_minus,d_plus,argmin_size\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                crate::fmt_float(c.t),
                c.y_index,
                crate::fmt_float(c.value),
                crate::fmt_float(c.d_minus),
                crate::fmt_float(c.d_plus),
                c.argmin_indices.len()
            ));
        }
        out
    }
}

/// Largest `|iQ_t f(z) − iQ_t f(y)| / d(f(z), π⁻¹(y))` over ordered pairs at
/// one time. Reported only; no bound is known.
pub fn empirical_spatial_ratio(s: &Scenario, table: &SweepTable, time_index: usize) -> f64 {
    let row = table.row(time_index);
    (0..s.len())
        .into_par_iter()
        .map(|y| {
            (0..s.len())
                .filter(|&z| z != y)
                .map(|z| (row[z].value - row[y].value).abs() / s.fiber_dist(z, y))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}
