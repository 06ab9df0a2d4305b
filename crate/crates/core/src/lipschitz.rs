//! Intrinsic Lipschitz constants of a section.
//!
//! All three quantities are suprema of the pairwise ratio
//!
//! ```text
//!     ratio(y₁, y₂) = d(f(y₁), f(y₂)) / d(f(y₁), π⁻¹(y₂))
//! ```
//!
//! over different pair sets: every ordered pair (`ILS`), pairs `(y, z)` with
//! `y` near `z` (`Ils(z)`), and pairs with both points near `z` (`Ils_a(z)`).
//! On a finite sample, "near" means inside the smallest ball of a decreasing
//! radius schedule that still contains another sample point.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::sections::BoundingBox;

/// Strictly decreasing positive radii.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadiusSchedule(Vec<f64>);

impl RadiusSchedule {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::InvalidScenario("radius schedule is empty".into()));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidScenario("radii must be positive and finite".into()));
        }
        if radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidScenario("radii must be strictly decreasing".into()));
        }
        Ok(Self(radii))
    }

    /// Five radii starting at the bounding-box diameter, each a quarter of the previous.
    pub fn default_for(bbox: &BoundingBox) -> Self {
        let diameter = bbox.diameter();
        let start = if diameter > 0.0 { diameter } else { 1.0 };
        Self((0..5).map(|k| start * 0.25f64.powi(k)).collect())
    }

    pub fn radii(&self) -> &[f64] {
        &self.0
    }
}

/// `d(f(y₁), f(y₂)) / d(f(y₁), π⁻¹(y₂))`. Infinite when the denominator vanishes.
#[inline]
pub fn pair_ratio(s: &Scenario, y1: usize, y2: usize) -> f64 {
    s.section_dist(y1, y2) / s.fiber_dist(y1, y2)
}

/// Smallest scheduled radius whose punctured ball around `z` holds a sample point.
pub fn capture_radius(s: &Scenario, z: usize, schedule: &RadiusSchedule) -> Option<f64> {
    let nearest = (0..s.len())
        .filter(|&y| y != z)
        .map(|y| s.base_dist(y, z))
        .fold(f64::INFINITY, f64::min);
    schedule.radii().iter().rev().copied().find(|&r| nearest <= r)
}

/// Sample points other than `z` within `radius` of `z`, in index order.
pub fn ball(s: &Scenario, z: usize, radius: f64) -> Vec<usize> {
    (0..s.len())
        .filter(|&y| y != z && s.base_dist(y, z) <= radius)
        .collect()
}

/// `ILS(f)`: exact supremum of the pairwise ratio over ordered pairs `y₁ ≠ y₂`.
pub fn global_ils(s: &Scenario) -> Result<f64> {
    let n = s.len();
    if n < 2 {
        return Err(Error::InvalidSample(
            "global intrinsic Lipschitz constant needs at least two sample points".into(),
        ));
    }
    (0..n)
        .into_par_iter()
        .map(|y1| {
            let mut best = f64::NEG_INFINITY;
            for y2 in (0..n).filter(|&y2| y2 != y1) {
                if s.fiber_dist(y1, y2) == 0.0 {
                    return Err(Error::DegenerateFibers { from: y1, to: y2 });
                }
                best = best.max(pair_ratio(s, y1, y2));
            }
            Ok(best)
        })
        .try_reduce(|| f64::NEG_INFINITY, |a, b| Ok(a.max(b)))
}

/// `Ils(f)(z)`, the intrinsic slope. Zero at points with no neighbor in any scheduled ball.
pub fn intrinsic_slope(s: &Scenario, z: usize, schedule: &RadiusSchedule) -> f64 {
    match capture_radius(s, z, schedule) {
        Some(r) => slope_in_ball(s, z, r),
        None => 0.0,
    }
}

/// Supremum of `ratio(y, z)` over the punctured ball of radius `r` around `z`.
pub fn slope_in_ball(s: &Scenario, z: usize, r: f64) -> f64 {
    ball(s, z, r)
        .into_iter()
        .map(|y| pair_ratio(s, y, z))
        .fold(0.0, f64::max)
}

/// `Ils_a(f)(z)`: like [`intrinsic_slope`] but over ordered pairs with both
/// points in the (closed) ball, `z` included.
pub fn asymptotic_slope(s: &Scenario, z: usize, schedule: &RadiusSchedule) -> f64 {
    let Some(r) = capture_radius(s, z, schedule) else {
        return 0.0;
    };
    let mut pts = ball(s, z, r);
    pts.push(z);
    let mut best = 0.0f64;
    for &a in &pts {
        for &b in &pts {
            if a != b {
                best = best.max(pair_ratio(s, a, b));
            }
        }
    }
    best
}

/// `K = sup d(f(y₁), π⁻¹(y₂))` over all ordered pairs; zero for a single point.
pub fn k_bound(s: &Scenario) -> f64 {
    (0..s.len())
        .into_par_iter()
        .map(|y| s.fiber_row(y).iter().copied().fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeReport {
    pub scenario_id: String,
    /// `ILS(f)`; 1 by convention when the sample has a single point.
    pub ils_global: f64,
    pub slope: Vec<f64>,
    pub slope_asymptotic: Vec<f64>,
    /// Radius actually used at each point, `None` for isolated points.
    pub radius_used: Vec<Option<f64>>,
    pub k_bound: f64,
    pub radius_schedule: Vec<f64>,
}

impl SlopeReport {
    pub fn compute(s: &Scenario, schedule: &RadiusSchedule) -> Result<Self> {
        let ils_global = if s.len() < 2 { 1.0 } else { global_ils(s)? };
        let per_point: Vec<(f64, f64, Option<f64>)> = (0..s.len())
            .into_par_iter()
            .map(|z| {
                (
                    intrinsic_slope(s, z, schedule),
                    asymptotic_slope(s, z, schedule),
                    capture_radius(s, z, schedule),
                )
            })
            .collect();
        Ok(Self {
            scenario_id: s.id().to_string(),
            ils_global,
            slope: per_point.iter().map(|p| p.0).collect(),
            slope_asymptotic: per_point.iter().map(|p| p.1).collect(),
            radius_used: per_point.iter().map(|p| p.2).collect(),
            k_bound: k_bound(s),
            radius_schedule: schedule.radii().to_vec(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,slope,slope_asymptotic,radius\n");
        for (i, (a, b)) in self.slope.iter().zip(&self.slope_asymptotic).enumerate() {
            let r = self.radius_used[i].map(crate::fmt_float).unwrap_or_default();
            out.push_str(&format!("{i},{},{},{r}\n", crate::fmt_float(*a), crate::fmt_float(*b)));
        }
        out
    }
}
