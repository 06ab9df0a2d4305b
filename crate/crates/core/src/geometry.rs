//! The quotient map `π: ℝ^κ → Y` and fiber distances `d(x, π⁻¹(y))`.
//!
//! Two fiber models are available. [`FiberBackend::AffineGraph`] keeps the
//! first `m` coordinates and zeroes the rest, so every fiber is an affine
//! subspace and the fiber distance has a closed form. [`FiberBackend::Finite`]
//! describes an arbitrary partition of a finite ambient point list; fiber
//! distances are then computed by enumeration.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::sections::SampleSet;

/// A point of the ambient space `ℝ^κ`. Coordinates are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct AmbientPoint(Vec<f64>);

impl AmbientPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn key(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

/// Euclidean distance, summed in coordinate order.
///
/// The summation order matters: the affine fiber distance sums the first
/// `m` squared differences in the same order, so `fiber_distance(f(y₁), y₂)`
/// never exceeds `euclidean(f(y₁), f(y₂))`, even in floating point.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_prefix(a, b, a.len()).sqrt()
}

fn squared_prefix(a: &[f64], b: &[f64], len: usize) -> f64 {
    a.iter()
        .zip(b)
        .take(len)
        .fold(0.0, |acc, (x, y)| {
            let d = x - y;
            acc + d * d
        })
}

/// Partition of a finite ambient point list into fibers.
#[derive(Clone, Debug)]
pub struct FiniteQuotient {
    points: Vec<AmbientPoint>,
    assignment: Vec<usize>,
    fibers: Vec<Vec<usize>>,
    lookup: HashMap<Vec<u64>, usize>,
}

impl FiniteQuotient {
    /// `assignment[j]` is the base index of `points[j]`. Every base index in
    /// `0..base_count` must receive at least one point.
    pub fn new(points: Vec<AmbientPoint>, assignment: Vec<usize>, base_count: usize) -> Result<Self> {
        if points.len() != assignment.len() {
            return Err(Error::InvalidScenario(format!(
                "finite backend has {} points but {} assignments",
                points.len(),
                assignment.len()
            )));
        }
        let mut fibers = vec![Vec::new(); base_count];
        let mut lookup = HashMap::with_capacity(points.len());
        for (j, (p, &b)) in points.iter().zip(&assignment).enumerate() {
            if b >= base_count {
                return Err(Error::IndexOutOfRange { index: b, len: base_count });
            }
            if lookup.insert(p.key(), j).is_some() {
                return Err(Error::InvalidScenario(format!(
                    "finite backend lists point {j} twice"
                )));
            }
            fibers[b].push(j);
        }
        if let Some(empty) = fibers.iter().position(Vec::is_empty) {
            return Err(Error::EmptyFiber(empty));
        }
        Ok(Self { points, assignment, fibers, lookup })
    }

    pub fn points(&self) -> &[AmbientPoint] {
        &self.points
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Indices into [`Self::points`] of the fiber over base index `y`.
    pub fn fiber(&self, y: usize) -> &[usize] {
        &self.fibers[y]
    }

    pub fn position(&self, x: &AmbientPoint) -> Option<usize> {
        self.lookup.get(&x.key()).copied()
    }
}

#[derive(Clone, Debug)]
pub enum FiberBackend {
    AffineGraph { base_dim: usize },
    Finite(FiniteQuotient),
}

/// The quotient map together with the base sample set it is surjective onto.
#[derive(Clone, Debug)]
pub struct Quotient {
    kappa: usize,
    backend: FiberBackend,
    sample: SampleSet,
}

impl Quotient {
    pub fn new(kappa: usize, backend: FiberBackend, sample: SampleSet) -> Result<Self> {
        if kappa < 2 {
            return Err(Error::InvalidScenario(format!("kappa must be at least 2, got {kappa}")));
        }
        if sample.dim() != kappa {
            return Err(Error::Dimension { expected: kappa, got: sample.dim() });
        }
        match &backend {
            FiberBackend::AffineGraph { base_dim } => {
                let m = *base_dim;
                if m == 0 || m >= kappa {
                    return Err(Error::InvalidScenario(format!(
                        "affine graph base dimension must satisfy 1 <= m < kappa, got m = {m}"
                    )));
                }
                for (i, p) in sample.points().iter().enumerate() {
                    if p[m..].iter().any(|&c| c != 0.0) {
                        return Err(Error::InvalidSample(format!(
                            "base point {i} has nonzero fiber coordinates; it is not in the image of the projection"
                        )));
                    }
                }
            }
            FiberBackend::Finite(q) => {
                if q.fibers.len() != sample.len() {
                    return Err(Error::InvalidScenario(format!(
                        "finite backend covers {} base points but the sample has {}",
                        q.fibers.len(),
                        sample.len()
                    )));
                }
                if let Some(p) = q.points.iter().find(|p| p.dim() != kappa) {
                    return Err(Error::Dimension { expected: kappa, got: p.dim() });
                }
            }
        }
        Ok(Self { kappa, backend, sample })
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn backend(&self) -> &FiberBackend {
        &self.backend
    }

    pub fn sample(&self) -> &SampleSet {
        &self.sample
    }

    fn check_dim(&self, x: &AmbientPoint) -> Result<()> {
        if x.dim() != self.kappa {
            return Err(Error::Dimension { expected: self.kappa, got: x.dim() });
        }
        Ok(())
    }

    /// Base-point coordinates of `π(x)`.
    pub fn project(&self, x: &AmbientPoint) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match &self.backend {
            FiberBackend::AffineGraph { base_dim } => {
                let mut out = x.coords().to_vec();
                out[*base_dim..].iter_mut().for_each(|c| *c = 0.0);
                Ok(out)
            }
            FiberBackend::Finite(q) => {
                let j = q.position(x).ok_or(Error::UnknownPoint)?;
                Ok(self.sample.point(q.assignment[j]).to_vec())
            }
        }
    }

    /// Base index of `π(x)` when it lies in the sample set.
    pub fn project_index(&self, x: &AmbientPoint) -> Result<Option<usize>> {
        match &self.backend {
            FiberBackend::Finite(q) => {
                self.check_dim(x)?;
                Ok(Some(q.assignment[q.position(x).ok_or(Error::UnknownPoint)?]))
            }
            FiberBackend::AffineGraph { .. } => {
                let coords = self.project(x)?;
                Ok(self.sample.points().iter().position(|p| p == &coords))
            }
        }
    }

    /// `d(x, π⁻¹(y))` for the base point with index `y`.
    pub fn fiber_distance(&self, x: &AmbientPoint, y: usize) -> Result<f64> {
        self.check_dim(x)?;
        if y >= self.sample.len() {
            return Err(Error::IndexOutOfRange { index: y, len: self.sample.len() });
        }
        match &self.backend {
            FiberBackend::AffineGraph { base_dim } => {
                Ok(squared_prefix(x.coords(), self.sample.point(y), *base_dim).sqrt())
            }
            FiberBackend::Finite(q) => q.fibers[y]
                .iter()
                .map(|&j| euclidean(x.coords(), q.points[j].coords()))
                .reduce(f64::min)
                .ok_or(Error::EmptyFiber(y)),
        }
    }
}
