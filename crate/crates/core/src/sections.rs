//! Base sample sets, sections `f: Y → ℝ^κ`, and the closed-form graph
//! generators used to build them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, FiberBackend, Quotient};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BoundingBox {
    pub fn of(points: &[Vec<f64>]) -> Option<Self> {
        let first = points.first()?;
        let mut min = first.clone();
        let mut max = first.clone();
        for p in points {
            for (k, &c) in p.iter().enumerate() {
                min[k] = min[k].min(c);
                max[k] = max[k].max(c);
            }
        }
        Some(Self { min, max })
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.min.len()
            && p.iter().zip(self.min.iter().zip(&self.max)).all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    pub fn diameter(&self) -> f64 {
        crate::geometry::euclidean(&self.min, &self.max)
    }
}

/// The finite base sample `Y`: ordered, duplicate-free, bounded.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Vec<Vec<f64>>,
    bbox: BoundingBox,
}

impl SampleSet {
    /// Builds a sample set. Without an explicit box, the tight bounding box is used.
    pub fn new(points: Vec<Vec<f64>>, bbox: Option<BoundingBox>) -> Result<Self> {
        let Some(tight) = BoundingBox::of(&points) else {
            return Err(Error::InvalidSample("sample set is empty".into()));
        };
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Dimension { expected: dim, got: p.len() });
            }
            if let Some((index, &value)) = p.iter().enumerate().find(|(_, c)| !c.is_finite()) {
                return Err(Error::InvalidSample(format!(
                    "point {i} coordinate {index} is not finite ({value})"
                )));
            }
        }
        let mut keys: Vec<(Vec<u64>, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().map(|c| (c + 0.0).to_bits()).collect(), i))
            .collect();
        keys.sort();
        if let Some(w) = keys.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSample(format!(
                "points {} and {} coincide",
                w[0].1, w[1].1
            )));
        }
        let bbox = match bbox {
            Some(b) => {
                if b.min.len() != dim || b.max.len() != dim {
                    return Err(Error::InvalidSample("bounding box dimension mismatch".into()));
                }
                if let Some(i) = points.iter().position(|p| !b.contains(p)) {
                    return Err(Error::InvalidSample(format!(
                        "point {i} lies outside the declared bounding box"
                    )));
                }
                b
            }
            None => tight,
        };
        Ok(Self { points, bbox })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn bounding_box(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn base_distance(&self, a: usize, b: usize) -> f64 {
        crate::geometry::euclidean(&self.points[a], &self.points[b])
    }
}

/// Closed forms a graph section can be generated from. The tag is metadata:
/// sections are always tabulated on the sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Generator {
    ZeroGraph,
    /// `g(u) = slope·u₁ + intercept`
    AffineGraph { slope: f64, intercept: f64 },
    /// `g(u) = coefficient·|u|²`
    QuadraticGraph { coefficient: f64 },
    /// Piecewise-linear in `u₁` with `knots` equal pieces across the bounding box
    /// and increments drawn so every piece has slope in `[-lipschitz, lipschitz]`.
    RandomLipschitzGraph { lipschitz: f64, knots: usize, seed: u64 },
}

impl Generator {
    /// The scalar function on base coordinates described by this generator.
    pub fn function(&self, bbox: &BoundingBox) -> Box<dyn Fn(&[f64]) -> f64 + Send + Sync> {
        match *self {
            Generator::ZeroGraph => Box::new(|_| 0.0),
            Generator::AffineGraph { slope, intercept } => Box::new(move |u| slope * u[0] + intercept),
            Generator::QuadraticGraph { coefficient } => {
                Box::new(move |u| coefficient * u.iter().map(|c| c * c).sum::<f64>())
            }
            Generator::RandomLipschitzGraph { lipschitz, knots, seed } => {
                let pieces = knots.max(1);
                let lo = bbox.min[0];
                let hi = bbox.max[0];
                let width = if hi > lo { (hi - lo) / pieces as f64 } else { 1.0 };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut values = Vec::with_capacity(pieces + 1);
                values.push(0.0);
                for k in 0..pieces {
                    let slope: f64 = rng.random_range(-1.0..=1.0) * lipschitz;
                    values.push(values[k] + slope * width);
                }
                Box::new(move |u| {
                    let s = ((u[0] - lo) / width).clamp(0.0, pieces as f64);
                    let k = (s.floor() as usize).min(pieces - 1);
                    let frac = s - k as f64;
                    values[k] + frac * (values[k + 1] - values[k])
                })
            }
        }
    }
}

/// Tabulated section `y ↦ f(y)`, aligned with the sample order.
#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    values: Vec<AmbientPoint>,
    generator: Option<Generator>,
}

impl Section {
    pub fn new(values: Vec<AmbientPoint>, generator: Option<Generator>) -> Self {
        Self { values, generator }
    }

    pub fn values(&self) -> &[AmbientPoint] {
        &self.values
    }

    pub fn value(&self, y: usize) -> &AmbientPoint {
        &self.values[y]
    }

    pub fn generator(&self) -> Option<&Generator> {
        self.generator.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `f(y) = (y₁, …, y_m, g(y), 0, …, 0)` for the affine-graph backend.
pub fn graph_section<G>(quotient: &Quotient, g: G, generator: Option<Generator>) -> Result<Section>
where
    G: Fn(&[f64]) -> f64,
{
    let FiberBackend::AffineGraph { base_dim } = *quotient.backend() else {
        return Err(Error::UnsupportedBackend);
    };
    let values = quotient
        .sample()
        .points()
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let height = g(&y[..base_dim]);
            if !height.is_finite() {
                return Err(Error::InvalidSection(format!("generator is not finite at base point {i}")));
            }
            let mut coords = y.clone();
            coords[base_dim] = height;
            AmbientPoint::new(coords)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Section::new(values, generator))
}

/// Tabulates a generator on the sample set.
pub fn generate_section(quotient: &Quotient, generator: &Generator) -> Result<Section> {
    let g = generator.function(quotient.sample().bounding_box());
    graph_section(quotient, g, Some(generator.clone()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// `π(f(y))` differs from `y`.
    Projection { index: usize, projected: Option<Vec<f64>> },
    /// The section value is not a finite-backend ambient point.
    UnknownValue { index: usize },
    /// Section value outside the declared ambient bounding box.
    OutOfBounds { index: usize },
    Length { expected: usize, got: usize },
}

/// Lists every sample point at which `π ∘ f = id` fails. Empty means valid.
pub fn validate_section(quotient: &Quotient, section: &Section) -> Vec<Violation> {
    let n = quotient.sample().len();
    if section.len() != n {
        return vec![Violation::Length { expected: n, got: section.len() }];
    }
    let mut out = Vec::new();
    for (i, v) in section.values().iter().enumerate() {
        match quotient.project(v) {
            Ok(p) if p.as_slice() == quotient.sample().point(i) => {}
            Ok(p) => out.push(Violation::Projection { index: i, projected: Some(p) }),
            Err(Error::UnknownPoint) => out.push(Violation::UnknownValue { index: i }),
            Err(_) => out.push(Violation::Projection { index: i, projected: None }),
        }
    }
    out
}

/// `max_j f_j(y)`.
pub fn max_component(section: &Section, y: usize) -> f64 {
    section.value(y).coords().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `min_j f_j(y)`.
pub fn min_component(section: &Section, y: usize) -> f64 {
    section.value(y).coords().iter().copied().fold(f64::INFINITY, f64::min)
}

/// `Osc(f) = sup_y max_j f_j(y) − inf_y max_j f_j(y)`.
pub fn oscillation(section: &Section) -> f64 {
    let (lo, hi) = (0..section.len())
        .map(|y| max_component(section, y))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if section.is_empty() { 0.0 } else { hi - lo }
}
