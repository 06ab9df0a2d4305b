//! On-disk scenario format and the generated scenario families.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AmbientPoint, FiberBackend, FiniteQuotient, Quotient};
use crate::harness::TheoremId;
use crate::hopflax::TGrid;
use crate::scenario::Scenario;
use crate::sections::{generate_section, BoundingBox, Generator, SampleSet, Section};

pub const SCHEMA_VERSION: u32 = 1;

/// Knots of the random piecewise-linear graphs.
const RANDOM_KNOTS: usize = 16;
/// Copies of each base site stacked along the fiber direction in finite partitions.
const FIBER_COPIES: usize = 3;
/// Vertical spacing of those copies. Larger than twice the diameter of the unit
/// square, so the nearest point of every fiber is the copy at the same level.
const FIBER_SPACING: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    AffineGraph { base_dim: usize },
    Finite { points: Vec<Vec<f64>>, assignment: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounding_box: Option<BoundingBox>,
}

/// Exactly one of `values` and `generator` must be present.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Generator>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// Either explicit `times` or a `t_min, t_max, count, spacing` range.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TGridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
}

impl TGridSpec {
    pub fn default_log() -> Self {
        Self {
            times: None,
            t_min: Some(1e-3),
            t_max: Some(10.0),
            count: Some(50),
            spacing: Some(Spacing::Log),
        }
    }

    pub fn build(&self) -> Result<TGrid> {
        let range = (self.t_min, self.t_max, self.count);
        match (&self.times, range) {
            (Some(times), (None, None, None)) if self.spacing.is_none() => TGrid::new(times.clone()),
            (None, (Some(lo), Some(hi), Some(count))) => match self.spacing.unwrap_or(Spacing::Log) {
                Spacing::Linear => TGrid::linear(lo, hi, count),
                Spacing::Log => TGrid::log(lo, hi, count),
            },
            _ => Err(Error::InvalidGrid(
                "tgrid needs either `times` or all of `t_min`, `t_max`, `count`".into(),
            )),
        }
    }
}

/// How a generated scenario was produced, so denser versions can be rebuilt.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Origin {
    pub family: Family,
    pub size: usize,
    pub seed: u64,
    pub params: FamilyParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub kappa: usize,
    pub fiber_backend: BackendSpec,
    pub sample: SampleSpec,
    pub section: SectionSpec,
    pub tgrid: TGridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Origin>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_injection: Option<TheoremId>,
}

impl ScenarioFile {
    /// Parses JSON. Syntax and field errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidScenario(format!("malformed scenario file: {e}")))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidScenario(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidScenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::InvalidScenario(msg) => Error::InvalidScenario(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Pretty JSON with a trailing newline; identical input gives identical bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario files always serialize");
        s.push('\n');
        s
    }

    pub fn scenario_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| "scenario".to_string())
    }

    pub fn tgrid(&self) -> Result<TGrid> {
        self.tgrid.build()
    }

    /// Validates and builds the in-memory scenario.
    pub fn to_scenario(&self) -> Result<Scenario> {
        let sample = SampleSet::new(self.sample.points.clone(), self.sample.bounding_box.clone())?;
        let backend = match &self.fiber_backend {
            BackendSpec::AffineGraph { base_dim } => FiberBackend::AffineGraph { base_dim: *base_dim },
            BackendSpec::Finite { points, assignment } => {
                let points = points
                    .iter()
                    .map(|p| AmbientPoint::new(p.clone()))
                    .collect::<Result<Vec<_>>>()?;
                FiberBackend::Finite(FiniteQuotient::new(points, assignment.clone(), sample.len())?)
            }
        };
        let quotient = Quotient::new(self.kappa, backend, sample)?;
        let section = match (&self.section.values, &self.section.generator) {
            (Some(values), None) => Section::new(
                values
                    .iter()
                    .map(|v| AmbientPoint::new(v.clone()))
                    .collect::<Result<Vec<_>>>()?,
                None,
            ),
            (None, Some(g)) => generate_section(&quotient, g)?,
            _ => {
                return Err(Error::InvalidSection(
                    "section needs exactly one of `values` and `generator`".into(),
                ))
            }
        };
        Ok(Scenario::new(self.scenario_id(), quotient, section)?.with_fault(self.fault_injection))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    ZeroGraph,
    AffineGraph,
    QuadraticGraph,
    RandomLipschitzGraph,
    FinitePartition,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::ZeroGraph,
        Family::AffineGraph,
        Family::QuadraticGraph,
        Family::RandomLipschitzGraph,
        Family::FinitePartition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::ZeroGraph => "zero_graph",
            Family::AffineGraph => "affine_graph",
            Family::QuadraticGraph => "quadratic_graph",
            Family::RandomLipschitzGraph => "random_lipschitz_graph",
            Family::FinitePartition => "finite_partition",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown family `{s}`")))
    }
}

/// Shape parameters; each family reads only its own.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyParams {
    /// Slope of the affine graph.
    pub slope: f64,
    /// Coefficient of the quadratic graph.
    pub coefficient: f64,
    /// Lipschitz bound of the random graph.
    pub lipschitz: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        Self { slope: 2.0, coefficient: 1.0, lipschitz: 1.0 }
    }
}

/// Builds a scenario file for `(family, size, seed)`.
///
/// Graph families sample `u_i = i/size`, `i = 1..=size`, on the segment
/// `[0, 1] × {0}`, so a sample is contained in every sample whose size is a
/// multiple of its own. Finite partitions place `size` base sites uniformly in
/// the unit square; the fiber over a site is that site stacked
/// `FIBER_COPIES` times along the second axis, and the section picks one copy
/// at random.
pub fn generate(family: Family, size: usize, seed: u64, params: FamilyParams) -> Result<ScenarioFile> {
    if size == 0 {
        return Err(Error::InvalidSample("size must be positive".into()));
    }
    let id = match family {
        Family::AffineGraph => format!("{}_a{}_{size}_s{seed}", family.name(), params.slope),
        Family::RandomLipschitzGraph => format!("{}_l{}_{size}_s{seed}", family.name(), params.lipschitz),
        Family::QuadraticGraph => format!("{}_c{}_{size}_s{seed}", family.name(), params.coefficient),
        _ => format!("{}_{size}_s{seed}", family.name()),
    };
    let origin = Some(Origin { family, size, seed, params });
    if family == Family::FinitePartition {
        return Ok(finite_partition(id, size, seed, origin));
    }
    let generator = match family {
        Family::ZeroGraph => Generator::ZeroGraph,
        Family::AffineGraph => Generator::AffineGraph { slope: params.slope, intercept: 0.0 },
        Family::QuadraticGraph => Generator::QuadraticGraph { coefficient: params.coefficient },
        Family::RandomLipschitzGraph => Generator::RandomLipschitzGraph {
            lipschitz: params.lipschitz,
            knots: RANDOM_KNOTS,
            seed,
        },
        Family::FinitePartition => unreachable!(),
    };
    Ok(ScenarioFile {
        schema_version: SCHEMA_VERSION,
        id: Some(id),
        kappa: 2,
        fiber_backend: BackendSpec::AffineGraph { base_dim: 1 },
        sample: SampleSpec {
            points: (1..=size).map(|i| vec![i as f64 / size as f64, 0.0]).collect(),
            bounding_box: Some(BoundingBox { min: vec![0.0, 0.0], max: vec![1.0, 0.0] }),
        },
        section: SectionSpec { values: None, generator: Some(generator) },
        tgrid: TGridSpec::default_log(),
        origin,
        fault_injection: None,
    })
}

fn finite_partition(id: String, size: usize, seed: u64, origin: Option<Origin>) -> ScenarioFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites: Vec<Vec<f64>> = Vec::with_capacity(size);
    while sites.len() < size {
        let p = vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        if !sites.contains(&p) {
            sites.push(p);
        }
    }
    let mut points = Vec::with_capacity(size * FIBER_COPIES);
    let mut assignment = Vec::with_capacity(size * FIBER_COPIES);
    let mut values = Vec::with_capacity(size);
    for (y, site) in sites.iter().enumerate() {
        let chosen = rng.random_range(0..FIBER_COPIES);
        for k in 0..FIBER_COPIES {
            let p = vec![site[0], site[1] + k as f64 * FIBER_SPACING];
            if k == chosen {
                values.push(p.clone());
            }
            points.push(p);
            assignment.push(y);
        }
    }
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        id: Some(id),
        kappa: 2,
        fiber_backend: BackendSpec::Finite { points, assignment },
        sample: SampleSpec {
            points: sites,
            bounding_box: Some(BoundingBox { min: vec![0.0, 0.0], max: vec![1.0, 1.0] }),
        },
        section: SectionSpec { values: Some(values), generator: None },
        tgrid: TGridSpec::default_log(),
        origin,
        fault_injection: None,
    }
}

/// The same family at `factor` times the size, with the same seed.
pub fn refine(file: &ScenarioFile, factor: usize) -> Result<ScenarioFile> {
    let origin = file.origin.as_ref().ok_or_else(|| {
        Error::InvalidScenario("refinement needs a generated scenario (missing `origin`)".into())
    })?;
    if origin.family == Family::FinitePartition {
        return Err(Error::InvalidScenario("finite partitions have no nested refinement".into()));
    }
    let mut out = generate(origin.family, origin.size * factor, origin.seed, origin.params)?;
    out.tgrid = file.tgrid.clone();
    Ok(out)
}

/// The scenario families every shipped check runs on.
pub fn shipped() -> Vec<ScenarioFile> {
    let p = FamilyParams::default();
    let mut out = vec![generate(Family::ZeroGraph, 200, 0, p)];
    for slope in [0.5, 1.0, 2.0] {
        out.push(generate(Family::AffineGraph, 200, 0, FamilyParams { slope, ..p }));
    }
    out.push(generate(Family::QuadraticGraph, 200, 0, p));
    for lipschitz in [1.0, 5.0] {
        for size in [50, 200, 1000] {
            out.push(generate(Family::RandomLipschitzGraph, size, 1, FamilyParams { lipschitz, ..p }));
        }
    }
    for size in [30, 100] {
        out.push(generate(Family::FinitePartition, size, 3, p));
    }
    out.into_iter().map(|f| f.expect("shipped families are valid")).collect()
}

/// Two-point scenario `f(0) = (0, 0)`, `f(1) = (1, 2)` on an explicit grid.
pub fn two_point(times: Vec<f64>) -> ScenarioFile {
    ScenarioFile {
        schema_version: SCHEMA_VERSION,
        id: Some("two_point".into()),
        kappa: 2,
        fiber_backend: BackendSpec::AffineGraph { base_dim: 1 },
        sample: SampleSpec { points: vec![vec![0.0, 0.0], vec![1.0, 0.0]], bounding_box: None },
        section: SectionSpec { values: Some(vec![vec![0.0, 0.0], vec![1.0, 2.0]]), generator: None },
        tgrid: TGridSpec { times: Some(times), ..Default::default() },
        origin: None,
        fault_injection: None,
    }
}
