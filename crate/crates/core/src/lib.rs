//! Intrinsic Hopf-Lax semigroup for sections of quotient maps, evaluated on
//! finite samples, with intrinsic Lipschitz constants and a harness that
//! checks the semigroup's quantitative properties cell by cell.

pub mod cli;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod harness;
pub mod hopflax;
pub mod lipschitz;
pub mod scenario;
pub mod scenario_file;
pub mod sections;

pub use error::{Error, Result};
pub use geometry::{AmbientPoint, FiberBackend, FiniteQuotient, Quotient};
pub use harness::{Harness, TheoremId, TheoremReport};
pub use hopflax::{Semigroup, SemigroupPoint, Side, SweepTable, TGrid};
pub use lipschitz::{RadiusSchedule, SlopeReport};
pub use scenario::Scenario;
pub use scenario_file::ScenarioFile;
pub use sections::{BoundingBox, Generator, SampleSet, Section};

/// Round-trippable fixed-width float formatting used by every CSV export.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}
