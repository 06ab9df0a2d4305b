//! Small hand-built scenarios shared by tests, examples and the CLI.

use crate::geometry::{FiberBackend, Quotient};
use crate::scenario::Scenario;
use crate::sections::{graph_section, SampleSet};

/// Graph section over points `(u, 0)` of the plane, fibers are vertical lines.
pub fn graph_scenario<G: Fn(&[f64]) -> f64>(us: &[f64], g: G) -> Scenario {
    let sample = SampleSet::new(us.iter().map(|&u| vec![u, 0.0]).collect(), None).expect("valid sample");
    let quotient = Quotient::new(2, FiberBackend::AffineGraph { base_dim: 1 }, sample).expect("valid quotient");
    let section = graph_section(&quotient, g, None).expect("graph section");
    Scenario::new("graph", quotient, section).expect("valid scenario")
}

/// `Y = {0, 1} × {0}` with `f(0) = (0, 0)` and `f(1) = (1, 2)`.
///
/// At `y = 1`: `iQ_t f = min(2, 1/2t)`, frozen up to `t₀ = 1/4`.
pub fn two_point() -> Scenario {
    graph_scenario(&[0.0, 1.0], |u| 2.0 * u[0]).with_id("two_point")
}
