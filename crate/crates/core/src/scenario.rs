//! The immutable input object: quotient map, sample set and section, plus
//! the pairwise fiber-distance table every other module reads from.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{euclidean, Quotient};
use crate::harness::TheoremId;
use crate::sections::{max_component, validate_section, Section};

#[derive(Clone, Debug)]
pub struct Scenario {
    id: String,
    quotient: Quotient,
    section: Section,
    fault: Option<TheoremId>,
    // row y, column z: d(f(z), π⁻¹(y))
    fiber_dist: Vec<f64>,
    max_comp: Vec<f64>,
}

impl Scenario {
    pub fn new(id: impl Into<String>, quotient: Quotient, section: Section) -> Result<Self> {
        let violations = validate_section(&quotient, &section);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidSection(format!(
                "{} sample point(s) violate the section identity, first: {v:?}",
                violations.len()
            )));
        }
        let n = quotient.sample().len();
        let fiber_dist = (0..n)
            .into_par_iter()
            .map(|y| {
                (0..n)
                    .map(|z| quotient.fiber_distance(section.value(z), y))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        let max_comp = (0..n).map(|y| max_component(&section, y)).collect();
        Ok(Self {
            id: id.into(),
            quotient,
            section,
            fault: None,
            fiber_dist,
            max_comp,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Marks the scenario for fault injection targeting one harness check.
    pub fn with_fault(mut self, fault: Option<TheoremId>) -> Self {
        self.fault = fault;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }

    pub fn section(&self) -> &Section {
        &self.section
    }

    pub fn fault(&self) -> Option<TheoremId> {
        self.fault
    }

    pub fn len(&self) -> usize {
        self.max_comp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.max_comp.is_empty()
    }

    /// `d(f(from), π⁻¹(to))`, read from the precomputed table.
    #[inline]
    pub fn fiber_dist(&self, from: usize, to: usize) -> f64 {
        self.fiber_dist[to * self.len() + from]
    }

    /// Row of the table for base point `to`: entry `z` is `d(f(z), π⁻¹(to))`.
    #[inline]
    pub fn fiber_row(&self, to: usize) -> &[f64] {
        let n = self.len();
        &self.fiber_dist[to * n..(to + 1) * n]
    }

    #[inline]
    pub fn max_comp(&self, y: usize) -> f64 {
        self.max_comp[y]
    }

    pub fn max_comps(&self) -> &[f64] {
        &self.max_comp
    }

    /// `|f(a) − f(b)|` in the ambient space.
    pub fn section_dist(&self, a: usize, b: usize) -> f64 {
        euclidean(self.section.value(a).coords(), self.section.value(b).coords())
    }

    pub fn base_dist(&self, a: usize, b: usize) -> f64 {
        self.quotient.sample().base_distance(a, b)
    }

    pub fn check_index(&self, y: usize) -> Result<()> {
        if y >= self.len() {
            return Err(Error::IndexOutOfRange { index: y, len: self.len() });
        }
        Ok(())
    }
}
