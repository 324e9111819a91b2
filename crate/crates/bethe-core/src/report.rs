//! Structured pass/fail records shared by every verification routine.

use serde::{Deserialize, Serialize};

/// Outcome of one verified identity or sub-check.
///
/// `id` is a stable, sortable label of the form `area/check[/indices]`; a
/// failing record carries enough context to reproduce the computation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub passed: bool,
    /// Largest residual magnitude observed, when the check is numeric;
    /// exact checks report 0 on success and the offending magnitude on
    /// failure when one is measurable.
    pub residual: Option<f64>,
    /// Indices and probe points the check ran over.
    pub context: String,
    /// Minimal reproduction data for failures.
    pub detail: Option<String>,
    pub time_ms: u64,
}

impl CheckRecord {
    pub fn pass(id: impl Into<String>, context: impl Into<String>) -> Self {
        CheckRecord {
            id: id.into(),
            passed: true,
            residual: Some(0.0),
            context: context.into(),
            detail: None,
            time_ms: 0,
        }
    }

    pub fn fail(
        id: impl Into<String>,
        context: impl Into<String>,
        detail: impl Into<String>,
    ) -> Self {
        CheckRecord {
            id: id.into(),
            passed: false,
            residual: None,
            context: context.into(),
            detail: Some(detail.into()),
            time_ms: 0,
        }
    }

    pub fn with_residual(mut self, r: f64) -> Self {
        self.residual = Some(r);
        self
    }
}

/// An ordered collection of check records with a deterministic layout.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
}

impl VerificationReport {
    pub fn new() -> Self {
        VerificationReport { checks: Vec::new() }
    }

    pub fn push(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    /// Sorts by id (then context) so emission is deterministic regardless of
    /// the execution order of parallel sub-checks.
    pub fn sort(&mut self) {
        self.checks
            .sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.context.cmp(&b.context)));
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self) -> (usize, usize) {
        let passed = self.checks.iter().filter(|c| c.passed).count();
        (passed, self.checks.len() - passed)
    }
}
