//! Named pass/fail/flagged checks with measured values, shared by the
//! verification routines and the CLI.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Outside the regime the check applies to; not a failure.
    Flagged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Flagged => "flagged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub subject: String,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(subject: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            checks: Vec::new(),
        }
    }

    /// Passes when `value <= tolerance`.
    pub fn at_most(&mut self, name: impl Into<String>, value: f64, tolerance: f64) -> &mut Self {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        self.push(name, status, value, tolerance)
    }

    /// Passes when `value > threshold`.
    pub fn above(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> &mut Self {
        let status = if value > threshold { Status::Pass } else { Status::Fail };
        self.push(name, status, value, threshold)
    }

    /// Passes when `value == 0` exactly.
    pub fn exact_zero(&mut self, name: impl Into<String>, value: f64) -> &mut Self {
        self.at_most(name, value.abs(), 0.0)
    }

    pub fn push(&mut self, name: impl Into<String>, status: Status, value: f64, tolerance: f64) -> &mut Self {
        self.checks.push(Check {
            name: name.into(),
            status,
            value,
            tolerance,
            note: None,
        });
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        if let Some(last) = self.checks.last_mut() {
            last.note = Some(note.into());
        }
        self
    }

    pub fn extend(&mut self, prefix: &str, other: Report) -> &mut Self {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }
}
