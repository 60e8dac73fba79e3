//! Pass/fail reports for the design-parameter conditions of both loops.

use std::fmt;

/// One inequality `lhs < rhs` or `lhs > rhs` with its margin.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Distance to the boundary, positive when the condition holds.
    pub margin: f64,
    pub passed: bool,
}

impl ConditionCheck {
    pub fn less_than(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        Self { name: name.into(), lhs, rhs, margin, passed: margin > 0.0 }
    }

    pub fn greater_than(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let margin = lhs - rhs;
        Self { name: name.into(), lhs, rhs, margin, passed: margin > 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<28} lhs = {:<12.6} rhs = {:<12.6} margin = {:+.6}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.lhs,
                c.rhs,
                c.margin
            )?;
        }
        Ok(())
    }
}
