use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    ReportOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackKind {
    Absolute,
    /// Slack scaled by `max(1, |rhs|)`.
    Relative,
}

/// One checked (or merely reported) inequality `lhs <= rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationRecord {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub slack_kind: SlackKind,
    pub status: Status,
    pub chain: String,
    /// The inequality in words, e.g. `"kappa <= 3 rho"`.
    pub anchor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerificationRecord {
    /// Records `lhs <= rhs + slack` (absolute slack).
    pub fn check(id: impl Into<String>, anchor: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self::build(id, anchor, lhs, rhs, slack, SlackKind::Absolute)
    }

    /// Records `lhs <= rhs + slack max(1, |rhs|)`.
    pub fn check_rel(id: impl Into<String>, anchor: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> Self {
        Self::build(id, anchor, lhs, rhs, slack, SlackKind::Relative)
    }

    fn build(id: impl Into<String>, anchor: impl Into<String>, lhs: f64, rhs: f64, slack: f64, kind: SlackKind) -> Self {
        let allowance = match kind {
            SlackKind::Absolute => slack,
            SlackKind::Relative => slack * rhs.abs().max(1.0),
        };
        // NaN never passes; an infinite right side always does.
        let ok = rhs == f64::INFINITY || lhs <= rhs + allowance;
        Self {
            id: id.into(),
            lhs,
            rhs,
            slack,
            slack_kind: kind,
            status: if ok { Status::Pass } else { Status::Fail },
            chain: String::new(),
            anchor: anchor.into(),
            note: None,
        }
    }

    /// A measured quantity with no asserted bound (`rhs` is NaN).
    pub fn report(id: impl Into<String>, anchor: impl Into<String>, value: f64) -> Self {
        Self {
            id: id.into(),
            lhs: value,
            rhs: f64::NAN,
            slack: 0.0,
            slack_kind: SlackKind::Absolute,
            status: Status::ReportOnly,
            chain: String::new(),
            anchor: anchor.into(),
            note: None,
        }
    }

    pub fn on(mut self, chain: &str) -> Self {
        self.chain = chain.to_string();
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn statuses() {
        assert_eq!(VerificationRecord::check("a", "x", 1.0, 1.0, 0.0).status, Status::Pass);
        assert_eq!(VerificationRecord::check("a", "x", 1.1, 1.0, 0.05).status, Status::Fail);
        assert_eq!(VerificationRecord::check("a", "x", f64::NAN, 1.0, 0.05).status, Status::Fail);
        assert_eq!(VerificationRecord::check("a", "x", 5.0, f64::INFINITY, 0.0).status, Status::Pass);
        assert_eq!(VerificationRecord::check_rel("a", "x", 100.5, 100.0, 1e-2).status, Status::Pass);
        assert_eq!(VerificationRecord::report("a", "x", 3.0).status, Status::ReportOnly);
    }
}
