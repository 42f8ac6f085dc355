//! Structured diagnostics records serialized to JSON.

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub op: String,
    pub params: Value,
    pub residuals: Value,
    /// None for report-only records
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub records: Vec<ReportRecord>,
}

impl DiagnosticsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, op: &str, params: impl Serialize, residuals: impl Serialize, pass: Option<bool>) -> &mut ReportRecord {
        self.records.push(ReportRecord {
            op: op.to_string(),
            params: serde_json::to_value(params).unwrap_or(Value::Null),
            residuals: serde_json::to_value(residuals).unwrap_or(Value::Null),
            pass,
            notes: vec![],
        });
        self.records.last_mut().unwrap()
    }

    /// False if any gated record failed.
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass != Some(false))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values are plain JSON")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_and_gates() {
        let mut r = DiagnosticsReport::new();
        r.push("box_dimension", json!({"n": 4}), json!({"slope": 1.0}), Some(true));
        r.push("asymmetry", json!({}), json!({"index": 0.1}), None).notes.push("report only".into());
        assert!(r.all_pass());
        let back: DiagnosticsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        r.push("isolated_points", json!({}), json!([3]), Some(false));
        assert!(!r.all_pass());
    }
}
