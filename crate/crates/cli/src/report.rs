use serde::Serialize;
use serde_json::Value;

use crate::config::Provenance;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Value,
    pub bound: Value,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: impl Serialize, bound: impl Serialize, pass: bool) -> Self {
        Check {
            name: name.into(),
            value: serde_json::to_value(value).unwrap_or(Value::Null),
            bound: serde_json::to_value(bound).unwrap_or(Value::Null),
            pass,
        }
    }

    /// `failures` out of `total` items, passing when none failed.
    pub fn tally(name: impl Into<String>, failures: usize, total: usize) -> Self {
        Check::new(name, serde_json::json!({ "failures": failures, "total": total }), 0, failures == 0)
    }
}

/// What a subcommand hands back to the driver.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub data: Value,
    pub csv: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    /// Every effective parameter, enough to rerun the experiment.
    pub config: Value,
    /// Keys supplied by a config file and whether a flag replaced them.
    #[serde(skip_serializing_if = "Provenance::is_empty")]
    pub provenance: Provenance,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub data: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_secs: Option<f64>,
}
