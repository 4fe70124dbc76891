//! Self-describing JSON envelope for command results.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TOOL: &str = "gbi";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One command invocation and its result.
///
/// `params` holds every option that influences the result, so a record can
/// be replayed from its own contents. The worker count is left out because
/// it never changes the output; wall time is only present when requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<u64>,
    pub result: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

impl RunRecord {
    pub fn new(command: &str, params: impl Serialize, result: impl Serialize) -> serde_json::Result<Self> {
        Ok(Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            params: serde_json::to_value(params)?,
            seed: None,
            points: None,
            result: serde_json::to_value(result)?,
            elapsed_seconds: None,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_points(mut self, points: u64) -> Self {
        self.points = Some(points);
        self
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
