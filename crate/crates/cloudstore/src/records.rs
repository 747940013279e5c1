//! Trace record schema and its canonical byte form.

use chrono::{DateTime, Utc};
use paperecg_core::analysis::AnalysisReport;
use paperecg_core::canonical::to_canonical_json;
use paperecg_core::extraction::CalibratedSignal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("record schema violation: {0}")]
    Schema(String),
}

/// A stored trace: signal, metadata, and the server-side analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub schema_version: u32,
    pub id: String,
    pub patient_ref: String,
    pub lead_label: String,
    pub created_at: DateTime<Utc>,
    pub signal: CalibratedSignal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image_ref: Option<String>,
}

impl TraceRecord {
    pub const SCHEMA_VERSION: u32 = 1;

    /// Canonical bytes: sorted keys, shortest float repr, single line.
    /// Semantically equal records serialize identically.
    pub fn to_canonical_json(&self) -> String {
        to_canonical_json(self).expect("trace record serializes to JSON")
    }

    pub fn from_json(data: &str) -> Result<Self, RecordError> {
        let record: TraceRecord =
            serde_json::from_str(data).map_err(|e| RecordError::Schema(e.to_string()))?;
        if record.schema_version != Self::SCHEMA_VERSION {
            return Err(RecordError::Schema(format!(
                "unsupported schema_version {}",
                record.schema_version
            )));
        }
        record
            .signal
            .validate()
            .map_err(|e| RecordError::Schema(e.to_string()))?;
        Ok(record)
    }
}

/// Upload body: a record before the server assigns id and timestamp.
/// `lead_label` defaults to the signal's own label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewTraceRecord {
    pub patient_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lead_label: Option<String>,
    pub signal: CalibratedSignal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image_ref: Option<String>,
}

/// Listing row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub id: String,
    pub patient_ref: String,
    pub lead_label: String,
    pub created_at: DateTime<Utc>,
    pub heart_rate_bpm: Option<f64>,
}
