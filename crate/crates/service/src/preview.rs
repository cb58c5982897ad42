//! Animation data for the browser: both paths resampled to 100 Hz.

use pawshake::handshake::HandshakeParams;
use pawshake::protocol::HandshakeRecord;
use pawshake::sim::HandshakeLog;
use serde::{Deserialize, Serialize};

pub const PREVIEW_RATE_HZ: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreviewSeries {
    pub rate_hz: f64,
    pub t: Vec<f64>,
    /// Leg-frame positions (m).
    pub desired: Vec<[f64; 3]>,
    pub actual: Vec<[f64; 3]>,
    /// Displacement along world up (m).
    pub desired_vertical: Vec<f64>,
    pub actual_vertical: Vec<f64>,
}

impl PreviewSeries {
    pub fn from_log(log: &HandshakeLog) -> Self {
        let step = ((1.0 / PREVIEW_RATE_HZ) / log.dt).round().max(1.0) as usize;
        let pick = |v: &[f64]| v.iter().step_by(step).copied().collect::<Vec<_>>();
        Self {
            rate_hz: 1.0 / (step as f64 * log.dt),
            t: (0..log.len()).step_by(step).map(|k| log.time(k)).collect(),
            desired: log.desired_path.iter().step_by(step).map(|p| [p.x, p.y, p.z]).collect(),
            actual: log.actual_path.iter().step_by(step).map(|p| [p.x, p.y, p.z]).collect(),
            desired_vertical: pick(&log.desired_vertical()),
            actual_vertical: pick(&log.actual_vertical()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakePreview {
    pub log_id: String,
    pub params: HandshakeParams,
    pub preview: PreviewSeries,
}

impl HandshakePreview {
    pub fn new(record: &HandshakeRecord, log: &HandshakeLog) -> Self {
        Self {
            log_id: record.log_id.clone(),
            params: record.params,
            preview: PreviewSeries::from_log(log),
        }
    }
}
