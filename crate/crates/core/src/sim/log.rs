use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::GraspSource;
use crate::handshake::HandshakeParams;

pub const LOG_CSV_HEADER: [&str; 13] = [
    "t", "pdx", "pdy", "pdz", "px", "py", "pz", "tau1", "tau2", "tau3", "qd1", "qd2", "qd3",
];

const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed log: {0}")]
    Malformed(String),
}

/// Samples of one shake window at the control rate. Sample `k` is taken
/// at `t = k·dt` after shake onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeLog {
    pub dt: f64,
    pub params: HandshakeParams,
    pub seed: u64,
    pub pitch_rad: f64,
    pub grasp: GraspSource,
    pub desired_path: Vec<Vector3<f64>>,
    pub actual_path: Vec<Vector3<f64>>,
    pub torques: Vec<Vector3<f64>>,
    pub joint_vel: Vec<Vector3<f64>>,
}

/// Metadata stored next to a log's CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogEnvelope {
    pub schema_version: u32,
    pub params: HandshakeParams,
    pub seed: u64,
    pub dt: f64,
    pub pitch_rad: f64,
    pub grasp: GraspSource,
    pub samples: usize,
    pub csv_sha256: String,
}

impl HandshakeLog {
    pub fn len(&self) -> usize {
        self.actual_path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual_path.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    fn world_up(&self) -> Vector3<f64> {
        Vector3::new(-self.pitch_rad.sin(), 0.0, self.pitch_rad.cos())
    }

    /// World-vertical component of the desired foot path.
    pub fn desired_vertical(&self) -> Vec<f64> {
        let up = self.world_up();
        self.desired_path.iter().map(|p| p.dot(&up)).collect()
    }

    /// World-vertical component of the measured foot path.
    pub fn actual_vertical(&self) -> Vec<f64> {
        let up = self.world_up();
        self.actual_path.iter().map(|p| p.dot(&up)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LogError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_CSV_HEADER)?;
        let mut row: Vec<String> = Vec::with_capacity(LOG_CSV_HEADER.len());
        for k in 0..self.len() {
            row.clear();
            row.push(self.time(k).to_string());
            for v in [&self.desired_path[k], &self.actual_path[k], &self.torques[k], &self.joint_vel[k]] {
                row.extend(v.iter().map(f64::to_string));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn csv_sha256(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }

    pub fn envelope(&self) -> LogEnvelope {
        LogEnvelope {
            schema_version: LOG_SCHEMA_VERSION,
            params: self.params,
            seed: self.seed,
            dt: self.dt,
            pitch_rad: self.pitch_rad,
            grasp: self.grasp,
            samples: self.len(),
            csv_sha256: self.csv_sha256(),
        }
    }

    /// Rebuild a log from its envelope and CSV, checking that they agree.
    pub fn from_parts<R: Read>(envelope: &LogEnvelope, csv_data: R) -> Result<Self, LogError> {
        if envelope.schema_version != LOG_SCHEMA_VERSION {
            return Err(LogError::Malformed(format!(
                "unsupported schema version {}",
                envelope.schema_version
            )));
        }
        let mut r = csv::Reader::from_reader(csv_data);
        let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
        if header != LOG_CSV_HEADER {
            return Err(LogError::Malformed(format!("unexpected header {header:?}")));
        }
        let mut log = HandshakeLog {
            dt: envelope.dt,
            params: envelope.params,
            seed: envelope.seed,
            pitch_rad: envelope.pitch_rad,
            grasp: envelope.grasp,
            desired_path: Vec::with_capacity(envelope.samples),
            actual_path: Vec::with_capacity(envelope.samples),
            torques: Vec::with_capacity(envelope.samples),
            joint_vel: Vec::with_capacity(envelope.samples),
        };
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| LogError::Malformed(format!("row {}: {e}", line + 1)))?;
            if values.len() != LOG_CSV_HEADER.len() {
                return Err(LogError::Malformed(format!("row {} has {} fields", line + 1, values.len())));
            }
            let v = |i: usize| Vector3::new(values[i], values[i + 1], values[i + 2]);
            log.desired_path.push(v(1));
            log.actual_path.push(v(4));
            log.torques.push(v(7));
            log.joint_vel.push(v(10));
        }
        if log.len() != envelope.samples {
            return Err(LogError::Malformed(format!(
                "envelope lists {} samples, csv has {}",
                envelope.samples,
                log.len()
            )));
        }
        Ok(log)
    }
}
