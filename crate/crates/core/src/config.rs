//! The single JSON document configuring robot, simulation, learner,
//! metrics and oracles. Every field has a default, so `{}` is a valid
//! config.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::handshake::ParamRanges;
use crate::metrics::MetricsConfig;
use crate::oracle::{Beta, GripMapping, OracleSpec, ParamPoint};
use crate::pref::{AblationDeltas, LearnerConfig};
use crate::sim::{HumanHandModel, Robot, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid JSON for this schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub robot: Robot,
    pub sim: SimConfig,
    pub ranges: ParamRanges,
    pub learner: LearnerConfig,
    pub ablation: AblationDeltas,
    pub metrics: MetricsConfig,
    pub grip: GripMapping,
    pub oracles: BTreeMap<String, OracleSpec>,
    /// Hand used to simulate handshakes for interactive (human) sessions.
    pub interactive_hand: HumanHandModel,
    pub seed: u64,
    /// How long an interactive run waits for the next answer (s).
    pub bridge_timeout_s: f64,
}

pub fn default_oracles() -> BTreeMap<String, OracleSpec> {
    let centre = ParamPoint {
        amplitude_cm: 5.0,
        frequency_hz: 2.0,
        stiffness: 90.0,
    };
    BTreeMap::from([
        (
            "linear".to_string(),
            OracleSpec::Linear {
                omega_true: [1.0, -0.5, -1.0],
                beta: Beta::INFINITE,
            },
        ),
        (
            "ideal".to_string(),
            OracleSpec::IdealPoint {
                target: centre,
                beta: Beta(20.0),
                weights: [1.0, 1.0, 1.0],
            },
        ),
        (
            "population".to_string(),
            OracleSpec::IdealPointPopulation {
                center: centre,
                spread: ParamPoint {
                    amplitude_cm: 3.0,
                    frequency_hz: 1.0,
                    stiffness: 60.0,
                },
                beta: Beta(20.0),
                weights: [1.0, 1.0, 1.0],
            },
        ),
        ("random-linear".to_string(), OracleSpec::LinearPopulation { beta: Beta(5.0) }),
    ])
}

impl Default for Config {
    fn default() -> Self {
        Self {
            robot: Robot::default(),
            sim: SimConfig::default(),
            ranges: ParamRanges::default(),
            learner: LearnerConfig::default(),
            ablation: AblationDeltas::default(),
            metrics: MetricsConfig::default(),
            grip: GripMapping::default(),
            oracles: default_oracles(),
            interactive_hand: HumanHandModel::neutral(),
            seed: 1,
            bridge_timeout_s: 600.0,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.robot.validate().map_err(|e| invalid(e.to_string()))?;
        self.sim.validate().map_err(|e| invalid(e.to_string()))?;
        self.ranges.validate().map_err(|e| invalid(e.to_string()))?;
        self.learner.validate().map_err(invalid)?;
        self.metrics.validate().map_err(invalid)?;
        self.interactive_hand.validate().map_err(|e| invalid(e.to_string()))?;
        let d = &self.ablation;
        if ![d.amplitude_cm, d.frequency_hz, d.stiffness].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(invalid("ablation deltas must be positive".into()));
        }
        let g = &self.grip;
        if !(g.grip.min >= 0.0 && g.grip.max >= g.grip.min && g.damping_ratio >= 0.0) {
            return Err(invalid("grip range must be nonnegative and ordered".into()));
        }
        for (name, spec) in &self.oracles {
            spec.validate(&self.ranges).map_err(|e| invalid(format!("oracle {name}: {e}")))?;
        }
        if !(self.bridge_timeout_s > 0.0) {
            return Err(invalid("bridge_timeout_s must be positive".into()));
        }
        let n = self.ranges.passive_stiffness.len() + 12;
        if n < 2 {
            return Err(invalid("need at least two candidates".into()));
        }
        Ok(())
    }

    /// Canonical JSON: struct fields in declaration order, maps sorted.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
