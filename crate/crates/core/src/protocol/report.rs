use serde::{Deserialize, Serialize};

use super::UserTag;
use crate::handshake::HandshakeParams;
use crate::metrics::MetricReport;
use crate::pref::{AblationVariant, BeliefTraceRow, Query, Side};
use crate::sim::{GraspSource, HumanHandModel};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Satisfaction {
    #[serde(rename = "happy")]
    Happy,
    #[serde(rename = "neutral")]
    Neutral,
    #[serde(rename = "displeased")]
    Displeased,
    /// Synthetic users are not asked.
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl Satisfaction {
    /// Ratings a human may give.
    pub fn parse_human(s: &str) -> Option<Self> {
        match s {
            "happy" => Some(Satisfaction::Happy),
            "neutral" => Some(Satisfaction::Neutral),
            "displeased" => Some(Satisfaction::Displeased),
            _ => None,
        }
    }
}

/// Seeds and stream numbers every random choice of a session derives from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSeeds {
    pub session: u64,
    pub belief: u64,
    pub candidates_stream: u64,
    pub queries_stream: u64,
    pub simulation_stream: u64,
    pub validation_stream: u64,
}

/// One simulated handshake. The log itself is stored separately under
/// `log_id`; `log_sha256` is the digest of its CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeRecord {
    pub log_id: String,
    pub params: HandshakeParams,
    pub sim_seed: u64,
    pub grasp: GraspSource,
    pub metrics: MetricReport,
    pub log_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingComparison {
    pub trial: usize,
    pub query: Query,
    pub left: HandshakeRecord,
    pub right: HandshakeRecord,
    pub selected: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationComparison {
    pub trial: usize,
    pub variant: AblationVariant,
    pub optimized_side: Side,
    pub left: HandshakeRecord,
    pub right: HandshakeRecord,
    pub selected: Side,
    pub optimized_won: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionReport {
    pub schema_version: u32,
    pub session_id: String,
    pub label: String,
    pub user: UserTag,
    pub seeds: SessionSeeds,
    pub config_hash: String,
    pub dtw_downsample: usize,
    pub hand: HumanHandModel,
    pub candidates: Vec<HandshakeParams>,
    pub training: Vec<TrainingComparison>,
    pub belief_trace: Vec<BeliefTraceRow>,
    pub optimized_index: usize,
    pub optimized: HandshakeRecord,
    pub satisfaction: Satisfaction,
    pub validation: Vec<ValidationComparison>,
}

impl SessionReport {
    /// Canonical pretty JSON; equal reports give equal bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let report: SessionReport = serde_json::from_str(text).map_err(|e| e.to_string())?;
        report.check()?;
        Ok(report)
    }

    /// Structural checks of the protocol counts.
    pub fn check(&self) -> Result<(), String> {
        if self.schema_version != REPORT_SCHEMA_VERSION {
            return Err(format!("unsupported schema version {}", self.schema_version));
        }
        if self.training.len() != super::TRAINING_TRIALS {
            return Err(format!("expected {} training comparisons, found {}", super::TRAINING_TRIALS, self.training.len()));
        }
        if self.validation.len() != super::VALIDATION_TRIALS {
            return Err(format!(
                "expected {} validation comparisons, found {}",
                super::VALIDATION_TRIALS,
                self.validation.len()
            ));
        }
        if self.belief_trace.len() != self.training.len() + 1 {
            return Err("belief trace must have one row per trial plus trial 0".into());
        }
        if self.optimized_index >= self.candidates.len() {
            return Err("optimized index out of range".into());
        }
        for v in &self.validation {
            let opt = match v.optimized_side {
                Side::Left => &v.left,
                Side::Right => &v.right,
            };
            if opt.params != self.optimized.params {
                return Err(format!("validation trial {} does not include the optimized handshake", v.trial));
            }
        }
        Ok(())
    }

    /// Every handshake in report order.
    pub fn handshakes(&self) -> Vec<(&'static str, usize, &HandshakeRecord)> {
        let mut out = Vec::new();
        for t in &self.training {
            out.push(("training", t.trial, &t.left));
            out.push(("training", t.trial, &t.right));
        }
        out.push(("optimized", 0, &self.optimized));
        for v in &self.validation {
            out.push(("validation", v.trial, &v.left));
            out.push(("validation", v.trial, &v.right));
        }
        out
    }

    /// The answers in the order they were given, training then validation.
    pub fn answers(&self) -> Vec<Side> {
        let training = self.training.iter().map(|t| t.selected);
        training.chain(self.validation.iter().map(|v| v.selected)).collect()
    }

    /// Fraction of validation comparisons won by the optimized handshake.
    pub fn win_rate(&self) -> f64 {
        self.validation.iter().filter(|v| v.optimized_won).count() as f64 / self.validation.len().max(1) as f64
    }
}
