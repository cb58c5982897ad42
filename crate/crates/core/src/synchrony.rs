//! Matched, detuned and anti-phase hands shaking against the same robot
//! trajectory. A matched hand should leave the robot almost nothing to do.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::handshake::HandshakeParams;
use crate::metrics::{evaluate, MetricReport, MetricsConfig};
use crate::protocol::MeanStd;
use crate::sim::{run_handshake, HumanHandModel, Robot, SimConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandVariant {
    Matched,
    /// Intent frequency shifted by `detune_hz`.
    Detuned,
    /// Intent phase shifted by π.
    AntiPhase,
}

impl HandVariant {
    pub const ALL: [HandVariant; 3] = [HandVariant::Matched, HandVariant::Detuned, HandVariant::AntiPhase];

    pub fn hand(self, params: &HandshakeParams, grip_stiffness: f64, detune_hz: f64) -> HumanHandModel {
        let mut hand = HumanHandModel::matched(params, grip_stiffness);
        match self {
            HandVariant::Matched => {}
            HandVariant::Detuned => hand.intent_frequency += detune_hz,
            HandVariant::AntiPhase => hand.intent_phase = PI,
        }
        hand
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynchronyConfig {
    pub grip_stiffness: f64,
    pub detune_hz: f64,
    pub seeds: u64,
}

impl Default for SynchronyConfig {
    /// Grip well above the robot stiffness, so the hand leads.
    fn default() -> Self {
        Self {
            grip_stiffness: 2000.0,
            detune_hz: 0.5,
            seeds: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub variant: HandVariant,
    pub dtw_m: MeanStd,
    pub mean_torque_nm: MeanStd,
    pub plv: MeanStd,
    pub runs: Vec<MetricReport>,
}

/// Runs every variant over seeds `0..cfg.seeds`.
pub fn compare_hands(
    robot: &Robot,
    sim: &SimConfig,
    metrics: &MetricsConfig,
    params: &HandshakeParams,
    cfg: &SynchronyConfig,
) -> Result<Vec<VariantStats>, SimError> {
    HandVariant::ALL
        .iter()
        .map(|&variant| {
            let hand = variant.hand(params, cfg.grip_stiffness, cfg.detune_hz);
            let runs = (0..cfg.seeds)
                .into_par_iter()
                .map(|seed| run_handshake(robot, sim, params, &hand, seed).map(|log| evaluate(&log, metrics)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(VariantStats {
                variant,
                dtw_m: MeanStd::of(runs.iter().map(|m| m.dtw_m)),
                mean_torque_nm: MeanStd::of(runs.iter().map(|m| m.mean_torque_nm)),
                plv: MeanStd::of(runs.iter().filter_map(|m| m.plv)),
                runs,
            })
        })
        .collect()
}
