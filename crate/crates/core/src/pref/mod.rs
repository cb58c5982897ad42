//! Active preference learning over handshake parameters.
//!
//! The user's reward is linear in normalized features,
//! `R(ξ) = ωᵀΦ(ξ)`, and a choice between two handshakes follows the
//! softmax model. The belief over `ω` is a sample set refreshed by
//! Metropolis-Hastings after every answer.

mod belief;

pub use belief::{Belief, BeliefSnapshot, LearnerConfig, Observation};

use std::collections::BTreeSet;

use nalgebra::Vector3;
use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::handshake::{HandshakeParams, Interval, ParamRanges};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrefError {
    #[error("all {0} candidate pairs have been asked")]
    Exhausted(usize),
    #[error("need at least two candidates, got {0}")]
    TooFewCandidates(usize),
    #[error("candidate index {0} out of range")]
    BadIndex(usize),
}

/// Normalized feature vector `Φ(ξ)` = (amplitude, frequency, stiffness),
/// each mapped to `[0, 1]` over its parameter range.
///
/// Passive handshakes keep their slightly negative amplitude and frequency
/// features so they stay distinguishable from the weakest active ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrajectoryFeatures {
    pub phi: Vector3<f64>,
}

impl TrajectoryFeatures {
    pub fn from_params(params: &HandshakeParams, ranges: &ParamRanges) -> Self {
        Self {
            phi: Vector3::new(
                ranges.amplitude_cm.normalize(params.amplitude_cm()),
                ranges.frequency_hz.normalize(params.frequency_hz),
                ranges.stiffness.normalize(params.stiffness),
            ),
        }
    }
}

/// Features over the default parameter ranges.
pub fn features(params: &HandshakeParams) -> TrajectoryFeatures {
    TrajectoryFeatures::from_params(params, &ParamRanges::default())
}

pub fn reward(omega: &Vector3<f64>, phi: &TrajectoryFeatures) -> f64 {
    omega.dot(&phi.phi)
}

/// Probability of preferring the option with reward `r_left`.
pub fn softmax_pair(r_left: f64, r_right: f64) -> f64 {
    let m = r_left.max(r_right);
    let el = (r_left - m).exp();
    let er = (r_right - m).exp();
    el / (el + er)
}

pub fn choice_probability(omega: &Vector3<f64>, left: &TrajectoryFeatures, right: &TrajectoryFeatures) -> f64 {
    softmax_pair(reward(omega, left), reward(omega, right))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// A pair of candidate indices shown together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub left: usize,
    pub right: usize,
}

impl Query {
    pub fn key(&self) -> (usize, usize) {
        (self.left.min(self.right), self.left.max(self.right))
    }

    pub fn pick(&self, side: Side) -> usize {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub query: Query,
    pub selected: Side,
}

impl Choice {
    pub fn observation(&self, candidates: &[HandshakeParams], ranges: &ParamRanges) -> Observation {
        let chosen = self.query.pick(self.selected);
        let other = self.query.pick(self.selected.other());
        Observation::new(
            &TrajectoryFeatures::from_params(&candidates[chosen], ranges),
            &TrajectoryFeatures::from_params(&candidates[other], ranges),
        )
    }
}

/// 12 uniform draws from the parameter box followed by one passive
/// handshake per configured passive stiffness.
pub fn generate_candidates<R: Rng>(rng: &mut R, ranges: &ParamRanges) -> Vec<HandshakeParams> {
    const RANDOM_CANDIDATES: usize = 12;
    let draw = |rng: &mut R, iv: Interval| rng.random_range(iv.min..=iv.max);
    let mut out: Vec<HandshakeParams> = (0..RANDOM_CANDIDATES)
        .map(|_| {
            let a = draw(rng, ranges.amplitude_cm);
            let f = draw(rng, ranges.frequency_hz);
            let k = draw(rng, ranges.stiffness);
            HandshakeParams::new(a, f, k).with_duration(ranges.duration_s)
        })
        .collect();
    out.extend(
        ranges
            .passive_stiffness
            .iter()
            .map(|&k| HandshakeParams::passive(k).with_duration(ranges.duration_s)),
    );
    out
}

/// A uniformly random unordered pair not in `used`, in random orientation.
pub fn select_query<R: Rng>(
    used: &BTreeSet<(usize, usize)>,
    n_candidates: usize,
    rng: &mut R,
) -> Result<Query, PrefError> {
    if n_candidates < 2 {
        return Err(PrefError::TooFewCandidates(n_candidates));
    }
    let open: Vec<(usize, usize)> = (0..n_candidates)
        .flat_map(|i| (i + 1..n_candidates).map(move |j| (i, j)))
        .filter(|pair| !used.contains(pair))
        .collect();
    let &(i, j) = open.choose(rng).ok_or(PrefError::Exhausted(used.len()))?;
    Ok(if rng.random_bool(0.5) {
        Query { left: i, right: j }
    } else {
        Query { left: j, right: i }
    })
}

/// Index of the candidate maximizing `ωᵀΦ`; ties go to the lowest index.
pub fn best_candidate(omega: &Vector3<f64>, candidates: &[HandshakeParams], ranges: &ParamRanges) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let r = reward(omega, &TrajectoryFeatures::from_params(c, ranges));
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
    }
    best.map(|(i, _)| i)
}

/// The candidate maximizing reward under the posterior mean.
pub fn optimized_params(belief: &Belief, candidates: &[HandshakeParams], ranges: &ParamRanges) -> Option<usize> {
    best_candidate(&belief.mean(), candidates, ranges)
}

/// One row of the belief evolution: the current optimum and the posterior
/// moments of `ω`. Row 0 comes from the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefTraceRow {
    pub trial: usize,
    pub amplitude_cm: f64,
    pub frequency_hz: f64,
    pub stiffness: f64,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub const BELIEF_TRACE_HEADER: [&str; 10] = [
    "trial",
    "amplitude_cm",
    "frequency_hz",
    "stiffness",
    "mean_w1",
    "mean_w2",
    "mean_w3",
    "std_w1",
    "std_w2",
    "std_w3",
];

pub fn belief_trace_row(trial: usize, belief: &Belief, candidates: &[HandshakeParams], ranges: &ParamRanges) -> BeliefTraceRow {
    let best = optimized_params(belief, candidates, ranges).map(|i| candidates[i]);
    let (a, f, k) = best.map_or((f64::NAN, f64::NAN, f64::NAN), |p| {
        (p.amplitude_cm(), p.frequency_hz, p.stiffness)
    });
    BeliefTraceRow {
        trial,
        amplitude_cm: a,
        frequency_hz: f,
        stiffness: k,
        mean: belief.mean().into(),
        std: belief.std().into(),
    }
}

/// Per-parameter perturbation sizes for the validation study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationDeltas {
    pub amplitude_cm: f64,
    pub frequency_hz: f64,
    pub stiffness: f64,
}

impl Default for AblationDeltas {
    fn default() -> Self {
        Self {
            amplitude_cm: 2.0,
            frequency_hz: 0.5,
            stiffness: 40.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    AmplitudeDown,
    AmplitudeUp,
    FrequencyDown,
    FrequencyUp,
    StiffnessDown,
    StiffnessUp,
}

impl AblationKind {
    pub const ALL: [AblationKind; 6] = [
        AblationKind::AmplitudeDown,
        AblationKind::AmplitudeUp,
        AblationKind::FrequencyDown,
        AblationKind::FrequencyUp,
        AblationKind::StiffnessDown,
        AblationKind::StiffnessUp,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AblationKind::AmplitudeDown => "a-",
            AblationKind::AmplitudeUp => "a+",
            AblationKind::FrequencyDown => "f-",
            AblationKind::FrequencyUp => "f+",
            AblationKind::StiffnessDown => "k-",
            AblationKind::StiffnessUp => "k+",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationVariant {
    pub kind: AblationKind,
    pub params: HandshakeParams,
    /// The perturbation hit a range bound.
    pub clipped: bool,
    /// Clipping left the parameters equal to the optimum.
    pub identity: bool,
}

/// Six single-parameter perturbations of `opt` in the order
/// a−, a+, f−, f+, k−, k+, clipped to the parameter ranges.
///
/// Amplitude and frequency of a passive optimum are clipped at zero
/// rather than at the active minimum.
pub fn ablation_variants(opt: &HandshakeParams, ranges: &ParamRanges, deltas: &AblationDeltas) -> [AblationVariant; 6] {
    let passive = opt.is_passive();
    let lower = |iv: Interval| if passive { 0.0 } else { iv.min };
    AblationKind::ALL.map(|kind| {
        let (value, delta, lo, hi) = match kind {
            AblationKind::AmplitudeDown | AblationKind::AmplitudeUp => (
                opt.amplitude_cm(),
                deltas.amplitude_cm,
                lower(ranges.amplitude_cm),
                ranges.amplitude_cm.max,
            ),
            AblationKind::FrequencyDown | AblationKind::FrequencyUp => (
                opt.frequency_hz,
                deltas.frequency_hz,
                lower(ranges.frequency_hz),
                ranges.frequency_hz.max,
            ),
            AblationKind::StiffnessDown | AblationKind::StiffnessUp => {
                (opt.stiffness, deltas.stiffness, ranges.stiffness.min, ranges.stiffness.max)
            }
        };
        let signed = match kind {
            AblationKind::AmplitudeDown | AblationKind::FrequencyDown | AblationKind::StiffnessDown => -delta,
            _ => delta,
        };
        let raw = value + signed;
        let moved = raw.clamp(lo, hi);
        let mut params = *opt;
        match kind {
            AblationKind::AmplitudeDown | AblationKind::AmplitudeUp => params.amplitude_m = moved / 100.0,
            AblationKind::FrequencyDown | AblationKind::FrequencyUp => params.frequency_hz = moved,
            AblationKind::StiffnessDown | AblationKind::StiffnessUp => params.stiffness = moved,
        }
        AblationVariant {
            kind,
            params,
            clipped: moved != raw,
            identity: params == *opt,
        }
    })
}

#[cfg(test)]
mod tests;
