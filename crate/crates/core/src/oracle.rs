//! Synthetic users that answer handshake comparisons and shake back with a
//! hand matching their own preference.

use std::fmt;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::handshake::{HandshakeParams, Interval, ParamRanges};
use crate::pref::{softmax_pair, Side, TrajectoryFeatures};
use crate::sim::HumanHandModel;

/// Softmax rationality. `Beta::INFINITE` makes the user a deterministic
/// maximizer; it is written as the string `"inf"` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Beta(pub f64);

impl Beta {
    pub const INFINITE: Beta = Beta(f64::INFINITY);

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }
}

impl Serialize for Beta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Beta {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Beta;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a nonnegative number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Beta, E> {
                if v >= 0.0 {
                    Ok(Beta(v))
                } else {
                    Err(E::custom("beta must be nonnegative"))
                }
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Beta, E> {
                Ok(Beta(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Beta, E> {
                self.visit_f64(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Beta, E> {
                match v {
                    "inf" | "infinity" => Ok(Beta::INFINITE),
                    _ => Err(E::custom(format!("unknown beta {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Handshake parameters in human units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamPoint {
    pub amplitude_cm: f64,
    pub frequency_hz: f64,
    pub stiffness: f64,
}

impl ParamPoint {
    pub fn params(&self) -> HandshakeParams {
        HandshakeParams::new(self.amplitude_cm, self.frequency_hz, self.stiffness)
    }

    fn from_features(phi: &Vector3<f64>, ranges: &ParamRanges) -> Self {
        Self {
            amplitude_cm: ranges.amplitude_cm.denormalize(phi[0]),
            frequency_hz: ranges.frequency_hz.denormalize(phi[1]),
            stiffness: ranges.stiffness.denormalize(phi[2]),
        }
    }

    fn in_ranges(&self, ranges: &ParamRanges) -> bool {
        ranges.amplitude_cm.contains(self.amplitude_cm)
            && ranges.frequency_hz.contains(self.frequency_hz)
            && ranges.stiffness.contains(self.stiffness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UserKind {
    /// Utility `β·ω_trueᵀΦ`, the learner's own model class.
    Linear { omega_true: [f64; 3], beta: Beta },
    /// Utility `−β·Σ w_i (φ_i − φ_i(target))²`.
    IdealPoint {
        target: ParamPoint,
        beta: Beta,
        weights: [f64; 3],
    },
}

/// How a user's preferred stiffness becomes grip stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripMapping {
    /// N/m; the softest preferred stiffness gets `max`.
    pub grip: Interval,
    pub damping_ratio: f64,
}

impl Default for GripMapping {
    fn default() -> Self {
        Self {
            grip: Interval::new(50.0, 500.0),
            damping_ratio: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUser {
    pub kind: UserKind,
    pub grip: GripMapping,
    rng: ChaCha8Rng,
}

impl SyntheticUser {
    pub fn new(kind: UserKind, seed: u64) -> Self {
        Self {
            kind,
            grip: GripMapping::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_grip(mut self, grip: GripMapping) -> Self {
        self.grip = grip;
        self
    }

    pub fn beta(&self) -> Beta {
        match self.kind {
            UserKind::Linear { beta, .. } | UserKind::IdealPoint { beta, .. } => beta,
        }
    }

    /// Utility before the rationality factor.
    pub fn raw_utility(&self, params: &HandshakeParams, ranges: &ParamRanges) -> f64 {
        let phi = TrajectoryFeatures::from_params(params, ranges).phi;
        match self.kind {
            UserKind::Linear { omega_true, .. } => Vector3::from(omega_true).dot(&phi),
            UserKind::IdealPoint { target, weights, .. } => {
                let t = TrajectoryFeatures::from_params(&target.params(), ranges).phi;
                -(phi - t).component_mul(&(phi - t)).dot(&Vector3::from(weights))
            }
        }
    }

    /// Probability of answering left under the user's own response model.
    pub fn p_left(&self, left: &HandshakeParams, right: &HandshakeParams, ranges: &ParamRanges) -> f64 {
        let (ul, ur) = (self.raw_utility(left, ranges), self.raw_utility(right, ranges));
        let beta = self.beta();
        if beta.is_infinite() {
            if ul > ur {
                1.0
            } else if ul < ur {
                0.0
            } else {
                0.5
            }
        } else {
            softmax_pair(beta.0 * ul, beta.0 * ur)
        }
    }

    pub fn answer(&mut self, left: &HandshakeParams, right: &HandshakeParams, ranges: &ParamRanges) -> Side {
        let p = self.p_left(left, right, ranges);
        let u: f64 = self.rng.random();
        if u < p {
            Side::Left
        } else {
            Side::Right
        }
    }

    /// The parameters this user would pick from the whole box.
    pub fn preferred_point(&self, ranges: &ParamRanges) -> ParamPoint {
        match self.kind {
            UserKind::IdealPoint { target, .. } => target,
            UserKind::Linear { omega_true, .. } => {
                let w = Vector3::from(omega_true);
                let centre = Vector3::repeat(0.5);
                let phi = match w.try_normalize(1e-12) {
                    Some(dir) => (centre + 0.5 * dir).map(|v| v.clamp(0.0, 1.0)),
                    None => centre,
                };
                ParamPoint::from_features(&phi, ranges)
            }
        }
    }

    /// A hand shaking at the user's preferred amplitude and frequency, with
    /// a grip that softens as the preferred stiffness rises.
    pub fn hand_for(&self, ranges: &ParamRanges) -> HumanHandModel {
        let pref = self.preferred_point(ranges);
        let stiff = ranges.stiffness.normalize(pref.stiffness).clamp(0.0, 1.0);
        let grip = self.grip.grip.max - self.grip.grip.width() * stiff;
        HumanHandModel {
            intent_amplitude: pref.amplitude_cm / 100.0,
            intent_frequency: pref.frequency_hz,
            intent_phase: 0.0,
            grip_stiffness: grip,
            grip_damping: self.grip.damping_ratio * grip,
            ..HumanHandModel::neutral()
        }
    }
}

/// Oracle definitions as written in the config file. Populations draw a
/// concrete user from the session seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    Linear {
        omega_true: [f64; 3],
        beta: Beta,
    },
    IdealPoint {
        target: ParamPoint,
        beta: Beta,
        weights: [f64; 3],
    },
    /// Targets uniform in `center ± spread`, clipped to the ranges.
    IdealPointPopulation {
        center: ParamPoint,
        spread: ParamPoint,
        beta: Beta,
        weights: [f64; 3],
    },
    /// `ω_true` drawn from `N(0, I₃)`.
    LinearPopulation {
        beta: Beta,
    },
}

impl OracleSpec {
    pub fn validate(&self, ranges: &ParamRanges) -> Result<(), String> {
        let weights_ok = |w: &[f64; 3]| w.iter().all(|v| v.is_finite() && *v >= 0.0);
        match self {
            OracleSpec::Linear { omega_true, .. } => {
                if !omega_true.iter().all(|v| v.is_finite()) {
                    return Err("omega_true must be finite".into());
                }
            }
            OracleSpec::IdealPoint { target, weights, .. } => {
                if !target.in_ranges(ranges) {
                    return Err("ideal-point target outside parameter ranges".into());
                }
                if !weights_ok(weights) {
                    return Err("ideal-point weights must be finite and nonnegative".into());
                }
            }
            OracleSpec::IdealPointPopulation {
                center, spread, weights, ..
            } => {
                if !center.in_ranges(ranges) {
                    return Err("population center outside parameter ranges".into());
                }
                let s = [spread.amplitude_cm, spread.frequency_hz, spread.stiffness];
                if !s.iter().all(|v| v.is_finite() && *v >= 0.0) {
                    return Err("population spread must be finite and nonnegative".into());
                }
                if !weights_ok(weights) {
                    return Err("ideal-point weights must be finite and nonnegative".into());
                }
            }
            OracleSpec::LinearPopulation { .. } => {}
        }
        Ok(())
    }

    pub fn instantiate(&self, seed: u64, ranges: &ParamRanges) -> SyntheticUser {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = match *self {
            OracleSpec::Linear { omega_true, beta } => UserKind::Linear { omega_true, beta },
            OracleSpec::IdealPoint { target, beta, weights } => UserKind::IdealPoint { target, beta, weights },
            OracleSpec::IdealPointPopulation {
                center,
                spread,
                beta,
                weights,
            } => {
                let mut draw = |c: f64, s: f64, iv: Interval| {
                    let v = if s > 0.0 { rng.random_range(c - s..=c + s) } else { c };
                    iv.clamp(v)
                };
                let target = ParamPoint {
                    amplitude_cm: draw(center.amplitude_cm, spread.amplitude_cm, ranges.amplitude_cm),
                    frequency_hz: draw(center.frequency_hz, spread.frequency_hz, ranges.frequency_hz),
                    stiffness: draw(center.stiffness, spread.stiffness, ranges.stiffness),
                };
                UserKind::IdealPoint { target, beta, weights }
            }
            OracleSpec::LinearPopulation { beta } => {
                let mut w = [0.0; 3];
                for v in &mut w {
                    *v = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                }
                UserKind::Linear { omega_true: w, beta }
            }
        };
        SyntheticUser::new(kind, rng.random())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear(w: [f64; 3], beta: Beta) -> SyntheticUser {
        SyntheticUser::new(UserKind::Linear { omega_true: w, beta }, 1)
    }

    #[test]
    fn infinite_beta_is_argmax() {
        let r = ParamRanges::default();
        let mut u = linear([1.0, 0.0, 0.0], Beta::INFINITE);
        let big = HandshakeParams::new(9.0, 2.0, 100.0);
        let small = HandshakeParams::new(2.0, 2.0, 100.0);
        for _ in 0..100 {
            assert_eq!(u.answer(&big, &small, &r), Side::Left);
            assert_eq!(u.answer(&small, &big, &r), Side::Right);
        }
    }

    #[test]
    fn ties_are_fair_coin() {
        let r = ParamRanges::default();
        let mut u = linear([1.0, 0.0, 0.0], Beta::INFINITE);
        let a = HandshakeParams::new(5.0, 1.0, 100.0);
        let b = HandshakeParams::new(5.0, 3.0, 50.0);
        let lefts = (0..10_000).filter(|_| u.answer(&a, &b, &r) == Side::Left).count();
        assert!((lefts as f64 / 1e4 - 0.5).abs() <= 0.02, "{lefts}");
    }

    #[test]
    fn softmax_frequency_matches_closed_form() {
        let r = ParamRanges::default();
        // a 9 cm amplitude gap is one feature unit, so ω₁ = ln 3 gives ΔR = ln 3
        let mut u = linear([3f64.ln(), 0.0, 0.0], Beta(1.0));
        let a = HandshakeParams::new(10.0, 2.0, 100.0);
        let b = HandshakeParams::new(1.0, 2.0, 100.0);
        assert_relative_eq!(u.p_left(&a, &b, &r), 0.75, epsilon = 1e-12);
        let lefts = (0..10_000).filter(|_| u.answer(&a, &b, &r) == Side::Left).count();
        assert!((lefts as f64 / 1e4 - 0.75).abs() <= 0.02, "{lefts}");
    }

    #[test]
    fn ideal_point_hand_copies_target() {
        let r = ParamRanges::default();
        let target = ParamPoint {
            amplitude_cm: 5.0,
            frequency_hz: 2.0,
            stiffness: 90.0,
        };
        let u = SyntheticUser::new(
            UserKind::IdealPoint {
                target,
                beta: Beta::INFINITE,
                weights: [1.0; 3],
            },
            0,
        );
        let h = u.hand_for(&r);
        assert_relative_eq!(h.intent_amplitude, 0.05);
        assert_eq!(h.intent_frequency, 2.0);
        assert_eq!(h.intent_phase, 0.0);
        assert_eq!(h, u.hand_for(&r));
    }

    #[test]
    fn stiffest_preference_gets_softest_grip() {
        let r = ParamRanges::default();
        let target = |k| ParamPoint {
            amplitude_cm: 5.0,
            frequency_hz: 2.0,
            stiffness: k,
        };
        let user = |k| {
            SyntheticUser::new(
                UserKind::IdealPoint {
                    target: target(k),
                    beta: Beta(1.0),
                    weights: [1.0; 3],
                },
                0,
            )
        };
        assert_eq!(user(200.0).hand_for(&r).grip_stiffness, 50.0);
        assert_eq!(user(30.0).hand_for(&r).grip_stiffness, 500.0);
        let lin = linear([0.0, 0.0, 1.0], Beta(1.0));
        assert_eq!(lin.hand_for(&r).grip_stiffness, 50.0);
        let p = lin.preferred_point(&r);
        assert_relative_eq!(p.amplitude_cm, 5.5);
    }

    #[test]
    fn ideal_point_ranking_is_transitive() {
        let r = ParamRanges::default();
        let spec = OracleSpec::IdealPointPopulation {
            center: ParamPoint {
                amplitude_cm: 5.0,
                frequency_hz: 2.0,
                stiffness: 90.0,
            },
            spread: ParamPoint {
                amplitude_cm: 2.0,
                frequency_hz: 0.5,
                stiffness: 30.0,
            },
            beta: Beta::INFINITE,
            weights: [1.0, 1.0, 1.0],
        };
        let u = spec.instantiate(3, &r);
        let cands = crate::pref::generate_candidates(&mut ChaCha8Rng::seed_from_u64(9), &r);
        for a in &cands {
            for b in &cands {
                for c in &cands {
                    let beats = |x: &HandshakeParams, y: &HandshakeParams| u.p_left(x, y, &r) == 1.0;
                    if beats(a, b) && beats(b, c) {
                        assert!(beats(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn beta_json() {
        let spec: OracleSpec = serde_json::from_str(r#"{"kind":"linear","omega_true":[1,0,0],"beta":"inf"}"#).unwrap();
        assert!(matches!(spec, OracleSpec::Linear { beta, .. } if beta.is_infinite()));
        let back = serde_json::to_string(&spec).unwrap();
        assert!(back.contains(r#""beta":"inf""#));
        let finite: Beta = serde_json::from_str("2.5").unwrap();
        assert_eq!(finite, Beta(2.5));
        assert!(serde_json::from_str::<Beta>("-1").is_err());
    }

    #[test]
    fn populations_are_seeded() {
        let r = ParamRanges::default();
        let spec = OracleSpec::LinearPopulation { beta: Beta(1.0) };
        assert_eq!(spec.instantiate(4, &r), spec.instantiate(4, &r));
        assert_ne!(spec.instantiate(4, &r).kind, spec.instantiate(5, &r).kind);
    }
}
