//! CPG handshake trajectories.
//!
//! A handshake is a vertical sinusoid in the world frame. Because the robot
//! sits on its rear legs, the body is pitched by `θ` and the world vertical
//! maps onto the leg frame's XZ plane:
//!
//! ```text
//! a_x = -a·sin θ        a_z = a·cos θ
//! p_d(t) = (x_nom + a_x·sin 2πft,  y_nom,  z_nom + a_z·sin 2πft)
//! ```

use std::f64::consts::{FRAC_PI_2, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default shake duration in seconds.
pub const DEFAULT_DURATION_S: f64 = 3.0;

/// Desired foot position in the leg frame (m).
pub type CartesianTarget = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{field} must be finite")]
    NotFinite { field: &'static str },
    #[error("{field} = {value} outside [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("body pitch {0} rad outside [0, π/2)")]
    PitchOutOfRange(f64),
}

/// Closed interval used for the parameter box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.min, self.max)
    }

    /// Min-max normalization onto `[0, 1]` (values outside the interval map outside).
    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.min) / self.width()
    }

    pub fn denormalize(&self, u: f64) -> f64 {
        self.min + u * self.width()
    }
}

/// Admissible handshake parameters: the random-candidate box and the
/// stiffness values used for passive handshakes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamRanges {
    pub amplitude_cm: Interval,
    pub frequency_hz: Interval,
    pub stiffness: Interval,
    pub passive_stiffness: Vec<f64>,
    pub duration_s: f64,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            amplitude_cm: Interval::new(1.0, 10.0),
            frequency_hz: Interval::new(1.0, 3.5),
            stiffness: Interval::new(30.0, 200.0),
            passive_stiffness: vec![30.0, 115.0, 200.0],
            duration_s: DEFAULT_DURATION_S,
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (field, iv) in [
            ("amplitude_cm", self.amplitude_cm),
            ("frequency_hz", self.frequency_hz),
            ("stiffness", self.stiffness),
        ] {
            if !(iv.min.is_finite() && iv.max.is_finite()) {
                return Err(ParamError::NotFinite { field });
            }
            if !(iv.min > 0.0 && iv.max > iv.min) {
                return Err(ParamError::OutOfRange {
                    field,
                    value: iv.min,
                    min: 0.0,
                    max: iv.max,
                });
            }
        }
        for &k in &self.passive_stiffness {
            if !self.stiffness.contains(k) {
                return Err(ParamError::OutOfRange {
                    field: "passive_stiffness",
                    value: k,
                    min: self.stiffness.min,
                    max: self.stiffness.max,
                });
            }
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(ParamError::NonPositiveDuration(self.duration_s));
        }
        Ok(())
    }
}

/// One handshake: amplitude, frequency, Cartesian stiffness and duration.
///
/// Amplitude is stored in meters; [`HandshakeParams::new`] and
/// [`HandshakeParams::amplitude_cm`] speak centimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandshakeParams {
    pub amplitude_m: f64,
    pub frequency_hz: f64,
    pub stiffness: f64,
    pub duration_s: f64,
}

impl HandshakeParams {
    pub fn new(amplitude_cm: f64, frequency_hz: f64, stiffness: f64) -> Self {
        Self {
            amplitude_m: amplitude_cm / 100.0,
            frequency_hz,
            stiffness,
            duration_s: DEFAULT_DURATION_S,
        }
    }

    /// Zero amplitude and frequency: the robot only holds the foot.
    pub fn passive(stiffness: f64) -> Self {
        Self::new(0.0, 0.0, stiffness)
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s;
        self
    }

    pub fn amplitude_cm(&self) -> f64 {
        self.amplitude_m * 100.0
    }

    pub fn is_passive(&self) -> bool {
        self.amplitude_m == 0.0 && self.frequency_hz == 0.0
    }

    /// Range check against the upper bounds of `ranges`; amplitude and
    /// frequency may go down to zero so passive handshakes validate.
    pub fn validate(&self, ranges: &ParamRanges) -> Result<(), ParamError> {
        let checks = [
            ("amplitude_cm", self.amplitude_cm(), 0.0, ranges.amplitude_cm.max),
            ("frequency_hz", self.frequency_hz, 0.0, ranges.frequency_hz.max),
            ("stiffness", self.stiffness, ranges.stiffness.min, ranges.stiffness.max),
        ];
        for (field, value, min, max) in checks {
            if !value.is_finite() {
                return Err(ParamError::NotFinite { field });
            }
            // tolerate cm→m→cm rounding at the upper edge
            if value < min || value > max * (1.0 + 1e-12) {
                return Err(ParamError::OutOfRange {
                    field,
                    value,
                    min,
                    max,
                });
            }
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(ParamError::NonPositiveDuration(self.duration_s));
        }
        Ok(())
    }
}

/// Nominal foot position in the leg frame at shake onset (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NominalPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl NominalPose {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

impl Default for NominalPose {
    fn default() -> Self {
        Self::new(0.05, -0.08, -0.25)
    }
}

/// Body pitch while sitting. Held constant over one handshake.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BodyPose {
    pitch_rad: f64,
}

impl BodyPose {
    pub fn new(pitch_rad: f64) -> Result<Self, ParamError> {
        if !(pitch_rad.is_finite() && (0.0..FRAC_PI_2).contains(&pitch_rad)) {
            return Err(ParamError::PitchOutOfRange(pitch_rad));
        }
        Ok(Self { pitch_rad })
    }

    pub fn pitch_rad(&self) -> f64 {
        self.pitch_rad
    }

    /// The world vertical expressed in the leg frame.
    pub fn world_up(&self) -> Vector3<f64> {
        let (s, c) = self.pitch_rad.sin_cos();
        Vector3::new(-s, 0.0, c)
    }
}

impl Default for BodyPose {
    fn default() -> Self {
        Self { pitch_rad: 0.6 }
    }
}

impl TryFrom<f64> for BodyPose {
    type Error = ParamError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<BodyPose> for f64 {
    fn from(b: BodyPose) -> f64 {
        b.pitch_rad
    }
}

/// Split a world-frame amplitude into leg-frame `(a_x, a_z)` components.
pub fn map_amplitude(amplitude: f64, pitch_rad: f64) -> (f64, f64) {
    let (s, c) = pitch_rad.sin_cos();
    (-amplitude * s, amplitude * c)
}

/// Desired foot position at time `t` since shake onset.
pub fn foot_target(
    params: &HandshakeParams,
    nominal: &NominalPose,
    body: &BodyPose,
    t: f64,
) -> CartesianTarget {
    if params.amplitude_m == 0.0 {
        return nominal.position();
    }
    let (ax, az) = map_amplitude(params.amplitude_m, body.pitch_rad());
    let phase = (TAU * params.frequency_hz * t).sin();
    Vector3::new(nominal.x + ax * phase, nominal.y, nominal.z + az * phase)
}
