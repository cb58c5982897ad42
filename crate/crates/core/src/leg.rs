//! Front-right leg model: kinematics and the Cartesian PD torque law.
//!
//! Joint convention (leg frame: x forward, y left, z up, origin at the hip
//! abduction axis):
//!
//! * `q[0]` hip abduction, rotation about x;
//! * `q[1]` hip flexion, rotation about y;
//! * `q[2]` knee, rotation about y.
//!
//! The zero configuration is the leg hanging straight down, with the hip
//! offset along −y (right side of the body).

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LegError {
    #[error("target at planar distance {distance:.6} m is outside the workspace [{min:.6}, {max:.6}] m")]
    UnreachableTarget { distance: f64, min: f64, max: f64 },
    #[error("target is within {margin} m of a kinematic singularity")]
    Singular { margin: f64 },
    #[error("invalid leg geometry: {0}")]
    InvalidConfig(&'static str),
}

/// Leg geometry plus the point-mass surrogate used by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegConfig {
    pub hip_offset: f64,
    pub thigh_len: f64,
    pub calf_len: f64,
    pub foot_mass: f64,
    pub gravity: f64,
}

impl Default for LegConfig {
    fn default() -> Self {
        Self {
            hip_offset: 0.08,
            thigh_len: 0.213,
            calf_len: 0.213,
            foot_mass: 0.15,
            gravity: 9.81,
        }
    }
}

/// How [`LegConfig::inverse_kinematics`] treats targets outside the workspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IkMode {
    #[default]
    Strict,
    /// Project onto the nearest workspace boundary instead of failing.
    Clamp,
}

/// Targets closer than this to full extension are rejected as nominal poses.
pub const SINGULARITY_MARGIN: f64 = 1e-6;

impl LegConfig {
    pub fn validate(&self) -> Result<(), LegError> {
        let lengths = [self.hip_offset, self.thigh_len, self.calf_len];
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(LegError::InvalidConfig("link lengths must be positive"));
        }
        if !(self.foot_mass.is_finite() && self.foot_mass > 0.0) {
            return Err(LegError::InvalidConfig("foot_mass must be positive"));
        }
        if !(self.gravity.is_finite() && self.gravity >= 0.0) {
            return Err(LegError::InvalidConfig("gravity must be nonnegative"));
        }
        Ok(())
    }

    pub fn max_reach(&self) -> f64 {
        self.hip_offset + self.thigh_len + self.calf_len
    }

    /// Foot position for joint angles `q`.
    pub fn forward_kinematics(&self, q: &Vector3<f64>) -> Vector3<f64> {
        let (l1, l2, l3) = (self.hip_offset, self.thigh_len, self.calf_len);
        let (s1, c1) = q[0].sin_cos();
        let (s2, c2) = q[1].sin_cos();
        let (s23, c23) = (q[1] + q[2]).sin_cos();
        // position in the abduction frame
        let x = -l2 * s2 - l3 * s23;
        let z_l = -l2 * c2 - l3 * c23;
        Vector3::new(x, -l1 * c1 - z_l * s1, -l1 * s1 + z_l * c1)
    }

    /// Analytic foot Jacobian `∂p/∂q`.
    pub fn jacobian(&self, q: &Vector3<f64>) -> Matrix3<f64> {
        let (l1, l2, l3) = (self.hip_offset, self.thigh_len, self.calf_len);
        let (s1, c1) = q[0].sin_cos();
        let (s2, c2) = q[1].sin_cos();
        let (s23, c23) = (q[1] + q[2]).sin_cos();
        let z_l = -l2 * c2 - l3 * c23;
        let dzl_dq2 = l2 * s2 + l3 * s23;
        let dzl_dq3 = l3 * s23;
        Matrix3::new(
            0.0,
            z_l,
            -l3 * c23,
            l1 * s1 - z_l * c1,
            -s1 * dzl_dq2,
            -s1 * dzl_dq3,
            -l1 * c1 - z_l * s1,
            c1 * dzl_dq2,
            c1 * dzl_dq3,
        )
    }

    /// Joint angles reaching `p`, knee-backward branch (`q[2] ≤ 0`) with the
    /// foot below the hip in the leg plane.
    pub fn inverse_kinematics(&self, p: &Vector3<f64>, mode: IkMode) -> Result<Vector3<f64>, LegError> {
        let (l1, l2, l3) = (self.hip_offset, self.thigh_len, self.calf_len);
        let (x, y, z) = (p.x, p.y, p.z);

        let mut zl_sq = y * y + z * z - l1 * l1;
        if zl_sq < 0.0 {
            if mode == IkMode::Strict {
                return Err(LegError::UnreachableTarget {
                    distance: (y * y + z * z).sqrt(),
                    min: l1,
                    max: self.max_reach(),
                });
            }
            zl_sq = 0.0;
        }
        let z_l = -zl_sq.sqrt();
        let q1 = wrap_angle(z.atan2(y) - z_l.atan2(-l1));

        // planar two-link problem in (−x, −z_l)
        let (mut px, mut pz) = (-x, -z_l);
        let d = px.hypot(pz);
        let (dmin, dmax) = ((l2 - l3).abs(), l2 + l3);
        // absorb FK round-off at full extension
        let tol = 1e-12 * dmax;
        if d > dmax + tol || d < dmin - tol {
            if mode == IkMode::Strict {
                return Err(LegError::UnreachableTarget {
                    distance: d,
                    min: dmin,
                    max: dmax,
                });
            }
            let target = d.clamp(dmin, dmax);
            if d > 0.0 {
                px *= target / d;
                pz *= target / d;
            } else {
                pz = target;
            }
        }
        let d2 = px * px + pz * pz;
        let q3 = if l2 * l3 > 0.0 {
            let c3 = ((d2 - l2 * l2 - l3 * l3) / (2.0 * l2 * l3)).clamp(-1.0, 1.0);
            -c3.acos()
        } else {
            0.0
        };
        let q2 = wrap_angle(px.atan2(pz) - (l3 * q3.sin()).atan2(l2 + l3 * q3.cos()));
        Ok(Vector3::new(q1, q2, q3))
    }

    /// Checks that `p` is a usable interior pose: reachable and away from
    /// full extension.
    pub fn check_interior(&self, p: &Vector3<f64>) -> Result<Vector3<f64>, LegError> {
        let q = self.inverse_kinematics(p, IkMode::Strict)?;
        let planar = (p.y * p.y + p.z * p.z - self.hip_offset.powi(2)).max(0.0).sqrt().hypot(p.x);
        let margin = self.thigh_len + self.calf_len - planar;
        if margin < SINGULARITY_MARGIN {
            return Err(LegError::Singular {
                margin: SINGULARITY_MARGIN,
            });
        }
        Ok(q)
    }

    /// Joint velocities producing foot velocity `v` at `q`, if `J(q)` is invertible.
    pub fn joint_velocity(&self, q: &Vector3<f64>, v: &Vector3<f64>) -> Option<Vector3<f64>> {
        self.jacobian(q).lu().solve(v)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub q: Vector3<f64>,
    pub qdot: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FootState {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
}

/// Gains of the Cartesian PD law. Built from the scalar stiffness `k`:
/// `K_p = k·I`, `K_d = 0.02·K_p`, `K_d,joint = 0.8·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGains {
    pub kp_cart: Matrix3<f64>,
    pub kd_cart: Matrix3<f64>,
    pub kd_joint: Matrix3<f64>,
}

/// Ratios tying the damping gains to the learned stiffness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainRatios {
    pub kd_ratio: f64,
    pub kd_joint: f64,
}

impl Default for GainRatios {
    fn default() -> Self {
        Self {
            kd_ratio: 0.02,
            kd_joint: 0.8,
        }
    }
}

impl ControllerGains {
    pub fn from_stiffness(k: f64) -> Self {
        Self::with_ratios(k, &GainRatios::default())
    }

    pub fn with_ratios(k: f64, ratios: &GainRatios) -> Self {
        let kp = Matrix3::from_diagonal_element(k);
        Self {
            kp_cart: kp,
            kd_cart: kp * ratios.kd_ratio,
            kd_joint: Matrix3::from_diagonal_element(ratios.kd_joint),
        }
    }

    /// Cartesian force `K_p (p_d − p) − K_d v`.
    pub fn cartesian_force(&self, foot: &FootState, target: &Vector3<f64>) -> Vector3<f64> {
        self.kp_cart * (target - foot.p) - self.kd_cart * foot.v
    }
}

/// `τ = J(q)ᵀ [K_p (p_d − p) − K_d v] − K_d,joint q̇`
pub fn cartesian_pd_torque(
    state: &JointState,
    foot: &FootState,
    target: &Vector3<f64>,
    gains: &ControllerGains,
    cfg: &LegConfig,
) -> Vector3<f64> {
    let j = cfg.jacobian(&state.q);
    j.transpose() * gains.cartesian_force(foot, target) - gains.kd_joint * state.qdot
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Isometry3, Translation3, UnitQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: homogeneous transform chain hip → thigh → knee → foot.
    fn fk_chain(cfg: &LegConfig, q: &Vector3<f64>) -> Vector3<f64> {
        let abduct = Isometry3::from_parts(
            Translation3::identity(),
            UnitQuaternion::from_axis_angle(&Vector3::x_axis(), q[0]),
        );
        let hip = Isometry3::from_parts(
            Translation3::new(0.0, -cfg.hip_offset, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::y_axis(), q[1]),
        );
        let knee = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, -cfg.thigh_len),
            UnitQuaternion::from_axis_angle(&Vector3::y_axis(), q[2]),
        );
        let foot = Isometry3::translation(0.0, 0.0, -cfg.calf_len);
        (abduct * hip * knee * foot).translation.vector
    }

    fn random_q(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::new(
            rng.random_range(-0.8..0.8),
            rng.random_range(-1.5..1.5),
            rng.random_range(-2.6..-0.1),
        )
    }

    #[test]
    fn zero_configuration_hangs_straight_down() {
        let cfg = LegConfig::default();
        let p = cfg.forward_kinematics(&Vector3::zeros());
        assert_eq!(p, Vector3::new(0.0, -cfg.hip_offset, -(cfg.thigh_len + cfg.calf_len)));
    }

    #[test]
    fn single_pendulum_at_right_angle() {
        let cfg = LegConfig {
            calf_len: 0.0,
            ..LegConfig::default()
        };
        let q = Vector3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let p = cfg.forward_kinematics(&q);
        let oracle = fk_chain(&cfg, &q);
        assert_relative_eq!(p, oracle, epsilon = 1e-15);
        assert_relative_eq!(p, Vector3::new(-cfg.thigh_len, -cfg.hip_offset, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn fk_matches_transform_chain() {
        let cfg = LegConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let q = random_q(&mut rng);
            assert!((cfg.forward_kinematics(&q) - fk_chain(&cfg, &q)).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let cfg = LegConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = 1e-6;
        for _ in 0..100 {
            let q = random_q(&mut rng);
            let j = cfg.jacobian(&q);
            for i in 0..3 {
                let mut e = Vector3::zeros();
                e[i] = eps;
                let fd = (fk_chain(&cfg, &(q + e)) - fk_chain(&cfg, &(q - e))) / (2.0 * eps);
                let col = j.column(i).into_owned();
                assert!((col - fd).norm() <= 1e-5 * fd.norm().max(1e-3), "column {i} at {q:?}");
            }
        }
    }

    #[test]
    fn one_link_column_norm_and_singularity() {
        let cfg = LegConfig {
            calf_len: 0.0,
            ..LegConfig::default()
        };
        let j = cfg.jacobian(&Vector3::new(0.0, 0.7, 0.0));
        assert_relative_eq!(j.column(1).norm(), cfg.thigh_len, epsilon = 1e-15);

        let full = LegConfig::default();
        assert!(full.jacobian(&Vector3::zeros()).determinant().abs() < 1e-15);
    }

    #[test]
    fn ik_round_trip_same_branch() {
        let cfg = LegConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 100 {
            let q = random_q(&mut rng);
            // the solver's branch keeps the foot below the hip in the leg plane
            let z_l = -cfg.thigh_len * q[1].cos() - cfg.calf_len * (q[1] + q[2]).cos();
            if z_l > -0.01 {
                continue;
            }
            checked += 1;
            let p = cfg.forward_kinematics(&q);
            let q_ik = cfg.inverse_kinematics(&p, IkMode::Strict).unwrap();
            assert!((q_ik - q).norm() < 1e-9, "{q:?} vs {q_ik:?}");
            assert!((cfg.forward_kinematics(&q_ik) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn ik_full_extension_and_unreachable() {
        let cfg = LegConfig::default();
        let p = cfg.forward_kinematics(&Vector3::zeros());
        let q = cfg.inverse_kinematics(&p, IkMode::Strict).unwrap();
        assert!(q.norm() < 1e-6, "{q:?}");
        assert!(matches!(cfg.check_interior(&p), Err(LegError::Singular { .. })));

        let far = Vector3::new(0.0, 0.0, -1.5 * cfg.max_reach());
        assert!(matches!(
            cfg.inverse_kinematics(&far, IkMode::Strict),
            Err(LegError::UnreachableTarget { .. })
        ));
        let q = cfg.inverse_kinematics(&far, IkMode::Clamp).unwrap();
        let boundary = cfg.forward_kinematics(&q);
        assert!(boundary.norm() <= cfg.max_reach() + 1e-12);
        assert!(cfg.check_interior(&crate::handshake::NominalPose::default().position()).is_ok());
    }

    #[test]
    fn zero_error_gives_zero_torque() {
        let cfg = LegConfig::default();
        let q = Vector3::new(0.1, 0.5, -1.2);
        let state = JointState { q, qdot: Vector3::zeros() };
        let p = cfg.forward_kinematics(&q);
        let foot = FootState { p, v: Vector3::zeros() };
        let tau = cartesian_pd_torque(&state, &foot, &p, &ControllerGains::from_stiffness(115.0), &cfg);
        assert_eq!(tau, Vector3::zeros());
    }

    #[test]
    fn damping_gains_follow_stiffness() {
        let g = ControllerGains::from_stiffness(100.0);
        assert_relative_eq!(g.kd_cart, Matrix3::from_diagonal_element(2.0), epsilon = 1e-12);
        assert_eq!(g.kd_joint, Matrix3::from_diagonal_element(0.8));
    }

    #[test]
    fn one_link_torque_is_k_times_length_times_error() {
        let cfg = LegConfig {
            calf_len: 0.0,
            ..LegConfig::default()
        };
        let k = 80.0;
        let q = Vector3::zeros();
        let p = cfg.forward_kinematics(&q);
        let err = 0.01;
        // x is normal to the straight-down link
        let target = p + Vector3::new(err, 0.0, 0.0);
        let tau = cartesian_pd_torque(
            &JointState::default(),
            &FootState { p, v: Vector3::zeros() },
            &target,
            &ControllerGains::from_stiffness(k),
            &cfg,
        );
        assert_relative_eq!(tau[1], -k * cfg.thigh_len * err, epsilon = 1e-12);
        assert_eq!(tau[2], 0.0);
    }

    #[test]
    fn torque_is_linear_in_error_and_power_balances() {
        let cfg = LegConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gains = ControllerGains::from_stiffness(150.0);
        for _ in 0..50 {
            let q = random_q(&mut rng);
            let p = cfg.forward_kinematics(&q);
            let e = Vector3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
            let state = JointState { q, qdot: Vector3::zeros() };
            let foot = FootState { p, v: Vector3::zeros() };
            let t1 = cartesian_pd_torque(&state, &foot, &(p + e), &gains, &cfg);
            let t2 = cartesian_pd_torque(&state, &foot, &(p + 2.0 * e), &gains, &cfg);
            assert!((t2 - 2.0 * t1).norm() < 1e-12);

            let force = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let qdot = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let j = cfg.jacobian(&q);
            let lhs = force.dot(&(j * qdot));
            let rhs = (j.transpose() * force).dot(&qdot);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
