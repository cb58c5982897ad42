//! The 1 kHz handshake loop.
//!
//! The foot is a point mass in the leg frame driven by the Cartesian PD
//! force, an optional human hand (spring-damper towards the hand's intended
//! path) and gravity:
//!
//! ```text
//! m p̈ = K_p (p_d − p) − K_d v + g_h (h(t) − p) − c_h v + m g
//! ```
//!
//! Both spring-damper pairs are integrated implicitly and gravity
//! explicitly, so the scheme is dissipative for any step size. Joint
//! torques are reported through `Jᵀ` plus the joint damping term.
//!
//! The robot walks the state machine Rest → Sit → Wait → Shake → Return →
//! Wait. Shake is entered only from Wait on a grasp event: either a torque
//! rise detected by [`GraspRule`] or an event injected through a
//! [`GraspSender`].

mod log;

pub use log::{HandshakeLog, LogEnvelope, LogError, LOG_CSV_HEADER};

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::sync::mpsc;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::handshake::{foot_target, BodyPose, HandshakeParams, Interval, NominalPose, ParamError};
use crate::leg::{ControllerGains, FootState, GainRatios, IkMode, JointState, LegConfig, LegError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Leg(#[from] LegError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("numerical divergence at t = {t:.4} s (|p| = {p_norm:.3e} m, |v| = {v_norm:.3e} m/s)")]
    NumericalDivergence { t: f64, p_norm: f64, v_norm: f64 },
    #[error("nominal torque of joint {joint} is {value:.4} N·m, below the detection floor")]
    NominalTooSmall { joint: usize, value: f64 },
    #[error("no handshake completed within {0} s of simulated time")]
    Stalled(f64),
}

/// Robot-side setup shared by every handshake of a session.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Robot {
    pub leg: LegConfig,
    pub gains: GainRatios,
    pub nominal: NominalPose,
    pub body: BodyPose,
}

impl Robot {
    pub fn validate(&self) -> Result<(), SimError> {
        self.leg.validate()?;
        self.leg.check_interior(&self.nominal.position())?;
        if !(self.gains.kd_ratio >= 0.0 && self.gains.kd_joint >= 0.0) {
            return Err(SimError::InvalidConfig("gain ratios must be nonnegative".into()));
        }
        Ok(())
    }

    /// Gravity acceleration in the leg frame.
    pub fn gravity(&self) -> Vector3<f64> {
        -self.leg.gravity * self.body.world_up()
    }

    /// Static foot position holding the nominal target under stiffness `k`.
    pub fn rest_position(&self, k: f64) -> Vector3<f64> {
        self.nominal.position() + self.leg.foot_mass * self.gravity() / k
    }
}

/// Synthetic stand-in for the human hand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanHandModel {
    /// World-vertical shaking amplitude the human intends (m).
    pub intent_amplitude: f64,
    pub intent_frequency: f64,
    pub intent_phase: f64,
    /// N/m. Zero is a fully passive human.
    pub grip_stiffness: f64,
    /// N·s/m.
    pub grip_damping: f64,
    /// Drift of the hand's shaking center along the world forward axis (m/s).
    pub drift_rate: f64,
    /// How far the hand pulls the foot towards the ground when grasping (m).
    #[serde(default = "default_grasp_pull")]
    pub grasp_pull: f64,
}

fn default_grasp_pull() -> f64 {
    0.04
}

impl HumanHandModel {
    pub fn passive() -> Self {
        Self {
            intent_amplitude: 0.0,
            intent_frequency: 0.0,
            intent_phase: 0.0,
            grip_stiffness: 0.0,
            grip_damping: 0.0,
            drift_rate: 0.0,
            grasp_pull: 0.0,
        }
    }

    /// A compliant hand with no shaking intent of its own.
    pub fn neutral() -> Self {
        Self {
            grip_stiffness: 50.0,
            grip_damping: 1.0,
            grasp_pull: default_grasp_pull(),
            ..Self::passive()
        }
    }

    /// A hand that intends exactly the robot's trajectory.
    pub fn matched(params: &HandshakeParams, grip_stiffness: f64) -> Self {
        Self {
            intent_amplitude: params.amplitude_m,
            intent_frequency: params.frequency_hz,
            grip_stiffness,
            grip_damping: 0.02 * grip_stiffness,
            grasp_pull: default_grasp_pull(),
            ..Self::passive()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("intent_amplitude", self.intent_amplitude),
            ("intent_frequency", self.intent_frequency),
            ("intent_phase", self.intent_phase),
            ("grip_stiffness", self.grip_stiffness),
            ("grip_damping", self.grip_damping),
            ("drift_rate", self.drift_rate),
            ("grasp_pull", self.grasp_pull),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidConfig(format!("hand {name} must be finite and nonnegative")));
            }
        }
        Ok(())
    }

    fn shake_offset(&self, t: f64, up: &Vector3<f64>, forward: &Vector3<f64>) -> Vector3<f64> {
        let wave = self.intent_amplitude * (TAU * self.intent_frequency * t + self.intent_phase).sin();
        wave * up + self.drift_rate * t * forward
    }
}

/// Torque-based grasp detection: a grasp is declared when at least
/// `min_joints` joints exceed `ratio` times their nominal torque.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspRule {
    pub ratio: f64,
    pub min_joints: usize,
    /// Nominal torques below this (N·m) make the ratio meaningless.
    pub torque_floor: f64,
}

impl Default for GraspRule {
    fn default() -> Self {
        Self {
            ratio: 1.5,
            min_joints: 2,
            torque_floor: 0.05,
        }
    }
}

impl GraspRule {
    pub fn detect(&self, current: &Vector3<f64>, nominal: &Vector3<f64>) -> Result<bool, SimError> {
        if let Some((joint, value)) = nominal
            .iter()
            .map(|t| t.abs())
            .enumerate()
            .find(|(_, t)| *t < self.torque_floor)
        {
            return Err(SimError::NominalTooSmall { joint, value });
        }
        let exceeded = current
            .iter()
            .zip(nominal.iter())
            .filter(|(c, n)| c.abs() >= self.ratio * n.abs())
            .count();
        Ok(exceeded >= self.min_joints)
    }
}

/// [`GraspRule::detect`] with the default 150 % / two-of-three rule.
pub fn detect_grasp(current: &Vector3<f64>, nominal: &Vector3<f64>) -> Result<bool, SimError> {
    GraspRule::default().detect(current, nominal)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "snake_case")]
pub enum ShakePhase {
    Rest,
    Sit,
    Wait,
    Shake { elapsed_s: f64 },
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspSource {
    /// Torque rise detected by the grasp rule.
    Detected,
    /// Injected from outside the loop (operator or UI trigger).
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraspEvent;

/// Handle for injecting grasp events into a running simulation from any
/// thread. At most one event is consumed per Wait phase; the rest are
/// discarded when the phase ends.
#[derive(Debug, Clone)]
pub struct GraspSender(mpsc::Sender<GraspEvent>);

impl GraspSender {
    /// Returns `false` once the simulation has been dropped.
    pub fn send(&self) -> bool {
        self.0.send(GraspEvent).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    /// Cartesian stiffness held while waiting and returning.
    pub wait_stiffness: f64,
    /// Length of the running mean defining the nominal torque (s).
    pub grasp_window_s: f64,
    pub grasp: GraspRule,
    /// When the simulated human grasps, measured from Wait entry (s).
    pub grasp_delay_s: Interval,
    /// Undetected grasps fall back to an external event after this long (s).
    pub grasp_timeout_s: f64,
    pub return_epsilon: f64,
    pub return_timeout_s: f64,
    pub rest_s: f64,
    pub sit_s: f64,
    pub max_position_m: f64,
    pub max_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.001,
            wait_stiffness: 115.0,
            grasp_window_s: 0.5,
            grasp: GraspRule::default(),
            grasp_delay_s: Interval::new(0.6, 1.1),
            grasp_timeout_s: 1.0,
            return_epsilon: 0.005,
            return_timeout_s: 3.0,
            rest_s: 0.2,
            sit_s: 0.3,
            max_position_m: 2.0,
            max_speed: 50.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("dt", self.dt),
            ("wait_stiffness", self.wait_stiffness),
            ("grasp_window_s", self.grasp_window_s),
            ("grasp_timeout_s", self.grasp_timeout_s),
            ("return_epsilon", self.return_epsilon),
            ("return_timeout_s", self.return_timeout_s),
            ("max_position_m", self.max_position_m),
            ("max_speed", self.max_speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.rest_s >= 0.0 && self.sit_s >= 0.0) {
            return Err(SimError::InvalidConfig("rest_s and sit_s must be nonnegative".into()));
        }
        if !(self.grasp_delay_s.min >= 0.0 && self.grasp_delay_s.max >= self.grasp_delay_s.min) {
            return Err(SimError::InvalidConfig("grasp_delay_s must be a nonnegative interval".into()));
        }
        if self.grasp.ratio <= 1.0 || self.grasp.min_joints == 0 || self.grasp.min_joints > 3 {
            return Err(SimError::InvalidConfig("grasp rule must have ratio > 1 and 1..=3 joints".into()));
        }
        Ok(())
    }

    fn steps(&self, seconds: f64) -> u64 {
        (seconds / self.dt).round() as u64
    }
}

/// One sample of the loop, taken before the state is advanced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    pub desired: Vector3<f64>,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub torque: Vector3<f64>,
    pub joint_velocity: Vector3<f64>,
}

#[derive(Debug, Clone, Copy)]
struct HandContact {
    anchor: Vector3<f64>,
    steps: u64,
}

/// One simulated leg and hand. Single-threaded; owns all of its state.
pub struct Simulation {
    robot: Robot,
    cfg: SimConfig,
    params: HandshakeParams,
    hand: HumanHandModel,
    phase: ShakePhase,
    phase_steps: u64,
    foot: FootState,
    stand_position: Vector3<f64>,
    rest_position: Vector3<f64>,
    contact: Option<HandContact>,
    torque_window: VecDeque<Vector3<f64>>,
    window_sum: Vector3<f64>,
    window_len: usize,
    pending_grasp: Option<GraspSource>,
    grasp_tx: mpsc::Sender<GraspEvent>,
    grasp_rx: mpsc::Receiver<GraspEvent>,
    recorder: Option<HandshakeLog>,
    completed: Option<HandshakeLog>,
    seed: u64,
}

impl Simulation {
    pub fn new(
        robot: Robot,
        cfg: SimConfig,
        params: HandshakeParams,
        hand: HumanHandModel,
    ) -> Result<Self, SimError> {
        robot.validate()?;
        cfg.validate()?;
        hand.validate()?;
        if !(params.stiffness.is_finite() && params.stiffness > 0.0) {
            return Err(SimError::InvalidConfig("handshake stiffness must be positive".into()));
        }
        if !(params.duration_s > 0.0 && params.duration_s.is_finite()) {
            return Err(ParamError::NonPositiveDuration(params.duration_s).into());
        }
        let rest_position = robot.rest_position(cfg.wait_stiffness);
        robot.leg.inverse_kinematics(&rest_position, IkMode::Strict)?;
        let stand_position = robot.leg.forward_kinematics(&Vector3::new(0.0, 0.6, -1.2));
        let (grasp_tx, grasp_rx) = mpsc::channel();
        Ok(Self {
            robot,
            cfg,
            params,
            hand,
            phase: ShakePhase::Rest,
            phase_steps: 0,
            foot: FootState {
                p: stand_position,
                v: Vector3::zeros(),
            },
            stand_position,
            rest_position,
            contact: None,
            torque_window: VecDeque::new(),
            window_sum: Vector3::zeros(),
            window_len: cfg.steps(cfg.grasp_window_s).max(1) as usize,
            pending_grasp: None,
            grasp_tx,
            grasp_rx,
            recorder: None,
            completed: None,
            seed: 0,
        })
    }

    /// Start directly in Wait at the static rest pose, skipping Rest and Sit.
    pub fn waiting(
        robot: Robot,
        cfg: SimConfig,
        params: HandshakeParams,
        hand: HumanHandModel,
    ) -> Result<Self, SimError> {
        let mut sim = Self::new(robot, cfg, params, hand)?;
        sim.enter_wait();
        sim.foot = FootState {
            p: sim.rest_position,
            v: Vector3::zeros(),
        };
        Ok(sim)
    }

    /// Seed recorded in produced logs.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn phase(&self) -> ShakePhase {
        self.phase
    }

    pub fn foot(&self) -> &FootState {
        &self.foot
    }

    pub fn set_foot(&mut self, foot: FootState) {
        self.foot = foot;
    }

    pub fn rest_position(&self) -> Vector3<f64> {
        self.rest_position
    }

    pub fn hand_attached(&self) -> bool {
        self.contact.is_some()
    }

    /// Parameters used for the next handshake.
    pub fn set_params(&mut self, params: HandshakeParams) {
        self.params = params;
    }

    pub fn grasp_sender(&self) -> GraspSender {
        GraspSender(self.grasp_tx.clone())
    }

    /// Takes the log of the most recently finished shake.
    pub fn take_log(&mut self) -> Option<HandshakeLog> {
        self.completed.take()
    }

    /// The simulated human closes their hand around the foot and pulls it
    /// towards the ground. Only meaningful in Wait.
    pub fn grasp_by_hand(&mut self) {
        if self.phase == ShakePhase::Wait && self.contact.is_none() && self.hand.grip_stiffness > 0.0 {
            self.contact = Some(HandContact {
                anchor: self.foot.p,
                steps: 0,
            });
        }
    }

    /// Time since the human grasped, if they have.
    pub fn contact_time(&self) -> Option<f64> {
        self.contact.map(|c| c.steps as f64 * self.cfg.dt)
    }

    pub fn phase_time(&self) -> f64 {
        self.phase_steps as f64 * self.cfg.dt
    }

    fn shake_samples(&self) -> u64 {
        self.cfg.steps(self.params.duration_s)
    }

    fn shake_time(&self) -> f64 {
        match self.phase {
            ShakePhase::Shake { .. } => self.phase_steps as f64 * self.cfg.dt,
            _ => 0.0,
        }
    }

    fn stiffness(&self) -> f64 {
        match self.phase {
            ShakePhase::Shake { .. } => self.params.stiffness,
            _ => self.cfg.wait_stiffness,
        }
    }

    fn target_at(&self, t: f64) -> Vector3<f64> {
        match self.phase {
            ShakePhase::Shake { .. } => foot_target(&self.params, &self.robot.nominal, &self.robot.body, t),
            _ => self.robot.nominal.position(),
        }
    }

    fn forward_axis(&self) -> Vector3<f64> {
        let (s, c) = self.robot.body.pitch_rad().sin_cos();
        Vector3::new(c, 0.0, s)
    }

    /// Where the hand pulls the foot at shake time `t`.
    fn hand_target(&self, contact: &HandContact, t: f64) -> Vector3<f64> {
        let up = self.robot.body.world_up();
        match self.phase {
            ShakePhase::Shake { .. } => contact.anchor + self.hand.shake_offset(t, &up, &self.forward_axis()),
            ShakePhase::Return => {
                contact.anchor + self.hand.drift_rate * self.params.duration_s * self.forward_axis()
            }
            _ => contact.anchor - self.hand.grasp_pull * up,
        }
    }

    fn joint_state(&self) -> JointState {
        let leg = &self.robot.leg;
        let q = leg
            .inverse_kinematics(&self.foot.p, IkMode::Clamp)
            .unwrap_or_else(|_| Vector3::zeros());
        let qdot = leg.joint_velocity(&q, &self.foot.v).unwrap_or_else(Vector3::zeros);
        JointState { q, qdot }
    }

    /// Joint torques of the current state.
    pub fn torque(&self) -> Vector3<f64> {
        let t = self.shake_time();
        let gains = ControllerGains::with_ratios(self.stiffness(), &self.robot.gains);
        let state = self.joint_state();
        crate::leg::cartesian_pd_torque(&state, &self.foot, &self.target_at(t), &gains, &self.robot.leg)
    }

    /// Advance the foot by `dt`. Returns the sample describing the state
    /// *before* the update.
    pub fn step(&mut self, dt: f64) -> Result<StepSample, SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("step size must be positive, got {dt}")));
        }
        let t = self.shake_time();
        let desired = self.target_at(t);
        let gains = ControllerGains::with_ratios(self.stiffness(), &self.robot.gains);
        let state = self.joint_state();
        let torque = crate::leg::cartesian_pd_torque(&state, &self.foot, &desired, &gains, &self.robot.leg);
        let sample = StepSample {
            desired,
            position: self.foot.p,
            velocity: self.foot.v,
            torque,
            joint_velocity: state.qdot,
        };

        match self.phase {
            ShakePhase::Rest => {}
            ShakePhase::Sit => {
                let total = self.cfg.steps(self.cfg.sit_s).max(1) as f64;
                let s = ((self.phase_steps + 1) as f64 / total).min(1.0);
                let next = self.stand_position.lerp(&self.rest_position, s);
                self.foot.v = (next - self.foot.p) / dt;
                self.foot.p = next;
            }
            _ => self.integrate(dt, t + dt, &gains)?,
        }

        if self.phase == ShakePhase::Wait {
            self.observe_wait_torque(&torque);
        }
        if let Some(rec) = self.recorder.as_mut() {
            rec.desired_path.push(sample.desired);
            rec.actual_path.push(sample.position);
            rec.torques.push(sample.torque);
            rec.joint_vel.push(sample.joint_velocity);
        }
        if let Some(c) = self.contact.as_mut() {
            c.steps += 1;
        }
        self.phase_steps += 1;
        if let ShakePhase::Shake { elapsed_s } = &mut self.phase {
            *elapsed_s = self.phase_steps as f64 * self.cfg.dt;
        }
        Ok(sample)
    }

    fn integrate(&mut self, dt: f64, t_next: f64, gains: &ControllerGains) -> Result<(), SimError> {
        let m = self.robot.leg.foot_mass;
        let target = self.target_at(t_next);
        let (hand_k, hand_c, hand_target) = match self.contact {
            Some(c) => (
                self.hand.grip_stiffness,
                self.hand.grip_damping,
                self.hand_target(&c, t_next),
            ),
            None => (0.0, 0.0, self.foot.p),
        };
        let p = self.foot.p;
        let v = self.foot.v;
        let stiff = gains.kp_cart + Matrix3::from_diagonal_element(hand_k);
        let damp = gains.kd_cart + Matrix3::from_diagonal_element(hand_c);
        let lhs = Matrix3::from_diagonal_element(m) + dt * damp + dt * dt * stiff;
        let rhs = m * v
            + dt * (gains.kp_cart * (target - p) + hand_k * (hand_target - p) + m * self.robot.gravity());
        let v_next = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SimError::InvalidConfig("singular integration matrix".into()))?;
        let p_next = p + dt * v_next;
        if !(p_next.norm() <= self.cfg.max_position_m && v_next.norm() <= self.cfg.max_speed) {
            return Err(SimError::NumericalDivergence {
                t: t_next,
                p_norm: p_next.norm(),
                v_norm: v_next.norm(),
            });
        }
        self.foot = FootState { p: p_next, v: v_next };
        Ok(())
    }

    fn observe_wait_torque(&mut self, torque: &Vector3<f64>) {
        let abs = torque.abs();
        if self.torque_window.len() == self.window_len && self.pending_grasp.is_none() {
            let nominal = self.window_sum / self.window_len as f64;
            // a nominal below the floor cannot be thresholded; the external
            // trigger is the only way out of Wait then
            if let Ok(true) = self.cfg.grasp.detect(&abs, &nominal) {
                self.pending_grasp = Some(GraspSource::Detected);
            }
        }
        self.torque_window.push_back(abs);
        self.window_sum += abs;
        if self.torque_window.len() > self.window_len {
            if let Some(old) = self.torque_window.pop_front() {
                self.window_sum -= old;
            }
        }
    }

    fn enter_wait(&mut self) {
        self.phase = ShakePhase::Wait;
        self.phase_steps = 0;
        self.torque_window.clear();
        self.window_sum = Vector3::zeros();
        self.pending_grasp = None;
        while self.grasp_rx.try_recv().is_ok() {}
    }

    /// Evaluate phase transitions after a step.
    pub fn advance_phase(&mut self) -> ShakePhase {
        let elapsed = self.phase_steps as f64 * self.cfg.dt;
        match self.phase {
            ShakePhase::Rest => {
                if elapsed >= self.cfg.rest_s {
                    self.phase = ShakePhase::Sit;
                    self.phase_steps = 0;
                }
            }
            ShakePhase::Sit => {
                if self.phase_steps >= self.cfg.steps(self.cfg.sit_s) {
                    self.foot = FootState {
                        p: self.rest_position,
                        v: Vector3::zeros(),
                    };
                    self.enter_wait();
                }
            }
            ShakePhase::Wait => {
                let grasp = self
                    .pending_grasp
                    .take()
                    .or_else(|| self.grasp_rx.try_recv().ok().map(|_| GraspSource::External));
                if let Some(source) = grasp {
                    while self.grasp_rx.try_recv().is_ok() {}
                    self.start_shake(source);
                }
            }
            ShakePhase::Shake { .. } => {
                if self.phase_steps >= self.shake_samples() {
                    if let Some(log) = self.recorder.take() {
                        self.completed = Some(log);
                    }
                    self.phase = ShakePhase::Return;
                    self.phase_steps = 0;
                }
            }
            ShakePhase::Return => {
                let settled = (self.foot.p - self.rest_position).norm() < self.cfg.return_epsilon;
                if settled || elapsed >= self.cfg.return_timeout_s {
                    self.contact = None;
                    self.enter_wait();
                }
            }
        }
        self.phase
    }

    fn start_shake(&mut self, source: GraspSource) {
        if self.contact.is_none() && self.hand.grip_stiffness > 0.0 {
            self.contact = Some(HandContact {
                anchor: self.foot.p,
                steps: 0,
            });
        }
        self.phase = ShakePhase::Shake { elapsed_s: 0.0 };
        self.phase_steps = 0;
        let n = self.shake_samples() as usize;
        self.recorder = Some(HandshakeLog {
                dt: self.cfg.dt,
                params: self.params,
                seed: self.seed,
                pitch_rad: self.robot.body.pitch_rad(),
                grasp: source,
                desired_path: Vec::with_capacity(n),
                actual_path: Vec::with_capacity(n),
                torques: Vec::with_capacity(n),
                joint_vel: Vec::with_capacity(n),
        });
    }
}

/// Simulate one complete cycle (Rest, Sit, Wait, grasp, Shake, Return) and
/// return the log of the shake window.
///
/// The seed sets when the simulated human grasps. A passive hand cannot
/// raise the joint torques, so its grasp arrives as an external event, as
/// does any grasp the torque rule misses within `grasp_timeout_s`.
pub fn run_handshake(
    robot: &Robot,
    cfg: &SimConfig,
    params: &HandshakeParams,
    hand: &HumanHandModel,
    seed: u64,
) -> Result<HandshakeLog, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delay = if cfg.grasp_delay_s.width() > 0.0 {
        rng.random_range(cfg.grasp_delay_s.min..cfg.grasp_delay_s.max)
    } else {
        cfg.grasp_delay_s.min
    };
    let mut sim = Simulation::new(*robot, *cfg, *params, *hand)?.with_seed(seed);
    let trigger = sim.grasp_sender();
    let budget = cfg.rest_s
        + cfg.sit_s
        + delay
        + cfg.grasp_timeout_s
        + params.duration_s
        + cfg.return_timeout_s
        + 1.0;
    let max_steps = cfg.steps(budget);
    let mut injected = false;
    let mut shaken = false;
    for _ in 0..max_steps {
        sim.step(cfg.dt)?;
        let phase = sim.advance_phase();
        match phase {
            ShakePhase::Wait if shaken => break,
            ShakePhase::Wait => {
                if !sim.hand_attached() && sim.phase_time() >= delay {
                    if hand.grip_stiffness > 0.0 {
                        sim.grasp_by_hand();
                    } else if !injected {
                        injected = trigger.send();
                    }
                }
                if !injected && sim.contact_time().is_some_and(|t| t >= cfg.grasp_timeout_s) {
                    injected = trigger.send();
                }
            }
            ShakePhase::Shake { .. } | ShakePhase::Return => shaken = true,
            _ => {}
        }
    }
    sim.take_log().ok_or(SimError::Stalled(budget))
}
