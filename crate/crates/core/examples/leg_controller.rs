//! Kinematics and the Cartesian PD law for the front-right leg.

use nalgebra::Vector3;
use pawshake::handshake::NominalPose;
use pawshake::leg::{cartesian_pd_torque, ControllerGains, FootState, IkMode, JointState, LegConfig};

fn main() {
    let leg = LegConfig::default();
    let nominal = NominalPose::default().position();
    let q = leg.inverse_kinematics(&nominal, IkMode::Strict).expect("nominal pose is reachable");
    println!("nominal foot {:?}", nominal.as_slice());
    println!("joint angles {:?}", q.as_slice());
    println!("round trip error {:.2e} m", (leg.forward_kinematics(&q) - nominal).norm());

    let j = leg.jacobian(&q);
    println!("jacobian det {:.5}", j.determinant());

    // Push the foot 1 cm below its target and let the law answer.
    for k in [30.0, 115.0, 200.0] {
        let gains = ControllerGains::from_stiffness(k);
        let foot = FootState {
            p: nominal - Vector3::new(0.0, 0.0, 0.01),
            v: Vector3::zeros(),
        };
        let state = JointState { q, qdot: Vector3::zeros() };
        let tau = cartesian_pd_torque(&state, &foot, &nominal, &gains, &leg);
        println!("k {k:>5}: tau {:>8.4} {:>8.4} {:>8.4} N·m", tau.x, tau.y, tau.z);
    }
}
