//! A hand that shakes the way the robot does costs the robot little torque.
//! Compare it with a hand 0.5 Hz off and one shaking in anti-phase.

use pawshake::handshake::HandshakeParams;
use pawshake::metrics::MetricsConfig;
use pawshake::sim::{Robot, SimConfig};
use pawshake::synchrony::{compare_hands, SynchronyConfig};

fn main() {
    let params = HandshakeParams::new(5.0, 2.0, 115.0);
    let cfg = SynchronyConfig::default();
    let stats = compare_hands(&Robot::default(), &SimConfig::default(), &MetricsConfig::default(), &params, &cfg)
        .expect("simulation runs");
    println!("{} seeds, grip {} N/m", cfg.seeds, cfg.grip_stiffness);
    println!("{:<11} {:>10} {:>12} {:>6}", "hand", "DTW [m]", "torque [Nm]", "PLV");
    for s in &stats {
        println!(
            "{:<11} {:>10.3} {:>12.3} {:>6.3}",
            format!("{:?}", s.variant),
            s.dtw_m.mean.unwrap_or(f64::NAN),
            s.mean_torque_nm.mean.unwrap_or(f64::NAN),
            s.plv.mean.unwrap_or(f64::NAN)
        );
    }
}
