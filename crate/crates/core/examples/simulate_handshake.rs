//! One full grasp-shake-return cycle; writes the log as CSV to stdout and
//! the metrics to stderr.
//!
//!     cargo run -p pawshake --example simulate_handshake > shake.csv

use pawshake::handshake::HandshakeParams;
use pawshake::metrics::{evaluate, MetricsConfig};
use pawshake::sim::{run_handshake, HumanHandModel, Robot, SimConfig};

fn main() {
    let params = HandshakeParams::new(6.0, 1.8, 90.0);
    let hand = HumanHandModel {
        intent_amplitude: 0.05,
        intent_frequency: 2.0,
        grip_stiffness: 250.0,
        grip_damping: 5.0,
        ..HumanHandModel::neutral()
    };
    let log = run_handshake(&Robot::default(), &SimConfig::default(), &params, &hand, 42).expect("simulation runs");
    log.write_csv(std::io::stdout().lock()).expect("stdout");
    let m = evaluate(&log, &MetricsConfig::default());
    eprintln!("grasp {:?}, {} samples, sha256 {}", log.grasp, log.len(), log.csv_sha256());
    eprintln!("{}", serde_json::to_string_pretty(&m).unwrap());
}
