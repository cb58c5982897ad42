//! Foot targets for one handshake, sampled at 20 Hz, at two body pitches.
//!
//!     cargo run -p pawshake --example handshake_trajectory -- 6 2.5

use pawshake::handshake::{foot_target, BodyPose, HandshakeParams, NominalPose, ParamRanges};

fn main() {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let amplitude_cm = args.next().unwrap_or(5.0);
    let frequency_hz = args.next().unwrap_or(2.0);
    let params = HandshakeParams::new(amplitude_cm, frequency_hz, 115.0);
    if let Err(e) = params.validate(&ParamRanges::default()) {
        eprintln!("{e}");
        std::process::exit(2);
    }
    let nominal = NominalPose::default();

    for pitch in [0.0, 0.6] {
        let body = BodyPose::new(pitch).unwrap();
        println!("pitch {pitch:.1} rad");
        println!("{:>6} {:>9} {:>9} {:>9}", "t", "x", "y", "z");
        for i in 0..=(params.duration_s * 20.0) as usize {
            let t = i as f64 / 20.0;
            let p = foot_target(&params, &nominal, &body, t);
            println!("{t:>6.2} {:>9.4} {:>9.4} {:>9.4}", p.x, p.y, p.z);
        }
    }
}
