//! Each synchrony metric on textbook signals.

use std::f64::consts::TAU;

use pawshake::metrics::{dominant_frequency, dtw, oscillation_amplitude, pearson, plv, MetricsConfig};

fn sine(f: f64, amp: f64, phase: f64) -> Vec<f64> {
    (0..10_000).map(|i| amp * (TAU * f * i as f64 * 1e-3 + phase).sin()).collect()
}

fn main() {
    let cfg = MetricsConfig::default();
    let a = sine(2.0, 0.05, 0.0);
    let b = sine(2.0, 0.03, 0.8);
    let c = sine(3.1, 0.05, 0.0);

    println!("amplitude of a       {:.4} m", oscillation_amplitude(&a, cfg.prominence_m));
    println!("frequency of c       {:.3} Hz", dominant_frequency(&c, 1e-3, &cfg).unwrap());
    println!("plv(a, a)            {:.4}", plv(&a, &a).unwrap());
    println!("plv(a, b) offset     {:.4}", plv(&a, &b).unwrap());
    println!("plv(a, c) detuned    {:.4}", plv(&a, &c).unwrap());
    println!("pearson(a, b)        {:.4}", pearson(&a, &b).unwrap());
    println!("dtw([0,1,2],[0,0,1,2]) {}", dtw(&[0.0, 1.0, 2.0], &[0.0, 0.0, 1.0, 2.0]).unwrap());
}
