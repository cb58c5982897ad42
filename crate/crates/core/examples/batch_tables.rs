//! Many synthetic users through the full experiment; prints the category
//! table and the optimized parameter spread.
//!
//!     cargo run -p pawshake --example batch_tables -- population 25

use pawshake::config::Config;
use pawshake::protocol::run_batch;

fn main() {
    let mut args = std::env::args().skip(1);
    let oracle = args.next().unwrap_or_else(|| "population".into());
    let n: usize = args.next().map(|s| s.parse().expect("session count")).unwrap_or(25);
    let (summary, _) = run_batch(&Config::default(), &oracle, n, 1).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let show = |m: pawshake::protocol::MeanStd| match (m.mean, m.std) {
        (Some(a), Some(b)) => format!("{a:>7.2} ± {b:<6.2}"),
        (Some(a), None) => format!("{a:>7.2}         "),
        _ => format!("{:>16}", "-"),
    };
    println!("{:<10} {:>16} {:>16} {:>16} {:>16}", "", "amp err [%]", "freq err [%]", "DTW [m]", "torque [Nm]");
    for c in &summary.categories {
        println!(
            "{:<10} {} {} {} {}",
            c.category,
            show(c.amplitude_error_pct),
            show(c.frequency_error_pct),
            show(c.dtw_m),
            show(c.mean_torque_nm)
        );
    }
    let p = &summary.optimized_params;
    println!("amplitude [cm] {}", show(p.amplitude_cm));
    println!("frequency [Hz] {}", show(p.frequency_hz));
    println!("stiffness      {}", show(p.stiffness));
    println!("validation win rate {}", show(summary.validation_win_rate));
}
