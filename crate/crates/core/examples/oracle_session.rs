//! The whole experiment for one synthetic user, written to a directory.
//!
//!     cargo run -p pawshake --example oracle_session -- ideal out/session

use std::path::PathBuf;

use pawshake::config::Config;
use pawshake::protocol::{run_session, write_session, UserSource};

fn main() {
    let mut args = std::env::args().skip(1);
    let oracle = args.next().unwrap_or_else(|| "ideal".into());
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "target/oracle_session".into()));
    let config = Config::default();
    let outcome = run_session(&config, 7, "demo", &UserSource::Oracle(oracle)).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(2);
    });
    let files = write_session(&outcome, &dir).expect("writable output directory");
    let r = &outcome.report;
    println!("session {} with {} files in {}", r.session_id, files.len(), dir.display());
    println!("optimized candidate {}: {:?}", r.optimized_index, r.optimized.params);
    println!("optimized won {:.0}% of validation comparisons", 100.0 * r.win_rate());
}
