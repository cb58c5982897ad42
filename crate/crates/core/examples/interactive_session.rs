//! Driving a session one answer at a time, the way the service does.
//! Answers come from stdin: `l` or `r` per comparison, then a rating.

use std::io::BufRead;

use pawshake::config::Config;
use pawshake::pref::Side;
use pawshake::protocol::{Satisfaction, Session, SessionPhase, UserTag};

fn main() {
    let config = Config::default();
    let mut session = Session::new(&config, 3, "stdin", UserTag::Interactive, config.interactive_hand).unwrap();
    let mut lines = std::io::stdin().lock().lines().map_while(Result::ok);
    loop {
        match session.phase() {
            SessionPhase::Done => break,
            SessionPhase::OptimizedReveal => {
                let opt = session.optimized().unwrap();
                println!("optimized handshake {:?}; rate it (happy/neutral/displeased)", opt.params);
                let answer = lines.next().unwrap_or_default();
                let rating = Satisfaction::parse_human(&answer).unwrap_or(Satisfaction::NotApplicable);
                session.rate(rating).unwrap();
            }
            _ => {
                let q = session.pending().unwrap().clone();
                println!("{}: left {:?} | right {:?}", q.id, q.left.params, q.right.params);
                let side = match lines.next().as_deref().map(str::trim) {
                    Some("r") => Side::Right,
                    _ => Side::Left,
                };
                session.choose(&q.id, side).unwrap();
            }
        }
    }
    println!("{}", session.report().unwrap().to_json());
}
