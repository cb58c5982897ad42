//! Ten pairwise queries answered by a linear user, without the simulator.
//! Prints how the posterior over reward weights moves.

use std::collections::BTreeSet;

use pawshake::handshake::ParamRanges;
use pawshake::oracle::{Beta, OracleSpec};
use pawshake::pref::{
    belief_trace_row, generate_candidates, optimized_params, select_query, Belief, Choice, LearnerConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let ranges = ParamRanges::default();
    let cfg = LearnerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let candidates = generate_candidates(&mut rng, &ranges);
    let spec = OracleSpec::Linear {
        omega_true: [1.0, -0.5, -1.0],
        beta: Beta(5.0),
    };
    let mut user = spec.instantiate(5, &ranges);

    let mut belief = Belief::initialize(5, &cfg);
    let mut used = BTreeSet::new();
    let mut choices = Vec::new();
    for trial in 1..=10 {
        let query = select_query(&used, candidates.len(), &mut rng).unwrap();
        used.insert(query.key());
        let selected = user.answer(&candidates[query.left], &candidates[query.right], &ranges);
        choices.push(Choice { query, selected });
        let observations: Vec<_> = choices.iter().map(|c| c.observation(&candidates, &ranges)).collect();
        belief.update(&observations, &cfg);
        let row = belief_trace_row(trial, &belief, &candidates, &ranges);
        println!(
            "trial {trial:>2}: {:?} vs {:?} -> {:?}; mean w = [{:+.2} {:+.2} {:+.2}]",
            query.left, query.right, selected, row.mean[0], row.mean[1], row.mean[2]
        );
    }
    let best = optimized_params(&belief, &candidates, &ranges).unwrap();
    println!("optimized candidate {best}: {:?}", candidates[best]);
}
