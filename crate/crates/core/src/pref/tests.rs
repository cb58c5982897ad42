use std::collections::{BTreeSet, HashMap};

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn phi(a: f64, f: f64, k: f64) -> TrajectoryFeatures {
    features(&HandshakeParams::new(a, f, k))
}

#[test]
fn feature_examples() {
    assert_relative_eq!(phi(1.0, 1.0, 30.0).phi, Vector3::zeros(), epsilon = 1e-15);
    assert_relative_eq!(phi(10.0, 3.5, 200.0).phi, Vector3::new(1.0, 1.0, 1.0), epsilon = 1e-15);
    assert_relative_eq!(phi(5.5, 2.25, 115.0).phi, Vector3::new(0.5, 0.5, 0.5), epsilon = 1e-15);
    let passive = features(&HandshakeParams::passive(115.0)).phi;
    assert_relative_eq!(passive, Vector3::new(-1.0 / 9.0, -1.0 / 2.5, 0.5), epsilon = 1e-15);
}

#[test]
fn reward_and_softmax_examples() {
    let f = TrajectoryFeatures {
        phi: Vector3::new(0.3, 0.9, 0.1),
    };
    assert_eq!(reward(&Vector3::zeros(), &f), 0.0);
    assert_relative_eq!(reward(&Vector3::x(), &f), 0.3);
    assert_eq!(softmax_pair(0.7, 0.7), 0.5);
    assert_relative_eq!(softmax_pair(3f64.ln(), 0.0), 0.75, epsilon = 1e-15);
    assert_relative_eq!(softmax_pair(1000.0, 0.0), 1.0);
    assert_eq!(softmax_pair(-1000.0, 0.0), 0.0);
    assert!(softmax_pair(800.0, 790.0).is_finite());
}

proptest! {
    #[test]
    fn softmax_is_normalized(omega in prop::array::uniform3(-3.0..3.0f64), l in prop::array::uniform3(-0.5..1.0f64), r in prop::array::uniform3(-0.5..1.0f64)) {
        let w = Vector3::from(omega);
        let lf = TrajectoryFeatures { phi: Vector3::from(l) };
        let rf = TrajectoryFeatures { phi: Vector3::from(r) };
        let p = choice_probability(&w, &lf, &rf) + choice_probability(&w, &rf, &lf);
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_is_scale_invariant(seed in any::<u64>(), omega in prop::array::uniform3(-3.0..3.0f64), c in 0.01..100.0f64) {
        let ranges = ParamRanges::default();
        let cands = generate_candidates(&mut ChaCha8Rng::seed_from_u64(seed), &ranges);
        let w = Vector3::from(omega);
        prop_assert_eq!(best_candidate(&w, &cands, &ranges), best_candidate(&(w * c), &cands, &ranges));
    }
}

#[test]
fn prior_moments() {
    let cfg = LearnerConfig {
        samples: 10_000,
        ..LearnerConfig::default()
    };
    let b = Belief::initialize(42, &cfg);
    assert_eq!(b, Belief::initialize(42, &cfg));
    for i in 0..3 {
        assert!(b.mean()[i].abs() <= 0.05, "{:?}", b.mean());
        assert!((0.95..=1.05).contains(&b.std()[i]), "{:?}", b.std());
    }
    assert!(b.samples().iter().all(|w| w.norm() <= cfg.omega_cap));
}

#[test]
fn empty_history_keeps_prior() {
    let cfg = LearnerConfig {
        samples: 4000,
        ..LearnerConfig::default()
    };
    let mut b = Belief::initialize(1, &cfg);
    b.update(&[], &cfg);
    for i in 0..3 {
        assert!(b.mean()[i].abs() < 0.25, "{:?}", b.mean());
        assert!((0.8..1.2).contains(&b.std()[i]), "{:?}", b.std());
    }
    assert!(b.samples().iter().all(|w| w.norm() <= cfg.omega_cap));
}

#[test]
fn higher_amplitude_choices_push_weight_positive() {
    let cfg = LearnerConfig::default();
    let ranges = ParamRanges::default();
    let mut positive = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cands = generate_candidates(&mut rng, &ranges);
        let mut used = BTreeSet::new();
        let mut obs = Vec::new();
        let mut belief = Belief::initialize(seed, &cfg);
        while obs.len() < 10 {
            let q = select_query(&used, cands.len(), &mut rng).unwrap();
            used.insert(q.key());
            let (l, r) = (cands[q.left], cands[q.right]);
            if l.amplitude_m == r.amplitude_m {
                continue;
            }
            let side = if l.amplitude_m > r.amplitude_m { Side::Left } else { Side::Right };
            obs.push(Choice { query: q, selected: side }.observation(&cands, &ranges));
            belief.update(&obs, &cfg);
        }
        if belief.mean()[0] > 0.0 {
            positive += 1;
        }
    }
    assert!(positive >= 99, "{positive}");
}

#[test]
fn candidate_set_shape() {
    let ranges = ParamRanges::default();
    let c = generate_candidates(&mut ChaCha8Rng::seed_from_u64(3), &ranges);
    assert_eq!(c.len(), 15);
    for p in &c[..12] {
        assert!(ranges.amplitude_cm.contains(p.amplitude_cm()) || (p.amplitude_cm() - 10.0).abs() < 1e-12);
        assert!(ranges.frequency_hz.contains(p.frequency_hz));
        assert!(ranges.stiffness.contains(p.stiffness));
        assert!(!p.is_passive());
    }
    let passive: Vec<f64> = c[12..].iter().map(|p| p.stiffness).collect();
    assert_eq!(passive, [30.0, 115.0, 200.0]);
    assert!(c[12..].iter().all(HandshakeParams::is_passive));
}

#[test]
fn queries_never_repeat_and_exhaust() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut used = BTreeSet::new();
    for _ in 0..105 {
        let q = select_query(&used, 15, &mut rng).unwrap();
        assert_ne!(q.left, q.right);
        assert!(used.insert(q.key()));
    }
    assert_eq!(select_query(&used, 15, &mut rng), Err(PrefError::Exhausted(105)));
    assert_eq!(select_query(&BTreeSet::new(), 1, &mut rng), Err(PrefError::TooFewCandidates(1)));
}

#[test]
fn first_query_is_uniform_over_pairs() {
    let draws = 100_000;
    let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
    let mut left_first = 0;
    for seed in 0..draws {
        let q = select_query(&BTreeSet::new(), 15, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        *counts.entry(q.key()).or_default() += 1;
        left_first += usize::from(q.left < q.right);
    }
    assert_eq!(counts.len(), 105);
    let expected = draws as f64 / 105.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 104 degrees of freedom; 99.9th percentile is about 157
    assert!(chi2 < 157.0, "{chi2}");
    // ±10 % is only 3.3σ per pair; across 105 pairs use a Bonferroni band
    let sigma = (draws as f64 * (1.0 / 105.0) * (104.0 / 105.0)).sqrt();
    for &c in counts.values() {
        assert!((c as f64 - expected).abs() <= 4.5 * sigma, "{c} vs {expected}");
    }
    let within_10pct = counts.values().filter(|&&c| (c as f64 - expected).abs() <= 0.1 * expected).count();
    assert!(within_10pct >= 103, "{within_10pct}");
    assert!((left_first as f64 / draws as f64 - 0.5).abs() < 0.01);
}

#[test]
fn optimum_examples() {
    let ranges = ParamRanges::default();
    let cands = generate_candidates(&mut ChaCha8Rng::seed_from_u64(5), &ranges);
    let at = |w: Vector3<f64>| Belief::from_samples(vec![w, w], 0);

    let i = optimized_params(&at(Vector3::x()), &cands, &ranges).unwrap();
    let amax = cands.iter().map(|c| c.amplitude_m).fold(f64::MIN, f64::max);
    assert_eq!(cands[i].amplitude_m, amax);

    let i = optimized_params(&at(-Vector3::z()), &cands, &ranges).unwrap();
    let kmin = cands.iter().map(|c| c.stiffness).fold(f64::MAX, f64::min);
    assert_eq!(cands[i].stiffness, kmin);

    let tied = vec![HandshakeParams::new(5.0, 2.0, 100.0), HandshakeParams::new(5.0, 3.0, 100.0)];
    assert_eq!(best_candidate(&Vector3::x(), &tied, &ranges), Some(0));
    assert_eq!(best_candidate(&Vector3::x(), &[], &ranges), None);
}

#[test]
fn trace_row_reports_current_optimum() {
    let ranges = ParamRanges::default();
    let cands = generate_candidates(&mut ChaCha8Rng::seed_from_u64(5), &ranges);
    let belief = Belief::initialize(2, &LearnerConfig::default());
    let row = belief_trace_row(0, &belief, &cands, &ranges);
    let best = cands[optimized_params(&belief, &cands, &ranges).unwrap()];
    assert_eq!(row.trial, 0);
    assert_eq!(row.amplitude_cm, best.amplitude_cm());
    assert_eq!(row.mean, <[f64; 3]>::from(belief.mean()));
}

#[test]
fn ablation_examples() {
    let ranges = ParamRanges::default();
    let d = AblationDeltas::default();
    let v = ablation_variants(&HandshakeParams::new(5.0, 2.0, 100.0), &ranges, &d);
    let kinds: Vec<_> = v.iter().map(|x| x.kind.label()).collect();
    assert_eq!(kinds, ["a-", "a+", "f-", "f+", "k-", "k+"]);
    assert_eq!(v[0].params, HandshakeParams::new(3.0, 2.0, 100.0));
    assert_eq!(v[1].params, HandshakeParams::new(7.0, 2.0, 100.0));
    assert_relative_eq!(v[2].params.frequency_hz, 1.5);
    assert_relative_eq!(v[5].params.stiffness, 140.0);
    assert!(v.iter().all(|x| !x.clipped && !x.identity));

    let v = ablation_variants(&HandshakeParams::new(9.5, 2.0, 100.0), &ranges, &d);
    assert_relative_eq!(v[1].params.amplitude_cm(), 10.0, epsilon = 1e-12);
    assert!(v[1].clipped && !v[1].identity);

    let v = ablation_variants(&HandshakeParams::new(10.0, 3.5, 200.0), &ranges, &d);
    assert!(v[1].identity && v[3].identity && v[5].identity);

    let v = ablation_variants(&HandshakeParams::passive(30.0), &ranges, &d);
    assert!(v[0].identity && v[2].identity && v[4].identity);
    assert_relative_eq!(v[1].params.amplitude_cm(), 2.0);
}

proptest! {
    #[test]
    fn ablations_change_one_parameter(a in 1.0..10.0f64, f in 1.0..3.5f64, k in 30.0..200.0f64) {
        let opt = HandshakeParams::new(a, f, k);
        let ranges = ParamRanges::default();
        for v in ablation_variants(&opt, &ranges, &AblationDeltas::default()) {
            let changed = [
                v.params.amplitude_m != opt.amplitude_m,
                v.params.frequency_hz != opt.frequency_hz,
                v.params.stiffness != opt.stiffness,
            ];
            prop_assert!(changed.iter().filter(|c| **c).count() <= 1);
            prop_assert_eq!(v.identity, !changed.iter().any(|c| *c));
            prop_assert!(v.params.validate(&ranges).is_ok());
        }
    }
}

#[test]
fn learning_is_a_function_of_seed_and_choices() {
    let cfg = LearnerConfig::default();
    let obs = [Observation {
        preferred: Vector3::new(1.0, 0.2, 0.1),
        other: Vector3::new(0.0, 0.5, 0.9),
    }];
    let run = || {
        let mut b = Belief::initialize(77, &cfg);
        b.update(&obs, &cfg);
        b.update(&obs, &cfg);
        b
    };
    assert_eq!(run(), run());
    let json = serde_json::to_string(&run()).unwrap();
    let mut restored: Belief = serde_json::from_str(&json).unwrap();
    let mut original = run();
    restored.update(&obs, &cfg);
    original.update(&obs, &cfg);
    assert_eq!(restored, original);
}
