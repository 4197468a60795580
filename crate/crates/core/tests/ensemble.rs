use ising_aqc::ensemble::{self, DisorderSpec, EnsembleOptions, ParamKind};
use ising_aqc::model::{ChainParams, Schedule};
use ising_aqc::propagation;
use ising_aqc::stats::{mean, std_dev};
use proptest::prelude::*;

const SEED: u64 = 20190612;

fn spec(sigma: f64, targets: &[ParamKind], size: usize) -> DisorderSpec {
    DisorderSpec::new(sigma, targets, SEED, size).unwrap()
}

#[test]
fn sampler_moments_match_target_law() {
    let ideal = ChainParams::ideal(3).unwrap();
    let sp = spec(0.1, &[ParamKind::H, ParamKind::J], 1);
    let draws = 100_000;
    let (mut h, mut j, mut h01) = (Vec::new(), Vec::new(), 0.0);
    for i in 0..draws {
        let p = ensemble::sample_instance(&ideal, &sp, i);
        assert_eq!(p.lambda, ideal.lambda);
        h01 += (p.h[0] - 5.0) * (p.h[1] - 5.0);
        h.extend_from_slice(&p.h);
        j.extend_from_slice(&p.j);
    }
    for (xs, mu) in [(&h, 5.0), (&j, 2.5)] {
        let sd = 0.1 * mu;
        let se = sd / (xs.len() as f64).sqrt();
        assert!((mean(xs) - mu).abs() < 5.0 * se, "mean {} vs {mu}", mean(xs));
        assert!((std_dev(xs) / sd - 1.0).abs() < 0.01, "std {} vs {sd}", std_dev(xs));
    }
    // neighbouring sites are independent
    let corr = h01 / draws as f64 / 0.25;
    assert!(corr.abs() < 5.0 / (draws as f64).sqrt(), "corr {corr}");
}

#[test]
fn draws_are_shared_across_target_sets() {
    let ideal = ChainParams::ideal(4).unwrap();
    let a = spec(0.2, &[ParamKind::H], 1);
    let b = spec(0.2, &[ParamKind::Lambda, ParamKind::H, ParamKind::J], 1);
    for i in 0..20 {
        let pa = ensemble::sample_instance(&ideal, &a, i);
        let pb = ensemble::sample_instance(&ideal, &b, i);
        assert_eq!(pa.h, pb.h);
        assert_ne!(pa.j, pb.j);
    }
}

#[test]
fn instances_do_not_depend_on_ensemble_size() {
    let ideal = ChainParams::ideal(3).unwrap();
    let sched = Schedule::with_default_epsilon(23.0).unwrap();
    let opts = EnsembleOptions::new(512);
    let small = ensemble::run_ensemble(&ideal, &spec(0.1, &[ParamKind::H], 4), &sched, false, &opts).unwrap();
    let big = ensemble::run_ensemble(&ideal, &spec(0.1, &[ParamKind::H], 8), &sched, false, &opts).unwrap();
    for (a, b) in small.records.iter().zip(&big.records) {
        assert_eq!(a.params, b.params);
        assert_eq!(a.p_s.to_bits(), b.p_s.to_bits());
    }
}

#[test]
fn results_independent_of_worker_count() {
    let ideal = ChainParams::ideal(3).unwrap();
    let sched = Schedule::with_default_epsilon(23.0).unwrap();
    let sp = spec(0.1, &[ParamKind::Lambda], 24);
    let runs: Vec<_> = [1, 3, 8]
        .iter()
        .map(|&w| {
            let opts = EnsembleOptions { workers: w, ..EnsembleOptions::new(512) };
            ensemble::run_ensemble(&ideal, &sp, &sched, true, &opts).unwrap()
        })
        .collect();
    let bits = |r: &ensemble::EnsembleRun| -> Vec<u64> {
        r.records
            .iter()
            .flat_map(|x| {
                let c = x.conditions.as_ref().unwrap().values();
                [x.p_s, x.delta_min, x.s_star, c[0], c[1], c[2], c[3]].map(f64::to_bits)
            })
            .collect()
    };
    assert_eq!(bits(&runs[0]), bits(&runs[1]));
    assert_eq!(bits(&runs[0]), bits(&runs[2]));
}

#[test]
fn zero_disorder_reproduces_ideal() {
    let ideal = ChainParams::ideal(3).unwrap();
    let sched = Schedule::with_default_epsilon(23.0).unwrap();
    let want = propagation::propagate(&ideal, &sched, 1024).unwrap().success_probability;
    let run = ensemble::run_ensemble(&ideal, &spec(0.0, &[ParamKind::H], 8), &sched, false, &EnsembleOptions::new(1024)).unwrap();
    assert!(run.records.iter().all(|r| r.p_s == want && r.params == ideal));
    assert!(run.summary.std_ps <= 1e-12);
    assert!(run.summary.std_dmin <= 1e-12);
    assert_eq!(run.summary.gs_match_fraction, 1.0);
}

#[test]
fn lambda_disorder_keeps_problem_ground_state() {
    let ideal = ChainParams::ideal(4).unwrap();
    let sched = Schedule::with_default_epsilon(24.0).unwrap();
    let run = ensemble::run_ensemble(&ideal, &spec(0.3, &[ParamKind::Lambda], 16), &sched, false, &EnsembleOptions::new(512)).unwrap();
    assert_eq!(run.summary.gs_match_fraction, 1.0);
    assert_eq!(run.summary.histogram.counts.iter().sum::<usize>(), 16);
    assert!(run.failures.is_empty());
}

#[test]
fn ground_state_match_detects_flip() {
    let ideal = ChainParams::ideal(2).unwrap();
    let flipped = ChainParams::new(vec![1.0; 2], vec![5.0, -5.0], vec![1.0]).unwrap();
    assert!(!ensemble::ground_state_matches(&flipped, &ideal));
    let tie = ChainParams::new(vec![1.0; 2], vec![0.0, 0.0], vec![0.0]).unwrap();
    assert!(!ensemble::ground_state_matches(&tie, &ideal));
    assert!(ensemble::ground_state_matches(&ideal, &ideal));
}

#[test]
fn invalid_specs_rejected() {
    assert!(DisorderSpec::new(0.6, &[ParamKind::H], SEED, 8).is_err());
    assert!(DisorderSpec::new(-0.1, &[ParamKind::H], SEED, 8).is_err());
    assert!(DisorderSpec::new(0.1, &[], SEED, 8).is_err());
    assert!(DisorderSpec::new(0.1, &[ParamKind::H], SEED, 0).is_err());
    assert!("x".parse::<ParamKind>().is_err());
    assert_eq!(spec(0.1, &[ParamKind::J, ParamKind::Lambda, ParamKind::J], 1).label(), "lambda+j");
}

#[test]
fn instance_csv_layout() {
    let ideal = ChainParams::ideal(2).unwrap();
    let sched = Schedule::with_default_epsilon(21.0).unwrap();
    let run = ensemble::run_ensemble(&ideal, &spec(0.1, &[ParamKind::H], 3), &sched, false, &EnsembleOptions::new(256)).unwrap();
    let mut buf = Vec::new();
    ensemble::write_instances(&run.records, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], ensemble::INSTANCES_HEADER.join(","));
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1].split(',').count(), ensemble::INSTANCES_HEADER.len());
    let mut buf = Vec::new();
    ensemble::write_summaries(&[run.summary], &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with(&ensemble::SUMMARY_HEADER.join(",")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampling_is_a_pure_function(seed in any::<u64>(), index in any::<u64>(), sigma in 0.0f64..0.5) {
        let ideal = ChainParams::ideal(3).unwrap();
        let sp = DisorderSpec::new(sigma, &[ParamKind::H, ParamKind::J], seed, 1).unwrap();
        prop_assert_eq!(ensemble::sample_instance(&ideal, &sp, index), ensemble::sample_instance(&ideal, &sp, index));
        prop_assert_eq!(ensemble::instance_seed(seed, index), ensemble::instance_seed(seed, index));
    }

    #[test]
    fn distinct_indices_give_distinct_seeds(seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assume!(a != b);
        prop_assert_ne!(ensemble::instance_seed(seed, a), ensemble::instance_seed(seed, b));
    }
}
