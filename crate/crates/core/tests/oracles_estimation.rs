mod common;

use common::*;
use plrank::inference::DEFAULT_COST_BUDGET;
use plrank::likelihood::{marginal_log_likelihood, marginal_score, quasi_log_likelihood, quasi_score};
use plrank::{
    existence_check, fit, fit_marginal_mle, fit_qmle, standard_errors, CutoffOverride, Dataset, Error, EstimatorKind,
    FitConfig, Observation, UtilityVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data_of(n: usize, obs: &[(&[usize], usize)]) -> Dataset {
    Dataset::new(n, obs.iter().map(|(o, y)| Observation::new(o.to_vec(), *y).unwrap()).collect()).unwrap()
}

fn tight() -> FitConfig {
    FitConfig { tol_grad_inf: 1e-12, max_iter: 100_000, ..FitConfig::default() }
}

/// Random datasets for which the estimators exist.
fn existing(seed: u64, n: usize, count: usize, full: bool) -> (UtilityVector, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let u = random_utilities(&mut rng, n, 1.0);
        let data = random_dataset(&mut rng, &u, count, 2..=4, full);
        if existence_check(&data).exists {
            return (u, data);
        }
    }
}

const KINDS: [EstimatorKind; 4] =
    [EstimatorKind::FULL, EstimatorKind::Qmle, EstimatorKind::CHOICE_ONE, EstimatorKind::Marginal(CutoffOverride::PerObservation)];

#[test]
fn two_items_three_to_one() {
    let data = data_of(2, &[(&[1, 0], 2), (&[1, 0], 2), (&[1, 0], 2), (&[0, 1], 2)]);
    for kind in KINDS {
        let f = fit(&data, kind, &tight()).unwrap();
        let u = f.estimate.values();
        assert!((u[1] - u[0] - 3f64.ln()).abs() < 1e-9, "{kind}: {u:?}");
        assert!(f.estimate.is_identified());
    }
}

#[test]
fn symmetric_data_gives_zero() {
    let mut obs: Vec<(&[usize], usize)> = Vec::new();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in &perms {
        obs.push((p, 3));
    }
    let data = data_of(3, &obs);
    for kind in KINDS {
        let f = fit(&data, kind, &tight()).unwrap();
        assert!(f.estimate.values().iter().all(|v| v.abs() < 1e-10), "{kind}");
    }
}

#[test]
fn mm_agrees_with_a_generic_maximizer() {
    for seed in 0..4 {
        let (_, data) = existing(100 + seed, 5, 12, false);
        let mle = fit_marginal_mle(&data, CutoffOverride::PerObservation, &tight()).unwrap();
        let oracle =
            newton_maximize(|x| marginal_log_likelihood(&UtilityVector::new(x.to_vec()).unwrap(), &data).unwrap(), 5);
        let q = fit_qmle(&data, &tight()).unwrap();
        let q_oracle =
            newton_maximize(|x| quasi_log_likelihood(&UtilityVector::new(x.to_vec()).unwrap(), &data).unwrap(), 5);
        for k in 0..5 {
            assert!((mle.estimate.get(k) - oracle[k]).abs() < 1e-5, "seed {seed}: {:?} vs {oracle:?}", mle.estimate);
            assert!((q.estimate.get(k) - q_oracle[k]).abs() < 1e-5, "seed {seed}: {:?} vs {q_oracle:?}", q.estimate);
        }
    }
}

#[test]
fn mm_never_decreases_the_objective() {
    for seed in 0..6 {
        let (_, data) = existing(200 + seed, 8, 20, false);
        let config = FitConfig { record_trace: true, ..FitConfig::default() };
        for kind in KINDS.into_iter().filter(|k| existence_check(&k.prepare(&data)).exists) {
            let f = fit(&data, kind, &config).unwrap();
            assert!(f.trace.len() >= 2);
            for w in f.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0), "{kind}: {} -> {}", w[0], w[1]);
            }
        }
    }
}

#[test]
fn estimating_equations_hold_at_the_fit() {
    for seed in 0..6 {
        let (_, data) = existing(300 + seed, 10, 40, seed % 2 == 0);
        let config = FitConfig::default();
        let big_n = data.len() as f64;
        for kind in KINDS.into_iter().filter(|k| existence_check(&k.prepare(&data)).exists) {
            let f = fit(&data, kind, &config).unwrap();
            assert!(f.converged);
            let prepared = kind.prepare(&data);
            let score = match kind {
                EstimatorKind::Qmle => quasi_score(&f.estimate, &prepared).unwrap(),
                _ => marginal_score(&f.estimate, &prepared).unwrap(),
            };
            assert!(score.sup_norm() / big_n <= config.tol_grad_inf, "{kind}: {}", score.sup_norm());
            assert!(f.estimate.is_identified());
        }
    }
}

#[test]
fn fits_do_not_depend_on_the_start() {
    let (_, data) = existing(400, 8, 30, false);
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    for kind in KINDS {
        let base = fit(&data, kind, &tight()).unwrap();
        for _ in 0..3 {
            let start = random_utilities(&mut rng, 8, 3.0);
            let other = fit(&data, kind, &FitConfig { initial: Some(start), ..tight() }).unwrap();
            assert!(base.estimate.linf_distance(&other.estimate) < 1e-6, "{kind}");
        }
    }
}

#[test]
fn fits_are_label_equivariant() {
    let (_, data) = existing(500, 7, 25, false);
    let perm = [3, 6, 0, 5, 1, 4, 2];
    let relabeled = data.relabeled(&perm).unwrap();
    for kind in KINDS {
        let a = fit(&data, kind, &tight()).unwrap();
        let b = fit(&relabeled, kind, &tight()).unwrap();
        for k in 0..7 {
            assert!((a.estimate.get(k) - b.estimate.get(perm[k])).abs() < 1e-8, "{kind}");
        }
    }
}

#[test]
fn pairwise_data_makes_qmle_and_mle_coincide() {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let u = random_utilities(&mut rng, 8, 1.0);
    let data = loop {
        let d = random_dataset(&mut rng, &u, 60, 2..=2, true);
        if existence_check(&d).exists {
            break d;
        }
    };
    let mle = fit(&data, EstimatorKind::FULL, &tight()).unwrap();
    let q = fit(&data, EstimatorKind::Qmle, &tight()).unwrap();
    assert!(mle.estimate.linf_distance(&q.estimate) < 1e-8);
    let s1 = standard_errors(&mle, &data, 0.95, DEFAULT_COST_BUDGET).unwrap();
    let s2 = standard_errors(&q, &data, 0.95, DEFAULT_COST_BUDGET).unwrap();
    for (a, b) in s1.items.iter().zip(&s2.items) {
        assert!((a.sigma - b.sigma).abs() < 1e-8);
    }
}

#[test]
fn existence_matches_a_partition_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(700);
    let (mut yes, mut no) = (0, 0);
    for trial in 0..400 {
        let n = 3 + trial % 6;
        let u = random_utilities(&mut rng, n, 2.0);
        let count = 1 + trial % (2 * n);
        let data = random_dataset(&mut rng, &u, count, 2..=4, trial % 3 == 0);
        let report = existence_check(&data);
        assert_eq!(report.exists, brute_existence(&data), "trial {trial}");
        if report.exists {
            yes += 1;
        } else {
            no += 1;
            let dominant = report.dominant.unwrap();
            // no member of the dominant set ever loses to an outsider
            for obs in data.observations() {
                for (w, l) in beats(obs) {
                    assert!(!(dominant.contains(&l) && !dominant.contains(&w)));
                }
            }
            assert!(matches!(fit_qmle(&data, &FitConfig::default()), Err(Error::Nonexistence { .. })));
        }
    }
    assert!(yes > 20 && no > 20, "{yes} / {no}");
}
