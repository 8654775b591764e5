//! Property checks shared by the property suite and the acceptance run.

use std::sync::atomic::Ordering;

use lazyabc::exec::iteration_rng;
use lazyabc::harness::{draws_to_string, read_draws};
use lazyabc::lazy::{alpha_from_ratio, FittedAlpha};
use lazyabc::models::{ConjugateNormalModel, DiscreteToyModel};
use lazyabc::tuning::{estimate_expected_time, estimate_w2, estimated_relative_efficiency, NwRegressor};
use lazyabc::*;
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::{record, toy_conditional_weight, CountingModel};

pub type Check = fn(u32) -> Result<(), String>;

pub const ALL: &[(&str, Check)] = &[
    ("kernel range", kernel_range),
    ("ess scale invariance", ess_scale_invariance),
    ("ess bounded by support", ess_bounded_by_support),
    ("posterior mean scale invariance", posterior_mean_scale_invariance),
    ("standard abc schedule independence", standard_schedule_independence),
    ("conditional weight identity", conditional_weight_identity),
    ("always_one equivalence", always_one_equivalence),
    ("alpha within floor and one", alpha_in_range),
    ("stopped draws never continue", stopped_never_continue),
    ("nw convexity", nw_convexity),
    ("nw affine invariance", nw_affine_invariance),
    ("estimator monotonicity", estimator_monotonicity),
    ("alpha monotone in lambda", alpha_monotone_in_lambda),
    ("draws csv round trip", draws_round_trip),
    ("model determinism", model_determinism),
];

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    vec(prop_oneof![Just(0.0), 1e-3..1e3f64], 1..50)
        .prop_filter("some weight positive", |w| w.iter().any(|x| *x > 0.0))
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn kernel_range(cases: u32) -> Result<(), String> {
    let eps_check = [1e-12, 1e-6, 0.5]
        .iter()
        .all(|e| kernel_eval(KernelSpec::Uniform, 1.0 + e).unwrap() == 0.0)
        && kernel_eval(KernelSpec::Uniform, 1.0).unwrap() == 1.0;
    if !eps_check {
        return Err("uniform kernel boundary".into());
    }
    run(cases, (0.0..1e6f64, any::<bool>()), |(u, normal)| {
        let k = if normal { KernelSpec::Normal } else { KernelSpec::Uniform };
        let v = kernel_eval(k, u).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        Ok(())
    })
}

pub fn ess_scale_invariance(cases: u32) -> Result<(), String> {
    run(cases, (weights(), 1e-6..1e6f64), |(w, c)| {
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        prop_assert!(close(ess(&w), ess(&scaled), 1e-10));
        Ok(())
    })
}

pub fn ess_bounded_by_support(cases: u32) -> Result<(), String> {
    run(cases, (weights(), 1e-3..1e3f64, 2usize..20), |(w, c, n)| {
        let nonzero = w.iter().filter(|x| **x > 0.0).count() as f64;
        prop_assert!(ess(&w) <= nonzero * (1.0 + 1e-12));
        let mut equal = vec![0.0; n];
        equal.extend(std::iter::repeat(c).take(n));
        prop_assert!(close(ess(&equal), n as f64, 1e-12));
        let mut uneven = equal.clone();
        uneven[n] = c * 2.0;
        prop_assert!(ess(&uneven) < n as f64);
        Ok(())
    })
}

pub fn posterior_mean_scale_invariance(cases: u32) -> Result<(), String> {
    let strat = weights().prop_flat_map(|w| {
        let n = w.len();
        (Just(w), vec(-100.0..100.0f64, n), 1e-6..1e6f64)
    });
    run(cases, strat, |(w, f, c)| {
        let scaled: Vec<f64> = w.iter().map(|x| x * c).collect();
        let a = estimate_posterior_mean(&f, &w).unwrap();
        let b = estimate_posterior_mean(&f, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        Ok(())
    })
}

fn conjugate() -> ConjugateNormalModel {
    ConjugateNormalModel::synthetic(0.0, 1.0, 20, 5, 0.5, 1).unwrap()
}

fn nominal(workers: usize) -> ExecOptions {
    ExecOptions::default().with_clock(Clock::Nominal).with_workers(workers)
}

pub fn standard_schedule_independence(cases: u32) -> Result<(), String> {
    let model = conjugate();
    run(cases, (any::<u64>(), 2usize..8), |(seed, workers)| {
        let cfg = AbcConfig::new(0.2, KernelSpec::Normal, 200, seed);
        let a = run_standard_abc(&model, &Proposal::Prior, &cfg, &nominal(1)).unwrap();
        let b = run_standard_abc(&model, &Proposal::Prior, &cfg, &nominal(workers)).unwrap();
        prop_assert_eq!(draws_to_string(&a).unwrap(), draws_to_string(&b).unwrap());
        Ok(())
    })
}

fn prob() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

pub fn conditional_weight_identity(cases: u32) -> Result<(), String> {
    let strat = (
        [prob(), prob(), prob()],
        [[prob(), prob()], [prob(), prob()], [prob(), prob()]],
        -1.0..2.0f64,
        0.05..2.0f64,
        [1e-3..=1.0f64, 1e-3..=1.0f64],
        [0.05..1.0f64, 0.05..1.0f64, 0.05..1.0f64],
    );
    run(cases, strat, |(p_x, p_y, obs, h, alpha, g)| {
        let model = DiscreteToyModel::new([0.2, 0.5, 0.3], p_x, p_y, obs);
        for k in 0..3 {
            let lazy = toy_conditional_weight(&model, k, g[k], h, &alpha);
            let standard = toy_conditional_weight(&model, k, g[k], h, &[1.0, 1.0]);
            prop_assert!((lazy - standard).abs() < 1e-12, "atom {}: {} vs {}", k, lazy, standard);
        }
        Ok(())
    })
}

pub fn always_one_equivalence(cases: u32) -> Result<(), String> {
    let model = conjugate();
    let toy = DiscreteToyModel::default();
    run(cases, any::<u64>(), |seed| {
        let cfg = AbcConfig::new(0.2, KernelSpec::Normal, 200, seed);
        let policy = ContinuationPolicy::always_one();
        let a = run_standard_abc(&model, &Proposal::Prior, &cfg, &nominal(0)).unwrap();
        let b = run_lazy_abc(&model, &policy, &Proposal::Prior, &cfg, &nominal(0)).unwrap();
        prop_assert_eq!(draws_to_string(&a).unwrap(), draws_to_string(&b).unwrap());
        let a = run_standard_abc(&toy, &Proposal::Prior, &cfg, &nominal(0)).unwrap();
        let b = run_lazy_abc(&toy, &policy, &Proposal::Prior, &cfg, &nominal(0)).unwrap();
        prop_assert_eq!(draws_to_string(&a).unwrap(), draws_to_string(&b).unwrap());
        Ok(())
    })
}

fn fitted_policy(gamma: &[f64], t2: &[f64], lambda: f64, alpha_min: f64) -> ContinuationPolicy {
    let points: Vec<Vec<f64>> = (0..gamma.len()).map(|i| vec![i as f64 * 0.1]).collect();
    ContinuationPolicy::fitted(
        FittedAlpha {
            gamma: NwRegressor::fit(&points, gamma, 0.5).unwrap(),
            t2: NwRegressor::fit(&points, t2, 0.5).unwrap(),
            lambda,
            stat_subset: vec![0],
        },
        alpha_min,
    )
}

pub fn alpha_in_range(cases: u32) -> Result<(), String> {
    let model = conjugate();
    let strat = (
        vec(0.0..4.0f64, 5),
        vec(1e-3..1.0f64, 5),
        0.0..100.0f64,
        1e-4..0.5f64,
        any::<u64>(),
    );
    run(cases, strat, |(gamma, t2, lambda, alpha_min, seed)| {
        let policy = fitted_policy(&gamma, &t2, lambda, alpha_min);
        let cfg = AbcConfig::new(0.2, KernelSpec::Normal, 200, seed);
        let draws = run_lazy_abc(&model, &policy, &Proposal::Prior, &cfg, &nominal(0)).unwrap();
        for d in draws.iter().filter(|d| !d.failed()) {
            prop_assert!(d.continuation_prob >= alpha_min && d.continuation_prob <= 1.0);
        }
        prop_assert!(draws.iter().all(|d| !d.failed()));
        Ok(())
    })
}

pub fn stopped_never_continue(cases: u32) -> Result<(), String> {
    run(cases, (0.01..1.0f64, any::<u64>()), |(a, seed)| {
        let model = CountingModel::new(conjugate());
        let cfg = AbcConfig::new(0.2, KernelSpec::Normal, 300, seed);
        let draws = run_lazy_abc(
            &model,
            &ContinuationPolicy::constant(a),
            &Proposal::Prior,
            &cfg,
            &nominal(0),
        )
        .unwrap();
        let continued = draws.iter().filter(|d| !d.stopped_early).count();
        prop_assert_eq!(model.continuation_calls.load(Ordering::SeqCst), continued);
        let tags = model.continued.lock().unwrap();
        for d in &draws {
            prop_assert_eq!(tags.contains(&d.theta[0].to_bits()), !d.stopped_early);
        }
        Ok(())
    })
}

fn regression_set() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, f64, Vec<f64>)> {
    (1usize..30, 1usize..4).prop_flat_map(|(n, dim)| {
        (
            vec(vec(-10.0..10.0f64, dim), n),
            vec(-50.0..50.0f64, n),
            0.1..2.0f64,
            vec(-15.0..15.0f64, dim),
        )
    })
}

pub fn nw_convexity(cases: u32) -> Result<(), String> {
    run(cases, regression_set(), |(points, responses, b, q)| {
        let reg = NwRegressor::fit(&points, &responses, b).unwrap();
        let lo = responses.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = responses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let v = reg.predict(&q).unwrap();
        prop_assert!(v >= lo && v <= hi);
        Ok(())
    })
}

pub fn nw_affine_invariance(cases: u32) -> Result<(), String> {
    let strat = (regression_set(), 1e-3..1e3f64, -100.0..100.0f64, any::<prop::sample::Index>());
    run(cases, strat, |((points, responses, b, q), scale, shift, coord)| {
        let j = coord.index(q.len());
        let map = |p: &[f64]| {
            let mut p = p.to_vec();
            p[j] = scale * p[j] + shift;
            p
        };
        let moved: Vec<Vec<f64>> = points.iter().map(|p| map(p)).collect();
        let a = NwRegressor::fit(&points, &responses, b).unwrap().predict(&q).unwrap();
        let c = NwRegressor::fit(&moved, &responses, b).unwrap().predict(&map(&q)).unwrap();
        prop_assert!((a - c).abs() <= 1e-9 * (1.0 + a.abs()), "{} vs {}", a, c);
        Ok(())
    })
}

pub fn estimator_monotonicity(cases: u32) -> Result<(), String> {
    let strat = (2usize..30).prop_flat_map(|n| {
        (
            vec((prop_oneof![Just(0.0), 0.01..5.0f64], 1e-4..1.0f64, 0.0..1.0f64), n),
            vec(0.01..=1.0f64, n),
            any::<prop::sample::Index>(),
            0.0..1.0f64,
        )
    });
    run(cases, strat, |(rows, alphas, idx, shrink)| {
        let records: Vec<_> = rows.iter().map(|&(w, t1, t2)| record(vec![0.0], w, t1, t2)).collect();
        let i = idx.index(records.len());
        let mut lower = alphas.clone();
        lower[i] = (alphas[i] * shrink).max(1e-3);
        prop_assert!(estimate_w2(&records, &lower).unwrap() >= estimate_w2(&records, &alphas).unwrap());
        prop_assert!(
            estimate_expected_time(&records, &lower).unwrap()
                <= estimate_expected_time(&records, &alphas).unwrap()
        );
        if records.iter().any(|r| r.l > 0.0) {
            let ones = vec![1.0; records.len()];
            prop_assert_eq!(estimated_relative_efficiency(&records, &ones).unwrap(), 1.0);
        }
        Ok(())
    })
}

pub fn alpha_monotone_in_lambda(cases: u32) -> Result<(), String> {
    let strat = (0.0..1e3f64, 0.0..10.0f64, 0.0..10.0f64, 1e-4..1.0f64);
    run(cases, strat, |(ratio, l1, l2, alpha_min)| {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let a_lo = alpha_from_ratio(lo, ratio, alpha_min);
        let a_hi = alpha_from_ratio(hi, ratio, alpha_min);
        prop_assert!(a_lo <= a_hi);
        prop_assert!(a_lo >= alpha_min && a_hi <= 1.0);
        if ratio > 0.0 {
            prop_assert_eq!(alpha_from_ratio(1.0 / ratio * 2.0, ratio, alpha_min), 1.0);
        }
        Ok(())
    })
}

pub fn draws_round_trip(cases: u32) -> Result<(), String> {
    let draw = (
        vec(-1e6..1e6f64, 2),
        prop_oneof![Just(0.0), 0.0..1e9f64],
        prop_oneof![Just(1.0), 1e-6..=1.0f64],
        any::<bool>(),
        0.0..1.0f64,
        0.0..1.0f64,
    );
    run(cases, vec(draw, 1..40), |rows| {
        let draws: Vec<WeightedDraw> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (theta, weight, a, stopped, t1, t2))| WeightedDraw {
                index: i as u64,
                theta: ParamVector::new(theta).unwrap(),
                weight: if stopped { 0.0 } else { weight },
                l_abc: weight * 0.5,
                continuation_prob: a,
                stopped_early: stopped,
                t1,
                t2: if stopped { 0.0 } else { t2 },
            })
            .collect();
        let text = draws_to_string(&draws).unwrap();
        let back = read_draws(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &draws);
        prop_assert_eq!(draws_to_string(&back).unwrap(), text);
        Ok(())
    })
}

pub fn model_determinism(cases: u32) -> Result<(), String> {
    let model = lazyabc::models::TripleSummaryModel::synthetic(Default::default(), 1.0, 1.0, 0).unwrap();
    let conj = conjugate();
    run(cases, (0.3..5.0f64, 0.6..3.5f64, any::<u64>(), any::<u64>()), |(c, nu, seed, index)| {
        let theta = ParamVector::new(vec![c, nu]).unwrap();
        let one = |rng_seed| {
            let mut rng = iteration_rng(rng_seed, index);
            let init = model.simulate_initial(&theta, &mut rng).unwrap();
            let stats = init.decision_stats.clone();
            (stats, model.simulate_continuation(&theta, init, &mut rng).unwrap())
        };
        prop_assert_eq!(one(seed), one(seed));
        let t = ParamVector::new(vec![c]).unwrap();
        let two = || {
            let mut rng = iteration_rng(seed, index);
            let init = conj.simulate_initial(&t, &mut rng).unwrap();
            conj.simulate_continuation(&t, init, &mut rng).unwrap()
        };
        prop_assert_eq!(two(), two());
        Ok(())
    })
}
