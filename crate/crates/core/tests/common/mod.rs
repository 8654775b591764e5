//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

pub mod invariants;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use lazyabc::exec::SimRng;
use lazyabc::tuning::TrainingRecord;
use lazyabc::{InitialState, ParamVector, SimulationError, SummaryVector, TwoStageModel};
use rand::Rng;

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn normal_kernel(u: f64) -> f64 {
    (-u * u).exp()
}

pub fn direct_ess(w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Self-normalised estimate and its delta-method standard error.
pub fn direct_weighted_mean(f: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mean = f.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let var = f
        .iter()
        .zip(w)
        .map(|(a, b)| (b * (a - mean)).powi(2))
        .sum::<f64>()
        / (sw * sw);
    (mean, var.sqrt())
}

pub fn direct_mean_se(w: &[f64]) -> (f64, f64) {
    let n = w.len() as f64;
    let m = w.iter().sum::<f64>() / n;
    let v = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

/// Median / (IQR / 1.349) column standardisation, with the same fallbacks.
pub fn direct_standardization(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dim = points[0].len();
    let mut centre = vec![0.0; dim];
    let mut scale = vec![0.0; dim];
    for j in 0..dim {
        let mut col: Vec<f64> = points.iter().map(|p| p[j]).collect();
        col.sort_by(|a, b| a.partial_cmp(b).unwrap());
        centre[j] = sorted_quantile(&col, 0.5);
        let mut s = (sorted_quantile(&col, 0.75) - sorted_quantile(&col, 0.25)) / 1.3489795003921635;
        if s <= 0.0 {
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        }
        if s <= 0.0 {
            s = 1.0;
        }
        scale[j] = s;
    }
    (centre, scale)
}

/// Nadaraya-Watson prediction from the textbook formula.
pub fn direct_nw(points: &[Vec<f64>], responses: &[f64], b: f64, q: &[f64]) -> f64 {
    let (_, s) = direct_standardization(points);
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, r) in points.iter().zip(responses) {
        let u2: f64 = (0..q.len())
            .map(|j| ((p[j] - q[j]) / s[j]).powi(2))
            .sum();
        let k = (-u2 / (2.0 * b * b)).exp();
        num += k * r;
        den += k;
    }
    num / den
}

pub fn record(phi: Vec<f64>, w: f64, t1: f64, t2: f64) -> TrainingRecord {
    TrainingRecord {
        theta: ParamVector::new(vec![0.0]).unwrap(),
        phi,
        l: w,
        t1,
        t2,
        prior_density: 1.0,
        proposal_density: 1.0,
    }
}

/// `[ŵ²(1) T̂(1)] / [ŵ²(α) T̂(α)]` written out directly.
pub fn direct_efficiency(records: &[TrainingRecord], alphas: &[f64]) -> f64 {
    let m = records.len() as f64;
    let w2 = |a: &dyn Fn(usize) -> f64| {
        records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.l * r.prior_density / r.proposal_density).powi(2) / a(i))
            .sum::<f64>()
            / m
    };
    let t = |a: &dyn Fn(usize) -> f64| {
        records
            .iter()
            .enumerate()
            .map(|(i, r)| r.t1 + a(i) * r.t2)
            .sum::<f64>()
            / m
    };
    let one = |_: usize| 1.0;
    let alpha = |i: usize| alphas[i];
    (w2(&one) * t(&one)) / (w2(&alpha) * t(&alpha))
}

/// Per-atom sufficient statistics of a discrete-φ training set.
pub struct AtomTotals {
    pub w2: Vec<f64>,
    pub t1: f64,
    pub t2: Vec<f64>,
    pub m: f64,
}

impl AtomTotals {
    pub fn new(records: &[TrainingRecord], atoms: &[f64]) -> Self {
        let k = atoms.len();
        let mut out = AtomTotals {
            w2: vec![0.0; k],
            t1: 0.0,
            t2: vec![0.0; k],
            m: records.len() as f64,
        };
        for r in records {
            let a = atoms.iter().position(|x| *x == r.phi[0]).unwrap();
            out.w2[a] += r.weight().powi(2);
            out.t2[a] += r.t2;
            out.t1 += r.t1;
        }
        out
    }

    /// `[ŵ²(α) T̂(α)]⁻¹` for per-atom α.
    pub fn inverse_cost(&self, alpha: &[f64]) -> f64 {
        let w2: f64 = self.w2.iter().zip(alpha).map(|(w, a)| w / a).sum::<f64>() / self.m;
        let t = (self.t1 + self.t2.iter().zip(alpha).map(|(t, a)| t * a).sum::<f64>()) / self.m;
        1.0 / (w2 * t)
    }

    /// Exhaustive search over the per-atom grid `values^k`.
    pub fn grid_optimum(&self, values: &[f64]) -> f64 {
        let k = self.w2.len();
        let mut idx = vec![0usize; k];
        let mut best = 0.0f64;
        loop {
            let alpha: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
            best = best.max(self.inverse_cost(&alpha));
            let mut pos = 0;
            loop {
                if pos == k {
                    return best;
                }
                idx[pos] += 1;
                if idx[pos] < values.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// A discrete φ training set with `per_atom` records per atom. Atom k has
/// nonzero weight with probability `p_hit[k]` and continuation time
/// around `t2[k]`.
pub fn atom_records(
    atoms: &[f64],
    p_hit: &[f64],
    t2: &[f64],
    per_atom: usize,
    rng: &mut SimRng,
) -> Vec<TrainingRecord> {
    let mut out = Vec::new();
    for (k, &phi) in atoms.iter().enumerate() {
        for _ in 0..per_atom {
            let w = if rng.random::<f64>() < p_hit[k] {
                0.2 + rng.random::<f64>()
            } else {
                0.0
            };
            let t2k = t2[k] * (0.8 + 0.4 * rng.random::<f64>());
            out.push(record(vec![phi], w, 1e-3, t2k));
        }
    }
    out
}

/// `∫ f` on `[a, b]` by composite Simpson's rule with `n` (even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let x = a + h * i as f64;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    acc * h / 3.0
}

pub fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `∫ π(θ) E[K(|s - s_obs| / h) | θ] dθ` for the conjugate model, with both
/// integrals done numerically (10⁴ outer intervals).
pub fn conjugate_z_quadrature(mu0: f64, sd0: f64, n_obs: usize, s_obs: f64, h: f64) -> f64 {
    let noise = 1.0 / n_obs as f64;
    let inner = |theta: f64| {
        let sd = noise.sqrt();
        simpson(
            |s| normal_pdf(s, theta, noise) * normal_kernel((s - s_obs) / h),
            theta - 12.0 * sd,
            theta + 12.0 * sd,
            400,
        )
    };
    simpson(
        |t| normal_pdf(t, mu0, sd0 * sd0) * inner(t),
        mu0 - 12.0 * sd0,
        mu0 + 12.0 * sd0,
        10_000,
    )
}

/// Exact `E[w | θ = atom k]` for the discrete toy model under a per-x
/// continuation probability, enumerating x and y and weighting through the
/// library's lazy weight. `g` is the proposal mass of the atom.
pub fn toy_conditional_weight(
    model: &lazyabc::models::DiscreteToyModel,
    k: usize,
    g: f64,
    h: f64,
    alpha: &[f64; 2],
) -> f64 {
    let s_obs = model.observed_summary()[0];
    let prior = model.prior[k];
    let mut total = 0.0;
    for x in 0..2u8 {
        let px = if x == 1 { model.p_x[k] } else { 1.0 - model.p_x[k] };
        let a = alpha[x as usize];
        let mut cont = 0.0;
        for y in 0..2u8 {
            let py1 = model.p_y[k][x as usize];
            let py = if y == 1 { py1 } else { 1.0 - py1 };
            let s = lazyabc::models::DiscreteToyModel::summary_of(x, y);
            let l = normal_kernel((s - s_obs).abs() / h);
            cont += py * lazyabc::lazy_weight(l, a, prior, g, true).unwrap();
        }
        let stop = lazyabc::lazy_weight(0.0, a, prior, g, false).unwrap();
        total += px * (a * cont + (1.0 - a) * stop);
    }
    total
}

/// Exact `E[w]` when θ is drawn from `proposal`.
pub fn toy_expected_weight(
    model: &lazyabc::models::DiscreteToyModel,
    proposal: &[f64; 3],
    h: f64,
    alpha: &[f64; 2],
) -> f64 {
    (0..3)
        .map(|k| proposal[k] * toy_conditional_weight(model, k, proposal[k], h, alpha))
        .sum()
}

/// Wraps a model and records every continuation call.
pub struct CountingModel<M> {
    pub inner: M,
    pub initial_calls: AtomicUsize,
    pub continuation_calls: AtomicUsize,
    pub continued: Mutex<HashSet<u64>>,
}

impl<M> CountingModel<M> {
    pub fn new(inner: M) -> Self {
        CountingModel {
            inner,
            initial_calls: AtomicUsize::new(0),
            continuation_calls: AtomicUsize::new(0),
            continued: Mutex::new(HashSet::new()),
        }
    }
}

/// Tags the initial state with a fingerprint of θ so the continuation
/// can be matched back to its draw.
impl<M: TwoStageModel> TwoStageModel for CountingModel<M> {
    type State = (M::State, u64);

    fn name(&self) -> &str {
        self.inner.name()
    }
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }
    fn summary_dim(&self) -> usize {
        self.inner.summary_dim()
    }
    fn decision_stat_dim(&self) -> usize {
        self.inner.decision_stat_dim()
    }
    fn sample_prior(&self, rng: &mut SimRng) -> ParamVector {
        self.inner.sample_prior(rng)
    }
    fn prior_density(&self, theta: &ParamVector) -> f64 {
        self.inner.prior_density(theta)
    }
    fn simulate_initial(
        &self,
        theta: &ParamVector,
        rng: &mut SimRng,
    ) -> Result<InitialState<Self::State>, SimulationError> {
        self.initial_calls.fetch_add(1, Ordering::SeqCst);
        let s = self.inner.simulate_initial(theta, rng)?;
        Ok(InitialState {
            payload: (s.payload, theta[0].to_bits()),
            decision_stats: s.decision_stats,
        })
    }
    fn simulate_continuation(
        &self,
        theta: &ParamVector,
        state: InitialState<Self::State>,
        rng: &mut SimRng,
    ) -> Result<SummaryVector, SimulationError> {
        self.continuation_calls.fetch_add(1, Ordering::SeqCst);
        let (payload, tag) = state.payload;
        self.continued.lock().unwrap().insert(tag);
        self.inner.simulate_continuation(
            theta,
            InitialState {
                payload,
                decision_stats: state.decision_stats,
            },
            rng,
        )
    }
    fn observed_summary(&self) -> &SummaryVector {
        self.inner.observed_summary()
    }
    fn nominal_cost(&self) -> (f64, f64) {
        self.inner.nominal_cost()
    }
}

/// A model whose initial stage fails for θ above `threshold`.
pub struct FlakyModel {
    pub threshold: f64,
    pub observed: SummaryVector,
}

impl TwoStageModel for FlakyModel {
    type State = f64;

    fn name(&self) -> &str {
        "flaky"
    }
    fn param_dim(&self) -> usize {
        1
    }
    fn summary_dim(&self) -> usize {
        1
    }
    fn decision_stat_dim(&self) -> usize {
        1
    }
    fn sample_prior(&self, rng: &mut SimRng) -> ParamVector {
        ParamVector::new(vec![rng.random::<f64>()]).unwrap()
    }
    fn prior_density(&self, theta: &ParamVector) -> f64 {
        if (0.0..=1.0).contains(&theta[0]) {
            1.0
        } else {
            0.0
        }
    }
    fn simulate_initial(
        &self,
        theta: &ParamVector,
        _rng: &mut SimRng,
    ) -> Result<InitialState<f64>, SimulationError> {
        if theta[0] > self.threshold {
            return Err(SimulationError("simulator diverged".into()));
        }
        Ok(InitialState {
            payload: theta[0],
            decision_stats: vec![theta[0]],
        })
    }
    fn simulate_continuation(
        &self,
        _theta: &ParamVector,
        state: InitialState<f64>,
        rng: &mut SimRng,
    ) -> Result<SummaryVector, SimulationError> {
        Ok(SummaryVector::new(vec![state.payload + 0.1 * rng.random::<f64>()]).unwrap())
    }
    fn observed_summary(&self) -> &SummaryVector {
        &self.observed
    }
}

/// Spearman rank correlation (no ties expected).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Compares the library estimators with the direct formulas above on
/// `cases` random inputs, at relative tolerance 1e-12.
pub fn check_estimator_formulas(seed: u64, cases: usize) -> Result<(), String> {
    use lazyabc::tuning::{estimate_expected_time, estimate_w2, estimated_relative_efficiency, NwRegressor};
    let mut rng = lazyabc::exec::iteration_rng(seed, 0);
    let fail = |what: &str, case: usize, got: f64, want: f64| -> Result<(), String> {
        if rel_err(got, want) < 1e-12 {
            Ok(())
        } else {
            Err(format!("{what}, case {case}: {got} vs {want}"))
        }
    };
    for case in 0..cases {
        let n = rng.random_range(2..60);
        let dim = rng.random_range(1..4);
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random::<f64>() * 5.0 })
            .collect();
        if w.iter().any(|x| *x > 0.0) {
            fail("ess", case, lazyabc::ess(&w), direct_ess(&w))?;
        }

        let records: Vec<_> = (0..n)
            .map(|i| {
                let phi = (0..dim).map(|_| rng.random::<f64>() * 3.0).collect();
                let mut r = record(phi, w[i], rng.random::<f64>() + 0.01, rng.random::<f64>() * 4.0);
                r.prior_density = rng.random::<f64>() + 0.1;
                r.proposal_density = rng.random::<f64>() + 0.1;
                r
            })
            .collect();
        let alphas: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.99 + 0.01).collect();
        let m = n as f64;
        let t_direct: f64 = records.iter().zip(&alphas).map(|(r, a)| r.t1 + a * r.t2).sum::<f64>() / m;
        let w2_direct: f64 = records
            .iter()
            .zip(&alphas)
            .map(|(r, a)| r.l * r.l * r.prior_density * r.prior_density / (a * r.proposal_density * r.proposal_density))
            .sum::<f64>()
            / m;
        fail("expected time", case, estimate_expected_time(&records, &alphas).unwrap(), t_direct)?;
        fail("w2", case, estimate_w2(&records, &alphas).unwrap(), w2_direct)?;
        if w.iter().any(|x| *x > 0.0) {
            fail(
                "relative efficiency",
                case,
                estimated_relative_efficiency(&records, &alphas).unwrap(),
                direct_efficiency(&records, &alphas),
            )?;
        }

        let points: Vec<Vec<f64>> = records.iter().map(|r| r.phi.clone()).collect();
        let responses: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
        let b = 0.3 + rng.random::<f64>();
        let reg = NwRegressor::fit(&points, &responses, b).unwrap();
        let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 3.0).collect();
        let direct = direct_nw(&points, &responses, b, &q);
        let got = reg.predict(&q).unwrap();
        if (got - direct).abs() > 1e-12 * direct.abs().max(1.0) {
            return Err(format!("nw predict, case {case}: {got} vs {direct}"));
        }
    }
    Ok(())
}
