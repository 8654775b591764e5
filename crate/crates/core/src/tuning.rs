//! Tuning the continuation probability from timed training simulations.
//!
//! The pipeline: collect α ≡ 1 training records, regress the squared
//! standard-ABC weight and the continuation time on the decision
//! statistics with Nadaraya-Watson estimators, pick λ in
//! `α(φ) = min{1, λ sqrt(γ̂(φ)/T̂₂(φ))}` by maximising the estimated
//! efficiency, and backward-select which statistics to keep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abc::{AbcConfig, ParamVector, Proposal};
use crate::error::{Error, Result};
use crate::exec::ExecOptions;
use crate::lazy::{alpha_from_ratio, run_lazy_outcomes, ContinuationPolicy, FittedAlpha, LazyOutcome};
use crate::simulator::TwoStageModel;

/// Continuation times are floored here before regression.
pub const T2_FLOOR_SECONDS: f64 = 1e-6;
pub const DEFAULT_NW_BANDWIDTH: f64 = 0.5;
pub const DEFAULT_LAMBDA_GRID: usize = 50;

/// One α ≡ 1 training simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub theta: ParamVector,
    pub phi: Vec<f64>,
    /// Realised kernel value `L_ABC`.
    pub l: f64,
    pub t1: f64,
    pub t2: f64,
    pub prior_density: f64,
    pub proposal_density: f64,
}

impl TrainingRecord {
    /// The standard-ABC weight `l·π/g`.
    pub fn weight(&self) -> f64 {
        if self.l == 0.0 {
            0.0
        } else {
            self.l * self.prior_density / self.proposal_density
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.l, self.t1, self.t2, self.prior_density, self.proposal_density]
            .iter()
            .chain(self.phi.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::input("training record has non-finite fields"));
        }
        if !(self.t1 > 0.0) || self.t2 < 0.0 || self.l < 0.0 {
            return Err(Error::input(format!(
                "training record needs t1 > 0, t2 >= 0, l >= 0 (t1={}, t2={}, l={})",
                self.t1, self.t2, self.l
            )));
        }
        if !(self.proposal_density > 0.0) {
            return Err(Error::input("training record has nonpositive proposal density"));
        }
        Ok(())
    }

    fn from_outcome(o: LazyOutcome) -> Option<Self> {
        if o.draw.failed() {
            return None;
        }
        Some(TrainingRecord {
            theta: o.draw.theta,
            phi: o.decision_stats,
            l: o.kernel_value,
            t1: o.draw.t1,
            t2: o.draw.t2,
            prior_density: o.prior_density,
            proposal_density: o.proposal_density,
        })
    }
}

/// Training records from iterations `0..m` run with α ≡ 1, along with the
/// full outcomes so the draws can be folded into the final sample.
pub fn collect_training_outcomes<M: TwoStageModel>(
    model: &M,
    proposal: &Proposal,
    m: usize,
    cfg: &AbcConfig,
    exec: &ExecOptions,
) -> Result<(Vec<TrainingRecord>, Vec<LazyOutcome>)> {
    if m < 2 {
        return Err(Error::config("training needs at least 2 simulations"));
    }
    let outcomes = run_lazy_outcomes(
        model,
        &ContinuationPolicy::always_one(),
        proposal,
        cfg,
        exec,
        0..m as u64,
    )?;
    let draws: Vec<_> = outcomes.iter().map(|o| o.draw.clone()).collect();
    crate::abc::check_failures(&draws)?;
    let records = outcomes
        .iter()
        .cloned()
        .filter_map(TrainingRecord::from_outcome)
        .collect();
    Ok((records, outcomes))
}

pub fn collect_training<M: TwoStageModel>(
    model: &M,
    proposal: &Proposal,
    m: usize,
    cfg: &AbcConfig,
    exec: &ExecOptions,
) -> Result<Vec<TrainingRecord>> {
    collect_training_outcomes(model, proposal, m, cfg, exec).map(|(r, _)| r)
}

/// Per-coordinate robust location and scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

const IQR_TO_SD: f64 = 1.348_979_500_392_163_5;

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Standardization {
    /// Median centre and IQR/1.349 scale, falling back to the standard
    /// deviation and then 1 for degenerate columns.
    pub fn fit(points: &[Vec<f64>]) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let mut center = Vec::with_capacity(dim);
        let mut scale = Vec::with_capacity(dim);
        for j in 0..dim {
            let mut col: Vec<f64> = points.iter().map(|p| p[j]).collect();
            col.sort_by(f64::total_cmp);
            let median = quantile_sorted(&col, 0.5);
            let iqr = quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25);
            let mut s = iqr / IQR_TO_SD;
            if !(s > 0.0) {
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                s = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64)
                    .sqrt();
            }
            if !(s > 0.0) || !s.is_finite() {
                s = 1.0;
            }
            center.push(median);
            scale.push(s);
        }
        Standardization { center, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }
}

/// Degree-zero local regression with a Gaussian kernel on standardized
/// coordinates.
///
/// Each point carries a multiplicity so that binned regressors (see
/// [`NwRegressor::compress`]) predict with the same formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwRegressor {
    pub points: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    pub multiplicity: Vec<f64>,
    pub bandwidth: f64,
    pub standardization: Standardization,
    /// Set on binned regressors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell_width: Option<f64>,
}

impl NwRegressor {
    pub fn fit(points: &[Vec<f64>], responses: &[f64], bandwidth: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::input("regression needs at least one training point"));
        }
        if points.len() != responses.len() {
            return Err(Error::input("one response per training point required"));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::input("training points have inconsistent dimension"));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::config(format!("regression bandwidth must be positive, got {bandwidth}")));
        }
        if responses.iter().any(|r| !r.is_finite()) {
            return Err(Error::input("responses must be finite"));
        }
        let standardization = Standardization::fit(points);
        Ok(NwRegressor {
            points: points.iter().map(|p| standardization.apply(p)).collect(),
            responses: responses.to_vec(),
            multiplicity: vec![1.0; points.len()],
            bandwidth,
            standardization,
            cell_width: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.standardization.center.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn all_zero(&self) -> bool {
        self.responses.iter().all(|&r| r == 0.0)
    }

    /// Kernel-weighted mean response at `query`, falling back to the nearest
    /// training response if every kernel weight underflows.
    pub fn predict(&self, query: &[f64]) -> Result<f64> {
        if self.points.is_empty() {
            return Err(Error::input("empty regressor"));
        }
        if query.len() != self.dim() {
            return Err(Error::input(format!(
                "query has dimension {}, regressor expects {}",
                query.len(),
                self.dim()
            )));
        }
        let q = self.standardization.apply(query);
        Ok(self.predict_standardized(&q))
    }

    fn predict_standardized(&self, q: &[f64]) -> f64 {
        let scale = -0.5 / (self.bandwidth * self.bandwidth);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut nearest = (f64::INFINITY, 0usize);
        for (i, p) in self.points.iter().enumerate() {
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < nearest.0 {
                nearest = (d2, i);
            }
            let k = self.multiplicity[i] * (scale * d2).exp();
            num += k * self.responses[i];
            den += k;
        }
        if den > 0.0 {
            (num / den).clamp(self.min_response(), self.max_response())
        } else {
            self.responses[nearest.1]
        }
    }

    /// Leave-one-out prediction at a training point: one unit of
    /// multiplicity carrying `own_response` is removed from the point's
    /// cell (or from the coincident point of an unbinned regressor). Falls
    /// back to [`NwRegressor::predict`] when nothing else is in range.
    pub fn predict_excluding(&self, query: &[f64], own_response: f64) -> Result<f64> {
        if query.len() != self.dim() || self.points.is_empty() {
            return self.predict(query);
        }
        let q = self.standardization.apply(query);
        let key = |p: &[f64], w: f64| -> Vec<i64> { p.iter().map(|v| (v / w).floor() as i64).collect() };
        let own_key = self.cell_width.map(|w| key(&q, w));
        let scale = -0.5 / (self.bandwidth * self.bandwidth);
        let mut num = 0.0;
        let mut den = 0.0;
        let mut own: Option<f64> = None;
        for (i, p) in self.points.iter().enumerate() {
            let d2: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
            let unit = (scale * d2).exp();
            num += self.multiplicity[i] * unit * self.responses[i];
            den += self.multiplicity[i] * unit;
            if own.is_none() {
                let mine = match (self.cell_width, &own_key) {
                    (Some(w), Some(k)) => key(p, w) == *k,
                    _ => d2 == 0.0,
                };
                if mine {
                    own = Some(unit);
                }
            }
        }
        match own {
            Some(unit) if den - unit > 1e-12 * den => Ok(((num - unit * own_response)
                / (den - unit))
                .clamp(self.min_response(), self.max_response())),
            _ => Ok(self.predict_standardized(&q)),
        }
    }

    fn min_response(&self) -> f64 {
        self.responses.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max_response(&self) -> f64 {
        self.responses.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bins training points into cubes of side `cell_width` (standardized
    /// units), replacing each occupied cell by its centroid, mean response
    /// and total multiplicity. Prediction cost then scales with the number
    /// of occupied cells instead of the number of records.
    pub fn compress(&self, cell_width: f64) -> Result<Self> {
        if !(cell_width > 0.0) {
            return Err(Error::config("bin width must be positive"));
        }
        let mut cells: BTreeMap<Vec<i64>, (Vec<f64>, f64, f64)> = BTreeMap::new();
        for ((p, &r), &m) in self.points.iter().zip(&self.responses).zip(&self.multiplicity) {
            let key: Vec<i64> = p.iter().map(|v| (v / cell_width).floor() as i64).collect();
            let entry = cells
                .entry(key)
                .or_insert_with(|| (vec![0.0; p.len()], 0.0, 0.0));
            for (acc, v) in entry.0.iter_mut().zip(p) {
                *acc += m * v;
            }
            entry.1 += m * r;
            entry.2 += m;
        }
        let mut points = Vec::with_capacity(cells.len());
        let mut responses = Vec::with_capacity(cells.len());
        let mut multiplicity = Vec::with_capacity(cells.len());
        for (_, (sum, resp, m)) in cells {
            points.push(sum.iter().map(|s| s / m).collect());
            responses.push(resp / m);
            multiplicity.push(m);
        }
        Ok(NwRegressor {
            points,
            responses,
            multiplicity,
            bandwidth: self.bandwidth,
            standardization: self.standardization.clone(),
            cell_width: Some(cell_width),
        })
    }
}

fn subset_points(records: &[TrainingRecord], stat_subset: &[usize]) -> Result<Vec<Vec<f64>>> {
    records
        .iter()
        .map(|r| {
            stat_subset
                .iter()
                .map(|&i| {
                    r.phi
                        .get(i)
                        .copied()
                        .ok_or_else(|| Error::input(format!("decision statistic {i} missing")))
                })
                .collect()
        })
        .collect()
}

/// Regression of the squared standard-ABC weight `(l·π/g)²` on φ.
pub fn fit_gamma(
    records: &[TrainingRecord],
    stat_subset: &[usize],
    bandwidth: f64,
) -> Result<NwRegressor> {
    if records.len() < 2 {
        return Err(Error::input("fitting needs at least 2 training records"));
    }
    let responses: Vec<f64> = records.iter().map(|r| r.weight().powi(2)).collect();
    let reg = NwRegressor::fit(&subset_points(records, stat_subset)?, &responses, bandwidth)?;
    if reg.all_zero() {
        log::warn!("every training weight is zero; continuation probability will sit at its floor");
    }
    Ok(reg)
}

/// Regression of the continuation time on φ, floored at
/// [`T2_FLOOR_SECONDS`].
pub fn fit_t2(
    records: &[TrainingRecord],
    stat_subset: &[usize],
    bandwidth: f64,
) -> Result<NwRegressor> {
    if records.is_empty() {
        return Err(Error::input("fitting needs training records"));
    }
    let responses: Vec<f64> = records.iter().map(|r| r.t2.max(T2_FLOOR_SECONDS)).collect();
    NwRegressor::fit(&subset_points(records, stat_subset)?, &responses, bandwidth)
}

fn check_alphas(records: &[TrainingRecord], alphas: &[f64]) -> Result<()> {
    if records.len() != alphas.len() {
        return Err(Error::input(format!(
            "{} alpha values for {} records",
            alphas.len(),
            records.len()
        )));
    }
    if records.is_empty() {
        return Err(Error::input("no training records"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::Policy(format!("alpha {a} outside (0, 1]")));
    }
    Ok(())
}

/// `T̂ = M⁻¹ [Σ t1ᵢ + Σ αᵢ t2ᵢ]`.
pub fn estimate_expected_time(records: &[TrainingRecord], alphas: &[f64]) -> Result<f64> {
    check_alphas(records, alphas)?;
    let total: f64 = records
        .iter()
        .zip(alphas)
        .map(|(r, a)| r.t1 + a * r.t2)
        .sum();
    Ok(total / records.len() as f64)
}

/// `ŵ² = M⁻¹ Σ lᵢ² αᵢ⁻¹ πᵢ² gᵢ⁻²`.
pub fn estimate_w2(records: &[TrainingRecord], alphas: &[f64]) -> Result<f64> {
    check_alphas(records, alphas)?;
    let total: f64 = records
        .iter()
        .zip(alphas)
        .map(|(r, a)| r.weight().powi(2) / a)
        .sum();
    Ok(total / records.len() as f64)
}

/// Estimated efficiency relative to standard ABC,
/// `[ŵ²(1)·T̂(1)] / [ŵ²(α)·T̂(α)]`.
pub fn estimated_relative_efficiency(records: &[TrainingRecord], alphas: &[f64]) -> Result<f64> {
    let ones = vec![1.0; records.len()];
    let base = estimate_w2(records, &ones)? * estimate_expected_time(records, &ones)?;
    let w2 = estimate_w2(records, alphas)?;
    if !(w2 > 0.0) {
        return Err(Error::Degenerate("estimated E(w²) is zero".into()));
    }
    Ok(base / (w2 * estimate_expected_time(records, alphas)?))
}

/// Chosen λ and its estimated relative efficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaOptimum {
    pub lambda: f64,
    pub efficiency: f64,
}

/// Efficiency as a function of λ given the per-record ratios
/// `sqrt(γ̂/T̂₂)`, with the α ≡ 1 baseline precomputed.
struct LambdaObjective<'a> {
    records: &'a [TrainingRecord],
    ratios: &'a [f64],
    alpha_min: f64,
    base: f64,
}

impl<'a> LambdaObjective<'a> {
    fn new(records: &'a [TrainingRecord], ratios: &'a [f64], alpha_min: f64) -> Result<Self> {
        let m = records.len() as f64;
        let w2: f64 = records.iter().map(|r| r.weight().powi(2)).sum::<f64>() / m;
        if !(w2 > 0.0) {
            return Err(Error::Degenerate("every training weight is zero".into()));
        }
        let t: f64 = records.iter().map(|r| r.t1 + r.t2).sum::<f64>() / m;
        Ok(LambdaObjective {
            records,
            ratios,
            alpha_min,
            base: w2 * t,
        })
    }

    fn eval(&self, lambda: f64) -> f64 {
        let mut w2 = 0.0;
        let mut t = 0.0;
        for (r, &ratio) in self.records.iter().zip(self.ratios) {
            let a = alpha_from_ratio(lambda, ratio, self.alpha_min);
            w2 += r.weight().powi(2) / a;
            t += r.t1 + a * r.t2;
        }
        let m = self.records.len() as f64;
        self.base / ((w2 / m) * (t / m))
    }
}

/// Maximises `f` on `[lo, hi]` by golden-section search.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f2 >= f1 {
        (x2, f2)
    } else {
        (x1, f1)
    }
}

/// Per-record `sqrt(γ̂(φᵢ)/T̂₂(φᵢ))`.
pub fn training_ratios(
    records: &[TrainingRecord],
    gamma: &NwRegressor,
    t2: &NwRegressor,
    stat_subset: &[usize],
) -> Result<Vec<f64>> {
    subset_points(records, stat_subset)?
        .iter()
        .map(|q| {
            let g = gamma.predict(q)?;
            let t = t2.predict(q)?;
            if !(t > 0.0) {
                return Err(Error::Policy(format!("expected continuation time {t} is not positive")));
            }
            Ok((g / t).sqrt())
        })
        .collect()
}

/// Per-record ratios from leave-one-out predictions, so each record's own
/// weight does not inflate its continuation probability.
pub fn loo_training_ratios(
    records: &[TrainingRecord],
    gamma: &NwRegressor,
    t2: &NwRegressor,
    stat_subset: &[usize],
) -> Result<Vec<f64>> {
    subset_points(records, stat_subset)?
        .iter()
        .zip(records)
        .map(|(q, r)| {
            let g = gamma.predict_excluding(q, r.weight().powi(2))?;
            let t = t2.predict_excluding(q, r.t2.max(T2_FLOOR_SECONDS))?;
            if !(t > 0.0) {
                return Err(Error::Policy(format!("expected continuation time {t} is not positive")));
            }
            Ok((g / t).sqrt())
        })
        .collect()
}

/// Chooses λ by a logarithmic grid sweep followed by golden-section
/// refinement around the best grid point.
pub fn optimize_lambda(
    records: &[TrainingRecord],
    gamma: &NwRegressor,
    t2: &NwRegressor,
    stat_subset: &[usize],
    alpha_min: f64,
) -> Result<LambdaOptimum> {
    let ratios = training_ratios(records, gamma, t2, stat_subset)?;
    optimize_lambda_from_ratios(records, &ratios, alpha_min, DEFAULT_LAMBDA_GRID)
}

pub fn optimize_lambda_from_ratios(
    records: &[TrainingRecord],
    ratios: &[f64],
    alpha_min: f64,
    grid_points: usize,
) -> Result<LambdaOptimum> {
    if ratios.len() != records.len() {
        return Err(Error::input("one ratio per record required"));
    }
    let objective = LambdaObjective::new(records, ratios, alpha_min)?;
    let positive = ratios.iter().copied().filter(|r| *r > 0.0);
    let (min_r, max_r) = positive.fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r), hi.max(r)));
    if !min_r.is_finite() {
        // Every ratio is zero: α sits at its floor whatever λ is.
        return Ok(LambdaOptimum {
            lambda: 1.0,
            efficiency: objective.eval(1.0),
        });
    }
    // λ_hi puts every positive-ratio record at α = 1, λ_lo at alpha_min.
    let lambda_hi = (1.0 + 4.0 * f64::EPSILON) / min_r;
    let lambda_lo = alpha_min / max_r;
    let (log_lo, log_hi) = (lambda_lo.ln(), lambda_hi.ln());
    let n = grid_points.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|k| log_lo + (log_hi - log_lo) * k as f64 / (n - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| objective.eval(x.exp())).collect();

    // Ties go to the larger λ.
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v >= values[best] {
            best = k;
        }
    }
    let (vmin, vmax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if vmax - vmin <= 1e-12 * vmax.abs() {
        return Ok(LambdaOptimum {
            lambda: lambda_hi,
            efficiency: values[n - 1],
        });
    }

    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(n - 1)];
    let (x, v) = golden_section_max(|x| objective.eval(x.exp()), lo, hi, 1e-10);
    Ok(if v > values[best] {
        LambdaOptimum {
            lambda: x.exp(),
            efficiency: v,
        }
    } else {
        LambdaOptimum {
            lambda: grid[best].exp(),
            efficiency: values[best],
        }
    })
}

/// Knobs for the tuning pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    /// Nadaraya-Watson bandwidth on the standardized scale.
    pub bandwidth: f64,
    pub alpha_min: f64,
    /// Bin width for compressing regressors; `None` keeps every record.
    pub bin_width: Option<f64>,
    pub lambda_grid: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            bandwidth: DEFAULT_NW_BANDWIDTH,
            alpha_min: crate::lazy::DEFAULT_ALPHA_MIN,
            bin_width: Some(DEFAULT_NW_BANDWIDTH / 5.0),
            lambda_grid: DEFAULT_LAMBDA_GRID,
        }
    }
}

/// Outcome of the tuning pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub gamma_regressor: NwRegressor,
    pub t2_regressor: NwRegressor,
    pub lambda_star: f64,
    pub stat_subset: Vec<usize>,
    pub estimated_relative_efficiency: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl TuningResult {
    pub fn policy(&self, alpha_min: f64) -> ContinuationPolicy {
        ContinuationPolicy::fitted(
            FittedAlpha {
                gamma: self.gamma_regressor.clone(),
                t2: self.t2_regressor.clone(),
                lambda: self.lambda_star,
                stat_subset: self.stat_subset.clone(),
            },
            alpha_min,
        )
    }
}

/// Fits both regressions on `stat_subset` and optimises λ against
/// leave-one-out ratios.
pub fn tune_subset(
    records: &[TrainingRecord],
    stat_subset: &[usize],
    opts: &TuneOptions,
) -> Result<TuningResult> {
    let mut gamma = fit_gamma(records, stat_subset, opts.bandwidth)?;
    let mut t2 = fit_t2(records, stat_subset, opts.bandwidth)?;
    let mut warnings = Vec::new();
    if gamma.all_zero() {
        warnings.push("all gamma responses are zero".to_string());
    }
    if let Some(width) = opts.bin_width {
        gamma = gamma.compress(width)?;
        t2 = t2.compress(width)?;
    }
    let ratios = loo_training_ratios(records, &gamma, &t2, stat_subset)?;
    let best = optimize_lambda_from_ratios(records, &ratios, opts.alpha_min, opts.lambda_grid)?;
    Ok(TuningResult {
        gamma_regressor: gamma,
        t2_regressor: t2,
        lambda_star: best.lambda,
        stat_subset: stat_subset.to_vec(),
        estimated_relative_efficiency: best.efficiency,
        warnings,
    })
}

/// Greedy backward elimination of decision statistics.
///
/// Starting from all candidates, each round drops the statistic whose
/// removal most increases estimated efficiency (ties drop the higher
/// index), stopping when no single removal helps or one statistic is left.
pub fn backward_select(
    records: &[TrainingRecord],
    candidates: &[usize],
    opts: &TuneOptions,
) -> Result<TuningResult> {
    if candidates.is_empty() {
        return Err(Error::input("backward selection needs at least one candidate statistic"));
    }
    for r in records {
        r.validate()?;
    }
    let mut current = tune_subset(records, candidates, opts)?;
    while current.stat_subset.len() > 1 {
        let mut best: Option<TuningResult> = None;
        for drop in current.stat_subset.iter().rev() {
            let subset: Vec<usize> = current
                .stat_subset
                .iter()
                .copied()
                .filter(|i| i != drop)
                .collect();
            let trial = tune_subset(records, &subset, opts)?;
            let better = best.as_ref().map_or(true, |b| {
                trial.estimated_relative_efficiency > b.estimated_relative_efficiency
            });
            if better {
                best = Some(trial);
            }
        }
        match best {
            Some(b) if b.estimated_relative_efficiency > current.estimated_relative_efficiency => {
                log::info!(
                    "backward selection kept {:?} (efficiency {:.4})",
                    b.stat_subset,
                    b.estimated_relative_efficiency
                );
                current = b;
            }
            _ => break,
        }
    }
    Ok(current)
}
