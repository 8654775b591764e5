//! Built-in two-stage benchmark models.
//!
//! * [`ConjugateNormalModel`]: normal mean with a normal prior, where the ABC
//!   posterior under a Gaussian kernel is available in closed form.
//! * [`TripleSummaryModel`]: spatially correlated annual data whose summary
//!   needs a coefficient for every triple of locations. The initial stage
//!   generates the data and a distance estimated from a subset of
//!   locations; the continuation computes the remaining triples.
//! * [`DiscreteToyModel`]: finitely many (θ, x, y) outcomes, small enough to
//!   enumerate exactly.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::abc::{AbcConfig, DistanceKind, DistanceSpec, KernelSpec, ParamVector, SummaryVector};
use crate::error::{Error, Result};
use crate::exec::{iteration_rng, SimRng};
use crate::simulator::{InitialState, SimulationError, TwoStageModel};

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// `y_j ~ N(θ, 1)`, `θ ~ N(μ₀, σ₀²)`, summary the sample mean.
#[derive(Debug, Clone)]
pub struct ConjugateNormalModel {
    pub prior_mean: f64,
    pub prior_sd: f64,
    pub n_obs: usize,
    /// Observations simulated by the initial stage.
    pub n_initial: usize,
    observed: Vec<f64>,
    observed_summary: SummaryVector,
}

/// Partial sum of the first `n_initial` observations.
#[derive(Debug, Clone, Copy)]
pub struct PartialSum(pub f64);

impl ConjugateNormalModel {
    pub fn new(prior_mean: f64, prior_sd: f64, n_initial: usize, observed: Vec<f64>) -> Result<Self> {
        if !(prior_sd > 0.0) || !prior_sd.is_finite() || !prior_mean.is_finite() {
            return Err(Error::config("prior sd must be positive and finite"));
        }
        let n_obs = observed.len();
        if n_obs == 0 {
            return Err(Error::config("observed data is empty"));
        }
        if n_initial == 0 || n_initial > n_obs {
            return Err(Error::config(format!(
                "n_initial must lie in 1..={n_obs}, got {n_initial}"
            )));
        }
        let mean = observed.iter().sum::<f64>() / n_obs as f64;
        Ok(ConjugateNormalModel {
            prior_mean,
            prior_sd,
            n_obs,
            n_initial,
            observed_summary: SummaryVector::new(vec![mean])?,
            observed,
        })
    }

    /// Observed data simulated from `true_theta` with its own seed.
    pub fn synthetic(
        prior_mean: f64,
        prior_sd: f64,
        n_obs: usize,
        n_initial: usize,
        true_theta: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = iteration_rng(seed, u64::MAX);
        let observed = (0..n_obs)
            .map(|_| true_theta + rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(prior_mean, prior_sd, n_initial, observed)
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }
}

impl TwoStageModel for ConjugateNormalModel {
    type State = PartialSum;

    fn name(&self) -> &str {
        "conjugate_normal"
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
        let z: f64 = rng.sample(StandardNormal);
        ParamVector::new(vec![self.prior_mean + self.prior_sd * z]).expect("finite draw")
    }

    fn prior_density(&self, theta: &ParamVector) -> f64 {
        normal_pdf(theta[0], self.prior_mean, self.prior_sd * self.prior_sd)
    }

    fn simulate_initial(
        &self,
        theta: &ParamVector,
        rng: &mut SimRng,
    ) -> Result<InitialState<PartialSum>, SimulationError> {
        let sum: f64 = (0..self.n_initial)
            .map(|_| theta[0] + rng.sample::<f64, _>(StandardNormal))
            .sum();
        let partial_mean = sum / self.n_initial as f64;
        Ok(InitialState {
            payload: PartialSum(sum),
            decision_stats: vec![(partial_mean - self.observed_summary[0]).abs()],
        })
    }

    fn simulate_continuation(
        &self,
        theta: &ParamVector,
        state: InitialState<PartialSum>,
        rng: &mut SimRng,
    ) -> Result<SummaryVector, SimulationError> {
        let rest: f64 = (self.n_initial..self.n_obs)
            .map(|_| theta[0] + rng.sample::<f64, _>(StandardNormal))
            .sum();
        let mean = (state.payload.0 + rest) / self.n_obs as f64;
        SummaryVector::new(vec![mean]).map_err(|e| SimulationError(e.to_string()))
    }

    fn observed_summary(&self) -> &SummaryVector {
        &self.observed_summary
    }

    fn nominal_cost(&self) -> (f64, f64) {
        (
            1e-8 * self.n_initial as f64,
            1e-8 * (self.n_obs - self.n_initial).max(1) as f64,
        )
    }
}

/// Closed-form ABC targets for [`ConjugateNormalModel`] under a Gaussian kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateOracle {
    pub posterior_mean: f64,
    pub posterior_sd: f64,
    /// The normalising constant `∫ π(θ) E[K(d/h) | θ] dθ`.
    pub z: f64,
    /// `E[w²]` when sampling from the prior.
    pub w2_prior_proposal: f64,
}

/// The Gaussian kernel `exp(-(s - s_obs)²/h²)` is proportional to a normal
/// density with variance `h²/2`, so it inflates the summary's noise
/// variance `1/n` by `h²/2`.
pub fn conjugate_oracle(model: &ConjugateNormalModel, cfg: &AbcConfig) -> Result<ConjugateOracle> {
    if cfg.kernel != KernelSpec::Normal {
        return Err(Error::UnsupportedOracle(
            "the conjugate oracle needs the normal kernel".into(),
        ));
    }
    let h = match (cfg.distance.kind, &cfg.distance.weights) {
        (DistanceKind::Euclidean, _) => cfg.bandwidth,
        (DistanceKind::WeightedEuclidean, Some(w)) if w.len() == 1 && w[0] > 0.0 => {
            cfg.bandwidth / w[0].sqrt()
        }
        _ => {
            return Err(Error::UnsupportedOracle(
                "distance must be a one-dimensional (weighted) euclidean".into(),
            ))
        }
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::UnsupportedOracle("bandwidth must be finite and positive".into()));
    }
    let s_obs = model.observed_summary[0];
    let prior_var = model.prior_sd * model.prior_sd;
    let noise_var = 1.0 / model.n_obs as f64;

    let abc_var = noise_var + h * h / 2.0;
    let post_var = 1.0 / (1.0 / prior_var + 1.0 / abc_var);
    let post_mean = post_var * (model.prior_mean / prior_var + s_obs / abc_var);
    let z = PI.sqrt() * h * normal_pdf(s_obs, model.prior_mean, prior_var + abc_var);
    let w2 = PI.sqrt() * h / 2f64.sqrt()
        * normal_pdf(s_obs, model.prior_mean, prior_var + noise_var + h * h / 4.0);
    Ok(ConjugateOracle {
        posterior_mean: post_mean,
        posterior_sd: post_var.sqrt(),
        z,
        w2_prior_proposal: w2,
    })
}

/// A years × locations matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    years: usize,
    locations: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(years: usize, locations: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != years * locations {
            return Err(Error::input(format!(
                "{} values for a {years}x{locations} matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("data matrix entries must be finite"));
        }
        Ok(DataMatrix {
            years,
            locations,
            values,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let locations = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != locations) {
            return Err(Error::input("ragged data rows"));
        }
        Self::new(rows.len(), locations, rows.concat())
    }

    pub fn years(&self) -> usize {
        self.years
    }

    pub fn locations(&self) -> usize {
        self.locations
    }

    pub fn get(&self, year: usize, location: usize) -> f64 {
        self.values[year * self.locations + location]
    }

    fn row(&self, year: usize) -> &[f64] {
        &self.values[year * self.locations..(year + 1) * self.locations]
    }

    /// Reads a CSV with a header row of location ids and one row per year.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let width = reader.headers()?.len();
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != width {
                return Err(Error::MalformedRow {
                    row: i + 1,
                    message: format!("expected {width} columns, found {}", rec.len()),
                });
            }
            let row = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::MalformedRow {
                    row: i + 1,
                    message: e.to_string(),
                })?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record((0..self.locations).map(|d| format!("loc{d}")))?;
        for t in 0..self.years {
            w.write_record(self.row(t).iter().map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub type Triple = [usize; 3];

/// All `a < b < c` triples over `locations`, in lexicographic order.
pub fn triples_of(locations: &[usize]) -> Vec<Triple> {
    let mut out = Vec::new();
    for (i, &a) in locations.iter().enumerate() {
        for (j, &b) in locations.iter().enumerate().skip(i + 1) {
            for &c in &locations[j + 1..] {
                out.push([a, b, c]);
            }
        }
    }
    out
}

/// Mean over years of the average pairwise absolute difference within the
/// triple.
fn triple_coefficient(data: &DataMatrix, [a, b, c]: Triple) -> f64 {
    let mut acc = 0.0;
    for t in 0..data.years {
        let row = data.row(t);
        let (ya, yb, yc) = (row[a], row[b], row[c]);
        acc += (ya - yb).abs() + (yb - yc).abs() + (ya - yc).abs();
    }
    acc / (3.0 * data.years as f64)
}

fn check_triples(data: &DataMatrix, triples: &[Triple]) -> Result<()> {
    if triples.is_empty() {
        return Err(Error::input("triple set is empty"));
    }
    if data.years == 0 {
        return Err(Error::input("data matrix has no years"));
    }
    for t in triples {
        if t.iter().any(|&i| i >= data.locations) {
            return Err(Error::input(format!(
                "triple {t:?} out of range for {} locations",
                data.locations
            )));
        }
    }
    Ok(())
}

/// Sorted per-triple coefficients.
pub fn triple_summary(data: &DataMatrix, triples: &[Triple]) -> Result<SummaryVector> {
    check_triples(data, triples)?;
    let mut coefs: Vec<f64> = triples.iter().map(|&t| triple_coefficient(data, t)).collect();
    coefs.sort_by(f64::total_cmp);
    SummaryVector::new(coefs)
}

/// Distance between the subset-`L` summaries of simulated and observed data.
pub fn estimated_distance(
    data: &DataMatrix,
    subset: &[usize],
    observed_on_subset: &SummaryVector,
    distance: &DistanceSpec,
) -> Result<f64> {
    if subset.len() < 3 {
        return Err(Error::input("a location subset needs at least 3 locations"));
    }
    let s = triple_summary(data, &triples_of(subset))?;
    distance.distance(&s, observed_on_subset)
}

/// Hyperparameters of [`TripleSummaryModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TripleSummarySettings {
    pub n_years: usize,
    pub n_locations: usize,
    /// Locations whose triples give the estimated distance.
    pub subset: Vec<usize>,
    /// Further candidate subsets, each contributing one more decision
    /// statistic.
    pub extra_subsets: Vec<Vec<usize>>,
    /// Uniform prior range of the correlation range `c`.
    pub c_range: (f64, f64),
    /// Uniform prior range of the scale `ν`.
    pub nu_range: (f64, f64),
    /// Passes over the remaining triples in the continuation stage. Values
    /// above 1 emulate costlier triple coefficients.
    pub work_factor: usize,
    /// Report decision statistics as `ln(distance + 1e-12)`. Distances are
    /// heavily right-skewed; on the log scale a fixed regression bandwidth
    /// resolves the small-distance region where the weights live.
    pub log_decision_stats: bool,
}

const LOG_STAT_OFFSET: f64 = 1e-12;

pub fn evenly_spaced(n_locations: usize, k: usize) -> Vec<usize> {
    if k <= 1 || n_locations <= 1 {
        return vec![0; k.min(1)];
    }
    let mut out: Vec<usize> = (0..k)
        .map(|i| ((i * (n_locations - 1)) as f64 / (k - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

impl Default for TripleSummarySettings {
    fn default() -> Self {
        TripleSummarySettings {
            n_years: 30,
            n_locations: 12,
            subset: evenly_spaced(12, 5),
            extra_subsets: Vec::new(),
            c_range: (0.2, 6.0),
            nu_range: (0.5, 4.0),
            work_factor: 6,
            log_decision_stats: true,
        }
    }
}

/// Parameters θ = (c, ν). Locations sit evenly on [0, 1]; each year is an
/// independent stationary Gaussian AR(1) sequence across locations with
/// correlation `exp(-spacing / c)` between neighbours, scaled by ν.
#[derive(Debug, Clone)]
pub struct TripleSummaryModel {
    settings: TripleSummarySettings,
    distance: DistanceSpec,
    subset_triples: Vec<Triple>,
    extra_triples: Vec<Vec<Triple>>,
    remaining_triples: Vec<Triple>,
    observed: DataMatrix,
    observed_summary: SummaryVector,
    observed_subset: SummaryVector,
    observed_extra: Vec<SummaryVector>,
}

/// Data and the subset coefficients already computed.
#[derive(Debug, Clone)]
pub struct TriplePayload {
    pub data: DataMatrix,
    pub subset_coefficients: Vec<f64>,
}

impl TripleSummaryModel {
    pub fn new(settings: TripleSummarySettings, observed: DataMatrix) -> Result<Self> {
        let d = settings.n_locations;
        if d < 3 || settings.n_years == 0 {
            return Err(Error::config("need at least 3 locations and 1 year"));
        }
        if observed.locations() != d || observed.years() != settings.n_years {
            return Err(Error::config(format!(
                "observed data is {}x{}, model expects {}x{d}",
                observed.years(),
                observed.locations(),
                settings.n_years
            )));
        }
        let check_subset = |s: &[usize]| -> Result<()> {
            let mut sorted = s.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != s.len() || s.len() < 3 || s.iter().any(|&i| i >= d) {
                return Err(Error::config(format!(
                    "location subset {s:?} must hold 3+ distinct locations below {d}"
                )));
            }
            Ok(())
        };
        check_subset(&settings.subset)?;
        for s in &settings.extra_subsets {
            check_subset(s)?;
        }
        let (c_lo, c_hi) = settings.c_range;
        let (n_lo, n_hi) = settings.nu_range;
        if !(0.0 < c_lo && c_lo < c_hi && 0.0 < n_lo && n_lo < n_hi) {
            return Err(Error::config("prior ranges must be positive and increasing"));
        }
        if settings.work_factor == 0 {
            return Err(Error::config("work_factor must be at least 1"));
        }

        let all = triples_of(&(0..d).collect::<Vec<_>>());
        let mut subset_sorted = settings.subset.clone();
        subset_sorted.sort_unstable();
        let subset_triples = triples_of(&subset_sorted);
        let remaining_triples = all
            .iter()
            .copied()
            .filter(|t| !t.iter().all(|i| subset_sorted.contains(i)))
            .collect();
        let extra_triples: Vec<Vec<Triple>> = settings
            .extra_subsets
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.sort_unstable();
                triples_of(&s)
            })
            .collect();

        let distance = DistanceSpec::euclidean();
        Ok(TripleSummaryModel {
            observed_summary: triple_summary(&observed, &all)?,
            observed_subset: triple_summary(&observed, &subset_triples)?,
            observed_extra: extra_triples
                .iter()
                .map(|t| triple_summary(&observed, t))
                .collect::<Result<_>>()?,
            settings,
            distance,
            subset_triples,
            extra_triples,
            remaining_triples,
            observed,
        })
    }

    /// Observed data simulated at `(c, ν)` from a dedicated seed.
    pub fn synthetic(settings: TripleSummarySettings, c: f64, nu: f64, seed: u64) -> Result<Self> {
        let mut rng = iteration_rng(seed, u64::MAX);
        let data = generate_data(settings.n_years, settings.n_locations, c, nu, &mut rng)?;
        Self::new(settings, data)
    }

    pub fn settings(&self) -> &TripleSummarySettings {
        &self.settings
    }

    pub fn observed_data(&self) -> &DataMatrix {
        &self.observed
    }

    pub fn observed_subset_summary(&self) -> &SummaryVector {
        &self.observed_subset
    }

    pub fn n_triples(&self) -> usize {
        self.subset_triples.len() + self.remaining_triples.len()
    }

    /// Simulates a dataset at θ = (c, ν).
    pub fn simulate_data(&self, theta: &ParamVector, rng: &mut SimRng) -> Result<DataMatrix> {
        generate_data(self.settings.n_years, self.settings.n_locations, theta[0], theta[1], rng)
    }

    /// Full-summary distance to the observed data.
    pub fn full_distance(&self, data: &DataMatrix) -> Result<f64> {
        let all = triples_of(&(0..self.settings.n_locations).collect::<Vec<_>>());
        self.distance.distance(&triple_summary(data, &all)?, &self.observed_summary)
    }
}

/// Gaussian AR(1) across evenly spaced locations, independently per year.
pub fn generate_data(
    years: usize,
    locations: usize,
    c: f64,
    nu: f64,
    rng: &mut SimRng,
) -> Result<DataMatrix> {
    if !(c > 0.0) || !(nu > 0.0) {
        return Err(Error::input(format!("need c > 0 and nu > 0, got ({c}, {nu})")));
    }
    let spacing = 1.0 / (locations.max(2) - 1) as f64;
    let rho = (-spacing / c).exp();
    let innov = (1.0 - rho * rho).sqrt();
    let mut values = Vec::with_capacity(years * locations);
    for _ in 0..years {
        let mut z: f64 = rng.sample(StandardNormal);
        values.push(nu * z);
        for _ in 1..locations {
            let e: f64 = rng.sample(StandardNormal);
            z = rho * z + innov * e;
            values.push(nu * z);
        }
    }
    DataMatrix::new(years, locations, values)
}

impl TwoStageModel for TripleSummaryModel {
    type State = TriplePayload;

    fn name(&self) -> &str {
        "triple_summary"
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn summary_dim(&self) -> usize {
        self.n_triples()
    }

    fn decision_stat_dim(&self) -> usize {
        1 + self.extra_triples.len()
    }

    fn sample_prior(&self, rng: &mut SimRng) -> ParamVector {
        let (c_lo, c_hi) = self.settings.c_range;
        let (n_lo, n_hi) = self.settings.nu_range;
        let c = c_lo + (c_hi - c_lo) * rng.random::<f64>();
        let nu = n_lo + (n_hi - n_lo) * rng.random::<f64>();
        ParamVector::new(vec![c, nu]).expect("finite draw")
    }

    fn prior_density(&self, theta: &ParamVector) -> f64 {
        let (c_lo, c_hi) = self.settings.c_range;
        let (n_lo, n_hi) = self.settings.nu_range;
        let inside = (c_lo..=c_hi).contains(&theta[0]) && (n_lo..=n_hi).contains(&theta[1]);
        if inside {
            1.0 / ((c_hi - c_lo) * (n_hi - n_lo))
        } else {
            0.0
        }
    }

    fn simulate_initial(
        &self,
        theta: &ParamVector,
        rng: &mut SimRng,
    ) -> Result<InitialState<TriplePayload>, SimulationError> {
        let err = |e: Error| SimulationError(e.to_string());
        let data = self.simulate_data(theta, rng).map_err(err)?;
        let subset_coefficients: Vec<f64> = self
            .subset_triples
            .iter()
            .map(|&t| triple_coefficient(&data, t))
            .collect();
        let mut sorted = subset_coefficients.clone();
        sorted.sort_by(f64::total_cmp);
        let mut stats = vec![self
            .distance
            .distance(&sorted, &self.observed_subset)
            .map_err(err)?];
        for (triples, obs) in self.extra_triples.iter().zip(&self.observed_extra) {
            let s = triple_summary(&data, triples).map_err(err)?;
            stats.push(self.distance.distance(&s, obs).map_err(err)?);
        }
        if self.settings.log_decision_stats {
            for s in &mut stats {
                *s = (*s + LOG_STAT_OFFSET).ln();
            }
        }
        Ok(InitialState {
            payload: TriplePayload {
                data,
                subset_coefficients,
            },
            decision_stats: stats,
        })
    }

    fn simulate_continuation(
        &self,
        _theta: &ParamVector,
        state: InitialState<TriplePayload>,
        _rng: &mut SimRng,
    ) -> Result<SummaryVector, SimulationError> {
        let data = &state.payload.data;
        let mut rest = Vec::new();
        for _ in 0..self.settings.work_factor {
            rest = self
                .remaining_triples
                .iter()
                .map(|&t| triple_coefficient(data, std::hint::black_box(t)))
                .collect();
            std::hint::black_box(&rest);
        }
        let mut coefs = state.payload.subset_coefficients;
        coefs.extend(rest);
        coefs.sort_by(f64::total_cmp);
        SummaryVector::new(coefs).map_err(|e| SimulationError(e.to_string()))
    }

    fn observed_summary(&self) -> &SummaryVector {
        &self.observed_summary
    }

    fn nominal_cost(&self) -> (f64, f64) {
        let s = &self.settings;
        let years = s.n_years as f64;
        let stat_triples: usize =
            self.subset_triples.len() + self.extra_triples.iter().map(Vec::len).sum::<usize>();
        let t1 = 1e-9 * years * (10.0 * s.n_locations as f64 + 3.0 * stat_triples as f64);
        let t2 = 1e-9 * years * 3.0 * (self.remaining_triples.len() * s.work_factor).max(1) as f64;
        (t1, t2)
    }
}

/// θ ∈ {0, 1, 2}, x ∈ {0, 1}, y ∈ {0, 1}, with tabulated probabilities.
/// The decision statistic is x and the summary is `y + x/2`.
#[derive(Debug, Clone)]
pub struct DiscreteToyModel {
    pub prior: [f64; 3],
    /// `P(x = 1 | θ)`.
    pub p_x: [f64; 3],
    /// `P(y = 1 | θ, x)`.
    pub p_y: [[f64; 2]; 3],
    observed_summary: SummaryVector,
}

impl Default for DiscreteToyModel {
    fn default() -> Self {
        DiscreteToyModel::new(
            [0.2, 0.5, 0.3],
            [0.3, 0.6, 0.8],
            [[0.1, 0.5], [0.4, 0.7], [0.9, 0.2]],
            0.5,
        )
    }
}

impl DiscreteToyModel {
    pub fn new(prior: [f64; 3], p_x: [f64; 3], p_y: [[f64; 2]; 3], observed: f64) -> Self {
        DiscreteToyModel {
            prior,
            p_x,
            p_y,
            observed_summary: SummaryVector::new(vec![observed]).expect("finite observation"),
        }
    }

    pub fn summary_of(x: u8, y: u8) -> f64 {
        y as f64 + 0.5 * x as f64
    }
}

impl TwoStageModel for DiscreteToyModel {
    type State = u8;

    fn name(&self) -> &str {
        "discrete_toy"
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
        let mut u: f64 = rng.random();
        let mut k = 2;
        for (i, p) in self.prior.iter().enumerate() {
            if u < *p {
                k = i;
                break;
            }
            u -= p;
        }
        ParamVector::new(vec![k as f64]).expect("finite atom")
    }

    fn prior_density(&self, theta: &ParamVector) -> f64 {
        match theta[0] {
            t if t == 0.0 => self.prior[0],
            t if t == 1.0 => self.prior[1],
            t if t == 2.0 => self.prior[2],
            _ => 0.0,
        }
    }

    fn simulate_initial(
        &self,
        theta: &ParamVector,
        rng: &mut SimRng,
    ) -> Result<InitialState<u8>, SimulationError> {
        let k = theta[0] as usize;
        if k > 2 || theta[0].fract() != 0.0 {
            return Err(SimulationError(format!("theta {} is not an atom", theta[0])));
        }
        let x = u8::from(rng.random::<f64>() < self.p_x[k]);
        Ok(InitialState {
            payload: x,
            decision_stats: vec![x as f64],
        })
    }

    fn simulate_continuation(
        &self,
        theta: &ParamVector,
        state: InitialState<u8>,
        rng: &mut SimRng,
    ) -> Result<SummaryVector, SimulationError> {
        let k = theta[0] as usize;
        let x = state.payload;
        let y = u8::from(rng.random::<f64>() < self.p_y[k][x as usize]);
        SummaryVector::new(vec![Self::summary_of(x, y)]).map_err(|e| SimulationError(e.to_string()))
    }

    fn observed_summary(&self) -> &SummaryVector {
        &self.observed_summary
    }
}
