//! Kernels, distances, importance weights, estimators and the standard ABC
//! importance-sampling loop.

use std::ops::Deref;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{iteration_rng, par_map, ExecOptions, SimRng, StageTimer};
use crate::simulator::{SimulationError, TwoStageModel};

macro_rules! real_vector {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Vec<f64>);

        impl $name {
            /// Wraps `values`, rejecting non-finite entries.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::input(format!(
                        "{} entries must be finite, got {bad}",
                        stringify!($name)
                    )));
                }
                Ok($name(values))
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [f64];

            fn deref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

real_vector!(
    /// A parameter value θ.
    ParamVector
);
real_vector!(
    /// Summary statistics of a dataset.
    SummaryVector
);

/// The ABC kernel applied to the scaled distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelSpec {
    /// Indicator of `u ∈ [0, 1]`.
    Uniform,
    /// `exp(-u²)`.
    #[default]
    Normal,
}

impl KernelSpec {
    pub fn eval(self, u: f64) -> Result<f64> {
        kernel_eval(self, u)
    }
}

pub fn kernel_eval(kernel: KernelSpec, u: f64) -> Result<f64> {
    if !u.is_finite() || u < 0.0 {
        return Err(Error::input(format!(
            "kernel argument must be finite and nonnegative, got {u}"
        )));
    }
    Ok(match kernel {
        KernelSpec::Uniform => {
            if u <= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        KernelSpec::Normal => (-u * u).exp(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    #[default]
    Euclidean,
    WeightedEuclidean,
}

/// Distance between summary vectors.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceSpec {
    pub kind: DistanceKind,
    /// Per-coordinate weights for [`DistanceKind::WeightedEuclidean`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl DistanceSpec {
    pub fn euclidean() -> Self {
        DistanceSpec::default()
    }

    pub fn weighted(weights: Vec<f64>) -> Self {
        DistanceSpec {
            kind: DistanceKind::WeightedEuclidean,
            weights: Some(weights),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind, &self.weights) {
            (DistanceKind::Euclidean, _) => Ok(()),
            (DistanceKind::WeightedEuclidean, None) => {
                Err(Error::config("weighted_euclidean distance needs weights"))
            }
            (DistanceKind::WeightedEuclidean, Some(w)) => {
                if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    Err(Error::config("distance weights must be finite and nonnegative"))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::input(format!(
                "summary dimension mismatch: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        let sq = match (self.kind, &self.weights) {
            (DistanceKind::Euclidean, _) => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
            }
            (DistanceKind::WeightedEuclidean, Some(w)) => {
                if w.len() != a.len() {
                    return Err(Error::input(format!(
                        "{} distance weights for {} summaries",
                        w.len(),
                        a.len()
                    )));
                }
                a.iter()
                    .zip(b)
                    .zip(w)
                    .map(|((x, y), w)| w * (x - y) * (x - y))
                    .sum::<f64>()
            }
            (DistanceKind::WeightedEuclidean, None) => {
                return Err(Error::config("weighted_euclidean distance needs weights"))
            }
        };
        Ok(sq.sqrt())
    }
}

/// Settings shared by standard and lazy runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcConfig {
    pub bandwidth: f64,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub distance: DistanceSpec,
    pub n_draws: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Allows `bandwidth == 0`, where a draw scores 1 only on an exact match.
    #[serde(default)]
    pub exact_match: bool,
}

impl AbcConfig {
    pub fn new(bandwidth: f64, kernel: KernelSpec, n_draws: usize, master_seed: u64) -> Self {
        AbcConfig {
            bandwidth,
            kernel,
            distance: DistanceSpec::euclidean(),
            n_draws,
            master_seed,
            exact_match: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth >= 0.0) || self.bandwidth.is_nan() {
            return Err(Error::config(format!(
                "bandwidth must be nonnegative, got {}",
                self.bandwidth
            )));
        }
        if self.bandwidth == 0.0 && !self.exact_match {
            return Err(Error::config(
                "bandwidth 0 requires exact_match mode",
            ));
        }
        if self.n_draws == 0 {
            return Err(Error::config("n_draws must be at least 1"));
        }
        self.distance.validate()
    }
}

/// `K[d(s_y, s_obs) / h]`.
pub fn l_abc(s_y: &SummaryVector, s_obs: &SummaryVector, cfg: &AbcConfig) -> Result<f64> {
    let d = cfg.distance.distance(s_y, s_obs)?;
    if cfg.bandwidth == 0.0 {
        if !cfg.exact_match {
            return Err(Error::config("bandwidth 0 requires exact_match mode"));
        }
        return Ok(if d == 0.0 { 1.0 } else { 0.0 });
    }
    if !(cfg.bandwidth > 0.0) {
        return Err(Error::config(format!(
            "bandwidth must be positive, got {}",
            cfg.bandwidth
        )));
    }
    kernel_eval(cfg.kernel, d / cfg.bandwidth)
}

/// `l · π(θ) / g(θ)`.
pub fn importance_weight(l: f64, prior_density: f64, proposal_density: f64) -> Result<f64> {
    if !(proposal_density > 0.0) {
        return Err(Error::input(format!(
            "proposal density must be positive where the prior has mass, got {proposal_density}"
        )));
    }
    if l == 0.0 {
        return Ok(0.0);
    }
    Ok(l * prior_density / proposal_density)
}

/// Effective sample size `N (mean w)² / mean(w²)`; 0 for an all-zero sample.
pub fn ess(weights: &[f64]) -> f64 {
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq == 0.0 {
        return 0.0;
    }
    sum * sum / sum_sq
}

/// Self-normalised importance estimate of a posterior expectation.
pub fn estimate_posterior_mean(f_values: &[f64], weights: &[f64]) -> Result<f64> {
    if f_values.len() != weights.len() {
        return Err(Error::input(format!(
            "{} function values for {} weights",
            f_values.len(),
            weights.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("total weight is zero".into()));
    }
    Ok(f_values.iter().zip(weights).map(|(f, w)| f * w).sum::<f64>() / total)
}

/// Delta-method standard error of [`estimate_posterior_mean`].
pub fn posterior_mean_std_error(f_values: &[f64], weights: &[f64]) -> Result<f64> {
    let mean = estimate_posterior_mean(f_values, weights)?;
    let total: f64 = weights.iter().sum();
    let acc: f64 = f_values
        .iter()
        .zip(weights)
        .map(|(f, w)| w * w * (f - mean) * (f - mean))
        .sum();
    Ok(acc.sqrt() / total)
}

/// Mean weight, the estimate of the normalising constant.
pub fn estimate_z(weights: &[f64]) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::input("cannot estimate z from an empty sample"));
    }
    Ok(weights.iter().sum::<f64>() / weights.len() as f64)
}

/// Standard error of [`estimate_z`].
pub fn z_std_error(weights: &[f64]) -> Result<f64> {
    let n = weights.len();
    if n < 2 {
        return Err(Error::input("need at least two weights for a standard error"));
    }
    let mean = estimate_z(weights)?;
    let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}

/// Importance density g(θ).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Proposal {
    /// Sample from the model prior, so π/g = 1.
    #[default]
    Prior,
    IndependentNormal { mean: Vec<f64>, sd: Vec<f64> },
    /// Finite support with the given probability masses.
    Discrete { atoms: Vec<Vec<f64>>, probs: Vec<f64> },
}

impl Proposal {
    pub fn validate(&self, param_dim: usize) -> Result<()> {
        match self {
            Proposal::Prior => Ok(()),
            Proposal::IndependentNormal { mean, sd } => {
                if mean.len() != param_dim || sd.len() != param_dim {
                    return Err(Error::config(format!(
                        "normal proposal needs {param_dim} means and sds"
                    )));
                }
                if sd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err(Error::config("normal proposal sds must be positive"));
                }
                Ok(())
            }
            Proposal::Discrete { atoms, probs } => {
                if atoms.is_empty() || atoms.len() != probs.len() {
                    return Err(Error::config("discrete proposal needs one mass per atom"));
                }
                if atoms.iter().any(|a| a.len() != param_dim) {
                    return Err(Error::config("discrete proposal atom has wrong dimension"));
                }
                if probs.iter().any(|p| !(*p >= 0.0)) || !(probs.iter().sum::<f64>() > 0.0) {
                    return Err(Error::config("discrete proposal masses must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    pub fn sample<M: TwoStageModel + ?Sized>(&self, model: &M, rng: &mut SimRng) -> ParamVector {
        match self {
            Proposal::Prior => model.sample_prior(rng),
            Proposal::IndependentNormal { mean, sd } => ParamVector(
                mean.iter()
                    .zip(sd)
                    .map(|(&m, &s)| Normal::new(m, s).expect("validated sd").sample(rng))
                    .collect(),
            ),
            Proposal::Discrete { atoms, probs } => {
                let total: f64 = probs.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (atom, &p) in atoms.iter().zip(probs) {
                    if u < p {
                        return ParamVector(atom.clone());
                    }
                    u -= p;
                }
                let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                ParamVector(atoms[last].clone())
            }
        }
    }

    pub fn density<M: TwoStageModel + ?Sized>(&self, model: &M, theta: &ParamVector) -> f64 {
        match self {
            Proposal::Prior => model.prior_density(theta),
            Proposal::IndependentNormal { mean, sd } => theta
                .iter()
                .zip(mean.iter().zip(sd))
                .map(|(&x, (&m, &s))| {
                    let z = (x - m) / s;
                    (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product(),
            Proposal::Discrete { atoms, probs } => {
                let total: f64 = probs.iter().sum();
                atoms
                    .iter()
                    .zip(probs)
                    .filter(|(a, _)| a.as_slice() == theta.as_slice())
                    .map(|(_, p)| p / total)
                    .sum()
            }
        }
    }
}

/// One output draw with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDraw {
    /// Iteration index; also selects the random stream.
    pub index: u64,
    pub theta: ParamVector,
    pub weight: f64,
    /// ℓ: the kernel value divided by the continuation probability, 0 when
    /// stopped. Equals `weight · g / π`.
    pub l_abc: f64,
    /// Continuation probability a. Zero marks a failed simulation.
    pub continuation_prob: f64,
    pub stopped_early: bool,
    pub t1: f64,
    pub t2: f64,
}

impl WeightedDraw {
    pub fn failed(&self) -> bool {
        self.continuation_prob == 0.0
    }
}

pub(crate) fn failed_draw(index: u64, theta: ParamVector, t1: f64, t2: f64) -> WeightedDraw {
    WeightedDraw {
        index,
        theta,
        weight: 0.0,
        l_abc: 0.0,
        continuation_prob: 0.0,
        stopped_early: false,
        t1,
        t2,
    }
}

pub(crate) fn check_failures(draws: &[WeightedDraw]) -> Result<()> {
    let failed = draws.iter().filter(|d| d.failed()).count();
    if failed > 0 {
        log::warn!("{failed} of {} simulations failed", draws.len());
    }
    if 2 * failed > draws.len() {
        return Err(Error::TooManyFailures {
            failed,
            total: draws.len(),
        });
    }
    Ok(())
}

pub(crate) fn validate_run<M: TwoStageModel + ?Sized>(
    model: &M,
    proposal: &Proposal,
    cfg: &AbcConfig,
) -> Result<()> {
    cfg.validate()?;
    proposal.validate(model.param_dim())?;
    if model.observed_summary().len() != model.summary_dim() {
        return Err(Error::config("observed summary has the wrong dimension"));
    }
    Ok(())
}

fn standard_iteration<M: TwoStageModel>(
    model: &M,
    proposal: &Proposal,
    cfg: &AbcConfig,
    exec: &ExecOptions,
    index: u64,
) -> WeightedDraw {
    let (c1, c2) = model.nominal_cost();
    let mut rng = iteration_rng(cfg.master_seed, index);

    let stage1 = StageTimer::start(exec.clock);
    let theta = proposal.sample(model, &mut rng);
    let initial = model.simulate_initial(&theta, &mut rng);
    let t1 = stage1.stop(c1);
    let initial = match initial {
        Ok(initial) => initial,
        Err(e) => {
            log::debug!("draw {index}: {e}");
            return failed_draw(index, theta, t1, 0.0);
        }
    };

    let stage2 = StageTimer::start(exec.clock);
    let scored = model
        .simulate_continuation(&theta, initial, &mut rng)
        .and_then(|s| {
            let l = l_abc(&s, model.observed_summary(), cfg)
                .map_err(|e| SimulationError(e.to_string()))?;
            let prior = model.prior_density(&theta);
            let g = proposal.density(model, &theta);
            let w = importance_weight(l, prior, g).map_err(|e| SimulationError(e.to_string()))?;
            Ok((l, w))
        });
    let t2 = stage2.stop(c2);

    match scored {
        Ok((l, weight)) => WeightedDraw {
            index,
            theta,
            weight,
            l_abc: l,
            continuation_prob: 1.0,
            stopped_early: false,
            t1,
            t2,
        },
        Err(e) => {
            log::debug!("draw {index}: {e}");
            failed_draw(index, theta, t1, t2)
        }
    }
}

/// Standard ABC importance sampling: every draw runs both simulator stages.
pub fn run_standard_abc<M: TwoStageModel>(
    model: &M,
    proposal: &Proposal,
    cfg: &AbcConfig,
    exec: &ExecOptions,
) -> Result<Vec<WeightedDraw>> {
    validate_run(model, proposal, cfg)?;
    let draws = par_map(0..cfg.n_draws as u64, exec.workers, |i| {
        standard_iteration(model, proposal, cfg, exec, i)
    })?;
    check_failures(&draws)?;
    Ok(draws)
}

/// The weight column of a draw list.
pub fn weights_of(draws: &[WeightedDraw]) -> Vec<f64> {
    draws.iter().map(|d| d.weight).collect()
}
