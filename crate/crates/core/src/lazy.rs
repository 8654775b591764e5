//! Lazy ABC: simulations may stop after the initial stage, with survivors
//! reweighted by the inverse continuation probability.

use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::abc::{
    check_failures, failed_draw, importance_weight, l_abc, validate_run, AbcConfig, ParamVector,
    Proposal, WeightedDraw,
};
use crate::error::{Error, Result};
use crate::exec::{iteration_rng, par_map, ExecOptions, StageTimer};
use crate::simulator::{SimulationError, TwoStageModel};
use crate::tuning::NwRegressor;

pub const DEFAULT_ALPHA_MIN: f64 = 1e-3;

/// The decision-statistic regressions behind a fitted policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedAlpha {
    pub gamma: NwRegressor,
    pub t2: NwRegressor,
    pub lambda: f64,
    /// Indices into the model's decision statistics fed to the regressors.
    pub stat_subset: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    AlwaysOne,
    Constant(f64),
    Fitted(FittedAlpha),
}

/// The continuation probability α(φ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationPolicy {
    pub mode: PolicyMode,
    pub alpha_min: f64,
}

impl ContinuationPolicy {
    pub fn always_one() -> Self {
        ContinuationPolicy {
            mode: PolicyMode::AlwaysOne,
            alpha_min: DEFAULT_ALPHA_MIN,
        }
    }

    pub fn constant(a: f64) -> Self {
        ContinuationPolicy {
            mode: PolicyMode::Constant(a),
            alpha_min: DEFAULT_ALPHA_MIN.min(a),
        }
    }

    pub fn fitted(fitted: FittedAlpha, alpha_min: f64) -> Self {
        ContinuationPolicy {
            mode: PolicyMode::Fitted(fitted),
            alpha_min,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        if let PolicyMode::Fitted(f) = &mut self.mode {
            f.lambda = lambda;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= 1.0) {
            return Err(Error::Policy(format!(
                "alpha_min must lie in (0, 1], got {}",
                self.alpha_min
            )));
        }
        match &self.mode {
            PolicyMode::AlwaysOne => Ok(()),
            PolicyMode::Constant(a) => {
                if *a >= self.alpha_min && *a <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Policy(format!(
                        "constant continuation probability {a} outside [{}, 1]",
                        self.alpha_min
                    )))
                }
            }
            PolicyMode::Fitted(f) => {
                if !(f.lambda >= 0.0) {
                    return Err(Error::Policy(format!("lambda must be nonnegative, got {}", f.lambda)));
                }
                if f.gamma.dim() != f.stat_subset.len() || f.t2.dim() != f.stat_subset.len() {
                    return Err(Error::Policy(
                        "regressor dimension does not match the decision-statistic subset".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Checks the subset indices against a model's decision statistics.
    pub fn validate_for(&self, decision_stat_dim: usize) -> Result<()> {
        self.validate()?;
        if let PolicyMode::Fitted(f) = &self.mode {
            if let Some(bad) = f.stat_subset.iter().find(|&&i| i >= decision_stat_dim) {
                return Err(Error::Policy(format!(
                    "decision statistic {bad} out of range for a model with {decision_stat_dim}"
                )));
            }
        }
        Ok(())
    }
}

/// `min(1, λ·ratio)` clamped below at `alpha_min`, where ratio is
/// `sqrt(γ/T₂)`.
pub fn alpha_from_ratio(lambda: f64, ratio: f64, alpha_min: f64) -> f64 {
    (lambda * ratio).min(1.0).max(alpha_min)
}

/// `sqrt(γ̂(φ) / T̂₂(φ))` for the policy's statistic subset.
pub fn alpha_ratio(fitted: &FittedAlpha, decision_stats: &[f64]) -> Result<f64> {
    let query: Vec<f64> = fitted
        .stat_subset
        .iter()
        .map(|&i| {
            decision_stats.get(i).copied().ok_or_else(|| {
                Error::Policy(format!("decision statistic {i} missing"))
            })
        })
        .collect::<Result<_>>()?;
    let gamma = fitted.gamma.predict(&query)?;
    let t2 = fitted.t2.predict(&query)?;
    if !(t2 > 0.0) {
        return Err(Error::Policy(format!(
            "expected continuation time must be positive, got {t2}"
        )));
    }
    Ok((gamma / t2).sqrt())
}

/// α(φ), always within `[alpha_min, 1]` for fitted policies.
pub fn eval_alpha(policy: &ContinuationPolicy, decision_stats: &[f64]) -> Result<f64> {
    match &policy.mode {
        PolicyMode::AlwaysOne => Ok(1.0),
        PolicyMode::Constant(a) => Ok(*a),
        PolicyMode::Fitted(f) => Ok(alpha_from_ratio(
            f.lambda,
            alpha_ratio(f, decision_stats)?,
            policy.alpha_min,
        )),
    }
}

/// The lazy weight: `l·π/(a·g)` if the simulation continued, else 0.
pub fn lazy_weight(
    l: f64,
    a: f64,
    prior_density: f64,
    proposal_density: f64,
    continued: bool,
) -> Result<f64> {
    if !(a > 0.0) || a > 1.0 {
        return Err(Error::Policy(format!(
            "continuation probability must lie in (0, 1], got {a}"
        )));
    }
    if !continued {
        return Ok(0.0);
    }
    importance_weight(l / a, prior_density, proposal_density)
}

/// A lazy draw together with the quantities tuning needs.
#[derive(Debug, Clone)]
pub struct LazyOutcome {
    pub draw: WeightedDraw,
    pub decision_stats: Vec<f64>,
    pub prior_density: f64,
    pub proposal_density: f64,
    /// The kernel value before division by a; 0 when stopped.
    pub kernel_value: f64,
}

fn lazy_iteration<M: TwoStageModel>(
    model: &M,
    policy: &ContinuationPolicy,
    proposal: &Proposal,
    cfg: &AbcConfig,
    exec: &ExecOptions,
    index: u64,
) -> LazyOutcome {
    let (c1, c2) = model.nominal_cost();
    let mut rng = iteration_rng(cfg.master_seed, index);
    let failed = |theta: ParamVector, t1, t2, stats: Vec<f64>| LazyOutcome {
        draw: failed_draw(index, theta, t1, t2),
        decision_stats: stats,
        prior_density: f64::NAN,
        proposal_density: f64::NAN,
        kernel_value: 0.0,
    };

    // Steps 1-3: parameter, initial stage, continuation decision.
    let stage1 = StageTimer::start(exec.clock);
    let theta = proposal.sample(model, &mut rng);
    let initial = model.simulate_initial(&theta, &mut rng);
    let decision = initial.map_err(|e| e.to_string()).and_then(|initial| {
        let a = eval_alpha(policy, &initial.decision_stats).map_err(|e| e.to_string())?;
        if !(a >= policy.alpha_min && a <= 1.0) {
            return Err(format!("alpha {a} outside [{}, 1]", policy.alpha_min));
        }
        // a = 1 consumes no randomness, keeping always_one in lockstep with
        // standard ABC.
        let go = a >= 1.0 || rng.random::<f64>() < a;
        Ok((initial, a, go))
    });
    let t1 = stage1.stop(c1);
    let (initial, a, go) = match decision {
        Ok(d) => d,
        Err(e) => {
            log::debug!("draw {index}: {e}");
            return failed(theta, t1, 0.0, Vec::new());
        }
    };
    let stats = initial.decision_stats.clone();

    if !go {
        return LazyOutcome {
            draw: WeightedDraw {
                index,
                theta,
                weight: 0.0,
                l_abc: 0.0,
                continuation_prob: a,
                stopped_early: true,
                t1,
                t2: 0.0,
            },
            decision_stats: stats,
            prior_density: f64::NAN,
            proposal_density: f64::NAN,
            kernel_value: 0.0,
        };
    }

    // Steps 4-6: continuation, kernel, weight.
    let stage2 = StageTimer::start(exec.clock);
    let scored = model
        .simulate_continuation(&theta, initial, &mut rng)
        .and_then(|s| {
            let k = l_abc(&s, model.observed_summary(), cfg)
                .map_err(|e| SimulationError(e.to_string()))?;
            let prior = model.prior_density(&theta);
            let g = proposal.density(model, &theta);
            let w = lazy_weight(k, a, prior, g, true).map_err(|e| SimulationError(e.to_string()))?;
            Ok((k, prior, g, w))
        });
    let t2 = stage2.stop(c2);

    match scored {
        Ok((k, prior, g, weight)) => LazyOutcome {
            draw: WeightedDraw {
                index,
                theta,
                weight,
                l_abc: k / a,
                continuation_prob: a,
                stopped_early: false,
                t1,
                t2,
            },
            decision_stats: stats,
            prior_density: prior,
            proposal_density: g,
            kernel_value: k,
        },
        Err(e) => {
            log::debug!("draw {index}: {e}");
            failed(theta, t1, t2, stats)
        }
    }
}

/// Runs lazy iterations for the given index range, keeping the per-draw
/// decision statistics and densities. Failures are not checked here.
pub fn run_lazy_outcomes<M: TwoStageModel>(
    model: &M,
    policy: &ContinuationPolicy,
    proposal: &Proposal,
    cfg: &AbcConfig,
    exec: &ExecOptions,
    indices: Range<u64>,
) -> Result<Vec<LazyOutcome>> {
    validate_run(model, proposal, cfg)?;
    policy.validate_for(model.decision_stat_dim())?;
    par_map(indices, exec.workers, |i| {
        lazy_iteration(model, policy, proposal, cfg, exec, i)
    })
}

/// Lazy ABC over iterations `0..cfg.n_draws`.
pub fn run_lazy_abc<M: TwoStageModel>(
    model: &M,
    policy: &ContinuationPolicy,
    proposal: &Proposal,
    cfg: &AbcConfig,
    exec: &ExecOptions,
) -> Result<Vec<WeightedDraw>> {
    let draws: Vec<WeightedDraw> =
        run_lazy_outcomes(model, policy, proposal, cfg, exec, 0..cfg.n_draws as u64)?
            .into_iter()
            .map(|o| o.draw)
            .collect();
    check_failures(&draws)?;
    Ok(draws)
}
