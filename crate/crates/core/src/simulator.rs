//! The two-stage simulator contract shared by standard and lazy ABC.

use crate::abc::{ParamVector, SummaryVector};
use crate::exec::SimRng;

/// A simulation that could not produce output for one iteration.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("simulation failed: {0}")]
pub struct SimulationError(pub String);

/// Output of the initial simulation stage.
#[derive(Debug, Clone)]
pub struct InitialState<S> {
    /// Everything the continuation stage needs to resume.
    pub payload: S,
    /// Cheap features the continuation probability may depend on.
    pub decision_stats: Vec<f64>,
}

/// A model whose simulation splits into a cheap initial stage and an
/// expensive continuation stage.
///
/// Running both stages back to back must reproduce the model's full data
/// distribution. The continuation consumes the initial state, so it runs at
/// most once per initial stage.
pub trait TwoStageModel: Sync {
    type State: Send;

    fn name(&self) -> &str;
    fn param_dim(&self) -> usize;
    fn summary_dim(&self) -> usize;
    fn decision_stat_dim(&self) -> usize;

    fn sample_prior(&self, rng: &mut SimRng) -> ParamVector;
    fn prior_density(&self, theta: &ParamVector) -> f64;

    fn simulate_initial(
        &self,
        theta: &ParamVector,
        rng: &mut SimRng,
    ) -> Result<InitialState<Self::State>, SimulationError>;

    fn simulate_continuation(
        &self,
        theta: &ParamVector,
        state: InitialState<Self::State>,
        rng: &mut SimRng,
    ) -> Result<SummaryVector, SimulationError>;

    fn observed_summary(&self) -> &SummaryVector;

    /// Nominal (initial, continuation) stage costs in seconds, charged by
    /// [`crate::exec::Clock::Nominal`].
    fn nominal_cost(&self) -> (f64, f64) {
        (1e-6, 1e-5)
    }
}
