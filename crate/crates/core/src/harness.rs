//! Run configuration, persistence and efficiency reporting behind the
//! `lazyabc` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abc::{
    check_failures, ess, estimate_z, run_standard_abc, weights_of, AbcConfig, DistanceSpec,
    KernelSpec, ParamVector, Proposal, WeightedDraw,
};
use crate::error::{Error, Result};
use crate::exec::{thread_cpu_seconds, Clock, ExecOptions};
use crate::lazy::{run_lazy_outcomes, ContinuationPolicy, DEFAULT_ALPHA_MIN};
use crate::models::{
    ConjugateNormalModel, DataMatrix, TripleSummaryModel, TripleSummarySettings,
};
use crate::simulator::TwoStageModel;
use crate::tuning::{
    backward_select, collect_training_outcomes, TrainingRecord, TuneOptions, TuningResult,
    DEFAULT_NW_BANDWIDTH,
};

pub const VERSION: &str = match option_env!("LAZYABC_GIT_DESCRIBE") {
    Some(v) => v,
    None => env!("CARGO_PKG_VERSION"),
};

fn default_prior_sd() -> f64 {
    1.0
}
fn default_n_obs() -> usize {
    20
}
fn default_n_initial() -> usize {
    5
}
fn default_true_theta() -> f64 {
    0.5
}
fn default_true_c() -> f64 {
    1.0
}
fn default_true_nu() -> f64 {
    1.0
}

/// Which model to run, with its hyperparameters and observed data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelConfig {
    ConjugateNormal {
        #[serde(default)]
        prior_mean: f64,
        #[serde(default = "default_prior_sd")]
        prior_sd: f64,
        #[serde(default = "default_n_obs")]
        n_obs: usize,
        #[serde(default = "default_n_initial")]
        n_initial: usize,
        /// Observed data; simulated from `true_theta` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        observed: Option<Vec<f64>>,
        #[serde(default = "default_true_theta")]
        true_theta: f64,
        #[serde(default)]
        data_seed: u64,
    },
    TripleSummary {
        #[serde(default)]
        settings: TripleSummarySettings,
        /// Observed data CSV; simulated from `(true_c, true_nu)` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        observed_csv: Option<PathBuf>,
        #[serde(default = "default_true_c")]
        true_c: f64,
        #[serde(default = "default_true_nu")]
        true_nu: f64,
        #[serde(default)]
        data_seed: u64,
    },
}

impl ModelConfig {
    pub fn conjugate_default() -> Self {
        ModelConfig::ConjugateNormal {
            prior_mean: 0.0,
            prior_sd: default_prior_sd(),
            n_obs: default_n_obs(),
            n_initial: default_n_initial(),
            observed: None,
            true_theta: default_true_theta(),
            data_seed: 0,
        }
    }

    pub fn triple_default() -> Self {
        ModelConfig::TripleSummary {
            settings: TripleSummarySettings::default(),
            observed_csv: None,
            true_c: default_true_c(),
            true_nu: default_true_nu(),
            data_seed: 0,
        }
    }

    /// Bandwidth used when the configuration leaves it unset.
    pub fn default_bandwidth(&self) -> f64 {
        match self {
            ModelConfig::ConjugateNormal { .. } => 0.1,
            ModelConfig::TripleSummary { .. } => 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Standard,
    Lazy,
    TuneThenLazy,
}

/// Continuation policy for `lazy` mode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyConfig {
    #[default]
    AlwaysOne,
    Constant(f64),
    /// A policy file written by `tune` or a `tune-then-lazy` run.
    File(PathBuf),
}

fn default_n_draws() -> usize {
    10_000
}
fn default_seed() -> u64 {
    1
}
fn default_training() -> usize {
    1_000
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_alpha_min() -> f64 {
    DEFAULT_ALPHA_MIN
}
fn default_nw_bandwidth() -> f64 {
    DEFAULT_NW_BANDWIDTH
}
fn default_bin_width() -> Option<f64> {
    TuneOptions::default().bin_width
}

/// A complete run description, read from JSON. Only `model` and `mode` are
/// required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub mode: Mode,
    /// ABC bandwidth h; a model-specific default applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub distance: DistanceSpec,
    #[serde(default = "default_n_draws")]
    pub n_draws: usize,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub proposal: Proposal,
    /// Training simulations M in `tune-then-lazy` mode.
    #[serde(default = "default_training")]
    pub training_size: usize,
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub clock: Clock,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_alpha_min")]
    pub alpha_min: f64,
    #[serde(default = "default_nw_bandwidth")]
    pub nw_bandwidth: f64,
    #[serde(default = "default_bin_width")]
    pub nw_bin_width: Option<f64>,
    /// Replaces the tuned λ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub policy: PolicyConfig,
    /// Also run standard ABC with the same seed and report the realised
    /// relative efficiency.
    #[serde(default)]
    pub compare_standard: bool,
}

impl RunConfig {
    pub fn new(model: ModelConfig, mode: Mode) -> Self {
        RunConfig {
            model,
            mode,
            bandwidth: None,
            kernel: KernelSpec::default(),
            distance: DistanceSpec::default(),
            n_draws: default_n_draws(),
            master_seed: default_seed(),
            proposal: Proposal::default(),
            training_size: default_training(),
            workers: 0,
            clock: Clock::default(),
            out_dir: default_out(),
            alpha_min: default_alpha_min(),
            nw_bandwidth: default_nw_bandwidth(),
            nw_bin_width: default_bin_width(),
            lambda: None,
            policy: PolicyConfig::default(),
            compare_standard: false,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn abc_config(&self) -> AbcConfig {
        AbcConfig {
            bandwidth: self.bandwidth.unwrap_or_else(|| self.model.default_bandwidth()),
            kernel: self.kernel,
            distance: self.distance.clone(),
            n_draws: self.n_draws,
            master_seed: self.master_seed,
            exact_match: false,
        }
    }

    pub fn exec(&self) -> ExecOptions {
        ExecOptions {
            workers: self.workers,
            clock: self.clock,
        }
    }

    pub fn tune_options(&self) -> TuneOptions {
        TuneOptions {
            bandwidth: self.nw_bandwidth,
            alpha_min: self.alpha_min,
            bin_width: self.nw_bin_width,
            ..TuneOptions::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.abc_config().validate()?;
        if !(self.alpha_min > 0.0 && self.alpha_min <= 1.0) {
            return Err(Error::config("alpha_min must lie in (0, 1]"));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) {
                return Err(Error::config("lambda must be nonnegative"));
            }
        }
        if self.mode == Mode::TuneThenLazy {
            if self.training_size < 2 {
                return Err(Error::config("training_size must be at least 2"));
            }
            if self.n_draws < self.training_size {
                return Err(Error::config(format!(
                    "n_draws ({}) must be at least training_size ({})",
                    self.n_draws, self.training_size
                )));
            }
        }
        if let PolicyConfig::File(p) = &self.policy {
            if self.mode == Mode::Lazy && !p.exists() {
                return Err(Error::config(format!("policy file {} not found", p.display())));
            }
        }
        if let ModelConfig::TripleSummary {
            observed_csv: Some(p),
            ..
        } = &self.model
        {
            if !p.exists() {
                return Err(Error::config(format!("observed data {} not found", p.display())));
            }
        }
        Ok(())
    }
}

/// A fitted policy as persisted by `tune`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub policy: ContinuationPolicy,
    pub estimated_relative_efficiency: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl PolicyFile {
    pub fn from_tuning(result: &TuningResult, alpha_min: f64) -> Self {
        PolicyFile {
            policy: result.policy(alpha_min),
            estimated_relative_efficiency: result.estimated_relative_efficiency,
            warnings: result.warnings.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Efficiency summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub model: String,
    pub mode: Mode,
    pub bandwidth: f64,
    pub kernel: KernelSpec,
    /// SHA-256 of the observed summary, identifying the dataset.
    pub observed_fingerprint: String,
    pub n_draws: usize,
    pub n_failed: usize,
    pub n_stopped: usize,
    pub ess: f64,
    /// True when every weight is zero.
    pub degenerate: bool,
    pub z_hat: f64,
    /// Σ (t1 + t2) over draws.
    pub draw_cpu_seconds: f64,
    pub tuning_cpu_seconds: f64,
    /// Draw plus tuning CPU time, summed over workers.
    pub total_cpu_seconds: f64,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_relative_efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_relative_efficiency: Option<f64>,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
}

pub fn fingerprint(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl EfficiencyReport {
    pub fn from_draws(
        model: &str,
        mode: Mode,
        cfg: &AbcConfig,
        observed_fingerprint: String,
        draws: &[WeightedDraw],
    ) -> Self {
        let weights = weights_of(draws);
        let ess_value = ess(&weights);
        let draw_cpu: f64 = draws.iter().map(|d| d.t1 + d.t2).sum();
        EfficiencyReport {
            model: model.to_string(),
            mode,
            bandwidth: cfg.bandwidth,
            kernel: cfg.kernel,
            observed_fingerprint,
            n_draws: draws.len(),
            n_failed: draws.iter().filter(|d| d.failed()).count(),
            n_stopped: draws.iter().filter(|d| d.stopped_early).count(),
            ess: ess_value,
            degenerate: ess_value == 0.0,
            z_hat: estimate_z(&weights).unwrap_or(0.0),
            draw_cpu_seconds: draw_cpu,
            tuning_cpu_seconds: 0.0,
            total_cpu_seconds: draw_cpu,
            wall_seconds: 0.0,
            estimated_relative_efficiency: None,
            actual_relative_efficiency: None,
            version: VERSION.to_string(),
            config: None,
        }
    }

    pub fn with_tuning_seconds(mut self, seconds: f64) -> Self {
        self.tuning_cpu_seconds = seconds;
        self.total_cpu_seconds = self.draw_cpu_seconds + seconds;
        self
    }

    /// ESS per CPU second.
    pub fn efficiency(&self) -> f64 {
        self.ess / self.total_cpu_seconds
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// `[ESS/time]_lazy / [ESS/time]_standard`.
pub fn actual_relative_efficiency(
    lazy_ess: f64,
    lazy_seconds: f64,
    standard_ess: f64,
    standard_seconds: f64,
) -> f64 {
    (lazy_ess / lazy_seconds) / (standard_ess / standard_seconds)
}

/// One row of a standard-versus-lazy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub standard_seconds: f64,
    pub standard_ess: f64,
    pub lazy_seconds: f64,
    pub lazy_ess: f64,
    pub estimated_relative_efficiency: Option<f64>,
    pub actual_relative_efficiency: f64,
}

impl ComparisonRow {
    pub fn header() -> String {
        format!(
            "{:<18} {:>14} {:>12} {:>14} {:>12} {:>10} {:>10}",
            "model", "standard_s", "standard_ess", "lazy_s", "lazy_ess", "estimated", "actual"
        )
    }

    pub fn render(&self) -> String {
        let est = self
            .estimated_relative_efficiency
            .map_or_else(|| "-".to_string(), |e| format!("{e:.2}"));
        format!(
            "{:<18} {:>14.4} {:>12.1} {:>14.4} {:>12.1} {:>10} {:>10.2}",
            self.model,
            self.standard_seconds,
            self.standard_ess,
            self.lazy_seconds,
            self.lazy_ess,
            est,
            self.actual_relative_efficiency
        )
    }
}

/// Compares a standard and a lazy report of the same analysis.
pub fn cmd_compare(standard: &EfficiencyReport, lazy: &EfficiencyReport) -> Result<ComparisonRow> {
    if standard.model != lazy.model {
        return Err(Error::Incompatible("model".into()));
    }
    if standard.bandwidth != lazy.bandwidth {
        return Err(Error::Incompatible("bandwidth".into()));
    }
    if standard.kernel != lazy.kernel {
        return Err(Error::Incompatible("kernel".into()));
    }
    if standard.observed_fingerprint != lazy.observed_fingerprint {
        return Err(Error::Incompatible("observed data".into()));
    }
    if !(standard.total_cpu_seconds > 0.0) || !(lazy.total_cpu_seconds > 0.0) {
        return Err(Error::input("reports need positive CPU time"));
    }
    Ok(ComparisonRow {
        model: lazy.model.clone(),
        standard_seconds: standard.total_cpu_seconds,
        standard_ess: standard.ess,
        lazy_seconds: lazy.total_cpu_seconds,
        lazy_ess: lazy.ess,
        estimated_relative_efficiency: lazy.estimated_relative_efficiency,
        actual_relative_efficiency: actual_relative_efficiency(
            lazy.ess,
            lazy.total_cpu_seconds,
            standard.ess,
            standard.total_cpu_seconds,
        ),
    })
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub draws: Vec<WeightedDraw>,
    pub report: EfficiencyReport,
    pub policy: Option<PolicyFile>,
    pub training: Option<Vec<TrainingRecord>>,
    /// The paired standard run when `compare_standard` is set.
    pub standard: Option<(Vec<WeightedDraw>, EfficiencyReport)>,
}

/// Builds the configured model and runs it.
pub fn execute(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    match &config.model {
        ModelConfig::ConjugateNormal {
            prior_mean,
            prior_sd,
            n_obs,
            n_initial,
            observed,
            true_theta,
            data_seed,
        } => {
            let model = match observed {
                Some(obs) => ConjugateNormalModel::new(*prior_mean, *prior_sd, *n_initial, obs.clone())?,
                None => ConjugateNormalModel::synthetic(
                    *prior_mean,
                    *prior_sd,
                    *n_obs,
                    *n_initial,
                    *true_theta,
                    *data_seed,
                )?,
            };
            execute_with(&model, config)
        }
        ModelConfig::TripleSummary {
            settings,
            observed_csv,
            true_c,
            true_nu,
            data_seed,
        } => {
            let model = match observed_csv {
                Some(path) => TripleSummaryModel::new(settings.clone(), DataMatrix::read_csv(path)?)?,
                None => TripleSummaryModel::synthetic(settings.clone(), *true_c, *true_nu, *data_seed)?,
            };
            execute_with(&model, config)
        }
    }
}

/// Runs `config` against an already constructed model.
pub fn execute_with<M: TwoStageModel>(model: &M, config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let cfg = config.abc_config();
    let exec = config.exec();
    let fp = fingerprint(model.observed_summary());
    let started = Instant::now();

    let mut policy_file = None;
    let mut training = None;
    let mut tuning_seconds = 0.0;
    let draws = match config.mode {
        Mode::Standard => run_standard_abc(model, &config.proposal, &cfg, &exec)?,
        Mode::Lazy => {
            let (mut policy, estimated) = match &config.policy {
                PolicyConfig::AlwaysOne => (ContinuationPolicy::always_one(), None),
                PolicyConfig::Constant(a) => (ContinuationPolicy::constant(*a), None),
                PolicyConfig::File(path) => {
                    let file = PolicyFile::read(path)?;
                    (file.policy, Some(file.estimated_relative_efficiency))
                }
            };
            if let Some(l) = config.lambda {
                policy = policy.with_lambda(l);
            }
            let draws: Vec<WeightedDraw> = run_lazy_outcomes(
                model,
                &policy,
                &config.proposal,
                &cfg,
                &exec,
                0..cfg.n_draws as u64,
            )?
            .into_iter()
            .map(|o| o.draw)
            .collect();
            check_failures(&draws)?;
            policy_file = Some(PolicyFile {
                policy,
                estimated_relative_efficiency: estimated.unwrap_or(f64::NAN),
                warnings: Vec::new(),
            });
            draws
        }
        Mode::TuneThenLazy => {
            let m = config.training_size;
            let (records, outcomes) =
                collect_training_outcomes(model, &config.proposal, m, &cfg, &exec)?;
            let tune_start = thread_cpu_seconds();
            let candidates: Vec<usize> = (0..model.decision_stat_dim()).collect();
            let tuned = backward_select(&records, &candidates, &config.tune_options())?;
            let mut file = PolicyFile::from_tuning(&tuned, config.alpha_min);
            if let Some(l) = config.lambda {
                file.policy = file.policy.with_lambda(l);
            }
            tuning_seconds = match config.clock {
                Clock::ThreadCpu => (thread_cpu_seconds() - tune_start).max(0.0),
                Clock::Nominal => 0.0,
            };
            log::info!(
                "tuned lambda {:.4e}, subset {:?}, estimated relative efficiency {:.3}",
                tuned.lambda_star,
                tuned.stat_subset,
                tuned.estimated_relative_efficiency
            );
            let rest = run_lazy_outcomes(
                model,
                &file.policy,
                &config.proposal,
                &cfg,
                &exec,
                m as u64..cfg.n_draws as u64,
            )?;
            let draws: Vec<WeightedDraw> =
                outcomes.into_iter().chain(rest).map(|o| o.draw).collect();
            check_failures(&draws)?;
            policy_file = Some(file);
            training = Some(records);
            draws
        }
    };

    let mut report = EfficiencyReport::from_draws(model.name(), config.mode, &cfg, fp.clone(), &draws)
        .with_tuning_seconds(tuning_seconds);
    report.wall_seconds = started.elapsed().as_secs_f64();
    report.estimated_relative_efficiency = policy_file
        .as_ref()
        .map(|p| p.estimated_relative_efficiency)
        .filter(|e| e.is_finite());
    report.config = Some(config.clone());

    let standard = if config.compare_standard && config.mode != Mode::Standard {
        let started = Instant::now();
        let std_draws = run_standard_abc(model, &config.proposal, &cfg, &exec)?;
        let mut std_report =
            EfficiencyReport::from_draws(model.name(), Mode::Standard, &cfg, fp, &std_draws);
        std_report.wall_seconds = started.elapsed().as_secs_f64();
        let mut std_config = config.clone();
        std_config.mode = Mode::Standard;
        std_report.config = Some(std_config);
        report.actual_relative_efficiency = Some(actual_relative_efficiency(
            report.ess,
            report.total_cpu_seconds,
            std_report.ess,
            std_report.total_cpu_seconds,
        ));
        Some((std_draws, std_report))
    } else {
        None
    };

    Ok(RunOutput {
        draws,
        report,
        policy: policy_file,
        training,
        standard,
    })
}

/// Writes draws, report, policy and training records into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_draws_csv(&dir.join("draws.csv"), &out.draws)?;
    out.report.write(&dir.join("report.json"))?;
    if let Some(p) = &out.policy {
        p.write(&dir.join("policy.json"))?;
    }
    if let Some(t) = &out.training {
        write_records_csv(&dir.join("training.csv"), t)?;
    }
    if let Some((draws, report)) = &out.standard {
        write_draws_csv(&dir.join("standard_draws.csv"), draws)?;
        report.write(&dir.join("standard_report.json"))?;
    }
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(field: &str, row: usize, name: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::MalformedRow {
        row,
        message: format!("{name}: {e}"),
    })
}

/// Writes draws in the `index, theta_1..theta_k, weight, l_abc, a,
/// stopped_early, t1_seconds, t2_seconds, seed_index` layout.
pub fn write_draws<W: std::io::Write>(writer: W, draws: &[WeightedDraw]) -> Result<()> {
    let k = draws.first().map_or(0, |d| d.theta.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index".to_string()];
    header.extend((1..=k).map(|i| format!("theta_{i}")));
    header.extend(
        ["weight", "l_abc", "a", "stopped_early", "t1_seconds", "t2_seconds", "seed_index"]
            .map(String::from),
    );
    w.write_record(&header)?;
    for (row, d) in draws.iter().enumerate() {
        if d.theta.len() != k {
            return Err(Error::input("draws have inconsistent parameter dimension"));
        }
        let mut rec = vec![row.to_string()];
        rec.extend(d.theta.iter().map(|v| fmt_f64(*v)));
        rec.push(fmt_f64(d.weight));
        rec.push(fmt_f64(d.l_abc));
        rec.push(fmt_f64(d.continuation_prob));
        rec.push(d.stopped_early.to_string());
        rec.push(fmt_f64(d.t1));
        rec.push(fmt_f64(d.t2));
        rec.push(d.index.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_draws_csv(path: &Path, draws: &[WeightedDraw]) -> Result<()> {
    write_draws(fs::File::create(path)?, draws)
}

pub fn draws_to_string(draws: &[WeightedDraw]) -> Result<String> {
    let mut buf = Vec::new();
    write_draws(&mut buf, draws)?;
    String::from_utf8(buf).map_err(|e| Error::input(e.to_string()))
}

pub fn read_draws<R: std::io::Read>(reader: R) -> Result<Vec<WeightedDraw>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let k = header.iter().filter(|h| h.starts_with("theta_")).count();
    let expected = k + 8;
    if header.len() != expected {
        return Err(Error::MalformedRow {
            row: 0,
            message: format!("expected {expected} columns, found {}", header.len()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != expected {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {expected} fields, found {}", rec.len()),
            });
        }
        let theta = (1..=k)
            .map(|j| parse_f64(&rec[j], row, "theta"))
            .collect::<Result<Vec<_>>>()?;
        let stopped_early = match rec[k + 4].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::MalformedRow {
                    row,
                    message: format!("stopped_early must be true or false, got {other}"),
                })
            }
        };
        let index = rec[k + 7].trim().parse::<u64>().map_err(|e| Error::MalformedRow {
            row,
            message: format!("seed_index: {e}"),
        })?;
        out.push(WeightedDraw {
            index,
            theta: ParamVector::new(theta).map_err(|e| Error::MalformedRow {
                row,
                message: e.to_string(),
            })?,
            weight: parse_f64(&rec[k + 1], row, "weight")?,
            l_abc: parse_f64(&rec[k + 2], row, "l_abc")?,
            continuation_prob: parse_f64(&rec[k + 3], row, "a")?,
            stopped_early,
            t1: parse_f64(&rec[k + 5], row, "t1_seconds")?,
            t2: parse_f64(&rec[k + 6], row, "t2_seconds")?,
        });
    }
    Ok(out)
}

pub fn read_draws_csv(path: &Path) -> Result<Vec<WeightedDraw>> {
    read_draws(fs::File::open(path)?)
}

/// Writes training records as `index, theta_1..theta_k, phi_1..phi_m, l,
/// t1_seconds, t2_seconds, prior_density, proposal_density`.
pub fn write_records<W: std::io::Write>(writer: W, records: &[TrainingRecord]) -> Result<()> {
    let k = records.first().map_or(0, |r| r.theta.len());
    let m = records.first().map_or(0, |r| r.phi.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["index".to_string()];
    header.extend((1..=k).map(|i| format!("theta_{i}")));
    header.extend((1..=m).map(|i| format!("phi_{i}")));
    header.extend(
        ["l", "t1_seconds", "t2_seconds", "prior_density", "proposal_density"].map(String::from),
    );
    w.write_record(&header)?;
    for (i, r) in records.iter().enumerate() {
        if r.theta.len() != k || r.phi.len() != m {
            return Err(Error::input("records have inconsistent dimensions"));
        }
        let mut rec = vec![i.to_string()];
        rec.extend(r.theta.iter().chain(&r.phi).map(|v| fmt_f64(*v)));
        rec.extend(
            [r.l, r.t1, r.t2, r.prior_density, r.proposal_density]
                .iter()
                .map(|v| fmt_f64(*v)),
        );
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(path: &Path, records: &[TrainingRecord]) -> Result<()> {
    write_records(fs::File::create(path)?, records)
}

pub fn read_records<R: std::io::Read>(reader: R) -> Result<Vec<TrainingRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let k = header.iter().filter(|h| h.starts_with("theta_")).count();
    let m = header.iter().filter(|h| h.starts_with("phi_")).count();
    let expected = 1 + k + m + 5;
    if header.len() != expected {
        return Err(Error::MalformedRow {
            row: 0,
            message: format!("expected {expected} columns, found {}", header.len()),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if rec.len() != expected {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected {expected} fields, found {}", rec.len()),
            });
        }
        let vals = (1..expected)
            .map(|j| parse_f64(&rec[j], row, &header[j]))
            .collect::<Result<Vec<_>>>()?;
        let record = TrainingRecord {
            theta: ParamVector::new(vals[..k].to_vec()).map_err(|e| Error::MalformedRow {
                row,
                message: e.to_string(),
            })?,
            phi: vals[k..k + m].to_vec(),
            l: vals[k + m],
            t1: vals[k + m + 1],
            t2: vals[k + m + 2],
            prior_density: vals[k + m + 3],
            proposal_density: vals[k + m + 4],
        };
        record.validate().map_err(|e| Error::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<TrainingRecord>> {
    read_records(fs::File::open(path)?)
}

/// Fits a policy from recorded training data.
pub fn cmd_tune(records: &[TrainingRecord], opts: &TuneOptions) -> Result<PolicyFile> {
    let dim = records
        .first()
        .map(|r| r.phi.len())
        .ok_or_else(|| Error::input("no training records"))?;
    if dim == 0 {
        return Err(Error::input("records carry no decision statistics"));
    }
    let candidates: Vec<usize> = (0..dim).collect();
    let result = backward_select(records, &candidates, opts)?;
    Ok(PolicyFile::from_tuning(&result, opts.alpha_min))
}

/// Efficiency report recomputed from a draws file.
pub fn cmd_report(draws: &[WeightedDraw]) -> serde_json::Value {
    let weights = weights_of(draws);
    let ess_value = ess(&weights);
    let cpu: f64 = draws.iter().map(|d| d.t1 + d.t2).sum();
    serde_json::json!({
        "n_draws": draws.len(),
        "n_failed": draws.iter().filter(|d| d.failed()).count(),
        "n_stopped": draws.iter().filter(|d| d.stopped_early).count(),
        "ess": ess_value,
        "degenerate": ess_value == 0.0,
        "z_hat": estimate_z(&weights).unwrap_or(0.0),
        "draw_cpu_seconds": cpu,
        "ess_per_cpu_second": if cpu > 0.0 { ess_value / cpu } else { 0.0 },
    })
}
