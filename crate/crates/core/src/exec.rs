//! Deterministic per-iteration randomness, stage clocks and the worker pool.
//!
//! Every iteration `i` draws from its own ChaCha stream keyed by
//! `(master_seed, i)`, so results never depend on which worker ran it or in
//! what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random number generator handed to simulators.
pub type SimRng = ChaCha8Rng;

/// The random stream for iteration `index` of a run seeded by `master_seed`.
pub fn iteration_rng(master_seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// How stage durations are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// CPU time of the calling thread.
    #[default]
    ThreadCpu,
    /// Each stage is charged the model's nominal cost. Fully reproducible,
    /// used where draws files must be byte-identical across invocations.
    Nominal,
}

/// CPU seconds consumed so far by the calling thread.
#[cfg(unix)]
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return process_fallback_seconds();
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

#[cfg(not(unix))]
pub fn thread_cpu_seconds() -> f64 {
    process_fallback_seconds()
}

fn process_fallback_seconds() -> f64 {
    use std::sync::OnceLock;
    use std::time::Instant;
    static START: OnceLock<Instant> = OnceLock::new();
    START.get_or_init(Instant::now).elapsed().as_secs_f64()
}

/// A started stopwatch for one stage group.
#[derive(Debug, Clone, Copy)]
pub struct StageTimer {
    clock: Clock,
    start: f64,
}

impl StageTimer {
    pub fn start(clock: Clock) -> Self {
        let start = match clock {
            Clock::ThreadCpu => thread_cpu_seconds(),
            Clock::Nominal => 0.0,
        };
        StageTimer { clock, start }
    }

    /// Elapsed seconds; `nominal` is charged instead under [`Clock::Nominal`].
    pub fn stop(self, nominal: f64) -> f64 {
        match self.clock {
            Clock::ThreadCpu => (thread_cpu_seconds() - self.start).max(0.0),
            Clock::Nominal => nominal,
        }
    }
}

/// Execution settings that do not affect results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub clock: Clock,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            workers: 0,
            clock: Clock::ThreadCpu,
        }
    }
}

impl ExecOptions {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }
}

/// Maps `f` over `range` on a pool of `workers` threads, preserving order.
pub(crate) fn par_map<T, F>(range: std::ops::Range<u64>, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    if workers == 1 {
        return Ok(range.map(f).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| range.into_par_iter().map(f).collect()))
}
