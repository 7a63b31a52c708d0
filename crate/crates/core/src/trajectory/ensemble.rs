//! Deterministic ensembles of trajectories.
//!
//! Trajectory `i` always uses [`child_seed`]`(master_seed, i)`. Trajectories are
//! computed in fixed-size blocks (in parallel inside a block) and folded into
//! the accumulators strictly in index order, so results are bitwise
//! independent of the number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::StateVector;
use crate::model::{ChannelLabel, ModelParams};
use crate::series::TimeGrid;
use crate::trajectory::counting::{run_trajectory, JumpSampling};
use crate::trajectory::rng::child_seed;
use crate::trajectory::{JumpEvent, Sample, TrajectoryRecord, UnravelingKind};

/// Trajectories computed per parallel block. Fixed so that the fold order,
/// and hence every floating-point sum, never depends on the thread count.
const BLOCK: usize = 256;

/// Excitation sector of a final state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalClass {
    Ground,
    OneExcitation,
    TwoExcitation,
    /// Weight in more than one sector.
    Superposition,
}

impl FinalClass {
    pub fn of(psi: &StateVector) -> FinalClass {
        let n = psi.norm_sqr();
        let p = psi.0.map(|a| a.norm_sqr() / n);
        let sectors = [p[0], p[1] + p[2], p[3]];
        let classes = [FinalClass::Ground, FinalClass::OneExcitation, FinalClass::TwoExcitation];
        sectors
            .iter()
            .zip(classes)
            .find(|(w, _)| **w > 1.0 - 1e-9)
            .map_or(FinalClass::Superposition, |(_, c)| c)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FinalClass::Ground => "ground",
            FinalClass::OneExcitation => "one_excitation",
            FinalClass::TwoExcitation => "two_excitation",
            FinalClass::Superposition => "superposition",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub seed: u64,
    pub first_jump: Option<JumpEvent>,
    pub n_events: usize,
    pub final_class: FinalClass,
}

impl TrajectorySummary {
    pub fn of(r: &TrajectoryRecord) -> Self {
        TrajectorySummary {
            seed: r.seed,
            first_jump: r.first_jump().copied(),
            n_events: r.events.len(),
            final_class: FinalClass::of(&r.final_state),
        }
    }
}

/// What to simulate.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSpec {
    pub params: ModelParams,
    pub psi0: StateVector,
    pub grid: TimeGrid,
    pub n_traj: usize,
    pub master_seed: u64,
    pub kind: UnravelingKind,
    pub sampling: JumpSampling,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

impl EnsembleSpec {
    pub fn new(params: ModelParams, psi0: StateVector, grid: TimeGrid, n_traj: usize, master_seed: u64) -> Self {
        EnsembleSpec {
            params,
            psi0,
            grid,
            n_traj,
            master_seed,
            kind: UnravelingKind::Counting,
            sampling: JumpSampling::WaitingTime,
            workers: None,
        }
    }

    fn run_one(&self, index: usize) -> Result<TrajectoryRecord> {
        let seed = child_seed(self.master_seed, index as u64);
        run_trajectory(&self.params, &self.psi0, &self.grid, seed, self.kind, self.sampling)
    }
}

/// Pointwise means and standard errors of the sampled observables plus
/// per-channel click counts per sample interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub n_traj: usize,
    pub master_seed: u64,
    pub kind: UnravelingKind,
    pub times: Vec<f64>,
    /// One entry per sample time, fields in [`Sample::NAMES`] order.
    pub mean: Vec<[f64; 5]>,
    pub stderr: Vec<[f64; 5]>,
    /// `jump_counts[k][c]`: clicks of channel `ChannelLabel::ALL[c]` with time
    /// in `(t_k, t_{k+1}]`.
    pub jump_counts: Vec<[u64; 6]>,
    pub summaries: Vec<TrajectorySummary>,
}

impl EnsembleResult {
    /// Mean and standard error of observable `name` (one of [`Sample::NAMES`]).
    pub fn column(&self, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let i = Sample::NAMES.iter().position(|n| *n == name)?;
        Some((
            self.mean.iter().map(|m| m[i]).collect(),
            self.stderr.iter().map(|s| s[i]).collect(),
        ))
    }

    pub fn total_jumps(&self, label: ChannelLabel) -> u64 {
        self.jump_counts.iter().map(|c| c[label.index()]).sum()
    }
}

/// Running mean and variance (Welford), updated in a fixed order.
#[derive(Clone, Debug, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean (sample variance; 0 for fewer than two values).
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = (self.m2 / (self.n - 1) as f64).max(0.0);
        (var / self.n as f64).sqrt()
    }
}

/// Evaluates `job(i)` for `i in 0..n` and feeds the results to `sink` in
/// index order. Jobs run in parallel blocks on `workers` threads (or the
/// global pool); the order seen by `sink` never depends on scheduling.
pub fn for_each_ordered<T, J, S>(n: usize, workers: Option<usize>, job: J, mut sink: S) -> Result<()>
where
    T: Send,
    J: Fn(usize) -> Result<T> + Sync,
    S: FnMut(usize, T) -> Result<()>,
{
    let pool = match workers {
        None => None,
        Some(w) => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter {
                    field: "workers",
                    reason: e.to_string(),
                })?,
        ),
    };
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let compute = || -> Vec<Result<T>> { (start..end).into_par_iter().map(&job).collect() };
        let block = match &pool {
            Some(pool) => pool.install(compute),
            None => compute(),
        };
        for (i, r) in (start..end).zip(block) {
            sink(i, r?)?;
        }
    }
    Ok(())
}

/// Streams the trajectories of `spec` to `sink` in index order.
pub fn for_each_record<S>(spec: &EnsembleSpec, sink: S) -> Result<()>
where
    S: FnMut(usize, TrajectoryRecord) -> Result<()>,
{
    check_spec(spec)?;
    for_each_ordered(spec.n_traj, spec.workers, |i| spec.run_one(i), sink)
}

/// All trajectories of `spec`, in index order.
pub fn run_records(spec: &EnsembleSpec) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::with_capacity(spec.n_traj);
    for_each_record(spec, |_, r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// Ensemble statistics of `spec` without retaining the trajectories.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult> {
    let times = spec.grid.times();
    let n_bins = spec.grid.n_samples();
    let mut moments = vec![std::array::from_fn::<Moments, 5, _>(|_| Moments::default()); times.len()];
    let mut jump_counts = vec![[0u64; 6]; n_bins];
    let mut summaries = Vec::with_capacity(spec.n_traj);
    for_each_record(spec, |_, r| {
        for (m, s) in moments.iter_mut().zip(&r.samples) {
            for (acc, v) in m.iter_mut().zip(s.values()) {
                acc.push(v);
            }
        }
        for e in &r.events {
            if let Some(k) = interval_of(e.time, spec.grid.sample_dt, n_bins) {
                jump_counts[k][e.channel.index()] += 1;
            }
        }
        summaries.push(TrajectorySummary::of(&r));
        Ok(())
    })?;
    Ok(EnsembleResult {
        n_traj: spec.n_traj,
        master_seed: spec.master_seed,
        kind: spec.kind,
        times,
        mean: moments.iter().map(|m| m.each_ref().map(Moments::mean)).collect(),
        stderr: moments.iter().map(|m| m.each_ref().map(Moments::stderr)).collect(),
        jump_counts,
        summaries,
    })
}

/// Index `k` of the interval `(k w, (k+1) w]` holding `t`.
pub(crate) fn interval_of(t: f64, width: f64, n_bins: usize) -> Option<usize> {
    if n_bins == 0 || !(t > 0.0) {
        return None;
    }
    let k = ((t / width).ceil() as usize).saturating_sub(1);
    Some(k.min(n_bins - 1))
}

fn check_spec(spec: &EnsembleSpec) -> Result<()> {
    if spec.n_traj == 0 {
        return Err(Error::InvalidParameter {
            field: "n_traj",
            reason: "must be at least 1".into(),
        });
    }
    if let Some(0) = spec.workers {
        return Err(Error::InvalidParameter {
            field: "workers",
            reason: "must be at least 1".into(),
        });
    }
    spec.params.validate()?;
    spec.grid.validate()
}
