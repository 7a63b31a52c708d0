//! Counting trajectories: jump-free evolution under the effective Hamiltonian
//! interrupted by clicks, sampled with the waiting-time (norm threshold)
//! method.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64};
use crate::model::ModelParams;
use crate::series::TimeGrid;
use crate::trajectory::process::{JumpProcess, StepOutcome};
use crate::trajectory::rng::{open_unit, trajectory_rng};
use crate::trajectory::{homodyne, JumpEvent, Sample, TrajectoryRecord, UnravelingKind};

/// How jump times are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpSampling {
    /// Evolve the unnormalized state until its squared norm crosses a uniform
    /// threshold; crossings are located inside the step by bisection.
    #[default]
    WaitingTime,
    /// One Bernoulli draw per step with probability `dt Σ γ <J^†J>`. First
    /// order in `dt`; kept for cross-checks.
    Bernoulli,
}

/// Decides which [`JumpProcess`] is active and reacts to clicks. The fixed
/// unraveling is `&JumpProcess` itself; feedback protocols implement this to
/// switch channels on and off.
pub trait Controller {
    fn process(&self) -> &JumpProcess;

    /// Time at which the controller wants to be woken up without a click.
    fn deadline(&self) -> Option<f64> {
        None
    }

    fn on_jump(&mut self, _event: &JumpEvent, _psi: &StateVector) {}

    fn on_deadline(&mut self, _t: f64, _psi: &StateVector) {}
}

impl Controller for &JumpProcess {
    fn process(&self) -> &JumpProcess {
        self
    }
}

/// Raw output of [`drive`].
pub(crate) struct DriveOutput {
    pub samples: Vec<Sample>,
    pub events: Vec<JumpEvent>,
    pub final_state: StateVector,
}

/// Runs one counting trajectory on `grid`, consulting `ctrl` for the active
/// process at every step.
pub(crate) fn drive<C: Controller, R: RngCore>(
    ctrl: &mut C,
    psi0: &StateVector,
    grid: &TimeGrid,
    sampling: JumpSampling,
    rng: &mut R,
) -> Result<DriveOutput> {
    let mut psi = psi0.normalized()?;
    let n = grid.n_samples();
    let mut samples = Vec::with_capacity(n + 1);
    let mut events = Vec::new();
    samples.push(Sample::of(&psi, 1.0));

    let mut t = 0.0;
    let mut k_next = 1;
    let mut threshold = open_unit(rng);
    let eps = 1e-12 * grid.sample_dt;

    let mut check_dark = true;
    while k_next <= n {
        if check_dark {
            check_dark = false;
            if ctrl.deadline().is_none() {
                if let Some(energy) = ctrl.process().stationary_dark_energy(&psi) {
                    // nothing can happen any more: fill the grid exactly
                    while k_next <= n {
                        samples.push(Sample::of(&psi, psi.norm_sqr()));
                        k_next += 1;
                    }
                    psi = psi.scale(C64::from_polar(1.0, -energy * (grid.horizon() - t)));
                    break;
                }
            }
        }
        let dt = ctrl.process().dt();
        let t_sample = grid.time(k_next);
        let deadline = ctrl.deadline().filter(|&d| d < t_sample);
        if let Some(d) = deadline {
            if d <= t + eps {
                ctrl.on_deadline(t, &psi);
                continue;
            }
        }
        let stop = deadline.unwrap_or(t_sample);
        let remaining = stop - t;
        let (h, lands) = if remaining <= dt * (1.0 + 1e-9) {
            (remaining, true)
        } else {
            (dt, false)
        };

        let clicked = if h <= eps {
            None
        } else {
            match sampling {
                JumpSampling::WaitingTime => match ctrl.process().try_step(&psi, h, threshold) {
                    StepOutcome::Continue(next) => {
                        psi = next;
                        None
                    }
                    StepOutcome::Crossed { at, psi: at_psi } => {
                        psi = at_psi;
                        Some(t + at)
                    }
                },
                JumpSampling::Bernoulli => {
                    let p_jump = h * ctrl.process().total_jump_rate(&psi);
                    if open_unit(rng) < p_jump {
                        Some(t + h)
                    } else {
                        psi = ctrl.process().evolve(&psi, h);
                        None
                    }
                }
            }
        };

        match clicked {
            Some(t_jump) => {
                let channel = ctrl.process().select_jump_channel(&psi, rng)?;
                psi = ctrl.process().apply_jump(channel, &psi)?;
                let event = JumpEvent { time: t_jump, channel };
                events.push(event);
                ctrl.on_jump(&event, &psi);
                threshold = open_unit(rng);
                check_dark = true;
                t = if lands && (stop - t_jump) <= eps { stop } else { t_jump };
                if t == stop {
                    finish_stop(ctrl, &mut samples, &mut k_next, &psi, deadline, t_sample, t);
                }
            }
            None => {
                t = if lands { stop } else { t + h };
                if lands {
                    finish_stop(ctrl, &mut samples, &mut k_next, &psi, deadline, t_sample, t);
                }
            }
        }
        if !psi.is_finite() {
            return Err(Error::DegenerateState);
        }
    }
    let final_state = psi.normalized()?;
    Ok(DriveOutput {
        samples,
        events,
        final_state,
    })
}

fn finish_stop<C: Controller>(
    ctrl: &mut C,
    samples: &mut Vec<Sample>,
    k_next: &mut usize,
    psi: &StateVector,
    deadline: Option<f64>,
    t_sample: f64,
    t: f64,
) {
    if deadline.is_some() {
        ctrl.on_deadline(t, psi);
    } else if t == t_sample {
        samples.push(Sample::of(psi, psi.norm_sqr()));
        *k_next += 1;
    }
}

/// Counting trajectory of the model from `psi0`, a deterministic function of
/// its arguments.
pub fn run_counting_trajectory(
    p: &ModelParams,
    psi0: &StateVector,
    grid: &TimeGrid,
    seed: u64,
) -> Result<TrajectoryRecord> {
    run_trajectory(p, psi0, grid, seed, UnravelingKind::Counting, JumpSampling::WaitingTime)
}

/// Dispatches on the unraveling kind.
pub fn run_trajectory(
    p: &ModelParams,
    psi0: &StateVector,
    grid: &TimeGrid,
    seed: u64,
    kind: UnravelingKind,
    sampling: JumpSampling,
) -> Result<TrajectoryRecord> {
    grid.validate()?;
    let process = match kind {
        UnravelingKind::Counting => JumpProcess::counting(p, grid.step())?,
        UnravelingKind::DisplacedCounting { beta } => JumpProcess::displaced(p, beta, grid.step())?,
        UnravelingKind::HomodyneDiffusion => {
            return homodyne::run_homodyne_trajectory(p, psi0, grid, seed, kind);
        }
    };
    let mut rng = trajectory_rng(seed);
    let mut ctrl = &process;
    let out = drive(&mut ctrl, psi0, grid, sampling, &mut rng)?;
    Ok(TrajectoryRecord {
        sample_times: grid.times(),
        samples: out.samples,
        events: out.events,
        seed,
        unraveling: kind,
        final_state: out.final_state,
    })
}
