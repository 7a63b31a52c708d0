//! A fully dissipative Maxwell demon.
//!
//! The cold qubit is monitored through its counting record. When it absorbs a
//! quantum from the cold bath (`Local1Up` click) the collective channel is
//! switched on ("the door opens"); it is switched off again at the next
//! emission. If the emission goes into the hot bath the cycle has moved one
//! quantum from the cold bath to the hot one without any work being done on
//! the qubits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Basis, StateVector};
use crate::model::{build_channels, effective_thermal_rates, Bath, ChannelLabel, ModelParams};
use crate::series::TimeGrid;
use crate::trajectory::counting::{drive, Controller, JumpSampling};
use crate::trajectory::ensemble::for_each_ordered;
use crate::trajectory::process::JumpProcess;
use crate::trajectory::rng::{child_seed, trajectory_rng};
use crate::trajectory::{JumpEvent, Moments, TrajectoryRecord, UnravelingKind};

/// When monitoring resumes after the door has closed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartPolicy {
    /// Resume only once qubit 2 is in its ground state, and open the door only
    /// if qubit 2 is in its ground state, so that a hot-bath excitation can
    /// never leave through the collective or cold channel.
    #[default]
    RelaxationGated,
    /// Resume right away and open the door on every cold absorption.
    Immediate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemonConfig {
    /// Model parameters; `gamma_c` is ignored and switched by the protocol.
    pub base: ModelParams,
    /// Collective rate while the door is open.
    pub gamma_c_active: f64,
    /// Longest time the door stays open; `None` means `20 / gamma_c_active`.
    #[serde(default)]
    pub max_transfer_duration: Option<f64>,
    #[serde(default)]
    pub restart: RestartPolicy,
}

impl DemonConfig {
    pub fn new(base: ModelParams, gamma_c_active: f64) -> Self {
        DemonConfig {
            base,
            gamma_c_active,
            max_transfer_duration: None,
            restart: RestartPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.active_params().validate()?;
        if !(self.gamma_c_active > 0.0) || !self.gamma_c_active.is_finite() {
            return Err(Error::InvalidParameter {
                field: "gamma_c_active",
                reason: format!("must be positive, got {}", self.gamma_c_active),
            });
        }
        if self.base.nthc != 0.0 {
            return Err(Error::InvalidParameter {
                field: "nthc",
                reason: "the collective bath must be at zero temperature".into(),
            });
        }
        if let Some(d) = self.max_transfer_duration {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter {
                    field: "max_transfer_duration",
                    reason: format!("must be positive, got {d}"),
                });
            }
        }
        Ok(())
    }

    /// Conditions under which the protocol is not expected to work well.
    pub fn warnings(&self) -> Vec<String> {
        let r = effective_thermal_rates(&self.base);
        let mut out = Vec::new();
        if r.gtilde1 <= r.gtilde2 {
            out.push(format!(
                "effective rate of qubit 1 ({}) does not exceed that of qubit 2 ({}); transfer is disfavoured",
                r.gtilde1, r.gtilde2
            ));
        }
        out
    }

    pub fn max_duration(&self) -> f64 {
        self.max_transfer_duration.unwrap_or(20.0 / self.gamma_c_active)
    }

    /// Parameters while the door is closed.
    pub fn idle_params(&self) -> ModelParams {
        self.base.with_gamma_c(0.0)
    }

    /// Parameters while the door is open.
    pub fn active_params(&self) -> ModelParams {
        self.base.with_gamma_c(self.gamma_c_active)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemonPhase {
    /// Collective channel off; waiting for the cold qubit to absorb.
    Monitoring,
    /// Collective channel on; the absorbed quantum is in flight.
    TransferActive,
    /// Collective channel off after the door closed.
    Closed,
}

impl DemonPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            DemonPhase::Monitoring => "monitoring",
            DemonPhase::TransferActive => "transfer_active",
            DemonPhase::Closed => "closed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseChange {
    pub time: f64,
    pub phase: DemonPhase,
}

/// How an open-door interval ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleOutcome {
    /// Emitted into the hot bath (`Local2Down`).
    Hot,
    /// Re-emitted into the cold bath (`Local1Down`).
    Cold,
    /// Emitted into the collective bath (`CollectiveDown`).
    Collective,
    /// The door was closed by the duration guard.
    Timeout,
    /// The trajectory ended with the door open.
    Unfinished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cycle {
    pub start: f64,
    pub end: f64,
    pub outcome: CycleOutcome,
    /// Clicks from the opening `Local1Up` up to and including the closing one.
    pub events: Vec<JumpEvent>,
    /// Change of the ledger `[cold, hot, collective]` over the cycle.
    pub ledger_delta: [i64; 3],
}

impl Cycle {
    /// Exactly the opening absorption followed by an emission into the hot
    /// bath.
    pub fn is_completed(&self) -> bool {
        self.outcome == CycleOutcome::Hot && self.events.len() == 2
    }
}

/// Net quanta delivered to each bath (`+1` per emission into it, `-1` per
/// absorption from it) plus the phase timeline and the door cycles.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HeatLedger {
    pub cold: i64,
    pub hot: i64,
    pub collective: i64,
    pub timeline: Vec<PhaseChange>,
    pub cycles: Vec<Cycle>,
    /// Collective clicks observed while the door was not open.
    pub collective_outside_active: u64,
}

impl HeatLedger {
    pub fn record(&mut self, channel: ChannelLabel) {
        let d = if channel.is_down() { 1 } else { -1 };
        match channel.bath() {
            Bath::Cold => self.cold += d,
            Bath::Hot => self.hot += d,
            Bath::Collective => self.collective += d,
        }
    }

    pub fn totals(&self) -> [i64; 3] {
        [self.cold, self.hot, self.collective]
    }

    pub fn n_cycles(&self) -> usize {
        self.cycles.len()
    }

    pub fn n_completed(&self) -> usize {
        self.cycles.iter().filter(|c| c.is_completed()).count()
    }
}

/// Probability that qubit 2 is excited.
fn n2(psi: &StateVector) -> f64 {
    let n = psi.norm_sqr();
    (psi.0[Basis::GE as usize].norm_sqr() + psi.0[Basis::EE as usize].norm_sqr()) / n
}

/// Qubit 2 counts as relaxed below this excitation probability.
const RELAXED: f64 = 1e-12;

struct DemonController {
    idle: JumpProcess,
    active: JumpProcess,
    phase: DemonPhase,
    restart: RestartPolicy,
    max_duration: f64,
    door_opened: f64,
    ledger: HeatLedger,
    open_cycle: Option<(f64, Vec<JumpEvent>, [i64; 3])>,
}

impl DemonController {
    fn enter(&mut self, t: f64, phase: DemonPhase) {
        self.phase = phase;
        self.ledger.timeline.push(PhaseChange { time: t, phase });
    }

    fn close(&mut self, t: f64, outcome: CycleOutcome, psi: &StateVector) {
        if let Some((start, events, before)) = self.open_cycle.take() {
            let after = self.ledger.totals();
            self.ledger.cycles.push(Cycle {
                start,
                end: t,
                outcome,
                events,
                ledger_delta: [after[0] - before[0], after[1] - before[1], after[2] - before[2]],
            });
        }
        self.enter(t, DemonPhase::Closed);
        self.maybe_restart(t, psi);
    }

    fn maybe_restart(&mut self, t: f64, psi: &StateVector) {
        let ready = match self.restart {
            RestartPolicy::Immediate => true,
            RestartPolicy::RelaxationGated => n2(psi) < RELAXED,
        };
        if ready {
            self.enter(t, DemonPhase::Monitoring);
        }
    }

    fn finish(&mut self, t: f64) {
        if self.phase == DemonPhase::TransferActive {
            if let Some((start, events, before)) = self.open_cycle.take() {
                let after = self.ledger.totals();
                self.ledger.cycles.push(Cycle {
                    start,
                    end: t,
                    outcome: CycleOutcome::Unfinished,
                    events,
                    ledger_delta: [after[0] - before[0], after[1] - before[1], after[2] - before[2]],
                });
            }
        }
    }
}

impl Controller for DemonController {
    fn process(&self) -> &JumpProcess {
        match self.phase {
            DemonPhase::TransferActive => &self.active,
            DemonPhase::Monitoring | DemonPhase::Closed => &self.idle,
        }
    }

    fn deadline(&self) -> Option<f64> {
        (self.phase == DemonPhase::TransferActive).then_some(self.door_opened + self.max_duration)
    }

    fn on_jump(&mut self, event: &JumpEvent, psi: &StateVector) {
        let before = self.ledger.totals();
        self.ledger.record(event.channel);
        if event.channel.is_collective() && self.phase != DemonPhase::TransferActive {
            self.ledger.collective_outside_active += 1;
        }
        let t = event.time;
        match self.phase {
            DemonPhase::Monitoring => {
                let gate_open = match self.restart {
                    RestartPolicy::Immediate => true,
                    RestartPolicy::RelaxationGated => n2(psi) < RELAXED,
                };
                if event.channel == ChannelLabel::Local1Up && gate_open {
                    self.door_opened = t;
                    self.open_cycle = Some((t, vec![*event], before));
                    self.enter(t, DemonPhase::TransferActive);
                }
            }
            DemonPhase::TransferActive => {
                if let Some((_, events, _)) = self.open_cycle.as_mut() {
                    events.push(*event);
                }
                let outcome = match event.channel {
                    ChannelLabel::Local2Down => Some(CycleOutcome::Hot),
                    ChannelLabel::Local1Down => Some(CycleOutcome::Cold),
                    ChannelLabel::CollectiveDown => Some(CycleOutcome::Collective),
                    _ => None,
                };
                if let Some(outcome) = outcome {
                    self.close(t, outcome, psi);
                }
            }
            DemonPhase::Closed => self.maybe_restart(t, psi),
        }
    }

    fn on_deadline(&mut self, t: f64, psi: &StateVector) {
        if self.phase == DemonPhase::TransferActive {
            self.close(t, CycleOutcome::Timeout, psi);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonRun {
    pub record: TrajectoryRecord,
    pub ledger: HeatLedger,
}

/// One realization of the protocol starting in `psi0` in the monitoring phase.
pub fn run_demon_trajectory(cfg: &DemonConfig, psi0: &StateVector, grid: &TimeGrid, seed: u64) -> Result<DemonRun> {
    cfg.validate()?;
    grid.validate()?;
    let dt = grid.step();
    let mut ctrl = DemonController {
        idle: JumpProcess::counting(&cfg.idle_params(), dt)?,
        active: JumpProcess::counting(&cfg.active_params(), dt)?,
        phase: DemonPhase::Monitoring,
        restart: cfg.restart,
        max_duration: cfg.max_duration(),
        door_opened: 0.0,
        ledger: HeatLedger::default(),
        open_cycle: None,
    };
    ctrl.enter(0.0, DemonPhase::Monitoring);
    let mut rng = trajectory_rng(seed);
    let out = drive(&mut ctrl, psi0, grid, JumpSampling::WaitingTime, &mut rng)?;
    ctrl.finish(grid.horizon());
    Ok(DemonRun {
        record: TrajectoryRecord {
            sample_times: grid.times(),
            samples: out.samples,
            events: out.events,
            seed,
            unraveling: UnravelingKind::Counting,
            final_state: out.final_state,
        },
        ledger: ctrl.ledger,
    })
}

/// Per-trial ledger summary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub trial: usize,
    pub cold_net: i64,
    pub hot_net: i64,
    pub collective_net: i64,
    pub n_cycles: usize,
    pub n_completed_cycles: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub hot: u64,
    pub cold: u64,
    pub collective: u64,
    pub timeout: u64,
    pub unfinished: u64,
}

impl OutcomeCounts {
    pub fn add(&mut self, o: CycleOutcome) {
        match o {
            CycleOutcome::Hot => self.hot += 1,
            CycleOutcome::Cold => self.cold += 1,
            CycleOutcome::Collective => self.collective += 1,
            CycleOutcome::Timeout => self.timeout += 1,
            CycleOutcome::Unfinished => self.unfinished += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.hot + self.cold + self.collective + self.timeout + self.unfinished
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanWithError {
    pub mean: f64,
    pub stderr: f64,
}

impl MeanWithError {
    fn of(m: &Moments) -> Self {
        MeanWithError {
            mean: m.mean(),
            stderr: m.stderr(),
        }
    }

    /// `mean / stderr` (infinite if the standard error vanishes).
    pub fn significance(&self) -> f64 {
        self.mean / self.stderr
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonStats {
    pub n_traj: usize,
    pub master_seed: u64,
    /// Net quanta per trajectory, averaged over trajectories.
    pub cold: MeanWithError,
    pub hot: MeanWithError,
    pub collective: MeanWithError,
    pub n_cycles: u64,
    pub n_completed_cycles: u64,
    /// Completed cycles whose ledger change differs from `(-1, +1, 0)`.
    pub completed_cycle_violations: u64,
    pub outcomes: OutcomeCounts,
    /// First click after the door opened, per channel (`ChannelLabel::ALL`
    /// order), for branching-ratio checks.
    pub first_click_after_opening: [u64; 6],
    pub collective_outside_active: u64,
    pub ledgers: Vec<LedgerRow>,
    /// Phase timeline of trial 0.
    pub first_timeline: Vec<PhaseChange>,
}

/// Runs `n_traj` protocol realizations with the ensemble seeding contract.
pub fn run_demon_ensemble(
    cfg: &DemonConfig,
    psi0: &StateVector,
    grid: &TimeGrid,
    n_traj: usize,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<DemonStats> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter {
            field: "n_traj",
            reason: "must be at least 1".into(),
        });
    }
    cfg.validate()?;
    let (mut cold, mut hot, mut coll) = (Moments::default(), Moments::default(), Moments::default());
    let mut stats = DemonStats {
        n_traj,
        master_seed,
        cold: MeanWithError::default(),
        hot: MeanWithError::default(),
        collective: MeanWithError::default(),
        n_cycles: 0,
        n_completed_cycles: 0,
        completed_cycle_violations: 0,
        outcomes: OutcomeCounts::default(),
        first_click_after_opening: [0; 6],
        collective_outside_active: 0,
        ledgers: Vec::with_capacity(n_traj),
        first_timeline: Vec::new(),
    };
    for_each_ordered(
        n_traj,
        workers,
        |i| {
            let run = run_demon_trajectory(cfg, psi0, grid, child_seed(master_seed, i as u64))?;
            Ok(run.ledger)
        },
        |i, ledger| {
            cold.push(ledger.cold as f64);
            hot.push(ledger.hot as f64);
            coll.push(ledger.collective as f64);
            for c in &ledger.cycles {
                stats.n_cycles += 1;
                stats.outcomes.add(c.outcome);
                if let Some(e) = c.events.get(1) {
                    stats.first_click_after_opening[e.channel.index()] += 1;
                }
                if c.is_completed() {
                    stats.n_completed_cycles += 1;
                    if c.ledger_delta != [-1, 1, 0] {
                        stats.completed_cycle_violations += 1;
                    }
                }
            }
            stats.collective_outside_active += ledger.collective_outside_active;
            stats.ledgers.push(LedgerRow {
                trial: i,
                cold_net: ledger.cold,
                hot_net: ledger.hot,
                collective_net: ledger.collective,
                n_cycles: ledger.n_cycles(),
                n_completed_cycles: ledger.n_completed(),
            });
            if i == 0 {
                stats.first_timeline = ledger.timeline;
            }
            Ok(())
        },
    )?;
    stats.cold = MeanWithError::of(&cold);
    stats.hot = MeanWithError::of(&hot);
    stats.collective = MeanWithError::of(&coll);
    Ok(stats)
}

/// Probabilities that the first click after the door opens on `|e,g>` is of
/// each channel (`ChannelLabel::ALL` order), and that none happens within the
/// door's maximum duration: `∫ γ_μ ||J_μ ψ̃(t)||² dt` under the open-door
/// effective Hamiltonian, by composite Simpson on steps of `dt`.
pub fn branching_oracle(cfg: &DemonConfig, dt: f64) -> Result<([f64; 6], f64)> {
    cfg.validate()?;
    let p = cfg.active_params();
    let process = JumpProcess::counting(&p, dt)?;
    let channels = build_channels(&p);
    let t_end = cfg.max_duration();
    let mut n = (t_end / dt).ceil() as usize;
    n += n % 2;
    let h = t_end / n as f64;
    let flux = |psi: &StateVector| -> [f64; 6] {
        let mut out = [0.0; 6];
        for c in &channels {
            out[c.label.index()] = c.rate * c.operator.apply(psi).norm_sqr();
        }
        out
    };
    let mut psi = StateVector::basis(Basis::EG);
    let mut acc = [0.0; 6];
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        for (a, f) in acc.iter_mut().zip(flux(&psi)) {
            *a += w * f * h / 3.0;
        }
        if k < n {
            psi = process.evolve(&psi, h);
        }
    }
    Ok((acc, psi.norm_sqr()))
}
