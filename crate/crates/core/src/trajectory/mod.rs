//! Stochastic unravelings of the master equation.
//!
//! * [`counting`]: jump (photodetection) trajectories with waiting-time
//!   sampling, also used with displaced jump operators for finite-amplitude
//!   homodyne detection.
//! * [`homodyne`]: the diffusive limit of homodyne detection.
//! * [`ensemble`]: deterministic parallel ensembles.

pub mod counting;
pub mod ensemble;
pub mod homodyne;
pub mod process;
pub mod rng;

use serde::{Deserialize, Serialize};

use crate::linalg::{bell_states, StateVector};
use crate::model::ChannelLabel;

pub use counting::{run_counting_trajectory, run_trajectory, Controller, JumpSampling};
pub use ensemble::{
    for_each_ordered, for_each_record, run_ensemble, run_records, EnsembleResult, EnsembleSpec, FinalClass, Moments,
    TrajectorySummary,
};
pub use homodyne::run_homodyne_trajectory;
pub use process::{evolve_no_jump, sample_waiting_time, JumpProcess, WaitingTime};

/// A detector click.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub channel: ChannelLabel,
}

/// Observables recorded at one sample time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub n1: f64,
    pub n2: f64,
    /// Squared norm of the unnormalized state since the last jump.
    pub norm2: f64,
    pub bell_plus: f64,
    pub bell_minus: f64,
}

impl Sample {
    pub const NAMES: [&'static str; 5] = ["n1", "n2", "norm2", "bell_plus", "bell_minus"];

    /// Observables of the normalized `psi`, tagging the given norm.
    pub fn of(psi: &StateVector, norm2: f64) -> Sample {
        let n = psi.norm_sqr();
        let p = psi.0.map(|a| a.norm_sqr() / n);
        let (plus, minus) = bell_states();
        Sample {
            n1: p[2] + p[3],
            n2: p[1] + p[3],
            norm2,
            bell_plus: plus.inner(psi).norm_sqr() / n,
            bell_minus: minus.inner(psi).norm_sqr() / n,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [self.n1, self.n2, self.norm2, self.bell_plus, self.bell_minus]
    }
}

/// Which unraveling generated a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnravelingKind {
    Counting,
    DisplacedCounting { beta: f64 },
    HomodyneDiffusion,
}

impl UnravelingKind {
    /// Finite local-oscillator amplitude used when none is given: `10 √γc`.
    pub fn default_beta(gamma_c: f64) -> f64 {
        10.0 * gamma_c.sqrt()
    }

    pub fn name(&self) -> &'static str {
        match self {
            UnravelingKind::Counting => "counting",
            UnravelingKind::DisplacedCounting { .. } => "displaced_counting",
            UnravelingKind::HomodyneDiffusion => "homodyne_diffusion",
        }
    }
}

/// One realization: observables on the sample grid plus its click record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub sample_times: Vec<f64>,
    pub samples: Vec<Sample>,
    pub events: Vec<JumpEvent>,
    pub seed: u64,
    pub unraveling: UnravelingKind,
    /// Final normalized state.
    pub final_state: StateVector,
}

impl TrajectoryRecord {
    pub fn first_jump(&self) -> Option<&JumpEvent> {
        self.events.first()
    }

    /// True if no click happened at or before `t`.
    pub fn survives_until(&self, t: f64) -> bool {
        self.events.first().is_none_or(|e| e.time > t)
    }
}
