//! Lindblad master equation: right-hand side, fixed-step RK4 integration,
//! steady states and per-bath heat currents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{bell_states, number_op, DensityMatrix, Operator, C64};
use crate::model::{build_channels, build_hamiltonian, Bath, JumpChannel, ModelParams};
use crate::series::{TimeGrid, TimeSeries};
use crate::tolerances::Tolerances;

/// Largest accepted `dt * Σγ` for fixed-step integration.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Precomputed generator `L ρ = -i[H, ρ] + Σ γ D[J] ρ`.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    hamiltonian: Operator,
    channels: Vec<JumpChannel>,
    jdj: Vec<Operator>,
    adjoints: Vec<Operator>,
}

impl Liouvillian {
    pub fn new(p: &ModelParams) -> Self {
        Self::from_parts(build_hamiltonian(p), build_channels(p))
    }

    pub fn from_parts(hamiltonian: Operator, channels: Vec<JumpChannel>) -> Self {
        let jdj = channels.iter().map(JumpChannel::jdj).collect();
        let adjoints = channels.iter().map(|c| c.operator.adjoint()).collect();
        Liouvillian {
            hamiltonian,
            channels,
            jdj,
            adjoints,
        }
    }

    pub fn total_rate(&self) -> f64 {
        self.channels.iter().map(|c| c.rate).sum()
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        let minus_i = C64::new(0.0, -1.0);
        let mut out = (self.hamiltonian * *rho - *rho * self.hamiltonian).scale(minus_i);
        for ((c, jdj), jd) in self.channels.iter().zip(&self.jdj).zip(&self.adjoints) {
            let jump = c.operator * *rho * *jd;
            let anti = (*jdj * *rho + *rho * *jdj).scale_re(0.5);
            out = out + (jump - anti).scale_re(c.rate);
        }
        out
    }

    pub fn rk4_step(&self, rho: &Operator, dt: f64) -> Operator {
        let k1 = self.apply(rho);
        let k2 = self.apply(&(*rho + k1.scale_re(dt / 2.0)));
        let k3 = self.apply(&(*rho + k2.scale_re(dt / 2.0)));
        let k4 = self.apply(&(*rho + k3.scale_re(dt)));
        *rho + (k1 + k2.scale_re(2.0) + k3.scale_re(2.0) + k4).scale_re(dt / 6.0)
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        let load = dt * self.total_rate();
        if load >= STABILITY_LIMIT {
            return Err(Error::StabilityGuard {
                dt,
                detail: format!("dt * total rate = {load} >= {STABILITY_LIMIT}"),
            });
        }
        Ok(())
    }
}

/// Time derivative `dρ/dt` of the master equation.
pub fn liouvillian_apply(p: &ModelParams, rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_raw(Liouvillian::new(p).apply(rho.as_operator()))
}

/// Scalar observables that can be recorded along a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    N1,
    N2,
    Trace,
    Purity,
    BellPlus,
    BellMinus,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::N1 => "n1",
            Observable::N2 => "n2",
            Observable::Trace => "trace",
            Observable::Purity => "purity",
            Observable::BellPlus => "bell_plus",
            Observable::BellMinus => "bell_minus",
        }
    }

    pub fn evaluate(self, rho: &DensityMatrix) -> f64 {
        let op = rho.as_operator();
        let tr = rho.trace();
        match self {
            Observable::N1 => (number_op(1) * *op).trace().re / tr,
            Observable::N2 => (number_op(2) * *op).trace().re / tr,
            Observable::Trace => tr,
            Observable::Purity => rho.purity(),
            Observable::BellPlus => (bell_states().0.projector() * *op).trace().re / tr,
            Observable::BellMinus => (bell_states().1.projector() * *op).trace().re / tr,
        }
    }
}

/// Density matrices on a sample grid plus integrity diagnostics.
#[derive(Clone, Debug)]
pub struct LindbladRun {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// `max |Tr ρ(t) - Tr ρ(0)|` over every internal step.
    pub max_trace_drift: f64,
    /// Smallest eigenvalue seen at the sample times.
    pub min_eigenvalue: f64,
    pub max_hermiticity_deviation: f64,
}

/// Integrates from `rho0` with classic RK4 and keeps the state at every grid
/// point.
pub fn evolve(p: &ModelParams, rho0: &DensityMatrix, grid: &TimeGrid, tol: &Tolerances) -> Result<LindbladRun> {
    p.validate()?;
    grid.validate()?;
    rho0.as_operator().ensure_hermitian(tol.algebraic)?;
    let lv = Liouvillian::new(p);
    let h = grid.step();
    lv.check_step(h)?;

    let tr0 = rho0.trace();
    let mut rho = *rho0.as_operator();
    let mut run = LindbladRun {
        times: grid.times(),
        states: Vec::with_capacity(grid.n_samples() + 1),
        max_trace_drift: 0.0,
        min_eigenvalue: rho0.min_eigenvalue(),
        max_hermiticity_deviation: rho0.as_operator().hermiticity_deviation(),
    };
    run.states.push(*rho0);
    for _ in 0..grid.n_samples() {
        for _ in 0..grid.steps_per_sample() {
            rho = lv.rk4_step(&rho, h);
            run.max_trace_drift = run.max_trace_drift.max((rho.trace().re - tr0).abs());
        }
        let dm = DensityMatrix::from_raw(rho);
        run.min_eigenvalue = run.min_eigenvalue.min(dm.min_eigenvalue());
        run.max_hermiticity_deviation = run.max_hermiticity_deviation.max(rho.hermiticity_deviation());
        run.states.push(dm);
    }
    if run.max_trace_drift > tol.trace_drift {
        return Err(Error::TraceDrift {
            drift: run.max_trace_drift,
            tol: tol.trace_drift,
        });
    }
    Ok(run)
}

/// Integrates and records `observables` at every grid point.
pub fn integrate(
    p: &ModelParams,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    observables: &[Observable],
    tol: &Tolerances,
) -> Result<TimeSeries> {
    let run = evolve(p, rho0, grid, tol)?;
    let mut series = TimeSeries::new(observables.iter().map(|o| o.name().to_string()).collect());
    for (t, rho) in run.times.iter().zip(&run.states) {
        series.push(*t, observables.iter().map(|o| o.evaluate(rho)).collect());
    }
    Ok(series)
}

/// Options for [`steady_state`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyStateOptions {
    pub dt: Option<f64>,
    pub max_steps: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions {
            dt: None,
            max_steps: 2_000_000,
        }
    }
}

/// Long-time integration from the maximally mixed state until
/// `max |dρ/dt| < tol`.
pub fn steady_state(p: &ModelParams, tol: f64, opts: SteadyStateOptions) -> Result<DensityMatrix> {
    p.validate()?;
    let lv = Liouvillian::new(p);
    let total = lv.total_rate();
    if total <= 0.0 {
        return Err(Error::InvalidParameter {
            field: "gamma",
            reason: "steady state needs at least one active channel".into(),
        });
    }
    let dt = opts.dt.unwrap_or(0.5 * STABILITY_LIMIT / total);
    lv.check_step(dt)?;
    let mut rho = *DensityMatrix::maximally_mixed().as_operator();
    let mut residual = f64::INFINITY;
    for step in 0..opts.max_steps {
        if step % 16 == 0 {
            residual = lv.apply(&rho).max_abs();
            if residual < tol {
                return Ok(DensityMatrix::from_raw(rho.hermitian_part()));
            }
        }
        rho = lv.rk4_step(&rho, dt);
    }
    Err(Error::NotConverged {
        steps: opts.max_steps,
        residual,
    })
}

/// Energy per unit time flowing into each bath.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatCurrentReport {
    pub current_cold: f64,
    pub current_hot: f64,
    pub current_collective: f64,
}

impl HeatCurrentReport {
    pub fn total(&self) -> f64 {
        self.current_cold + self.current_hot + self.current_collective
    }
}

/// Jump-rate bookkeeping: every `Down` click deposits one quantum `ω_b` in its
/// bath, every `Up` click removes one.
pub fn heat_currents(p: &ModelParams, rho: &DensityMatrix) -> Result<HeatCurrentReport> {
    let channels = build_channels(p);
    let has_collective = channels.iter().any(|c| c.label.is_collective());
    if has_collective && p.omega1 != p.omega2 {
        return Err(Error::DetunedCollectiveCurrent {
            omega1: p.omega1,
            omega2: p.omega2,
        });
    }
    let tr = rho.trace();
    let mut report = HeatCurrentReport {
        current_cold: 0.0,
        current_hot: 0.0,
        current_collective: 0.0,
    };
    for c in &channels {
        let click_rate = c.rate * (c.jdj() * *rho.as_operator()).trace().re / tr;
        let sign = if c.label.is_down() { 1.0 } else { -1.0 };
        match c.label.bath() {
            Bath::Cold => report.current_cold += sign * p.omega1 * click_rate,
            Bath::Hot => report.current_hot += sign * p.omega2 * click_rate,
            Bath::Collective => report.current_collective += sign * p.omega1 * click_rate,
        }
    }
    Ok(report)
}
