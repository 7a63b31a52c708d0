//! Homodyne detection: the finite-amplitude displaced-jump construction runs
//! through the counting driver; the diffusive limit is integrated here.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{StateVector, C64};
use crate::model::ModelParams;
use crate::series::TimeGrid;
use crate::trajectory::counting::{run_trajectory, JumpSampling};
use crate::trajectory::process::JumpProcess;
use crate::trajectory::rng::trajectory_rng;
use crate::trajectory::{Sample, TrajectoryRecord, UnravelingKind};

/// Homodyne trajectory of the requested kind. `DisplacedCounting` uses the
/// counting engine with displaced operators; `HomodyneDiffusion` integrates
/// the diffusive stochastic Schrödinger equation with one real Wiener
/// increment per channel and step.
pub fn run_homodyne_trajectory(
    p: &ModelParams,
    psi0: &StateVector,
    grid: &TimeGrid,
    seed: u64,
    kind: UnravelingKind,
) -> Result<TrajectoryRecord> {
    match kind {
        UnravelingKind::HomodyneDiffusion => run_diffusive(p, psi0, grid, seed),
        UnravelingKind::DisplacedCounting { .. } => {
            run_trajectory(p, psi0, grid, seed, kind, JumpSampling::WaitingTime)
        }
        UnravelingKind::Counting => Err(Error::InvalidParameter {
            field: "kind",
            reason: "counting is not a homodyne unraveling".into(),
        }),
    }
}

/// Euler–Maruyama for
/// `dψ = [-i H_eff dt + Σ γ (x J - x²/2) dt + Σ √γ (J - x) dW] ψ`,
/// `x = <J + J^†>/2`, followed by renormalization. The linear `-i H_eff`
/// part uses the RK4 propagator of the jump-free evolution.
fn run_diffusive(p: &ModelParams, psi0: &StateVector, grid: &TimeGrid, seed: u64) -> Result<TrajectoryRecord> {
    grid.validate()?;
    let dt = grid.step();
    let process = JumpProcess::counting(p, dt)?;
    let sqrt_dt = dt.sqrt();
    let mut rng = trajectory_rng(seed);

    let mut psi = psi0.normalized()?;
    let mut samples = Vec::with_capacity(grid.n_samples() + 1);
    samples.push(Sample::of(&psi, 1.0));
    for _ in 0..grid.n_samples() {
        for _ in 0..grid.steps_per_sample() {
            let mut next = process.evolve(&psi, dt);
            for ch in process.channels() {
                let j_psi = ch.operator.apply(&psi);
                let x = psi.inner(&j_psi).re;
                let dw: f64 = StandardNormal.sample(&mut rng);
                let drift = ch.rate * dt;
                let noise = ch.rate.sqrt() * sqrt_dt * dw;
                next = next + j_psi.scale(C64::new(drift * x + noise, 0.0))
                    - psi.scale(C64::new(0.5 * drift * x * x + noise * x, 0.0));
            }
            if !next.is_finite() {
                return Err(Error::DegenerateState);
            }
            psi = next.normalized()?;
        }
        samples.push(Sample::of(&psi, 1.0));
    }
    Ok(TrajectoryRecord {
        sample_times: grid.times(),
        samples,
        events: Vec::new(),
        seed,
        unraveling: UnravelingKind::HomodyneDiffusion,
        final_state: psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Basis;

    fn fig3() -> ModelParams {
        ModelParams::zero_temperature(10.0, 2.2, 0.2, 1.0)
    }

    #[test]
    fn diffusive_runs_are_deterministic_and_normalized() {
        let grid = TimeGrid::new(1e-3, 0.1, 2.0).unwrap();
        let eg = StateVector::basis(Basis::EG);
        let a = run_homodyne_trajectory(&fig3(), &eg, &grid, 5, UnravelingKind::HomodyneDiffusion).unwrap();
        let b = run_homodyne_trajectory(&fig3(), &eg, &grid, 5, UnravelingKind::HomodyneDiffusion).unwrap();
        assert_eq!(a, b);
        assert!(a.events.is_empty());
        assert!((a.final_state.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(a.samples.len(), 21);
    }

    #[test]
    fn ground_state_is_not_driven_by_noise() {
        // J|gg> = 0 and <x> = 0, so the diffusive terms vanish identically
        let grid = TimeGrid::new(1e-3, 0.1, 1.0).unwrap();
        let gg = StateVector::basis(Basis::GG);
        let r = run_homodyne_trajectory(&fig3(), &gg, &grid, 1, UnravelingKind::HomodyneDiffusion).unwrap();
        assert!(r.samples.iter().all(|s| s.n1 == 0.0 && s.n2 == 0.0));
    }

    #[test]
    fn counting_is_rejected() {
        let grid = TimeGrid::new(1e-3, 0.1, 1.0).unwrap();
        let eg = StateVector::basis(Basis::EG);
        assert!(run_homodyne_trajectory(&fig3(), &eg, &grid, 1, UnravelingKind::Counting).is_err());
    }
}
