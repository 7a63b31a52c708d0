//! Jump-free propagation and the jump step of a counting unraveling.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::linalg::{Operator, StateVector, C64};
use crate::model::{
    build_channels, build_effective_hamiltonian, build_hamiltonian, effective_hamiltonian_from, ChannelLabel,
    JumpChannel, ModelParams,
};
use crate::trajectory::rng::open_unit;

/// Largest accepted `dt * Σ γ ||J^†J||` for the jump-free integrator.
pub const NO_JUMP_STABILITY_LIMIT: f64 = 0.1;
/// Largest accepted `dt * ||H_eff||_∞` (RK4 stability along the imaginary axis).
pub const OSCILLATION_LIMIT: f64 = 2.0;

/// Channels plus the linear effective Hamiltonian of one unraveling, with the
/// RK4 step for a fixed `dt` folded into a single matrix.
#[derive(Clone, Debug)]
pub struct JumpProcess {
    channels: Vec<JumpChannel>,
    jdj: Vec<Operator>,
    generator: Operator,
    h_eff: Operator,
    dt: f64,
    step: Operator,
}

impl JumpProcess {
    pub fn new(h_eff: Operator, channels: Vec<JumpChannel>, dt: f64) -> Result<Self> {
        let jdj: Vec<Operator> = channels.iter().map(JumpChannel::jdj).collect();
        let load: f64 = channels
            .iter()
            .zip(&jdj)
            .map(|(c, m)| c.rate * m.inf_norm())
            .sum::<f64>()
            * dt;
        if !(dt > 0.0) || load >= NO_JUMP_STABILITY_LIMIT {
            return Err(Error::StabilityGuard {
                dt,
                detail: format!("dt * total jump rate = {load} >= {NO_JUMP_STABILITY_LIMIT}"),
            });
        }
        let osc = dt * h_eff.inf_norm();
        if osc >= OSCILLATION_LIMIT {
            return Err(Error::StabilityGuard {
                dt,
                detail: format!("dt * |H_eff| = {osc} >= {OSCILLATION_LIMIT}"),
            });
        }
        let generator = h_eff.scale(C64::new(0.0, -1.0));
        let step = rk4_matrix(&generator, dt);
        Ok(JumpProcess {
            channels,
            jdj,
            generator,
            h_eff,
            dt,
            step,
        })
    }

    /// Standard counting unraveling of the model.
    pub fn counting(p: &ModelParams, dt: f64) -> Result<Self> {
        p.validate()?;
        Self::new(build_effective_hamiltonian(p), build_channels(p), dt)
    }

    /// Counting unraveling with jump operators `J + β` (local oscillator of
    /// real amplitude `β`) and the Hamiltonian shifted by
    /// `-(iβ/2) Σ γ (J - J^†)`, which leaves the averaged dynamics unchanged.
    pub fn displaced(p: &ModelParams, beta: f64, dt: f64) -> Result<Self> {
        p.validate()?;
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter {
                field: "beta",
                reason: format!("must be positive, got {beta}"),
            });
        }
        let base = build_channels(p);
        let mut h = build_hamiltonian(p);
        for c in &base {
            let skew = c.operator - c.operator.adjoint();
            h = h - skew.scale(C64::new(0.0, 0.5 * beta * c.rate));
        }
        let shifted: Vec<JumpChannel> = base
            .iter()
            .map(|c| JumpChannel {
                label: c.label,
                operator: c.operator + Operator::identity().scale_re(beta),
                rate: c.rate,
            })
            .collect();
        let h_eff = effective_hamiltonian_from(&h, &shifted);
        Self::new(h_eff, shifted, dt)
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn effective_hamiltonian(&self) -> &Operator {
        &self.h_eff
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One RK4 step of `dψ/dt = -i H_eff ψ` of length `h` (unnormalized).
    pub fn evolve(&self, psi: &StateVector, h: f64) -> StateVector {
        if h == self.dt {
            return self.step.apply(psi);
        }
        let a = &self.generator;
        let k1 = a.apply(psi);
        let k2 = a.apply(&(*psi + k1.scale(C64::new(h / 2.0, 0.0))));
        let k3 = a.apply(&(*psi + k2.scale(C64::new(h / 2.0, 0.0))));
        let k4 = a.apply(&(*psi + k3.scale(C64::new(h, 0.0))));
        let incr = k1 + k2.scale(C64::new(2.0, 0.0)) + k3.scale(C64::new(2.0, 0.0)) + k4;
        *psi + incr.scale(C64::new(h / 6.0, 0.0))
    }

    /// `γ_μ <ψ|J_μ^† J_μ|ψ> / <ψ|ψ>` for every channel.
    pub fn jump_weights(&self, psi: &StateVector) -> Vec<f64> {
        let n2 = psi.norm_sqr();
        self.channels
            .iter()
            .zip(&self.jdj)
            .map(|(c, m)| c.rate * psi.inner(&m.apply(psi)).re.max(0.0) / n2)
            .collect()
    }

    pub fn total_jump_rate(&self, psi: &StateVector) -> f64 {
        self.jump_weights(psi).iter().sum()
    }

    /// Energy `E` if `psi` can never click and is an eigenvector of `H_eff`
    /// with real eigenvalue `E`, so that its jump-free evolution is the pure
    /// phase `e^{-iEt}`.
    pub fn stationary_dark_energy(&self, psi: &StateVector) -> Option<f64> {
        if self.jump_weights(psi).iter().any(|&w| w != 0.0) {
            return None;
        }
        let n2 = psi.norm_sqr();
        let hpsi = self.h_eff.apply(psi);
        let e = psi.inner(&hpsi) / n2;
        let residual = (hpsi - psi.scale(e)).norm_sqr();
        let scale = self.h_eff.max_abs().max(1.0);
        (e.im.abs() <= 1e-14 * scale && residual <= 1e-28 * scale * scale * n2).then_some(e.re)
    }

    /// Picks a channel with probability proportional to its weight.
    pub fn select_jump_channel<R: RngCore>(&self, psi: &StateVector, rng: &mut R) -> Result<ChannelLabel> {
        let weights = self.jump_weights(psi);
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoJumpPossible);
        }
        let target = open_unit(rng) * total;
        let mut acc = 0.0;
        let mut last = None;
        for (c, w) in self.channels.iter().zip(&weights) {
            if *w <= 0.0 {
                continue;
            }
            acc += w;
            last = Some(c.label);
            if target < acc {
                return Ok(c.label);
            }
        }
        last.ok_or(Error::NoJumpPossible)
    }

    /// `J ψ / ||J ψ||` for the channel labelled `label`.
    pub fn apply_jump(&self, label: ChannelLabel, psi: &StateVector) -> Result<StateVector> {
        let ch = self
            .channels
            .iter()
            .find(|c| c.label == label)
            .ok_or(Error::AnnihilatedState(label))?;
        apply_jump_operator(ch, psi)
    }

    /// Evolves `psi` until its squared norm falls to `threshold` or `horizon`
    /// elapses. Crossing times are refined by bisection within the step.
    pub fn advance_to_threshold(&self, psi: &StateVector, threshold: f64, horizon: f64) -> (Option<f64>, StateVector) {
        let mut t = 0.0;
        let mut cur = *psi;
        while t < horizon {
            let h = if horizon - t < self.dt { horizon - t } else { self.dt };
            match self.try_step(&cur, h, threshold) {
                StepOutcome::Continue(next) => {
                    cur = next;
                    t += h;
                }
                StepOutcome::Crossed { at, psi } => return (Some(t + at), psi),
            }
        }
        (None, cur)
    }

    /// One step of length `h`, stopping early if the norm crosses `threshold`.
    pub(crate) fn try_step(&self, psi: &StateVector, h: f64, threshold: f64) -> StepOutcome {
        let next = self.evolve(psi, h);
        if next.norm_sqr() > threshold {
            return StepOutcome::Continue(next);
        }
        let (mut lo, mut hi) = (0.0, h);
        let mut at_hi = next;
        for _ in 0..64 {
            if hi - lo <= 1e-13 * h.max(1e-300) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let trial = self.evolve(psi, mid);
            if trial.norm_sqr() <= threshold {
                hi = mid;
                at_hi = trial;
            } else {
                lo = mid;
            }
        }
        StepOutcome::Crossed { at: hi, psi: at_hi }
    }
}

pub(crate) enum StepOutcome {
    Continue(StateVector),
    Crossed { at: f64, psi: StateVector },
}

/// `J ψ / ||J ψ||`.
pub fn apply_jump_operator(ch: &JumpChannel, psi: &StateVector) -> Result<StateVector> {
    let out = ch.operator.apply(psi);
    let n2 = out.norm_sqr();
    if !(n2 > 1e-28 * psi.norm_sqr()) {
        return Err(Error::AnnihilatedState(ch.label));
    }
    out.normalized()
}

/// Classic RK4 update matrix `1 + A + A²/2 + A³/6 + A⁴/24` with `A = dt * generator`.
fn rk4_matrix(generator: &Operator, dt: f64) -> Operator {
    let a = generator.scale_re(dt);
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    Operator::identity() + a + a2.scale_re(0.5) + a3.scale_re(1.0 / 6.0) + a4.scale_re(1.0 / 24.0)
}

/// One RK4 step of the jump-free evolution under the model's effective
/// Hamiltonian.
pub fn evolve_no_jump(p: &ModelParams, psi: &StateVector, dt: f64) -> Result<StateVector> {
    Ok(JumpProcess::counting(p, dt)?.evolve(psi, dt))
}

/// Outcome of [`sample_waiting_time`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaitingTime {
    /// Jump time, or `None` if the horizon was reached first.
    pub time: Option<f64>,
    /// Unnormalized state at the jump time (or at the horizon).
    pub psi: StateVector,
}

/// Draws `r ~ U(0,1)` and evolves `psi0` until `||ψ||² <= r`.
pub fn sample_waiting_time<R: RngCore>(
    process: &JumpProcess,
    psi0: &StateVector,
    horizon: f64,
    rng: &mut R,
) -> Result<WaitingTime> {
    let psi0 = psi0.normalized()?;
    let r = open_unit(rng);
    let (time, psi) = process.advance_to_threshold(&psi0, r, horizon);
    Ok(WaitingTime { time, psi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{bell_states, Basis, DensityMatrix};
    use crate::lindblad::Liouvillian;
    use crate::model::analytic_no_jump_state;
    use crate::trajectory::rng::trajectory_rng;

    fn fig3() -> ModelParams {
        ModelParams::zero_temperature(10.0, 2.2, 0.2, 1.0)
    }

    #[test]
    fn ground_state_is_stationary() {
        let gg = StateVector::basis(Basis::GG);
        // only a global phase e^{iω dt} is picked up
        let out = evolve_no_jump(&fig3(), &gg, 1e-3).unwrap();
        assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((out.fidelity_with(&gg).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn doubly_excited_state_only_loses_norm() {
        let ee = StateVector::basis(Basis::EE);
        let pr = JumpProcess::counting(&fig3(), 1e-3).unwrap();
        let mut psi = ee;
        for _ in 0..1000 {
            psi = pr.evolve(&psi, 1e-3);
        }
        assert!(psi.fidelity_with(&ee).unwrap() > 1.0 - 1e-15);
        let expected = (-3.4f64).exp();
        assert!(
            (psi.norm_sqr() - expected).abs() < 1e-8 * expected,
            "{}",
            psi.norm_sqr() / expected - 1.0
        );
    }

    #[test]
    fn composed_steps_match_analytic_populations() {
        let pr = JumpProcess::counting(&fig3(), 1e-3).unwrap();
        let mut psi = StateVector::basis(Basis::EG);
        for _ in 0..2000 {
            psi = pr.evolve(&psi, 1e-3);
        }
        let (_, n2) = psi.populations().unwrap();
        let (_, oracle) = analytic_no_jump_state(&fig3(), 2.0).unwrap().populations().unwrap();
        assert!((n2 - oracle).abs() < 1e-10);
        assert!((n2 - 0.628).abs() < 1e-3);
    }

    #[test]
    fn cached_step_agrees_with_stage_form() {
        let p = ModelParams {
            nth1: 0.2,
            nth2: 0.1,
            omega2: 8.0,
            ..fig3()
        };
        let pr = JumpProcess::counting(&p, 0.01).unwrap();
        let (plus, _) = bell_states();
        let psi = plus + StateVector::basis(Basis::EE).scale(C64::new(0.0, 0.3));
        let cached = pr.evolve(&psi, 0.01);
        let staged = pr.evolve(&psi, 0.01 * (1.0 + f64::EPSILON));
        assert!((cached - staged).norm_sqr().sqrt() < 1e-13);
    }

    #[test]
    fn stability_guard_rejects_large_steps() {
        assert!(matches!(
            JumpProcess::counting(&fig3(), 0.05),
            Err(Error::StabilityGuard { .. })
        ));
    }

    #[test]
    fn channel_weights() {
        let pr = JumpProcess::counting(&fig3(), 0.01).unwrap();
        let w = pr.jump_weights(&StateVector::basis(Basis::EG));
        assert_eq!(w.len(), 3);
        assert!((w[0] - 2.2).abs() < 1e-15);
        assert_eq!(w[1], 0.0);
        assert!((w[2] - 0.5).abs() < 1e-15);
        let (plus, minus) = bell_states();
        let w = pr.jump_weights(&minus);
        assert!(w[2].abs() < 1e-15);
        let w = pr.jump_weights(&plus);
        assert!((w[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn selection_frequencies_follow_weights() {
        let pr = JumpProcess::counting(&fig3(), 0.01).unwrap();
        let eg = StateVector::basis(Basis::EG);
        let mut rng = trajectory_rng(5);
        let n = 200_000;
        let mut local = 0usize;
        for _ in 0..n {
            match pr.select_jump_channel(&eg, &mut rng).unwrap() {
                ChannelLabel::Local1Down => local += 1,
                ChannelLabel::CollectiveDown => {}
                other => panic!("impossible channel {other:?}"),
            }
        }
        let p = 2.2 / 2.7;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((local as f64 / n as f64 - p).abs() < 4.0 * sigma);
        let gg = StateVector::basis(Basis::GG);
        assert_eq!(pr.select_jump_channel(&gg, &mut rng), Err(Error::NoJumpPossible));
    }

    #[test]
    fn jump_results() {
        let p = ModelParams { nth1: 0.1, ..fig3() };
        let pr = JumpProcess::counting(&p, 0.01).unwrap();
        let (plus, _) = bell_states();
        let out = pr.apply_jump(ChannelLabel::CollectiveDown, &plus).unwrap();
        assert!(out.fidelity_with(&StateVector::basis(Basis::GG)).unwrap() > 1.0 - 1e-15);
        let out = pr
            .apply_jump(ChannelLabel::Local1Down, &StateVector::basis(Basis::EE))
            .unwrap();
        assert_eq!(out, StateVector::basis(Basis::GE));
        let out = pr
            .apply_jump(ChannelLabel::Local1Up, &StateVector::basis(Basis::GG))
            .unwrap();
        assert_eq!(out, StateVector::basis(Basis::EG));
        assert_eq!(
            pr.apply_jump(ChannelLabel::Local1Down, &StateVector::basis(Basis::GG)),
            Err(Error::AnnihilatedState(ChannelLabel::Local1Down))
        );
    }

    #[test]
    fn dark_ground_state_never_jumps() {
        let pr = JumpProcess::counting(&fig3(), 0.01).unwrap();
        let mut rng = trajectory_rng(1);
        let w = sample_waiting_time(&pr, &StateVector::basis(Basis::GG), 50.0, &mut rng).unwrap();
        assert_eq!(w.time, None);
    }

    #[test]
    fn threshold_crossing_is_refined() {
        // single qubit: ||ψ(t)||² = e^{-γt}, so the crossing of r is at -ln(r)/γ
        let p = ModelParams::zero_temperature(1.0, 1.3, 0.0, 0.0);
        let pr = JumpProcess::counting(&p, 0.01).unwrap();
        let eg = StateVector::basis(Basis::EG);
        for r in [0.9, 0.5, 0.123, 0.01] {
            let (t, psi) = pr.advance_to_threshold(&eg, r, 100.0);
            let t = t.unwrap();
            assert!((t - (-r.ln() / 1.3)).abs() < 1e-9, "r = {r}: {t}");
            assert!(psi.norm_sqr() <= r);
        }
    }

    #[test]
    fn displaced_unraveling_reproduces_the_lindbladian() {
        // -i(H' ρ - ρ H'^†) + Σ γ (J+β) ρ (J+β)^† must equal L ρ
        let p = ModelParams {
            nth1: 0.2,
            nth2: 0.05,
            omega2: 9.0,
            ..fig3()
        };
        let pr = JumpProcess::displaced(&p, 3.0, 1e-4).unwrap();
        let lv = Liouvillian::new(&p);
        let (plus, _) = bell_states();
        let psi = (plus + StateVector::basis(Basis::EE).scale(C64::new(0.2, -0.4)))
            .normalized()
            .unwrap();
        let rho = DensityMatrix::pure(&psi).unwrap();
        let r = *rho.as_operator();
        let h = *pr.effective_hamiltonian();
        let mut gen = (h * r - r * h.adjoint()).scale(C64::new(0.0, -1.0));
        for c in pr.channels() {
            gen = gen + (c.operator * r * c.operator.adjoint()).scale_re(c.rate);
        }
        assert!(gen.max_abs_diff(&lv.apply(&r)) < 1e-12);
    }
}
