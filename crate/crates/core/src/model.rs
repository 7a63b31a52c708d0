//! Physical model: Hamiltonian, jump channels, effective Hamiltonian and the
//! closed-form jump-free evolution of the one-excitation manifold.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{on_qubit, Basis, Mat2, Operator, StateVector, C64};

/// Frequencies, decay rates and thermal occupations of the two qubits and
/// their three baths (cold = qubit 1, hot = qubit 2, collective).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_c: f64,
    #[serde(default)]
    pub nth1: f64,
    #[serde(default)]
    pub nth2: f64,
    #[serde(default)]
    pub nthc: f64,
}

impl ModelParams {
    /// Zero-temperature parameters with equal qubit frequencies.
    pub fn zero_temperature(omega: f64, gamma1: f64, gamma2: f64, gamma_c: f64) -> Self {
        ModelParams {
            omega1: omega,
            omega2: omega,
            gamma1,
            gamma2,
            gamma_c,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields: [(&'static str, f64, bool); 8] = [
            ("omega1", self.omega1, false),
            ("omega2", self.omega2, false),
            ("gamma1", self.gamma1, true),
            ("gamma2", self.gamma2, true),
            ("gamma_c", self.gamma_c, true),
            ("nth1", self.nth1, true),
            ("nth2", self.nth2, true),
            ("nthc", self.nthc, true),
        ];
        for (field, value, nonneg) in fields {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite, got {value}"),
                });
            }
            if nonneg && value < 0.0 {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be nonnegative, got {value}"),
                });
            }
        }
        Ok(())
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.nth1 == 0.0 && self.nth2 == 0.0 && self.nthc == 0.0
    }

    pub fn delta_gamma(&self) -> f64 {
        self.gamma1 - self.gamma2
    }

    pub fn delta_omega(&self) -> f64 {
        self.omega1 - self.omega2
    }

    pub fn with_gamma_c(&self, gamma_c: f64) -> Self {
        ModelParams { gamma_c, ..*self }
    }

    /// Sum of the rates of all active channels.
    pub fn total_rate(&self) -> f64 {
        build_channels(self).iter().map(|c| c.rate).sum()
    }

    /// Rescales frequencies and rates by `unit`, so that times measured in the
    /// result are `unit * t`.
    pub fn rescaled(&self, unit: f64) -> Self {
        ModelParams {
            omega1: self.omega1 / unit,
            omega2: self.omega2 / unit,
            gamma1: self.gamma1 / unit,
            gamma2: self.gamma2 / unit,
            gamma_c: self.gamma_c / unit,
            ..*self
        }
    }
}

/// Which bath a channel couples to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bath {
    Cold,
    Hot,
    Collective,
}

/// Label of a jump channel. `Down` emits a quantum into the bath, `Up` absorbs
/// one from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelLabel {
    Local1Down,
    Local1Up,
    Local2Down,
    Local2Up,
    CollectiveDown,
    CollectiveUp,
}

impl ChannelLabel {
    pub const ALL: [ChannelLabel; 6] = [
        ChannelLabel::Local1Down,
        ChannelLabel::Local1Up,
        ChannelLabel::Local2Down,
        ChannelLabel::Local2Up,
        ChannelLabel::CollectiveDown,
        ChannelLabel::CollectiveUp,
    ];

    pub fn bath(self) -> Bath {
        match self {
            ChannelLabel::Local1Down | ChannelLabel::Local1Up => Bath::Cold,
            ChannelLabel::Local2Down | ChannelLabel::Local2Up => Bath::Hot,
            ChannelLabel::CollectiveDown | ChannelLabel::CollectiveUp => Bath::Collective,
        }
    }

    pub fn is_down(self) -> bool {
        matches!(
            self,
            ChannelLabel::Local1Down | ChannelLabel::Local2Down | ChannelLabel::CollectiveDown
        )
    }

    pub fn is_collective(self) -> bool {
        self.bath() == Bath::Collective
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelLabel::Local1Down => "local1_down",
            ChannelLabel::Local1Up => "local1_up",
            ChannelLabel::Local2Down => "local2_down",
            ChannelLabel::Local2Up => "local2_up",
            ChannelLabel::CollectiveDown => "collective_down",
            ChannelLabel::CollectiveUp => "collective_up",
        }
    }

    /// The jump operator without its rate.
    pub fn operator(self) -> Operator {
        let lower1 = on_qubit(1, &Mat2::sigma_minus());
        let lower2 = on_qubit(2, &Mat2::sigma_minus());
        let collective = (lower1 + lower2).scale_re(std::f64::consts::FRAC_1_SQRT_2);
        match self {
            ChannelLabel::Local1Down => lower1,
            ChannelLabel::Local1Up => lower1.adjoint(),
            ChannelLabel::Local2Down => lower2,
            ChannelLabel::Local2Up => lower2.adjoint(),
            ChannelLabel::CollectiveDown => collective,
            ChannelLabel::CollectiveUp => collective.adjoint(),
        }
    }
}

impl fmt::Display for ChannelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ChannelLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ChannelLabel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpChannel {
    pub label: ChannelLabel,
    pub operator: Operator,
    pub rate: f64,
}

impl JumpChannel {
    pub fn new(label: ChannelLabel, rate: f64) -> Self {
        JumpChannel {
            label,
            operator: label.operator(),
            rate,
        }
    }

    /// `J^† J`.
    pub fn jdj(&self) -> Operator {
        self.operator.adjoint() * self.operator
    }
}

/// `H = (ω1/2) σz(1) + (ω2/2) σz(2)`.
pub fn build_hamiltonian(p: &ModelParams) -> Operator {
    let sz1 = on_qubit(1, &Mat2::sigma_z());
    let sz2 = on_qubit(2, &Mat2::sigma_z());
    sz1.scale_re(p.omega1 / 2.0) + sz2.scale_re(p.omega2 / 2.0)
}

/// Channel rate for `label` under the `(n+1)` / `n` thermal rule.
pub fn channel_rate(p: &ModelParams, label: ChannelLabel) -> f64 {
    let (gamma, nth) = match label.bath() {
        Bath::Cold => (p.gamma1, p.nth1),
        Bath::Hot => (p.gamma2, p.nth2),
        Bath::Collective => (p.gamma_c, p.nthc),
    };
    if label.is_down() {
        gamma * (nth + 1.0)
    } else {
        gamma * nth
    }
}

/// All channels with strictly positive rate, in [`ChannelLabel::ALL`] order.
pub fn build_channels(p: &ModelParams) -> Vec<JumpChannel> {
    ChannelLabel::ALL
        .into_iter()
        .map(|label| JumpChannel::new(label, channel_rate(p, label)))
        .filter(|c| c.rate > 0.0)
        .collect()
}

/// `H - (i/2) Σ γ J^† J` over the given channels.
pub fn effective_hamiltonian_from(h: &Operator, channels: &[JumpChannel]) -> Operator {
    channels
        .iter()
        .fold(*h, |acc, c| acc - c.jdj().scale(C64::new(0.0, 0.5 * c.rate)))
}

/// Linear effective Hamiltonian generating the unnormalized jump-free
/// evolution. The state-dependent `<J^† J>` shift only renormalizes, so it is
/// left out and states are normalized on readout.
pub fn build_effective_hamiltonian(p: &ModelParams) -> Operator {
    effective_hamiltonian_from(&build_hamiltonian(p), &build_channels(p))
}

/// Scalars governing the jump-free dynamics of the one-excitation manifold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldAnalytics {
    /// `γ1 + γ2 + γc`.
    pub gamma_total: f64,
    /// Principal root of `γc² + (Δγ + 2iΔω)²`.
    pub eta: C64,
    pub delta_gamma: f64,
    pub delta_omega: f64,
}

pub fn manifold_analytics(p: &ModelParams) -> ManifoldAnalytics {
    let a = C64::new(p.delta_gamma(), 2.0 * p.delta_omega());
    let eta2 = C64::new(p.gamma_c * p.gamma_c, 0.0) + a * a;
    ManifoldAnalytics {
        gamma_total: p.gamma1 + p.gamma2 + p.gamma_c,
        eta: eta2.sqrt(),
        delta_gamma: p.delta_gamma(),
        delta_omega: p.delta_omega(),
    }
}

/// Below this `|η t|`, `cosh` and `sinh(x)/x` switch to their series.
const ETA_SERIES_THRESHOLD: f64 = 1e-6;

/// Jump-free propagator restricted to `(|e,g>, |g,e>)` at zero temperature:
///
/// `U(t) = e^{-Γt/4} [cosh(ηt/4) 1 + sinh(ηt/4)/η [[-a, -γc], [-γc, a]]]`
/// with `a = Δγ + 2iΔω`.
pub fn analytic_propagator(p: &ModelParams, t: f64) -> Result<Mat2> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter {
            field: "t",
            reason: format!("time must be nonnegative, got {t}"),
        });
    }
    let m = manifold_analytics(p);
    let x = m.eta * (t / 4.0);
    let (cosh, sinh_over_eta) = if (m.eta * t).norm() < ETA_SERIES_THRESHOLD {
        let x2 = x * x;
        (1.0 + x2 / 2.0, (1.0 + x2 / 6.0) * (t / 4.0))
    } else {
        (x.cosh(), x.sinh() / m.eta)
    };
    let a = C64::new(m.delta_gamma, 2.0 * m.delta_omega);
    let decay = (-m.gamma_total * t / 4.0).exp();
    let off = -sinh_over_eta * p.gamma_c * decay;
    Ok(Mat2([
        [(cosh - a * sinh_over_eta) * decay, off],
        [off, (cosh + a * sinh_over_eta) * decay],
    ]))
}

/// Unnormalized jump-free state at time `t` starting from `|e,g>`.
pub fn analytic_no_jump_state(p: &ModelParams, t: f64) -> Result<StateVector> {
    let u = analytic_propagator(p, t)?;
    let mut psi = StateVector::zero();
    psi.0[Basis::EG as usize] = u.0[0][0];
    psi.0[Basis::GE as usize] = u.0[1][0];
    Ok(psi)
}

/// Long-time `|<g,e|ψ>|²` of the normalized jump-free state from `|e,g>`.
pub fn transfer_fidelity_infinite(p: &ModelParams) -> Result<f64> {
    if p.delta_omega() != 0.0 {
        return Err(Error::DetunedLimit {
            delta_omega: p.delta_omega(),
        });
    }
    let dg = p.delta_gamma();
    let gc2 = p.gamma_c * p.gamma_c;
    let eta = (gc2 + dg * dg).sqrt();
    if eta == 0.0 {
        return Ok(0.5);
    }
    // γc²/(γc² + (η-Δγ)²), rewritten with η-Δγ = γc²/(η+Δγ) when Δγ > 0
    if dg > 0.0 {
        let s = (eta + dg) * (eta + dg);
        Ok(s / (s + gc2))
    } else {
        Ok(gc2 / (gc2 + (eta - dg) * (eta - dg)))
    }
}

/// Probability of no jump up to `t` starting from `|e,g>`.
pub fn survival_probability(p: &ModelParams, t: f64) -> Result<f64> {
    Ok(analytic_no_jump_state(p, t)?.norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    pub gtilde1: f64,
    pub gtilde2: f64,
    pub gtilde_c: f64,
}

/// `γ̃ = γ (1 + 2 n_th)` for each bath.
pub fn effective_thermal_rates(p: &ModelParams) -> EffectiveRates {
    EffectiveRates {
        gtilde1: p.gamma1 * (1.0 + 2.0 * p.nth1),
        gtilde2: p.gamma2 * (1.0 + 2.0 * p.nth2),
        gtilde_c: p.gamma_c * (1.0 + 2.0 * p.nthc),
    }
}

/// One-excitation block of the six-channel effective Hamiltonian.
pub fn thermal_one_excitation_block(p: &ModelParams) -> Mat2 {
    build_effective_hamiltonian(p).one_excitation_block()
}

/// One-excitation block of the zero-temperature effective Hamiltonian with
/// every rate replaced by its effective thermal counterpart. Differs from
/// [`thermal_one_excitation_block`] by a multiple of the identity plus a
/// diagonal splitting whenever `n_th1 != n_th2`.
pub fn substituted_one_excitation_block(p: &ModelParams) -> Mat2 {
    let r = effective_thermal_rates(p);
    let q = ModelParams {
        gamma1: r.gtilde1,
        gamma2: r.gtilde2,
        gamma_c: r.gtilde_c,
        nth1: 0.0,
        nth2: 0.0,
        nthc: 0.0,
        ..*p
    };
    thermal_one_excitation_block(&q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{bell_states, number_op};

    fn fig3() -> ModelParams {
        ModelParams::zero_temperature(10.0, 2.2, 0.2, 1.0)
    }

    fn fig2() -> ModelParams {
        ModelParams::zero_temperature(10.0, 0.2, 0.2, 1.0)
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// exp(m) by scaling and squaring with a long Taylor series.
    fn expm(m: &Operator) -> Operator {
        let norm = m.inf_norm();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let a = m.scale_re(0.5f64.powi(squarings as i32));
        let mut term = Operator::identity();
        let mut sum = Operator::identity();
        for k in 1..30 {
            term = (term * a).scale_re(1.0 / k as f64);
            sum = sum + term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn hamiltonian_examples() {
        let zero = ModelParams::default();
        assert_eq!(build_hamiltonian(&zero), Operator::zero());
        let h = build_hamiltonian(&fig3());
        assert_eq!(h[(Basis::EG as usize, Basis::EG as usize)], c(0.0, 0.0));
        assert_eq!(h[(Basis::EE as usize, Basis::EE as usize)], c(10.0, 0.0));
        assert_eq!(h.hermiticity_deviation(), 0.0);
    }

    #[test]
    fn channel_sets() {
        let ch = build_channels(&fig3());
        let labels: Vec<_> = ch.iter().map(|c| c.label).collect();
        assert_eq!(
            labels,
            vec![
                ChannelLabel::Local1Down,
                ChannelLabel::Local2Down,
                ChannelLabel::CollectiveDown
            ]
        );
        let thermal = ModelParams { nth1: 0.05, ..fig3() };
        let ch = build_channels(&thermal);
        let rate = |l| ch.iter().find(|c| c.label == l).unwrap().rate;
        assert!((rate(ChannelLabel::Local1Down) - 2.2 * 1.05).abs() < 1e-15);
        assert!((rate(ChannelLabel::Local1Up) - 2.2 * 0.05).abs() < 1e-15);
        let no_c = fig3().with_gamma_c(0.0);
        assert!(build_channels(&no_c).iter().all(|c| !c.label.is_collective()));
    }

    #[test]
    fn collective_operator_carries_the_root_two() {
        let j = ChannelLabel::CollectiveDown.operator();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(j[(Basis::GG as usize, Basis::EG as usize)], c(s, 0.0));
        assert_eq!(j[(Basis::GG as usize, Basis::GE as usize)], c(s, 0.0));
        assert_eq!(j[(Basis::GE as usize, Basis::EE as usize)], c(s, 0.0));
        assert_eq!(j[(Basis::EG as usize, Basis::EE as usize)], c(s, 0.0));
    }

    #[test]
    fn single_qubit_effective_hamiltonian() {
        let p = ModelParams::zero_temperature(3.0, 0.7, 0.0, 0.0);
        let anti = build_effective_hamiltonian(&p).anti_hermitian_part();
        let expected = number_op(1).scale(c(0.0, -0.35));
        assert!(anti.max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn collective_coupling_is_quarter_rate() {
        // brute-force expansion: J^†J = (n1 + n2 + σ+1σ-2 + σ+2σ-1)/2
        let gc = 1.7;
        let p = ModelParams::zero_temperature(0.0, 0.0, 0.0, gc);
        let block = build_effective_hamiltonian(&p).one_excitation_block();
        assert!((block.0[0][1] - c(0.0, -gc / 4.0)).norm() < 1e-15);
        assert!((block.0[1][0] - c(0.0, -gc / 4.0)).norm() < 1e-15);
    }

    #[test]
    fn doubly_excited_state_is_an_eigenvector() {
        for p in [
            fig2(),
            fig3(),
            ModelParams {
                omega2: 7.0,
                gamma_c: 0.3,
                ..fig3()
            },
        ] {
            let h = build_effective_hamiltonian(&p);
            let ee = StateVector::basis(Basis::EE);
            let out = h.apply(&ee);
            for i in 0..3 {
                assert!(out.0[i].norm() < 1e-15);
            }
        }
    }

    #[test]
    fn effective_hamiltonian_matches_channel_sum() {
        let p = ModelParams {
            nth1: 0.05,
            nth2: 0.1,
            nthc: 0.2,
            omega2: 9.0,
            ..fig3()
        };
        let h = build_hamiltonian(&p);
        let mut sum = Operator::zero();
        for ch in build_channels(&p) {
            sum = sum + ch.operator.adjoint().matmul(&ch.operator).scale_re(ch.rate);
        }
        let expected = h - sum.scale(c(0.0, 0.5));
        assert!(build_effective_hamiltonian(&p).max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn analytics_examples() {
        let m = manifold_analytics(&fig3());
        assert!((m.gamma_total - 3.4).abs() < 1e-15);
        assert!((m.delta_gamma - 2.0).abs() < 1e-15);
        assert!((m.eta - c(5f64.sqrt(), 0.0)).norm() < 1e-15);
        let sym = manifold_analytics(&fig2());
        assert!((sym.eta - c(1.0, 0.0)).norm() < 1e-15);
        let detuned = ModelParams { omega2: 9.5, ..fig3() };
        let m = manifold_analytics(&detuned);
        let a = c(2.0, 1.0);
        assert!((m.eta * m.eta - (c(1.0, 0.0) + a * a)).norm() < 1e-14);
    }

    #[test]
    fn propagator_at_zero_is_identity() {
        let u = analytic_propagator(&fig3(), 0.0).unwrap();
        assert!(u.max_abs_diff(&Mat2::identity()) < 1e-15);
        assert!(analytic_propagator(&fig3(), -1.0).is_err());
    }

    #[test]
    fn propagator_amplitudes_at_four() {
        // √5 cosh(√5) - 2 sinh(√5) and -sinh(√5), both over √5
        let s5 = 5f64.sqrt();
        let ceg = (s5 * s5.cosh() - 2.0 * s5.sinh()) / s5;
        let cge = -s5.sinh() / s5;
        let u = analytic_propagator(&fig3(), 4.0).unwrap();
        let undo = (3.4f64).exp();
        assert!((u.0[0][0] * undo - c(ceg, 0.0)).norm() < 1e-12);
        assert!((u.0[1][0] * undo - c(cge, 0.0)).norm() < 1e-12);
        assert!((ceg - 0.5946).abs() < 1e-3 && (cge + 2.0655).abs() < 3e-3);
    }

    #[test]
    fn propagator_without_collective_is_diagonal() {
        let u = analytic_propagator(&fig3().with_gamma_c(0.0), 2.5).unwrap();
        assert_eq!(u.0[0][1], c(0.0, 0.0));
        assert_eq!(u.0[1][0], c(0.0, 0.0));
        assert!((u.0[0][0].re - (-2.2 * 2.5 / 2.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn propagator_matches_matrix_exponential() {
        for p in [fig2(), fig3(), ModelParams::zero_temperature(10.0, 1.0, 0.1, 1.0)] {
            let h = build_effective_hamiltonian(&p);
            for t in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let u = expm(&h.scale(c(0.0, -t))).one_excitation_block();
                let a = analytic_propagator(&p, t).unwrap();
                assert!(u.max_abs_diff(&a) < 1e-10, "t = {t}: {:e}", u.max_abs_diff(&a));
            }
        }
    }

    #[test]
    fn detuned_propagator_matches_matrix_exponential() {
        let p = ModelParams {
            omega1: 10.6,
            omega2: 10.0,
            ..fig3()
        };
        let h = build_effective_hamiltonian(&p);
        for t in [0.3, 1.7, 5.0] {
            let u = expm(&h.scale(c(0.0, -t))).one_excitation_block();
            let a = analytic_propagator(&p, t).unwrap();
            assert!(u.max_abs_diff(&a) < 1e-10);
        }
    }

    #[test]
    fn degenerate_eta_uses_series() {
        let p = ModelParams::zero_temperature(1.0, 0.4, 0.4, 0.0);
        let u = analytic_propagator(&p, 3.0).unwrap();
        let d = (-0.8f64 * 3.0 / 4.0).exp();
        assert!((u.0[0][0] - c(d, 0.0)).norm() < 1e-15);
        assert!(u.0[0][1].norm() == 0.0);
        // γc tiny but nonzero: off-diagonal ≈ -γc t/4 e^{-Γt/4}
        let p = ModelParams::zero_temperature(1.0, 0.4, 0.4, 1e-9);
        let u = analytic_propagator(&p, 3.0).unwrap();
        let d = (-(0.8f64 + 1e-9) * 3.0 / 4.0).exp();
        assert!((u.0[0][1].re + 1e-9 * 0.75 * d).abs() < 1e-24);
    }

    #[test]
    fn no_jump_populations_fig3_at_two() {
        let psi = analytic_no_jump_state(&fig3(), 2.0).unwrap();
        let (n1, n2) = psi.populations().unwrap();
        assert!((n1 - 0.372).abs() < 1e-3, "{n1}");
        assert!((n2 - 0.628).abs() < 1e-3, "{n2}");
        let psi0 = analytic_no_jump_state(&fig3(), 0.0).unwrap();
        assert_eq!(psi0, StateVector::basis(Basis::EG));
    }

    #[test]
    fn symmetric_rates_approach_dark_bell_state() {
        let psi = analytic_no_jump_state(&fig2(), 6.0).unwrap();
        let (_, minus) = bell_states();
        let f = psi.fidelity_with(&minus).unwrap();
        // (cosh 1.5 + sinh 1.5)² / (2 (cosh² 1.5 + sinh² 1.5))
        let x: f64 = 1.5;
        let oracle = (x.cosh() + x.sinh()).powi(2) / (2.0 * (x.cosh().powi(2) + x.sinh().powi(2)));
        assert!((f - oracle).abs() < 1e-13);
        assert!((f - 0.9975).abs() < 1e-4);
    }

    #[test]
    fn fidelity_values() {
        let f3 = transfer_fidelity_infinite(&fig3()).unwrap();
        assert!((f3 - 0.947).abs() < 1e-3, "{f3}");
        let alt = ModelParams::zero_temperature(10.0, 1.0, 0.1, 1.0);
        let fa = transfer_fidelity_infinite(&alt).unwrap();
        assert!((fa - 0.835).abs() < 1e-3, "{fa}");
        let tiny = ModelParams::zero_temperature(10.0, 1.0, 0.1, 1e-6);
        assert!((transfer_fidelity_infinite(&tiny).unwrap() - 1.0).abs() < 1e-9);
        let detuned = ModelParams { omega2: 9.0, ..fig3() };
        assert!(matches!(
            transfer_fidelity_infinite(&detuned),
            Err(Error::DetunedLimit { .. })
        ));
    }

    #[test]
    fn fidelity_is_the_long_time_limit() {
        for p in [fig3(), ModelParams::zero_temperature(0.0, 0.3, 1.1, 0.8)] {
            let psi = analytic_no_jump_state(&p, 60.0).unwrap();
            let ge = StateVector::basis(Basis::GE);
            let f = psi.fidelity_with(&ge).unwrap();
            assert!((f - transfer_fidelity_infinite(&p).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn survival_values() {
        let s = survival_probability(&fig3(), 4.0).unwrap();
        let s5 = 5f64.sqrt();
        let ceg = (s5 * s5.cosh() - 2.0 * s5.sinh()) / s5;
        let cge = s5.sinh() / s5;
        let oracle = (-6.8f64).exp() * (ceg * ceg + cge * cge);
        assert!((s - oracle).abs() < 1e-15);
        assert!((s - 5.16e-3).abs() < 1e-5, "{s}");
        let alt = ModelParams::zero_temperature(10.0, 1.0, 0.1, 1.0);
        let s = survival_probability(&alt, 4.0).unwrap();
        assert!((s - 3.75e-2).abs() < 1e-4, "{s}");
        assert_eq!(survival_probability(&fig3(), 0.0).unwrap(), 1.0);
    }

    #[test]
    fn survival_is_monotone() {
        for p in [fig2(), fig3(), ModelParams { omega2: 8.0, ..fig3() }] {
            let mut last = 1.0;
            for k in 1..400 {
                let s = survival_probability(&p, k as f64 * 0.025).unwrap();
                assert!(s <= last + 1e-15);
                last = s;
            }
        }
    }

    #[test]
    fn effective_rates() {
        let p = ModelParams { nth1: 0.05, ..fig3() };
        let r = effective_thermal_rates(&p);
        assert!((r.gtilde1 - 1.1 * 2.2).abs() < 1e-14);
        let r0 = effective_thermal_rates(&fig3());
        assert_eq!((r0.gtilde1, r0.gtilde2, r0.gtilde_c), (2.2, 0.2, 1.0));
        let fig4 = ModelParams {
            nth1: 0.05,
            nth2: 0.1,
            gamma2: 2.2 / 11.0,
            ..fig3()
        };
        let r = effective_thermal_rates(&fig4);
        assert!((r.gtilde2 - 1.2 * 2.2 / 11.0).abs() < 1e-14);
        assert!(r.gtilde1 > r.gtilde2);
    }

    #[test]
    fn thermal_projection_facts() {
        for n1 in [0.0, 0.05, 0.1, 0.5] {
            for n2 in [0.0, 0.05, 0.1, 0.5] {
                for nc in [0.0, 0.1] {
                    let p = ModelParams {
                        nth1: n1,
                        nth2: n2,
                        nthc: nc,
                        ..fig3()
                    };
                    let b = thermal_one_excitation_block(&p);
                    let gtc = effective_thermal_rates(&p).gtilde_c;
                    assert!((b.0[0][1] - c(0.0, -gtc / 4.0)).norm() < 1e-14);
                    let diff = b.diagonal_anti_hermitian_difference();
                    assert!((diff - c(0.0, -0.5 * (p.gamma1 - p.gamma2))).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn substituted_block_splits_differently_at_unequal_temperatures() {
        let p = ModelParams {
            nth1: 0.05,
            nth2: 0.5,
            ..fig3()
        };
        let direct = thermal_one_excitation_block(&p).diagonal_anti_hermitian_difference();
        let subst = substituted_one_excitation_block(&p).diagonal_anti_hermitian_difference();
        let r = effective_thermal_rates(&p);
        assert!((subst - c(0.0, -0.5 * (r.gtilde1 - r.gtilde2))).norm() < 1e-14);
        // the two splittings differ by i (γ1 n1 - γ2 n2)
        assert!((direct - subst - c(0.0, 2.2 * 0.05 - 0.2 * 0.5)).norm() < 1e-14);
    }

    #[test]
    fn superposition_with_ground_drifts_to_ground() {
        let p = fig3();
        let h = build_effective_hamiltonian(&p);
        let mut psi = StateVector::zero();
        psi.0[Basis::EG as usize] = c(0.6, 0.0);
        psi.0[Basis::GG as usize] = c(0.0, 0.8);
        let step = expm(&h.scale(c(0.0, -0.01)));
        let mut last = 0.0;
        for _ in 0..800 {
            let w = psi.0[Basis::GG as usize].norm_sqr() / psi.norm_sqr();
            assert!(w >= last - 1e-15);
            last = w;
            psi = step.apply(&psi);
        }
        assert!(last > 0.99);
    }
}
