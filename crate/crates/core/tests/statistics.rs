//! Monte-Carlo estimates checked against exact oracles.

use qtransfer::analysis::within_stderr;
use qtransfer::demon::{branching_oracle, run_demon_trajectory, DemonConfig};
use qtransfer::lindblad::evolve;
use qtransfer::model::survival_probability;
use qtransfer::series::TimeGrid;
use qtransfer::trajectory::rng::child_seed;
use qtransfer::trajectory::{for_each_record, run_ensemble, EnsembleSpec, JumpSampling, UnravelingKind};
use qtransfer::{Basis, ChannelLabel, DensityMatrix, ModelParams, StateVector, Tolerances};

fn fig3() -> ModelParams {
    ModelParams::zero_temperature(10.0, 2.2, 0.2, 1.0)
}

fn eg() -> StateVector {
    StateVector::basis(Basis::EG)
}

fn lme_populations(p: &ModelParams, psi0: &StateVector, grid: &TimeGrid) -> Vec<(f64, f64)> {
    let rho0 = DensityMatrix::pure(psi0).unwrap();
    let run = evolve(p, &rho0, grid, &Tolerances::DEFAULT).unwrap();
    run.states.iter().map(DensityMatrix::populations).collect()
}

#[test]
fn first_jump_times_follow_the_survival_curve() {
    let p = fig3();
    let grid = TimeGrid::new(1e-3, 0.5, 4.0).unwrap();
    let n = 4000;
    let mut times = Vec::with_capacity(n);
    for_each_record(&EnsembleSpec::new(p, eg(), grid, n, 11), |_, r| {
        times.push(r.first_jump().map_or(f64::INFINITY, |e| e.time));
        Ok(())
    })
    .unwrap();
    times.sort_by(f64::total_cmp);

    // Kolmogorov–Smirnov distance on [0, 4], runs without a click counted as later
    let mut d: f64 = 0.0;
    for (i, &t) in times.iter().enumerate().filter(|(_, t)| t.is_finite()) {
        let cdf = 1.0 - survival_probability(&p, t).unwrap();
        d = d
            .max((cdf - i as f64 / n as f64).abs())
            .max((cdf - (i + 1) as f64 / n as f64).abs());
    }
    // 1% critical value
    assert!(d < 1.63 / (n as f64).sqrt(), "KS distance {d}");
}

#[test]
fn bernoulli_sampling_matches_waiting_times() {
    let grid = TimeGrid::new(1e-3, 0.5, 3.0).unwrap();
    let lme = lme_populations(&fig3(), &eg(), &grid);
    let spec = EnsembleSpec {
        sampling: JumpSampling::Bernoulli,
        ..EnsembleSpec::new(fig3(), eg(), grid, 4000, 12)
    };
    let res = run_ensemble(&spec).unwrap();
    for (k, (n1, n2)) in lme.iter().enumerate() {
        // first-order sampling adds O(dt) bias on top of the statistical error
        assert!(
            within_stderr(res.mean[k][0], *n1, res.stderr[k][0], 3.0, 5e-3),
            "n1 at {k}"
        );
        assert!(
            within_stderr(res.mean[k][1], *n2, res.stderr[k][1], 3.0, 5e-3),
            "n2 at {k}"
        );
    }
}

#[test]
fn displaced_counting_reproduces_the_master_equation() {
    let p = ModelParams {
        nth1: 0.2,
        nth2: 0.1,
        ..fig3()
    };
    let psi0 = StateVector::basis(Basis::EE);
    let grid = TimeGrid::new(1e-3, 0.5, 3.0).unwrap();
    let lme = lme_populations(&p, &psi0, &grid);
    for beta in [0.5, 3.0] {
        let spec = EnsembleSpec {
            kind: UnravelingKind::DisplacedCounting { beta },
            ..EnsembleSpec::new(p, psi0, grid, 3000, 13)
        };
        let res = run_ensemble(&spec).unwrap();
        for (k, (n1, n2)) in lme.iter().enumerate() {
            assert!(
                within_stderr(res.mean[k][0], *n1, res.stderr[k][0], 3.5, 1e-8),
                "beta {beta} n1 at {k}"
            );
            assert!(
                within_stderr(res.mean[k][1], *n2, res.stderr[k][1], 3.5, 1e-8),
                "beta {beta} n2 at {k}"
            );
        }
    }
}

#[test]
fn demon_first_clicks_follow_the_branching_oracle() {
    let base = ModelParams {
        nth1: 0.05,
        nth2: 0.1,
        ..ModelParams::zero_temperature(10.0, 2.2, 0.2, 0.0)
    };
    let cfg = DemonConfig::new(base, 1.0);
    let grid = TimeGrid::new(2e-3, 1.0, 100.0).unwrap();
    let (probs, none) = branching_oracle(&cfg, 2e-3).unwrap();

    // only doors opened early enough to be resolved before the horizon
    let cutoff = grid.horizon() - cfg.max_duration();
    let mut counts = [0u64; 6];
    let (mut opened, mut silent) = (0u64, 0u64);
    for i in 0..300 {
        let run = run_demon_trajectory(&cfg, &StateVector::basis(Basis::GG), &grid, child_seed(14, i)).unwrap();
        for c in run.ledger.cycles.iter().filter(|c| c.start <= cutoff) {
            opened += 1;
            match c.events.get(1) {
                Some(e) => counts[e.channel.index()] += 1,
                None => silent += 1,
            }
        }
    }
    assert!(opened > 1000, "{opened} doors");
    let check = |name: &str, k: u64, p: f64| {
        let f = k as f64 / opened as f64;
        let se = (p * (1.0 - p) / opened as f64).sqrt();
        assert!(within_stderr(f, p, se, 4.0, 1e-12), "{name}: {f} vs {p}");
    };
    for label in ChannelLabel::ALL {
        check(label.as_str(), counts[label.index()], probs[label.index()]);
    }
    check("no click", silent, none);
}
