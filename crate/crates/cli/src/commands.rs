//! One function per subcommand. Each returns the tables it produced.

use qtransfer::analysis::{postselect_run, thin_events, HistogramChannels, JumpHistogram, TrajectoryPostselector};
use qtransfer::demon::run_demon_ensemble;
use qtransfer::linalg::DensityMatrix;
use qtransfer::lindblad::{evolve, heat_currents, integrate, steady_state, Observable, SteadyStateOptions};
use qtransfer::model::{analytic_no_jump_state, transfer_fidelity_infinite, ChannelLabel};
use qtransfer::trajectory::rng::{child_seed, trajectory_rng};
use qtransfer::trajectory::{for_each_record, run_ensemble, run_trajectory, EnsembleSpec, Sample};
use qtransfer::Tolerances;

use crate::config::{InitialState, RunConfig, Unraveling};
use crate::output::{Cell, Table};
use crate::CliError;

fn rho0(cfg: &RunConfig) -> Result<DensityMatrix, CliError> {
    Ok(DensityMatrix::pure(&cfg.initial_state.state())?)
}

fn spec(cfg: &RunConfig) -> EnsembleSpec {
    EnsembleSpec {
        kind: cfg.kind(),
        sampling: cfg.sampling,
        workers: cfg.workers,
        ..EnsembleSpec::new(
            cfg.params(),
            cfg.initial_state.state(),
            cfg.grid(),
            cfg.n_traj,
            cfg.master_seed,
        )
    }
}

fn require_zero_temperature(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    if cfg.params().is_zero_temperature() {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{command}` requires nth1 = nth2 = nthc = 0")))
    }
}

pub fn lindblad(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let obs = [Observable::N1, Observable::N2, Observable::Trace, Observable::Purity];
    let series = integrate(&cfg.params(), &rho0(cfg)?, &cfg.grid(), &obs, &Tolerances::DEFAULT)?;
    let mut t = Table::new("lindblad", &["t", "n1", "n2", "trace", "purity"]);
    for (time, row) in series.times.iter().zip(&series.rows) {
        let mut cells = vec![Cell::Real(time * cfg.time_scale())];
        cells.extend(row.iter().map(|&v| Cell::Real(v)));
        t.push(cells);
    }
    Ok(vec![t])
}

pub fn trajectory(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let r = run_trajectory(
        &cfg.params(),
        &cfg.initial_state.state(),
        &cfg.grid(),
        cfg.master_seed,
        cfg.kind(),
        cfg.sampling,
    )?;
    let scale = cfg.time_scale();
    let mut cols = vec!["t"];
    cols.extend(Sample::NAMES);
    let mut traj = Table::new("trajectory", &cols);
    for (time, s) in r.sample_times.iter().zip(&r.samples) {
        let mut cells = vec![Cell::Real(time * scale)];
        cells.extend(s.values().map(Cell::Real));
        traj.push(cells);
    }
    let mut events = Table::new("events", &["t_jump", "channel"]);
    for e in &r.events {
        events.push(vec![Cell::Real(e.time * scale), e.channel.as_str().into()]);
    }
    Ok(vec![traj, events])
}

pub fn ensemble(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let res = run_ensemble(&spec(cfg))?;
    let scale = cfg.time_scale();
    let mut cols = vec!["t".to_string()];
    for n in Sample::NAMES {
        cols.push(n.to_string());
        cols.push(format!("{n}_se"));
    }
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut means = Table::new("ensemble", &cols);
    for ((time, m), se) in res.times.iter().zip(&res.mean).zip(&res.stderr) {
        let mut cells = vec![Cell::Real(time * scale)];
        for (a, b) in m.iter().zip(se) {
            cells.push(Cell::Real(*a));
            cells.push(Cell::Real(*b));
        }
        means.push(cells);
    }
    let mut jcols = vec!["bin_start", "bin_end"];
    jcols.extend(ChannelLabel::ALL.map(ChannelLabel::as_str));
    let mut jumps = Table::new("jumps", &jcols);
    for (k, counts) in res.jump_counts.iter().enumerate() {
        let mut cells = vec![Cell::Real(res.times[k] * scale), Cell::Real(res.times[k + 1] * scale)];
        cells.extend(counts.iter().map(|&c| Cell::from(c)));
        jumps.push(cells);
    }
    Ok(vec![means, jumps])
}

pub fn histogram(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let spec = spec(cfg);
    let mut hist = JumpHistogram::new(cfg.bin_width, cfg.grid().horizon(), HistogramChannels::default())?;
    let thin = cfg.eff1 < 1.0 || cfg.eff2 < 1.0;
    // one detector stream for the whole run, consumed in trajectory order
    let mut detector = trajectory_rng(child_seed(cfg.master_seed, u64::MAX));
    for_each_record(&spec, |_, r| {
        if thin {
            hist.add(&thin_events(&r.events, cfg.eff1, cfg.eff2, &mut detector)?);
        } else {
            hist.add(&r.events);
        }
        Ok(())
    })?;
    let scale = cfg.time_scale();
    let mut t = Table::new(
        "histogram",
        &[
            "bin_start",
            "bin_end",
            "count_q1",
            "count_q2",
            "frac_q1",
            "frac_q2",
            "low_stats_flag",
        ],
    );
    for b in hist.finish().bins {
        t.push(vec![
            Cell::Real(b.start * scale),
            Cell::Real(b.end * scale),
            b.count_q1.into(),
            b.count_q2.into(),
            b.frac_q1.into(),
            b.frac_q2.into(),
            b.low_stats.into(),
        ]);
    }
    Ok(vec![t])
}

pub fn postselect(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    require_zero_temperature(cfg, "postselect")?;
    if cfg.unraveling != Unraveling::Counting {
        return Err(CliError::Config("`postselect` requires the counting unraveling".into()));
    }
    let p = cfg.params();
    let run = evolve(&p, &rho0(cfg)?, &cfg.grid(), &Tolerances::DEFAULT)?;
    let lme = postselect_run(&p, &run)?;
    let spec = spec(cfg);
    let mut ps = TrajectoryPostselector::new(cfg.grid().times());
    for_each_record(&spec, |_, r| ps.add(&r))?;

    let scale = cfg.time_scale();
    let mut t = Table::new(
        "postselect",
        &[
            "t",
            "n1_lme",
            "n2_lme",
            "survival_lme",
            "n1_traj",
            "n1_traj_se",
            "n2_traj",
            "n2_traj_se",
            "surviving_fraction",
            "surviving_fraction_se",
            "survivors",
        ],
    );
    for k in 0..lme.times.len() {
        let mut cells = vec![
            Cell::Real(lme.times[k] * scale),
            lme.n1[k].into(),
            lme.n2[k].into(),
            lme.survival[k].into(),
        ];
        match ps.point(k) {
            Ok(pt) => cells.extend([
                pt.n1.into(),
                pt.n1_stderr.into(),
                pt.n2.into(),
                pt.n2_stderr.into(),
                pt.surviving_fraction.into(),
                pt.surviving_stderr.into(),
                pt.survivors.into(),
            ]),
            Err(_) => cells.extend([
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                f64::NAN.into(),
                0.0.into(),
                0.0.into(),
                0usize.into(),
            ]),
        }
        t.push(cells);
    }
    Ok(vec![t])
}

pub fn analytic(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    require_zero_temperature(cfg, "analytic")?;
    if cfg.initial_state != InitialState::Eg {
        return Err(CliError::Config("`analytic` requires initial_state = \"eg\"".into()));
    }
    let p = cfg.params();
    let scale = cfg.time_scale();
    let mut curve = Table::new("analytic", &["t", "n1", "n2", "survival"]);
    for time in cfg.grid().times() {
        let psi = analytic_no_jump_state(&p, time)?;
        let (n1, n2) = psi.populations()?;
        curve.push(vec![
            Cell::Real(time * scale),
            n1.into(),
            n2.into(),
            psi.norm_sqr().into(),
        ]);
    }
    let fidelity = transfer_fidelity_infinite(&p).unwrap_or(f64::NAN);
    let mut summary = Table::new("analytic_summary", &["quantity", "value"]);
    summary.push(vec!["transfer_fidelity_infinite".into(), fidelity.into()]);
    Ok(vec![curve, summary])
}

pub fn demon(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let dcfg = cfg.demon();
    dcfg.validate()?;
    for w in dcfg.warnings() {
        eprintln!("warning: {w}");
    }
    let stats = run_demon_ensemble(
        &dcfg,
        &cfg.initial_state.state(),
        &cfg.grid(),
        cfg.n_traj,
        cfg.master_seed,
        cfg.workers,
    )?;

    let mut ledger = Table::new(
        "ledger",
        &[
            "trial",
            "cold_net",
            "hot_net",
            "collective_net",
            "n_cycles",
            "n_completed_cycles",
        ],
    );
    for row in &stats.ledgers {
        ledger.push(vec![
            row.trial.into(),
            row.cold_net.into(),
            row.hot_net.into(),
            row.collective_net.into(),
            row.n_cycles.into(),
            row.n_completed_cycles.into(),
        ]);
    }

    let scale = dcfg.gamma_c_active;
    let mut phases = Table::new("phases", &["t", "phase"]);
    for ch in &stats.first_timeline {
        phases.push(vec![Cell::Real(ch.time * scale), ch.phase.as_str().into()]);
    }

    // second-law baselines: door always open, door always closed
    let tol = Tolerances::DEFAULT.algebraic;
    let open = dcfg.active_params();
    let closed = dcfg.idle_params();
    let on = heat_currents(&open, &steady_state(&open, tol, SteadyStateOptions::default())?)?;
    let off = heat_currents(&closed, &steady_state(&closed, tol, SteadyStateOptions::default())?)?;

    let o = &stats.outcomes;
    let rows: Vec<(&str, f64)> = vec![
        ("n_traj", stats.n_traj as f64),
        ("cold_net_mean", stats.cold.mean),
        ("cold_net_se", stats.cold.stderr),
        ("hot_net_mean", stats.hot.mean),
        ("hot_net_se", stats.hot.stderr),
        ("collective_net_mean", stats.collective.mean),
        ("collective_net_se", stats.collective.stderr),
        ("n_cycles", stats.n_cycles as f64),
        ("n_completed_cycles", stats.n_completed_cycles as f64),
        ("completed_cycle_violations", stats.completed_cycle_violations as f64),
        ("outcome_hot", o.hot as f64),
        ("outcome_cold", o.cold as f64),
        ("outcome_collective", o.collective as f64),
        ("outcome_timeout", o.timeout as f64),
        ("outcome_unfinished", o.unfinished as f64),
        ("collective_outside_active", stats.collective_outside_active as f64),
        ("baseline_open_current_cold", on.current_cold),
        ("baseline_open_current_hot", on.current_hot),
        ("baseline_open_current_collective", on.current_collective),
        ("baseline_closed_current_cold", off.current_cold),
        ("baseline_closed_current_hot", off.current_hot),
    ];
    let mut summary = Table::new("demon_summary", &["quantity", "value"]);
    for (k, v) in rows {
        summary.push(vec![k.into(), v.into()]);
    }
    Ok(vec![ledger, phases, summary])
}
