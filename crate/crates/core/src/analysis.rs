//! Witnesses extracted from trajectories and density matrices: local-jump
//! histograms, detector-efficiency thinning, postselection, and ensemble
//! averages.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{number_op, Basis, DensityMatrix, Operator};
use crate::lindblad::{evolve, LindbladRun};
use crate::model::{build_channels, ChannelLabel, ModelParams};
use crate::series::{TimeGrid, TimeSeries};
use crate::tolerances::Tolerances;
use crate::trajectory::rng::open_unit;
use crate::trajectory::{JumpEvent, Moments, Sample, TrajectoryRecord, UnravelingKind};

/// Bins with fewer events than this are flagged as low statistics.
pub const LOW_STATS_THRESHOLD: u64 = 10;
/// Default histogram bin width in units of `1/γc`.
pub const DEFAULT_BIN_WIDTH: f64 = 0.5;

/// The pair of channels compared by a histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramChannels {
    pub q1: ChannelLabel,
    pub q2: ChannelLabel,
}

impl Default for HistogramChannels {
    fn default() -> Self {
        HistogramChannels {
            q1: ChannelLabel::Local1Down,
            q2: ChannelLabel::Local2Down,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub start: f64,
    pub end: f64,
    pub count_q1: u64,
    pub count_q2: u64,
    /// `count_q1 / (count_q1 + count_q2)`, zero for an empty bin.
    pub frac_q1: f64,
    pub frac_q2: f64,
    pub low_stats: bool,
}

impl HistogramBin {
    pub fn total(&self) -> u64 {
        self.count_q1 + self.count_q2
    }

    /// Binomial standard error of `frac_q1` (zero for an empty bin).
    pub fn frac_stderr(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        (self.frac_q1 * self.frac_q2 / n as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramSeries {
    pub channels: HistogramChannels,
    pub bins: Vec<HistogramBin>,
}

impl HistogramSeries {
    /// Bins whose interval lies inside `[from, to]`.
    pub fn bins_within(&self, from: f64, to: f64) -> impl Iterator<Item = &HistogramBin> {
        let eps = 1e-9;
        self.bins
            .iter()
            .filter(move |b| b.start >= from - eps && b.end <= to + eps)
    }

    /// Pools the counts of several bins into one.
    pub fn pooled<'a>(bins: impl IntoIterator<Item = &'a HistogramBin>) -> Option<HistogramBin> {
        let mut it = bins.into_iter().peekable();
        let start = it.peek()?.start;
        let (mut c1, mut c2, mut end) = (0, 0, start);
        for b in it {
            c1 += b.count_q1;
            c2 += b.count_q2;
            end = b.end;
        }
        Some(make_bin(start, end, c1, c2))
    }
}

fn make_bin(start: f64, end: f64, count_q1: u64, count_q2: u64) -> HistogramBin {
    let n = count_q1 + count_q2;
    let (frac_q1, frac_q2) = if n == 0 {
        (0.0, 0.0)
    } else {
        (count_q1 as f64 / n as f64, count_q2 as f64 / n as f64)
    };
    HistogramBin {
        start,
        end,
        count_q1,
        count_q2,
        frac_q1,
        frac_q2,
        low_stats: n < LOW_STATS_THRESHOLD,
    }
}

/// Incremental histogram of the clicks of two channels over `[0, t_max]`.
#[derive(Clone, Debug)]
pub struct JumpHistogram {
    channels: HistogramChannels,
    bin_width: f64,
    counts: Vec<[u64; 2]>,
}

impl JumpHistogram {
    pub fn new(bin_width: f64, t_max: f64, channels: HistogramChannels) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::InvalidParameter {
                field: "bin_width",
                reason: format!("must be positive, got {bin_width}"),
            });
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(Error::InvalidParameter {
                field: "t_max",
                reason: format!("must be positive, got {t_max}"),
            });
        }
        let n = ((t_max / bin_width) - 1e-9).ceil().max(1.0) as usize;
        Ok(JumpHistogram {
            channels,
            bin_width,
            counts: vec![[0; 2]; n],
        })
    }

    pub fn add(&mut self, events: &[JumpEvent]) {
        let last = self.counts.len() - 1;
        for e in events {
            let slot = if e.channel == self.channels.q1 {
                0
            } else if e.channel == self.channels.q2 {
                1
            } else {
                continue;
            };
            let k = ((e.time / self.bin_width) as usize).min(last);
            self.counts[k][slot] += 1;
        }
    }

    pub fn finish(&self) -> HistogramSeries {
        let w = self.bin_width;
        let bins = self
            .counts
            .iter()
            .enumerate()
            .map(|(k, c)| make_bin(k as f64 * w, (k + 1) as f64 * w, c[0], c[1]))
            .collect();
        HistogramSeries {
            channels: self.channels,
            bins,
        }
    }
}

/// Histogram of the local clicks of `records`, ignoring every other channel.
/// The time window is the sample grid of the first record.
pub fn jump_histogram(
    records: &[TrajectoryRecord],
    bin_width: f64,
    channels: HistogramChannels,
) -> Result<HistogramSeries> {
    let first = records.first().ok_or(Error::Empty("records"))?;
    let t_max = *first.sample_times.last().ok_or(Error::Empty("sample grid"))?;
    let mut h = JumpHistogram::new(bin_width, t_max, channels)?;
    for r in records {
        h.add(&r.events);
    }
    Ok(h.finish())
}

fn check_efficiency(field: &'static str, e: f64) -> Result<()> {
    if (0.0..=1.0).contains(&e) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: format!("must lie in [0, 1], got {e}"),
        })
    }
}

/// Keeps each `Local1Down` (`Local2Down`) click independently with
/// probability `eff1` (`eff2`); every other click is kept.
pub fn thin_events<R: RngCore>(events: &[JumpEvent], eff1: f64, eff2: f64, rng: &mut R) -> Result<Vec<JumpEvent>> {
    check_efficiency("eff1", eff1)?;
    check_efficiency("eff2", eff2)?;
    let keep = |eff: f64, rng: &mut R| eff >= 1.0 || (eff > 0.0 && open_unit(rng) < eff);
    Ok(events
        .iter()
        .filter(|e| match e.channel {
            ChannelLabel::Local1Down => keep(eff1, rng),
            ChannelLabel::Local2Down => keep(eff2, rng),
            _ => true,
        })
        .copied()
        .collect())
}

/// [`thin_events`] applied to every record.
pub fn thin_by_efficiency<R: RngCore>(
    records: &[TrajectoryRecord],
    eff1: f64,
    eff2: f64,
    rng: &mut R,
) -> Result<Vec<TrajectoryRecord>> {
    records
        .iter()
        .map(|r| {
            Ok(TrajectoryRecord {
                events: thin_events(&r.events, eff1, eff2, rng)?,
                ..r.clone()
            })
        })
        .collect()
}

/// Expected qubit-1 fraction after thinning a bin whose true qubit-1
/// fraction is `frac_q1`.
pub fn thinned_fraction(frac_q1: f64, eff1: f64, eff2: f64) -> f64 {
    let a = eff1 * frac_q1;
    let b = eff2 * (1.0 - frac_q1);
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Expected clicks per trajectory, per channel (in `ChannelLabel::ALL`
/// order), in consecutive bins `[k w, (k+1) w)` covering `[0, t_max]`:
/// `∫ γ_μ Tr[J_μ^† J_μ ρ(t)] dt` with `ρ(t)` from the master equation,
/// integrated by Simpson's rule on `2 * half_steps` panels per bin.
pub fn expected_jump_counts(
    p: &ModelParams,
    rho0: &DensityMatrix,
    bin_width: f64,
    t_max: f64,
    dt: f64,
) -> Result<Vec<[f64; 6]>> {
    const PANELS: usize = 64;
    let n_bins = ((t_max / bin_width) - 1e-9).ceil().max(1.0) as usize;
    let sample = bin_width / PANELS as f64;
    let grid = TimeGrid::new(dt.min(sample), sample, n_bins as f64 * bin_width)?;
    let run = evolve(p, rho0, &grid, &Tolerances::DEFAULT)?;
    let channels = build_channels(p);
    let rate = |rho: &DensityMatrix| -> [f64; 6] {
        let mut out = [0.0; 6];
        for c in &channels {
            out[c.label.index()] = c.rate * (c.jdj() * *rho.as_operator()).trace().re;
        }
        out
    };
    let rates: Vec<[f64; 6]> = run.states.iter().map(rate).collect();
    Ok((0..n_bins)
        .map(|k| {
            let mut acc = [0.0; 6];
            for j in 0..=PANELS {
                let w = if j == 0 || j == PANELS {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                for (a, r) in acc.iter_mut().zip(rates[k * PANELS + j]) {
                    *a += w * r * sample / 3.0;
                }
            }
            acc
        })
        .collect())
}

/// Expected `frac_q1` per bin, `γ₁<n₁> / (γ₁<n₁> + γ₂<n₂>)` integrated over
/// the bin with master-equation populations.
pub fn expected_local_fractions(
    p: &ModelParams,
    rho0: &DensityMatrix,
    bin_width: f64,
    t_max: f64,
    dt: f64,
    channels: HistogramChannels,
) -> Result<Vec<f64>> {
    let counts = expected_jump_counts(p, rho0, bin_width, t_max, dt)?;
    Ok(counts
        .iter()
        .map(|c| {
            let (a, b) = (c[channels.q1.index()], c[channels.q2.index()]);
            if a + b > 0.0 {
                a / (a + b)
            } else {
                0.0
            }
        })
        .collect())
}

/// Populations of the postselected density matrix
/// `(ρ - |gg><gg| ρ_gg,gg) / Tr[(n₁ + n₂) ρ]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostselectedSeries {
    pub times: Vec<f64>,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    /// `Tr[(n₁ + n₂) ρ]`: the probability that no click has happened yet.
    pub survival: Vec<f64>,
}

/// Largest population or coherence tolerated outside the domain of
/// [`postselect_lme`].
const DOMAIN_TOL: f64 = 1e-9;

/// Postselects a zero-temperature master-equation run that starts with at
/// most one excitation.
pub fn postselect_lme(p: &ModelParams, times: &[f64], states: &[DensityMatrix]) -> Result<PostselectedSeries> {
    if !p.is_zero_temperature() {
        return Err(Error::PostselectionDomain("baths must be at zero temperature".into()));
    }
    if times.len() != states.len() {
        return Err(Error::GridMismatch);
    }
    if states.is_empty() {
        return Err(Error::Empty("density-matrix series"));
    }
    let (gg, ee) = (Basis::GG as usize, Basis::EE as usize);
    let (num1, num2) = (number_op(1), number_op(2));
    let mut out = PostselectedSeries {
        times: times.to_vec(),
        n1: Vec::with_capacity(times.len()),
        n2: Vec::with_capacity(times.len()),
        survival: Vec::with_capacity(times.len()),
    };
    for (&t, rho) in times.iter().zip(states) {
        let m = rho.as_operator();
        let tr = rho.trace();
        let mut leak = m[(ee, ee)].norm();
        for i in [Basis::GE as usize, Basis::EG as usize, ee] {
            leak = leak.max(m[(gg, i)].norm());
        }
        if leak > DOMAIN_TOL * tr.abs().max(1.0) {
            return Err(Error::PostselectionDomain(format!(
                "population of |e,e> or sector coherence {leak:e} at t = {t}"
            )));
        }
        let denom = ((num1 + num2) * *m).trace().re;
        if !(denom >= 1e-12) {
            return Err(Error::FullyDecayed { t });
        }
        let mut ps: Operator = *m;
        ps[(gg, gg)] -= m[(gg, gg)];
        let ps = ps.scale_re(1.0 / denom);
        let n1 = (num1 * ps).trace().re;
        let n2 = (num2 * ps).trace().re;
        if (n1 + n2 - 1.0).abs() > 1e-9 {
            return Err(Error::PostselectionDomain(format!(
                "postselected state is not normalized at t = {t}: {}",
                n1 + n2
            )));
        }
        out.n1.push(n1);
        out.n2.push(n2);
        out.survival.push(denom);
    }
    Ok(out)
}

/// [`postselect_lme`] of a whole run.
pub fn postselect_run(p: &ModelParams, run: &LindbladRun) -> Result<PostselectedSeries> {
    postselect_lme(p, &run.times, &run.states)
}

/// Trajectory-conditioned populations at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PostselectedPoint {
    pub t: f64,
    pub n1: f64,
    pub n2: f64,
    pub n1_stderr: f64,
    pub n2_stderr: f64,
    pub survivors: usize,
    pub surviving_fraction: f64,
    /// Binomial standard error of `surviving_fraction`.
    pub surviving_stderr: f64,
}

/// Streaming version of [`postselect_trajectories`] for every sample time of
/// a common grid.
#[derive(Clone, Debug)]
pub struct TrajectoryPostselector {
    times: Vec<f64>,
    n1: Vec<Moments>,
    n2: Vec<Moments>,
    total: usize,
}

impl TrajectoryPostselector {
    pub fn new(times: Vec<f64>) -> Self {
        let n = times.len();
        TrajectoryPostselector {
            times,
            n1: vec![Moments::default(); n],
            n2: vec![Moments::default(); n],
            total: 0,
        }
    }

    pub fn add(&mut self, r: &TrajectoryRecord) -> Result<()> {
        if r.unraveling != UnravelingKind::Counting {
            return Err(Error::PostselectionDomain(format!(
                "requires counting records, got {}",
                r.unraveling.name()
            )));
        }
        if r.sample_times != self.times {
            return Err(Error::GridMismatch);
        }
        self.total += 1;
        for (k, &t) in self.times.iter().enumerate() {
            if !r.survives_until(t) {
                break;
            }
            self.n1[k].push(r.samples[k].n1);
            self.n2[k].push(r.samples[k].n2);
        }
        Ok(())
    }

    /// Result at sample index `k`.
    pub fn point(&self, k: usize) -> Result<PostselectedPoint> {
        let t = self.times[k];
        let survivors = self.n1[k].count() as usize;
        if survivors == 0 {
            return Err(Error::InsufficientStatistics { t });
        }
        let f = survivors as f64 / self.total as f64;
        Ok(PostselectedPoint {
            t,
            n1: self.n1[k].mean(),
            n2: self.n2[k].mean(),
            n1_stderr: self.n1[k].stderr(),
            n2_stderr: self.n2[k].stderr(),
            survivors,
            surviving_fraction: f,
            surviving_stderr: (f * (1.0 - f) / self.total as f64).sqrt(),
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// Averages the populations at `t` over the counting records with no click at
/// or before `t`.
pub fn postselect_trajectories(records: &[TrajectoryRecord], t: f64) -> Result<PostselectedPoint> {
    let first = records.first().ok_or(Error::Empty("records"))?;
    let k = sample_index(&first.sample_times, t)?;
    let mut ps = TrajectoryPostselector::new(first.sample_times.clone());
    for r in records {
        ps.add(r)?;
    }
    ps.point(k)
}

fn sample_index(times: &[f64], t: f64) -> Result<usize> {
    let scale = times.last().copied().unwrap_or(1.0).abs().max(1.0);
    times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-9 * scale)
        .ok_or(Error::NotOnGrid { t })
}

/// Pointwise mean and standard error of the sampled observables. Columns are
/// the [`Sample::NAMES`] followed by the same names with a `_se` suffix.
pub fn ensemble_average(records: &[TrajectoryRecord]) -> Result<TimeSeries> {
    let first = records.first().ok_or(Error::Empty("records"))?;
    let n_t = first.sample_times.len();
    let mut moments = vec![std::array::from_fn::<Moments, 5, _>(|_| Moments::default()); n_t];
    for r in records {
        if r.sample_times != first.sample_times || r.samples.len() != n_t {
            return Err(Error::GridMismatch);
        }
        for (m, s) in moments.iter_mut().zip(&r.samples) {
            for (acc, v) in m.iter_mut().zip(s.values()) {
                acc.push(v);
            }
        }
    }
    let names = Sample::NAMES
        .iter()
        .map(|n| n.to_string())
        .chain(Sample::NAMES.iter().map(|n| format!("{n}_se")))
        .collect();
    let mut series = TimeSeries::new(names);
    for (t, m) in first.sample_times.iter().zip(&moments) {
        let row = m
            .iter()
            .map(Moments::mean)
            .chain(m.iter().map(Moments::stderr))
            .collect();
        series.push(*t, row);
    }
    Ok(series)
}

/// `|a - b| <= k·se + floor`: agreement within `k` standard errors, with an
/// absolute floor for points where the sample variance vanishes.
pub fn within_stderr(a: f64, b: f64, se: f64, k: f64, floor: f64) -> bool {
    (a - b).abs() <= k * se + floor
}
