//! Flat run configuration, presets, and layering of file and flag values.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use qtransfer::demon::{DemonConfig, RestartPolicy};
use qtransfer::linalg::{bell_states, Basis, StateVector};
use qtransfer::series::TimeGrid;
use qtransfer::trajectory::{JumpSampling, UnravelingKind};
use qtransfer::ModelParams;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unraveling {
    Counting,
    DisplacedCounting,
    HomodyneDiffusion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Gg,
    Ge,
    Eg,
    Ee,
    PsiPlus,
    PsiMinus,
}

impl InitialState {
    pub fn state(self) -> StateVector {
        match self {
            InitialState::Gg => StateVector::basis(Basis::GG),
            InitialState::Ge => StateVector::basis(Basis::GE),
            InitialState::Eg => StateVector::basis(Basis::EG),
            InitialState::Ee => StateVector::basis(Basis::EE),
            InitialState::PsiPlus => bell_states().0,
            InitialState::PsiMinus => bell_states().1,
        }
    }
}

/// Every knob of every subcommand as one flat JSON object. Missing keys take
/// the values of [`RunConfig::default`] (the `fig3` preset); unknown keys are
/// rejected. Rates and times are absolute; output time columns are `γc t`
/// whenever `gamma_c > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub omega1: f64,
    pub omega2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma_c: f64,
    pub nth1: f64,
    pub nth2: f64,
    pub nthc: f64,

    /// Internal integration step.
    pub dt: f64,
    /// Output sampling interval.
    pub sample_dt: f64,
    pub t_max: f64,

    pub n_traj: usize,
    pub master_seed: u64,
    /// Worker threads for ensembles; unset uses all cores. Results do not
    /// depend on it.
    pub workers: Option<usize>,

    pub initial_state: InitialState,
    pub unraveling: Unraveling,
    /// Local-oscillator amplitude for `displaced_counting`; unset means
    /// `10 √gamma_c`.
    pub beta: Option<f64>,
    pub sampling: JumpSampling,

    pub bin_width: f64,
    pub eff1: f64,
    pub eff2: f64,

    /// Collective rate while the demon's door is open; unset means `gamma_c`.
    pub gamma_c_active: Option<f64>,
    pub max_transfer_duration: Option<f64>,
    pub restart: RestartPolicy,

    /// Output directory.
    pub out: String,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            omega1: 10.0,
            omega2: 10.0,
            gamma1: 2.2,
            gamma2: 0.2,
            gamma_c: 1.0,
            nth1: 0.0,
            nth2: 0.0,
            nthc: 0.0,
            dt: 1e-3,
            sample_dt: 0.1,
            t_max: 6.0,
            n_traj: 1000,
            master_seed: 1,
            workers: None,
            initial_state: InitialState::Eg,
            unraveling: Unraveling::Counting,
            beta: None,
            sampling: JumpSampling::WaitingTime,
            bin_width: 0.5,
            eff1: 1.0,
            eff2: 1.0,
            gamma_c_active: None,
            max_transfer_duration: None,
            restart: RestartPolicy::RelaxationGated,
            out: ".".into(),
            format: Format::Csv,
        }
    }
}

pub const PRESETS: [&str; 4] = ["fig2", "fig3", "fig4", "alt_083"];

/// Parameter sets of the reference figures, in units of `γc`.
pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let base = RunConfig::default();
    match name {
        "fig2" => Ok(RunConfig {
            gamma1: 0.2,
            gamma2: 0.2,
            ..base
        }),
        "fig3" => Ok(base),
        "alt_083" => Ok(RunConfig {
            gamma1: 1.0,
            gamma2: 0.1,
            ..base
        }),
        // γ2 = γ1 / 11 and γc = 5 γ2
        "fig4" => Ok(RunConfig {
            gamma1: 2.2,
            gamma2: 0.2,
            gamma_c: 1.0,
            nth1: 0.05,
            nth2: 0.1,
            nthc: 0.0,
            dt: 2e-3,
            sample_dt: 1.0,
            t_max: 100.0,
            initial_state: InitialState::Gg,
            gamma_c_active: Some(1.0),
            ..base
        }),
        other => Err(CliError::Config(format!(
            "unknown preset `{other}` (expected one of {})",
            PRESETS.join(", ")
        ))),
    }
}

/// Values given on the command line; they override file values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_traj: Option<usize>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<String>,
    pub format: Option<Format>,
    pub workers: Option<usize>,
}

/// Precedence, lowest first: built-in defaults, `preset`, the keys present in
/// the config file, command-line flags.
pub fn resolve(preset_name: Option<&str>, file: Option<&Path>, flags: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match preset_name {
        Some(name) => preset(name)?,
        None => RunConfig::default(),
    };
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        cfg = layer(&cfg, &text)?;
    }
    if let Some(v) = flags.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = flags.n_traj {
        cfg.n_traj = v;
    }
    if let Some(v) = flags.t_max {
        cfg.t_max = v;
    }
    if let Some(v) = flags.dt {
        cfg.dt = v;
    }
    if let Some(v) = &flags.out {
        cfg.out = v.clone();
    }
    if let Some(v) = flags.format {
        cfg.format = v;
    }
    if flags.workers.is_some() {
        cfg.workers = flags.workers;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Overwrites the keys of `base` that appear in the JSON object `text`.
pub fn layer(base: &RunConfig, text: &str) -> Result<RunConfig, CliError> {
    let patch: Map<String, Value> =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))?;
    let mut merged = match serde_json::to_value(base) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("RunConfig serializes to an object"),
    };
    for (k, v) in patch {
        merged.insert(k, v);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("config file: {e}")))
}

impl RunConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            omega1: self.omega1,
            omega2: self.omega2,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            gamma_c: self.gamma_c,
            nth1: self.nth1,
            nth2: self.nth2,
            nthc: self.nthc,
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            dt: self.dt,
            sample_dt: self.sample_dt,
            t_max: self.t_max,
        }
    }

    pub fn kind(&self) -> UnravelingKind {
        match self.unraveling {
            Unraveling::Counting => UnravelingKind::Counting,
            Unraveling::DisplacedCounting => UnravelingKind::DisplacedCounting {
                beta: self.beta.unwrap_or_else(|| UnravelingKind::default_beta(self.gamma_c)),
            },
            Unraveling::HomodyneDiffusion => UnravelingKind::HomodyneDiffusion,
        }
    }

    pub fn demon(&self) -> DemonConfig {
        DemonConfig {
            base: self.params().with_gamma_c(0.0),
            gamma_c_active: self.gamma_c_active.unwrap_or(self.gamma_c),
            max_transfer_duration: self.max_transfer_duration,
            restart: self.restart,
        }
    }

    /// Factor applied to times in output columns.
    pub fn time_scale(&self) -> f64 {
        if self.gamma_c > 0.0 {
            self.gamma_c
        } else {
            1.0
        }
    }

    pub fn time_unit(&self) -> &'static str {
        if self.gamma_c > 0.0 {
            "gamma_c * t"
        } else {
            "t"
        }
    }

    /// Checks the preconditions shared by all subcommands.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params().validate()?;
        self.grid().validate()?;
        let fail = |field: &str, reason: &str| Err(CliError::Config(format!("invalid parameter `{field}`: {reason}")));
        if self.n_traj == 0 {
            return fail("n_traj", "must be at least 1");
        }
        if self.workers == Some(0) {
            return fail("workers", "must be at least 1");
        }
        if !(self.bin_width > 0.0) || !self.bin_width.is_finite() {
            return fail("bin_width", "must be positive");
        }
        for (field, e) in [("eff1", self.eff1), ("eff2", self.eff2)] {
            if !(0.0..=1.0).contains(&e) {
                return fail(field, "must lie in [0, 1]");
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || !b.is_finite() {
                return fail("beta", "must be positive");
            }
        }
        if let UnravelingKind::DisplacedCounting { beta } = self.kind() {
            if !(beta > 0.0) {
                return fail(
                    "beta",
                    "displaced counting needs beta > 0 (or gamma_c > 0 for the default)",
                );
            }
        }
        Ok(())
    }
}
