//! Run configuration: `key = value` lines with `#` comments, plus flag
//! overrides. Every field has a default, so an empty file is a valid config.

use serde::Serialize;
use std::path::PathBuf;
use std::str::FromStr;

use cavity_bell::antenna::{CollapseConfig, FeedbackAxis, Layout};
use cavity_bell::cavity::{derive_params, CavityParams, PropagatorConfig, Scheme, MAX_SPLIT_STEP_DT};
use cavity_bell::field::required_count;
use cavity_bell::fock::ChshSettings;
use cavity_bell::modes::Grid1D;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub half_extent: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalCavity {
    /// Centre thickness (m).
    pub l0: f64,
    /// Thickness curvature (1/m).
    pub b: f64,
    pub n_long: u32,
    /// Light speed in the medium (m/s).
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingsSource {
    Optimal,
    Paper,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChshConfig {
    pub settings: SettingsSource,
    /// θ, φ for the x-axis pair then the y-axis pair (explicit source only).
    pub angles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FramesConfig {
    pub half_extent: f64,
    pub count: usize,
    /// Duration of the rotation fit in oscillator periods.
    pub periods: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingConfig {
    pub layout: Layout,
    pub m_values: Vec<usize>,
    pub noise_sigma: f64,
    pub trials: usize,
    pub seed: u64,
    pub aperture: f64,
    pub violation_m: usize,
    pub violation_noise: f64,
    pub violation_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseSection {
    pub gain: f64,
    pub noise_sigma: f64,
    pub threshold: f64,
    pub max_steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub feedback_axis: FeedbackAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveConfig {
    /// Also measure the error-reduction ratio under dt halving.
    pub order_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub nmax: usize,
    /// `None` means dimensionless units only.
    pub cavity: Option<PhysicalCavity>,
    pub propagator: PropagatorConfig,
    pub chsh: ChshConfig,
    pub frames: FramesConfig,
    pub sampling: SamplingConfig,
    pub collapse: CollapseSection,
    pub evolve: EvolveConfig,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig {
                half_extent: 8.0,
                count: 256,
            },
            nmax: 3,
            cavity: None,
            propagator: PropagatorConfig::one_period(),
            chsh: ChshConfig {
                settings: SettingsSource::Optimal,
                angles: None,
            },
            frames: FramesConfig {
                half_extent: 4.0,
                count: 512,
                periods: 2.0,
                samples: 65,
            },
            sampling: SamplingConfig {
                layout: Layout::RandomUniform,
                m_values: vec![64, 100, 200, 400, 800, 1600],
                noise_sigma: 0.05,
                trials: 200,
                seed: 1,
                aperture: 4.0,
                violation_m: 400,
                violation_noise: 0.02,
                violation_seeds: 100,
            },
            collapse: CollapseSection {
                gain: 0.1,
                noise_sigma: 0.05,
                threshold: 0.999,
                max_steps: 1000,
                runs: 200,
                seed: 1,
                feedback_axis: FeedbackAxis::X,
            },
            evolve: EvolveConfig { order_check: true },
            output: PathBuf::from("out"),
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key} = {value}: {why}"))
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| num(key, v.trim())).collect()
}

fn parse_scheme(key: &str, value: &str) -> Result<Scheme, CliError> {
    match value {
        "mode" | "mode_exact" => Ok(Scheme::ModeExact),
        "splitstep" | "split_step" => Ok(Scheme::SplitStep),
        _ => Err(bad(key, value, "expected mode_exact or split_step")),
    }
}

fn parse_settings(key: &str, value: &str) -> Result<SettingsSource, CliError> {
    match value {
        "optimal" => Ok(SettingsSource::Optimal),
        "paper" => Ok(SettingsSource::Paper),
        "explicit" => Ok(SettingsSource::Explicit),
        _ => Err(bad(key, value, "expected optimal, paper or explicit")),
    }
}

impl RunConfig {
    /// Apply the contents of a config file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut physical: Option<bool> = None;
        let mut cav = PhysicalCavity {
            l0: f64::NAN,
            b: f64::NAN,
            n_long: 1,
            c: 299_792_458.0,
        };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "grid.half_extent" => cfg.grid.half_extent = num(key, value)?,
                "grid.count" => cfg.grid.count = num(key, value)?,
                "nmax" => cfg.nmax = num(key, value)?,
                "cavity" => match value {
                    "dimensionless" => physical = Some(false),
                    "physical" => physical = Some(true),
                    _ => return Err(bad(key, value, "expected dimensionless or physical")),
                },
                "cavity.l0" => cav.l0 = num(key, value)?,
                "cavity.b" => cav.b = num(key, value)?,
                "cavity.n_long" => cav.n_long = num(key, value)?,
                "cavity.c" => cav.c = num(key, value)?,
                "propagator.scheme" => cfg.propagator.scheme = parse_scheme(key, value)?,
                "propagator.dt" => cfg.propagator.dt = num(key, value)?,
                "propagator.steps" => cfg.propagator.steps = num(key, value)?,
                "propagator.allow_large_dt" => cfg.propagator.allow_large_dt = num(key, value)?,
                "chsh.settings" => cfg.chsh.settings = parse_settings(key, value)?,
                "chsh.angles" => cfg.chsh.angles = Some(list(key, value)?),
                "frames.half_extent" => cfg.frames.half_extent = num(key, value)?,
                "frames.count" => cfg.frames.count = num(key, value)?,
                "frames.periods" => cfg.frames.periods = num(key, value)?,
                "frames.samples" => cfg.frames.samples = num(key, value)?,
                "sampling.layout" => {
                    cfg.sampling.layout = value.parse().map_err(|e| bad(key, value, e))?
                }
                "sampling.m_values" => cfg.sampling.m_values = list(key, value)?,
                "sampling.noise_sigma" => cfg.sampling.noise_sigma = num(key, value)?,
                "sampling.trials" => cfg.sampling.trials = num(key, value)?,
                "sampling.seed" => cfg.sampling.seed = num(key, value)?,
                "sampling.aperture" => cfg.sampling.aperture = num(key, value)?,
                "sampling.violation_m" => cfg.sampling.violation_m = num(key, value)?,
                "sampling.violation_noise" => cfg.sampling.violation_noise = num(key, value)?,
                "sampling.violation_seeds" => cfg.sampling.violation_seeds = num(key, value)?,
                "collapse.gain" => cfg.collapse.gain = num(key, value)?,
                "collapse.noise_sigma" => cfg.collapse.noise_sigma = num(key, value)?,
                "collapse.threshold" => cfg.collapse.threshold = num(key, value)?,
                "collapse.max_steps" => cfg.collapse.max_steps = num(key, value)?,
                "collapse.runs" => cfg.collapse.runs = num(key, value)?,
                "collapse.seed" => cfg.collapse.seed = num(key, value)?,
                "collapse.feedback_axis" => {
                    cfg.collapse.feedback_axis = value.parse().map_err(|e| bad(key, value, e))?
                }
                "evolve.order_check" => cfg.evolve.order_check = num(key, value)?,
                "output" => cfg.output = PathBuf::from(value),
                _ => return Err(CliError::Config(format!("line {}: unknown key `{key}`", lineno + 1))),
            }
        }
        let physical = physical.unwrap_or(cav.l0.is_finite() || cav.b.is_finite());
        if physical {
            cfg.cavity = Some(cav);
        }
        Ok(cfg)
    }

    /// Flag overrides: `--seed` applies to both sampling and collapse.
    pub fn apply_overrides(
        &mut self,
        out: Option<PathBuf>,
        seed: Option<u64>,
        scheme: Option<&str>,
        settings: Option<&str>,
    ) -> Result<(), CliError> {
        if let Some(out) = out {
            self.output = out;
        }
        if let Some(seed) = seed {
            self.sampling.seed = seed;
            self.collapse.seed = seed;
        }
        if let Some(s) = scheme {
            self.propagator.scheme = parse_scheme("--scheme", s)?;
        }
        if let Some(s) = settings {
            self.chsh.settings = parse_settings("--settings", s)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, CliError> {
        Ok(Grid1D::new(self.grid.half_extent, self.grid.count)?)
    }

    pub fn frame_grid(&self) -> Result<Grid1D, CliError> {
        Ok(Grid1D::new(self.frames.half_extent, self.frames.count)?)
    }

    pub fn cavity_params(&self) -> Result<Option<CavityParams>, CliError> {
        self.cavity
            .as_ref()
            .map(|c| derive_params(c.l0, c.b, c.n_long, c.c).map_err(CliError::from))
            .transpose()
    }

    pub fn chsh_settings(&self) -> Result<Option<ChshSettings>, CliError> {
        match self.chsh.settings {
            SettingsSource::Optimal => Ok(None),
            SettingsSource::Paper => Ok(Some(ChshSettings::paper())),
            SettingsSource::Explicit => {
                let angles = self.chsh.angles.as_ref().ok_or_else(|| {
                    CliError::Config("chsh.settings = explicit needs chsh.angles".into())
                })?;
                Ok(Some(ChshSettings::from_angle_list(angles)?))
            }
        }
    }

    pub fn collapse_config(&self) -> CollapseConfig {
        CollapseConfig {
            gain: self.collapse.gain,
            noise_sigma: self.collapse.noise_sigma,
            max_steps: self.collapse.max_steps,
            threshold: self.collapse.threshold,
            seed: self.collapse.seed,
            feedback_axis: self.collapse.feedback_axis,
        }
    }

    /// Check every precondition before any computation starts.
    pub fn validate(&self) -> Result<(), CliError> {
        let grid = self.grid()?;
        if self.nmax == 0 {
            return Err(CliError::Config("nmax must be at least 1".into()));
        }
        if grid.count() < required_count(self.nmax) {
            return Err(CliError::Config(format!(
                "grid.count = {} is below {} needed for nmax = {}",
                grid.count(),
                required_count(self.nmax),
                self.nmax
            )));
        }
        let frames = self.frame_grid()?;
        if frames.half_extent() < 3.0 {
            return Err(CliError::Config(
                "frames.half_extent must be at least 3 to hold the nodal line".into(),
            ));
        }
        if self.frames.periods.is_nan() || self.frames.periods <= 0.0 || self.frames.samples < 4 {
            return Err(CliError::Config(
                "frames.periods must be positive and frames.samples at least 4".into(),
            ));
        }
        self.cavity_params()?;
        let p = &self.propagator;
        if !(p.dt.is_finite() && p.dt > 0.0) || p.steps == 0 {
            return Err(CliError::Config(format!(
                "propagator needs dt > 0 and steps > 0, got dt = {}, steps = {}",
                p.dt, p.steps
            )));
        }
        if p.scheme == Scheme::SplitStep && p.dt > MAX_SPLIT_STEP_DT && !p.allow_large_dt {
            return Err(CliError::Config(format!(
                "propagator.dt = {} exceeds {MAX_SPLIT_STEP_DT}; set propagator.allow_large_dt = true to override",
                p.dt
            )));
        }
        self.chsh_settings()?;
        let s = &self.sampling;
        let min_m = (self.nmax + 1).pow(2);
        if s.m_values.is_empty() || s.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Config("sampling.m_values must be strictly ascending".into()));
        }
        if s.m_values[0] < min_m || s.violation_m < min_m {
            return Err(CliError::Config(format!(
                "sample counts must be at least (nmax+1)² = {min_m}"
            )));
        }
        if s.layout == Layout::UniformGrid {
            let square = |m: usize| {
                let r = (m as f64).sqrt().round() as usize;
                r * r == m
            };
            if !s.m_values.iter().chain([&s.violation_m]).all(|&m| square(m)) {
                return Err(CliError::Config(
                    "uniform_grid layout needs square sample counts".into(),
                ));
            }
        }
        if s.trials == 0 || s.violation_seeds == 0 {
            return Err(CliError::Config("sampling trials and seeds must be positive".into()));
        }
        if !(s.noise_sigma >= 0.0 && s.violation_noise >= 0.0) {
            return Err(CliError::Config("sampling noise must be nonnegative".into()));
        }
        if !(s.aperture > 0.0 && s.aperture <= grid.max_point()) {
            return Err(CliError::Config(format!(
                "sampling.aperture must lie in (0, {}]",
                grid.max_point()
            )));
        }
        self.collapse_config().validate()?;
        if self.collapse.runs == 0 {
            return Err(CliError::Config("collapse.runs must be positive".into()));
        }
        Ok(())
    }
}
