//! Discrete-site measurement of the cavity field, least-squares mode
//! reconstruction, sampled CHSH estimation and parity-feedback collapse.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::field::{project, FieldGrid};
use crate::fock::{chsh_optimize, chsh_value, ChshSettings};
use crate::fock::ModeState2D;
use crate::modes::{eval_at, Grid1D};

/// Design matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e8;
/// Largest feedback gain per step.
pub const MAX_GAIN: f64 = 0.2;

const SITE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    UniformGrid,
    RandomUniform,
    Halton,
    /// Sites supplied by the caller.
    Explicit,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::UniformGrid => "uniform_grid",
            Layout::RandomUniform => "random_uniform",
            Layout::Halton => "halton",
            Layout::Explicit => "explicit",
        })
    }
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_grid" => Ok(Layout::UniformGrid),
            "random_uniform" => Ok(Layout::RandomUniform),
            "halton" => Ok(Layout::Halton),
            other => Err(Error::Precondition(format!(
                "unknown sampling layout '{other}' (expected uniform_grid, random_uniform or halton)"
            ))),
        }
    }
}

/// Where the antennas sit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePlan {
    pub sites: Vec<(f64, f64)>,
    pub layout: Layout,
    pub seed: u64,
}

impl SamplePlan {
    /// `count` sites in the square [−aperture, aperture]², each moved to the
    /// nearest node of `grid` so that readings involve no interpolation error.
    ///
    /// `UniformGrid` needs a perfect-square count.
    pub fn generate(
        layout: Layout,
        count: usize,
        aperture: f64,
        seed: u64,
        grid: &Grid1D,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::Precondition("sample count must be positive".into()));
        }
        if !(aperture.is_finite() && aperture > 0.0 && aperture <= grid.max_point()) {
            return Err(Error::Precondition(format!(
                "aperture {aperture} must lie in (0, {}]",
                grid.max_point()
            )));
        }
        let raw: Vec<(f64, f64)> = match layout {
            Layout::UniformGrid => {
                let side = (count as f64).sqrt().round() as usize;
                if side * side != count {
                    return Err(Error::Precondition(format!(
                        "uniform_grid layout needs a square sample count, got {count}"
                    )));
                }
                let coord = |k: usize| {
                    if side == 1 {
                        0.0
                    } else {
                        -aperture + 2.0 * aperture * k as f64 / (side - 1) as f64
                    }
                };
                (0..count).map(|k| (coord(k / side), coord(k % side))).collect()
            }
            Layout::RandomUniform => {
                let mut rng = stream_rng(seed, SITE_STREAM);
                (0..count)
                    .map(|_| {
                        (
                            rng.random_range(-aperture..=aperture),
                            rng.random_range(-aperture..=aperture),
                        )
                    })
                    .collect()
            }
            Layout::Halton => {
                let start = 1 + seed % 4096;
                (start..start + count as u64)
                    .map(|i| {
                        (
                            aperture * (2.0 * radical_inverse(i, 2) - 1.0),
                            aperture * (2.0 * radical_inverse(i, 3) - 1.0),
                        )
                    })
                    .collect()
            }
            Layout::Explicit => {
                return Err(Error::Precondition(
                    "explicit layouts are built with SamplePlan::from_sites".into(),
                ))
            }
        };
        let snap = |v: f64| grid.point(grid.nearest_index(v));
        Ok(Self {
            sites: raw.into_iter().map(|(x, y)| (snap(x), snap(y))).collect(),
            layout,
            seed,
        })
    }

    pub fn from_sites(sites: Vec<(f64, f64)>, seed: u64) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Precondition("sample plan has no sites".into()));
        }
        if sites.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(Error::NonFinite("sample site".into()));
        }
        Ok(Self {
            sites,
            layout: Layout::Explicit,
            seed,
        })
    }

    pub fn count(&self) -> usize {
        self.sites.len()
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Independent seed number `index` derived from `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    stream_rng(master, index).next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntennaReading {
    pub site: (f64, f64),
    pub value: C64,
    pub noise_sigma: f64,
}

/// Read the field at every site (bilinear interpolation) and add complex
/// Gaussian noise with independent real and imaginary parts of std
/// `noise_sigma`.
pub fn sample(field: &FieldGrid, plan: &SamplePlan, noise_sigma: f64) -> Result<Vec<AntennaReading>> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::Precondition(format!(
            "noise sigma must be nonnegative, got {noise_sigma}"
        )));
    }
    let mut rng = stream_rng(plan.seed, NOISE_STREAM);
    plan.sites
        .iter()
        .map(|&(x, y)| {
            let truth = field.interpolate(x, y)?;
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Ok(AntennaReading {
                site: (x, y),
                value: truth + C64::new(re, im) * noise_sigma,
                noise_sigma,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Normalized fitted state.
    pub state: ModeState2D,
    pub condition: f64,
    /// Norm of the unnormalized least-squares coefficients.
    pub raw_norm: f64,
}

fn describe_sites(readings: &[AntennaReading]) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for r in readings {
        x0 = x0.min(r.site.0);
        x1 = x1.max(r.site.0);
        y0 = y0.min(r.site.1);
        y1 = y1.max(r.site.1);
    }
    format!(
        "{} sites spanning x in [{x0}, {x1}], y in [{y0}, {y1}]",
        readings.len()
    )
}

/// Least-squares fit of mode coefficients c[nₓ][nᵧ] (nₓ, nᵧ ≤ nmax) to the
/// readings.
pub fn reconstruct(readings: &[AntennaReading], nmax: usize) -> Result<Reconstruction> {
    let k = nmax + 1;
    if readings.len() < k * k {
        return Err(Error::Precondition(format!(
            "reconstruction up to nmax = {nmax} needs at least {} readings, got {}",
            k * k,
            readings.len()
        )));
    }
    if readings.iter().any(|r| !(r.value.re.is_finite() && r.value.im.is_finite())) {
        return Err(Error::NonFinite("antenna reading".into()));
    }
    let xs: Vec<f64> = readings.iter().map(|r| r.site.0).collect();
    let ys: Vec<f64> = readings.iter().map(|r| r.site.1).collect();
    let bx = eval_at(nmax, &xs);
    let by = eval_at(nmax, &ys);
    let design = DMatrix::from_fn(readings.len(), k * k, |i, col| {
        bx[(i, col / k)] * by[(i, col % k)]
    });
    let rhs = DMatrix::from_fn(readings.len(), 2, |i, part| {
        if part == 0 {
            readings[i].value.re
        } else {
            readings[i].value.im
        }
    });
    let sv = design.singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(Error::IllPosed {
            plan: describe_sites(readings),
            condition,
            limit: MAX_CONDITION,
        });
    }
    // Householder QR: R·c = (Qᵀ·values) restricted to the leading K² rows
    let qr = design.qr();
    let qt_rhs = qr.q().transpose() * rhs;
    let solution = qr
        .r()
        .solve_upper_triangular(&qt_rhs)
        .ok_or_else(|| Error::Precondition("least-squares solve hit a singular factor".into()))?;
    let coeffs = DMatrix::from_fn(k, k, |nx, ny| {
        C64::new(solution[(nx * k + ny, 0)], solution[(nx * k + ny, 1)])
    });
    let raw = ModeState2D::from_coeffs(coeffs)?;
    let raw_norm = raw.norm_sqr().sqrt();
    Ok(Reconstruction {
        state: raw.normalized()?,
        condition,
        raw_norm,
    })
}

/// How a CHSH number is extracted from a reconstructed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChshEstimator {
    /// Evaluate at fixed settings.
    Fixed(ChshSettings),
    /// Optimize the settings for each reconstructed state.
    Optimized,
}

impl ChshEstimator {
    pub fn evaluate(&self, state: &ModeState2D) -> Result<f64> {
        match self {
            ChshEstimator::Fixed(s) => chsh_value(state, s),
            ChshEstimator::Optimized => Ok(chsh_optimize(state)?.value),
        }
    }
}

pub fn chsh_from_samples(
    readings: &[AntennaReading],
    nmax: usize,
    settings: &ChshSettings,
) -> Result<f64> {
    chsh_value(&reconstruct(readings, nmax)?.state, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyConfig {
    pub nmax: usize,
    /// Ascending sample counts.
    pub m_values: Vec<usize>,
    pub noise_sigma: f64,
    pub trials: usize,
    pub layout: Layout,
    pub aperture: f64,
    pub seed: u64,
    pub estimator: ChshEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub mean_chsh: f64,
    pub mean_chsh_error: f64,
    /// Absent when only one trial ran.
    pub std_chsh_error: Option<f64>,
    pub mean_coeff_error: f64,
    pub std_coeff_error: Option<f64>,
    pub mean_condition: f64,
    pub max_condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub oracle_chsh: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of log(mean CHSH error) against log M; absent if
    /// any mean error is zero or fewer than two rows exist.
    pub chsh_error_slope: Option<f64>,
    pub coeff_error_slope: Option<f64>,
    /// Mean CHSH error never rises by more than two combined standard errors.
    pub monotone: bool,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Ordinary least-squares slope of log y against log x.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || ys.iter().any(|&y| y.is_nan() || y <= 0.0) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct Trial {
    chsh: f64,
    chsh_error: f64,
    coeff_error: f64,
    condition: f64,
}

/// Sample `field` repeatedly at each M and compare reconstructed CHSH values
/// and coefficients against the projection of the field itself.
pub fn convergence_study(field: &FieldGrid, config: &StudyConfig) -> Result<ConvergenceReport> {
    if config.m_values.is_empty() || config.trials == 0 {
        return Err(Error::Precondition(
            "convergence study needs at least one M value and one trial".into(),
        ));
    }
    if config.m_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Precondition("M values must be strictly ascending".into()));
    }
    let truth = project(field, config.nmax)?.state.normalized()?;
    let oracle_chsh = config.estimator.evaluate(&truth)?;
    let jobs: Vec<(usize, usize)> = (0..config.m_values.len())
        .flat_map(|i| (0..config.trials).map(move |t| (i, t)))
        .collect();
    let trials: Vec<Trial> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let seed = derive_seed(config.seed, (i * config.trials + t) as u64);
            let plan = SamplePlan::generate(
                config.layout,
                config.m_values[i],
                config.aperture,
                seed,
                field.grid(),
            )?;
            let readings = sample(field, &plan, config.noise_sigma)?;
            let rec = reconstruct(&readings, config.nmax)?;
            let chsh = config.estimator.evaluate(&rec.state)?;
            Ok(Trial {
                chsh,
                chsh_error: (chsh - oracle_chsh).abs(),
                coeff_error: (rec.state.coeffs() - truth.coeffs()).norm(),
                condition: rec.condition,
            })
        })
        .collect::<Result<_>>()?;

    let rows: Vec<ConvergenceRow> = trials
        .chunks(config.trials)
        .zip(&config.m_values)
        .map(|(chunk, &m)| {
            let pick = |f: fn(&Trial) -> f64| chunk.iter().map(f).collect::<Vec<_>>();
            let (mean_chsh, _) = mean_std(&pick(|t| t.chsh));
            let (mean_chsh_error, std_chsh_error) = mean_std(&pick(|t| t.chsh_error));
            let (mean_coeff_error, std_coeff_error) = mean_std(&pick(|t| t.coeff_error));
            let conds = pick(|t| t.condition);
            ConvergenceRow {
                m,
                mean_chsh,
                mean_chsh_error,
                std_chsh_error,
                mean_coeff_error,
                std_coeff_error,
                mean_condition: mean_std(&conds).0,
                max_condition: conds.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect();

    let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let sem = |r: &ConvergenceRow| r.std_chsh_error.unwrap_or(0.0) / (config.trials as f64).sqrt();
    let monotone = rows.windows(2).all(|w| {
        let slack = 2.0 * (sem(&w[0]).powi(2) + sem(&w[1]).powi(2)).sqrt();
        w[1].mean_chsh_error <= w[0].mean_chsh_error + slack + 1e-12
    });
    Ok(ConvergenceReport {
        oracle_chsh,
        chsh_error_slope: log_log_slope(&ms, &rows.iter().map(|r| r.mean_chsh_error).collect::<Vec<_>>()),
        coeff_error_slope: log_log_slope(&ms, &rows.iter().map(|r| r.mean_coeff_error).collect::<Vec<_>>()),
        monotone,
        rows,
        config: config.clone(),
    })
}

/// Which axes read their parity and receive feedback each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackAxis {
    X,
    Y,
    Both,
}

impl std::str::FromStr for FeedbackAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(FeedbackAxis::X),
            "y" => Ok(FeedbackAxis::Y),
            "both" => Ok(FeedbackAxis::Both),
            other => Err(Error::Precondition(format!(
                "feedback axis must be x, y or both, got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseConfig {
    pub gain: f64,
    pub noise_sigma: f64,
    pub max_steps: usize,
    pub threshold: f64,
    pub seed: u64,
    pub feedback_axis: FeedbackAxis,
}

impl Default for CollapseConfig {
    fn default() -> Self {
        Self {
            gain: 0.1,
            noise_sigma: 0.05,
            max_steps: 1000,
            threshold: 0.999,
            seed: 0,
            feedback_axis: FeedbackAxis::X,
        }
    }
}

impl CollapseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && (0.0..=MAX_GAIN).contains(&self.gain)) {
            return Err(Error::Precondition(format!(
                "collapse gain must lie in [0, {MAX_GAIN}], got {}",
                self.gain
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Precondition(format!(
                "collapse noise sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Precondition(format!(
                "collapse threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::Precondition("collapse max_steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseStep {
    pub step: usize,
    pub parity_x: f64,
    pub parity_y: f64,
    /// |⟨0₁|ψ⟩|², the weight of |0⟩ₓ|1⟩ᵧ.
    pub fidelity_01: f64,
    /// |⟨1₀|ψ⟩|², the weight of |1⟩ₓ|0⟩ᵧ.
    pub fidelity_10: f64,
    /// A feedback sign was taken from an exactly zero signal this step.
    pub tie: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    ZeroOne,
    OneZero,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseRun {
    pub trajectory: Vec<CollapseStep>,
    pub outcome: Outcome,
    pub final_state: Vec<[f64; 2]>,
}

impl CollapseRun {
    pub fn last(&self) -> &CollapseStep {
        self.trajectory.last().expect("trajectory holds the initial state")
    }

    pub fn ties(&self) -> usize {
        self.trajectory.iter().filter(|s| s.tie).count()
    }

    /// CSV `step,parity_x,parity_y,fidelity_01,fidelity_10`.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("step,parity_x,parity_y,fidelity_01,fidelity_10\n");
        for s in &self.trajectory {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                s.step, s.parity_x, s.parity_y, s.fidelity_01, s.fidelity_10
            ));
        }
        out
    }
}

fn parity(state: &ModeState2D, axis_x: bool) -> f64 {
    let c = state.coeffs();
    let mut total = 0.0;
    for nx in 0..c.nrows() {
        for ny in 0..c.ncols() {
            let n = if axis_x { nx } else { ny };
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            total += sign * c[(nx, ny)].norm_sqr();
        }
    }
    total / state.norm_sqr()
}

fn record(step: usize, state: &ModeState2D, tie: bool) -> CollapseStep {
    let w = |nx, ny| {
        if nx <= state.nmax() && ny <= state.nmax() {
            state.coeff(nx, ny).norm_sqr()
        } else {
            0.0
        }
    };
    CollapseStep {
        step,
        parity_x: parity(state, true),
        parity_y: parity(state, false),
        fidelity_01: w(0, 1),
        fidelity_10: w(1, 0),
        tie,
    }
}

fn collapse_with_rng(state: &ModeState2D, config: &CollapseConfig, rng: &mut ChaCha8Rng) -> Result<CollapseRun> {
    config.validate()?;
    let mut psi = state.normalized()?;
    let c = psi.coeffs();
    let outside: f64 = (0..c.nrows())
        .flat_map(|i| (0..c.ncols()).map(move |j| (i, j)))
        .filter(|&(i, j)| i > 1 || j > 1)
        .map(|(i, j)| c[(i, j)].norm_sqr())
        .sum();
    if outside > 1e-12 {
        return Err(Error::Precondition(format!(
            "collapse needs support in n ≤ 1 on each axis; weight outside is {outside:e}"
        )));
    }
    let axes: &[bool] = match config.feedback_axis {
        FeedbackAxis::X => &[true],
        FeedbackAxis::Y => &[false],
        FeedbackAxis::Both => &[true, false],
    };
    let mut trajectory = vec![record(0, &psi, false)];
    for step in 1..=config.max_steps {
        if trajectory.last().unwrap().parity_x.abs() >= config.threshold {
            break;
        }
        let mut tie = false;
        for &axis_x in axes {
            let xi: f64 = rng.sample(StandardNormal);
            let signal = parity(&psi, axis_x) + config.noise_sigma * xi;
            let sign = if signal > 0.0 {
                1.0
            } else if signal < 0.0 {
                -1.0
            } else {
                tie = true;
                1.0
            };
            let boost = (config.gain * sign).exp();
            psi = psi.map_coeffs(|nx, ny, v| {
                let n = if axis_x { nx } else { ny };
                if n % 2 == 0 {
                    v * boost
                } else {
                    v / boost
                }
            });
        }
        psi = psi.normalized()?;
        trajectory.push(record(step, &psi, tie));
    }
    let last = trajectory.last().unwrap();
    let outcome = if last.parity_x.abs() < config.threshold {
        Outcome::None
    } else if last.fidelity_01 > 0.5 {
        Outcome::ZeroOne
    } else if last.fidelity_10 > 0.5 {
        Outcome::OneZero
    } else {
        Outcome::None
    };
    let final_state = psi.coeffs().transpose().iter().map(|v| [v.re, v.im]).collect();
    Ok(CollapseRun {
        trajectory,
        outcome,
        final_state,
    })
}

/// Feedback loop: read the parity of the feedback axis with Gaussian noise,
/// amplify the detected parity by exp(gain·sign·Π), renormalize; stop once
/// |⟨Πₓ⟩| reaches the threshold. A zero signal counts as positive and is
/// flagged as a tie.
pub fn collapse_run(state: &ModeState2D, config: &CollapseConfig) -> Result<CollapseRun> {
    collapse_with_rng(state, config, &mut stream_rng(config.seed, 0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseStatistics {
    pub runs: usize,
    pub fraction_zero_one: f64,
    pub fraction_one_zero: f64,
    pub fraction_none: f64,
    /// Smallest terminal max(fidelity_01, fidelity_10) over runs.
    pub min_fidelity: f64,
    /// Largest terminal ⟨Πₓ⟩⟨Πᵧ⟩ over runs.
    pub max_parity_product: f64,
    pub ties: usize,
    pub mean_steps: f64,
}

/// `runs` independent collapse runs; run k draws its noise from stream k of
/// the generator seeded with `config.seed`.
pub fn collapse_statistics(
    state: &ModeState2D,
    config: &CollapseConfig,
    runs: usize,
) -> Result<(CollapseStatistics, Vec<CollapseRun>)> {
    if runs == 0 {
        return Err(Error::Precondition("collapse statistics need at least one run".into()));
    }
    config.validate()?;
    let results: Vec<CollapseRun> = (0..runs as u64)
        .into_par_iter()
        .map(|k| collapse_with_rng(state, config, &mut stream_rng(config.seed, k)))
        .collect::<Result<_>>()?;
    let count = |o: Outcome| results.iter().filter(|r| r.outcome == o).count() as f64 / runs as f64;
    let stats = CollapseStatistics {
        runs,
        fraction_zero_one: count(Outcome::ZeroOne),
        fraction_one_zero: count(Outcome::OneZero),
        fraction_none: count(Outcome::None),
        min_fidelity: results
            .iter()
            .map(|r| r.last().fidelity_01.max(r.last().fidelity_10))
            .fold(f64::INFINITY, f64::min),
        max_parity_product: results
            .iter()
            .map(|r| r.last().parity_x * r.last().parity_y)
            .fold(f64::NEG_INFINITY, f64::max),
        ties: results.iter().map(CollapseRun::ties).sum(),
        mean_steps: results.iter().map(|r| r.last().step as f64).sum::<f64>() / runs as f64,
    };
    Ok((stats, results))
}
