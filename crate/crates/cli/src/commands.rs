//! One function per subcommand. Each validates nothing itself (see
//! [`RunConfig::validate`]), computes everything in memory and returns the
//! artifacts to write.

use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use cavity_bell::antenna::{
    chsh_from_samples, collapse_statistics, convergence_study, derive_seed, reconstruct, sample,
    ChshEstimator, CollapseStatistics, ConvergenceReport, Outcome, SamplePlan, StudyConfig,
};
use cavity_bell::cavity::{
    evolve_modes, evolve_splitstep, evolve_splitstep_frames, energy, measure_rotation_rate,
    rotation_deviation, svea_check, time_for_phase, CavityParams, PropagatorConfig, RotationFit,
    Scheme, SveaReport, FIGURE_PHASES,
};
use cavity_bell::field::{
    chsh_grid, correlation_matrix_grid, expect_grid, project, synthesize, DiffOpSpec, FieldGrid,
};
use cavity_bell::fock::{
    beamsplitter_state, chsh_optimize, chsh_value, correlation_matrix, expect, number_op,
    ChshSettings, ModeState2D,
};
use cavity_bell::modes::Grid1D;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::Artifacts;

pub const TSIRELSON: f64 = 2.0 * SQRT_2;
pub const CLASSICAL_BOUND: f64 = 2.0;

const STATE_LABEL: &str = "(|0>x|1>y + i|1>x|0>y)/sqrt(2)";
/// Nodes within this radius enter the frame rotation check.
const ROTATION_CHECK_RADIUS: f64 = 3.0;

fn entangled(cfg: &RunConfig) -> Result<ModeState2D, CliError> {
    Ok(beamsplitter_state(cfg.nmax)?)
}

fn matrix_rows(m: &nalgebra::Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(i, j)];
        }
    }
    out
}

#[derive(Serialize)]
struct Correlators {
    /// Row index: x-axis spin component (x, y, z); column: y-axis component.
    order: [&'static str; 3],
    mode: [[f64; 3]; 3],
    grid: [[f64; 3]; 3],
    max_deviation: f64,
}

#[derive(Serialize)]
struct SettingsValue {
    settings: ChshSettings,
    oracle: f64,
    grid: f64,
    deviation: f64,
}

#[derive(Serialize)]
struct Optimized {
    settings: ChshSettings,
    value: f64,
    predicted: f64,
    singular_values: [f64; 3],
    grid: f64,
    deviation: f64,
    deviation_from_tsirelson: f64,
}

#[derive(Serialize)]
struct ChshReport<'a> {
    config: &'a RunConfig,
    state: &'static str,
    correlators: Correlators,
    /// ⟨a†ₓaₓ a†ᵧaᵧ⟩ as (re, im) in mode space and on the grid.
    joint_excitation: JointExcitation,
    paper_quadruple: SettingsValue,
    paper_quadruple_note: &'static str,
    optimized: Optimized,
    selected_source: crate::config::SettingsSource,
    selected: SettingsValue,
    classical_bound: f64,
    tsirelson_bound: f64,
    violation: bool,
}

#[derive(Serialize)]
struct JointExcitation {
    mode: [f64; 2],
    grid: [f64; 2],
}

fn settings_value(
    state: &ModeState2D,
    field: &FieldGrid,
    settings: ChshSettings,
) -> Result<SettingsValue, CliError> {
    let oracle = chsh_value(state, &settings)?;
    let grid = chsh_grid(field, &settings)?.value.re;
    Ok(SettingsValue {
        settings,
        oracle,
        grid,
        deviation: (oracle - grid).abs(),
    })
}

/// Correlators, the reference quadruple, the optimum and grid cross-checks
/// for the entangled state.
pub fn cmd_chsh(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let state = entangled(cfg)?;
    let field = synthesize(&state, &cfg.grid()?)?;

    let mode_t = matrix_rows(&correlation_matrix(&state)?);
    let grid_t = correlation_matrix_grid(&field)?;
    let max_deviation = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (mode_t[i][j] - grid_t[i][j]).abs())
        .fold(0.0, f64::max);

    let n = number_op(cfg.nmax);
    let joint_mode = expect(&state, &n, &n)?;
    let nf = DiffOpSpec::number();
    let joint_grid = expect_grid(&field, &nf, &nf)?.value;

    let opt = chsh_optimize(&state)?;
    let opt_grid = chsh_grid(&field, &opt.settings)?.value.re;
    let selected_settings = cfg.chsh_settings()?.unwrap_or(opt.settings);

    let report = ChshReport {
        config: cfg,
        state: STATE_LABEL,
        correlators: Correlators {
            order: ["x", "y", "z"],
            mode: mode_t,
            grid: grid_t,
            max_deviation,
        },
        joint_excitation: JointExcitation {
            mode: [joint_mode.re, joint_mode.im],
            grid: [joint_grid.re, joint_grid.im],
        },
        paper_quadruple: settings_value(&state, &field, ChshSettings::paper())?,
        paper_quadruple_note: "reference quadruple evaluated verbatim with S_z = 2N - 1, \
            S_x = a+(1 - N) + a, S_y = i(a+(1 - N) - a); under these conventions it is not \
            the Bell-optimal quadruple for this state, see `optimized`",
        optimized: Optimized {
            settings: opt.settings,
            value: opt.value,
            predicted: opt.predicted,
            singular_values: opt.singular_values,
            grid: opt_grid,
            deviation: (opt.value - opt_grid).abs(),
            deviation_from_tsirelson: (opt.value - TSIRELSON).abs(),
        },
        selected_source: cfg.chsh.settings,
        selected: settings_value(&state, &field, selected_settings)?,
        classical_bound: CLASSICAL_BOUND,
        tsirelson_bound: TSIRELSON,
        violation: opt.value > CLASSICAL_BOUND,
    };
    let mut out = Artifacts::default();
    out.add_json("chsh.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct PhysicalReport {
    params: CavityParams,
    svea: SveaReport,
    /// Nodal-line rate in rad/s.
    rate_rad_per_s: Option<f64>,
    /// Duration of one oscillator period in seconds.
    period_s: f64,
}

fn physical(cfg: &RunConfig, rate: Option<f64>) -> Result<Option<PhysicalReport>, CliError> {
    let grid = cfg.grid()?;
    Ok(cfg.cavity_params()?.map(|params| PhysicalReport {
        svea: svea_check(&params, &grid),
        rate_rad_per_s: rate.map(|r| r * params.omega_tilde),
        period_s: params.seconds(2.0 * PI),
        params,
    }))
}

#[derive(Serialize)]
struct Convention {
    /// Candidate nodal-line rate in units of ω̃.
    candidate: f64,
    deviation: f64,
}

#[derive(Serialize)]
struct FrameEntry {
    phase: f64,
    label: &'static str,
    time: f64,
    file: String,
    /// max |ψ_phase − rotate(ψ_0, ±phase)| within the check radius.
    rotation_deviation: f64,
}

#[derive(Serialize)]
struct FramesReport<'a> {
    config: &'a RunConfig,
    state: &'static str,
    scheme: Scheme,
    fit: RotationFit,
    fit_times: Vec<f64>,
    /// Rate in units of ω̃; negative means clockwise.
    rate: f64,
    direction: &'static str,
    conventions: [Convention; 2],
    closest_convention: f64,
    rotation_check_radius: f64,
    frames: Vec<FrameEntry>,
    physical: Option<PhysicalReport>,
}

const PHASE_LABELS: [&str; 4] = ["0", "pi_4", "3pi_4", "5pi_4"];

/// State at time `t` by the configured scheme, in mode space.
fn evolved_state(cfg: &RunConfig, state: &ModeState2D, t: f64) -> Result<ModeState2D, CliError> {
    match cfg.propagator.scheme {
        Scheme::ModeExact => Ok(evolve_modes(state, t)),
        Scheme::SplitStep => {
            if t == 0.0 {
                return Ok(state.clone());
            }
            let steps = (t / cfg.propagator.dt).ceil().max(1.0) as usize;
            let pc = PropagatorConfig {
                dt: t / steps as f64,
                steps,
                ..cfg.propagator
            };
            let f = evolve_splitstep(&synthesize(state, &cfg.grid()?)?, &pc)?;
            Ok(project(&f, state.nmax())?.state)
        }
    }
}

/// Rotation fit over `frames.periods` periods, then the four figure frames
/// on the display grid.
pub fn cmd_frames(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let state = entangled(cfg)?;
    let grid = cfg.grid()?;
    let total = cfg.frames.periods * 2.0 * PI;
    let intervals = cfg.frames.samples - 1;
    let (times, fields): (Vec<f64>, Vec<FieldGrid>) = match cfg.propagator.scheme {
        Scheme::ModeExact => (0..=intervals)
            .map(|k| {
                let t = total * k as f64 / intervals as f64;
                Ok((t, synthesize(&evolve_modes(&state, t), &grid)?))
            })
            .collect::<Result<Vec<_>, CliError>>()?
            .into_iter()
            .unzip(),
        Scheme::SplitStep => {
            let every = ((total / cfg.propagator.dt) / intervals as f64).round().max(1.0) as usize;
            let pc = PropagatorConfig {
                dt: total / (every * intervals) as f64,
                steps: every * intervals,
                ..cfg.propagator
            };
            evolve_splitstep_frames(&synthesize(&state, &grid)?, &pc, every)?
                .into_iter()
                .unzip()
        }
    };
    let fit = measure_rotation_rate(&fields, &times)?;
    let rate = fit.rate;

    let display = cfg.frame_grid()?;
    let mut out = Artifacts::default();
    let mut frames = Vec::new();
    let mut reference: Option<FieldGrid> = None;
    for (phase, label) in FIGURE_PHASES.into_iter().zip(PHASE_LABELS) {
        let t = time_for_phase(phase, rate);
        let f = synthesize(&evolved_state(cfg, &state, t)?, &display)?;
        let reference = reference.get_or_insert_with(|| f.clone());
        let deviation = rotation_deviation(reference, &f, rate.signum() * phase, ROTATION_CHECK_RADIUS)?;
        let file = format!("frame_phase_{label}.csv");
        out.add(file.clone(), f.to_csv_string());
        frames.push(FrameEntry {
            phase,
            label,
            time: t,
            file,
            rotation_deviation: deviation,
        });
    }
    let conventions = [1.0, 2.0].map(|candidate| Convention {
        candidate,
        deviation: (rate.abs() - candidate).abs(),
    });
    let closest_convention = if conventions[0].deviation < conventions[1].deviation { 1.0 } else { 2.0 };
    let report = FramesReport {
        config: cfg,
        state: STATE_LABEL,
        scheme: cfg.propagator.scheme,
        rate,
        direction: if rate < 0.0 { "clockwise" } else { "counterclockwise" },
        conventions,
        closest_convention,
        rotation_check_radius: ROTATION_CHECK_RADIUS,
        frames,
        physical: physical(cfg, Some(rate))?,
        fit_times: times,
        fit,
    };
    out.add_json("frames.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct OrderCheck {
    steps_per_period: [usize; 2],
    errors: [f64; 2],
    ratio: f64,
}

#[derive(Serialize)]
struct EvolveReport<'a> {
    config: &'a RunConfig,
    state: &'static str,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    duration: f64,
    /// ‖c(T) − c_exact(T)‖ with c(T) projected from the evolved field.
    coefficient_error: f64,
    norm_initial: f64,
    norm_final: f64,
    norm_drift: f64,
    energy_initial: f64,
    energy_final: f64,
    truncation_loss: f64,
    order_check: Option<OrderCheck>,
    physical: Option<PhysicalReport>,
}

fn period_error(state: &ModeState2D, grid: &Grid1D, steps: usize) -> Result<f64, CliError> {
    let pc = PropagatorConfig {
        dt: 2.0 * PI / steps as f64,
        steps,
        scheme: Scheme::SplitStep,
        allow_large_dt: false,
    };
    let out = evolve_splitstep(&synthesize(state, grid)?, &pc)?;
    let exact = evolve_modes(state, 2.0 * PI);
    Ok((project(&out, state.nmax())?.state.coeffs() - exact.coeffs()).norm())
}

/// Evolve the entangled field for `steps·dt` and compare with exact phases.
pub fn cmd_evolve(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let state = entangled(cfg)?;
    let grid = cfg.grid()?;
    let initial = synthesize(&state, &grid)?;
    let pc = cfg.propagator;
    let duration = pc.duration();
    let final_field = match pc.scheme {
        Scheme::ModeExact => synthesize(&evolve_modes(&state, duration), &grid)?,
        Scheme::SplitStep => evolve_splitstep(&initial, &pc)?,
    };
    let projection = project(&final_field, cfg.nmax)?;
    let exact = evolve_modes(&state, duration);
    let order_check = if cfg.evolve.order_check {
        let steps_per_period = [200, 400];
        let errors = [
            period_error(&state, &grid, steps_per_period[0])?,
            period_error(&state, &grid, steps_per_period[1])?,
        ];
        Some(OrderCheck {
            steps_per_period,
            errors,
            ratio: errors[0] / errors[1],
        })
    } else {
        None
    };
    let (n0, n1) = (initial.norm_sqr(), final_field.norm_sqr());
    let report = EvolveReport {
        config: cfg,
        state: STATE_LABEL,
        scheme: pc.scheme,
        dt: pc.dt,
        steps: pc.steps,
        duration,
        coefficient_error: (projection.state.coeffs() - exact.coeffs()).norm(),
        norm_initial: n0,
        norm_final: n1,
        norm_drift: (n1 - n0).abs(),
        energy_initial: energy(&initial)?,
        energy_final: energy(&final_field)?,
        truncation_loss: projection.truncation_loss,
        order_check,
        physical: physical(cfg, None)?,
    };
    let mut out = Artifacts::default();
    out.add_json("evolve.json", &report)?;
    out.add("evolved_field.csv", final_field.to_csv_string());
    out.add("evolved_state.json", projection.state.to_json() + "\n");
    Ok(out)
}

#[derive(Serialize)]
struct NoiselessRow {
    m: usize,
    coefficient_error: f64,
    chsh_error: f64,
    condition: f64,
}

#[derive(Serialize)]
struct ViolationStudy {
    m: usize,
    noise_sigma: f64,
    seeds: usize,
    estimates: Vec<f64>,
    mean: f64,
    min: f64,
    /// Nearest-rank 5th percentile.
    percentile_5: f64,
    fraction_violating: f64,
}

#[derive(Serialize)]
struct SampleReport<'a> {
    config: &'a RunConfig,
    state: &'static str,
    settings: ChshSettings,
    oracle_chsh: f64,
    noiseless: Vec<NoiselessRow>,
    convergence: ConvergenceReport,
    violation: ViolationStudy,
}

/// Nearest-rank percentile of an unsorted sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank - 1]
}

/// Noiseless reconstruction check, the noisy convergence study and the
/// finite-sampling violation study.
pub fn cmd_sample(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let state = entangled(cfg)?;
    let field = synthesize(&state, &cfg.grid()?)?;
    let s = &cfg.sampling;
    let settings = chsh_optimize(&state)?.settings;
    let oracle_chsh = chsh_value(&state, &settings)?;

    let noiseless = s
        .m_values
        .iter()
        .map(|&m| {
            let plan = SamplePlan::generate(s.layout, m, s.aperture, s.seed, field.grid())?;
            let rec = reconstruct(&sample(&field, &plan, 0.0)?, cfg.nmax)?;
            Ok(NoiselessRow {
                m,
                coefficient_error: (rec.state.coeffs() - state.coeffs()).norm(),
                chsh_error: (chsh_value(&rec.state, &settings)? - oracle_chsh).abs(),
                condition: rec.condition,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let convergence = convergence_study(
        &field,
        &StudyConfig {
            nmax: cfg.nmax,
            m_values: s.m_values.clone(),
            noise_sigma: s.noise_sigma,
            trials: s.trials,
            layout: s.layout,
            aperture: s.aperture,
            seed: s.seed,
            estimator: ChshEstimator::Fixed(settings),
        },
    )?;

    // seeds for the violation study live in a separate index range
    let estimates = (0..s.violation_seeds as u64)
        .map(|k| {
            let plan = SamplePlan::generate(
                s.layout,
                s.violation_m,
                s.aperture,
                derive_seed(s.seed, (1 << 32) + k),
                field.grid(),
            )?;
            Ok(chsh_from_samples(&sample(&field, &plan, s.violation_noise)?, cfg.nmax, &settings)?)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let count = estimates.len() as f64;
    let violation = ViolationStudy {
        m: s.violation_m,
        noise_sigma: s.violation_noise,
        seeds: s.violation_seeds,
        mean: estimates.iter().sum::<f64>() / count,
        min: estimates.iter().copied().fold(f64::INFINITY, f64::min),
        percentile_5: percentile(&estimates, 5.0),
        fraction_violating: estimates.iter().filter(|&&e| e > CLASSICAL_BOUND).count() as f64 / count,
        estimates,
    };

    let report = SampleReport {
        config: cfg,
        state: STATE_LABEL,
        settings,
        oracle_chsh,
        noiseless,
        convergence,
        violation,
    };
    let mut out = Artifacts::default();
    out.add_json("convergence.json", &report)?;
    Ok(out)
}

#[derive(Serialize)]
struct RunSummary {
    run: usize,
    outcome: Outcome,
    steps: usize,
    parity_x: f64,
    parity_y: f64,
    fidelity_01: f64,
    fidelity_10: f64,
    ties: usize,
    file: String,
}

#[derive(Serialize)]
struct CollapseReport<'a> {
    config: &'a RunConfig,
    state: &'static str,
    statistics: CollapseStatistics,
    runs: Vec<RunSummary>,
}

/// Seeded parity-feedback runs from the entangled state; one trajectory CSV
/// per run.
pub fn cmd_collapse(cfg: &RunConfig) -> Result<Artifacts, CliError> {
    let state = entangled(cfg)?;
    let (statistics, runs) = collapse_statistics(&state, &cfg.collapse_config(), cfg.collapse.runs)?;
    let mut out = Artifacts::default();
    let mut summaries = Vec::with_capacity(runs.len());
    for (k, run) in runs.iter().enumerate() {
        let file = format!("trajectories/run_{k:03}.csv");
        out.add(file.clone(), run.trajectory_csv());
        let last = run.last();
        summaries.push(RunSummary {
            run: k,
            outcome: run.outcome,
            steps: last.step,
            parity_x: last.parity_x,
            parity_y: last.parity_y,
            fidelity_01: last.fidelity_01,
            fidelity_10: last.fidelity_10,
            ties: run.ties(),
            file,
        });
    }
    let report = CollapseReport {
        config: cfg,
        state: STATE_LABEL,
        statistics,
        runs: summaries,
    };
    out.add_json("collapse.json", &report)?;
    Ok(out)
}
