//! Parabolic cavity: physical parameter mapping, envelope-approximation
//! checks, and time evolution of the transverse envelope.
//!
//! The envelope obeys i∂ψ/∂t = −½∇²ψ + ½(x² + y²)ψ in oscillator units, where
//! time is measured in 1/ω̃ and length in oscillator lengths.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{expect_grid, DiffOpSpec, FieldGrid};
use crate::fock::ModeState2D;
use crate::modes::Grid1D;

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Envelope frequency must stay below this fraction of the carrier.
pub const ENVELOPE_RATIO_LIMIT: f64 = 0.2;
/// Largest admissible 2b·x²/L0 over the aperture.
pub const PARABOLIC_LIMIT: f64 = 0.1;
/// Default split-step bound on dt (units of 1/ω̃).
pub const MAX_SPLIT_STEP_DT: f64 = 0.1;
/// Relative norm drift that aborts a split-step run.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Cavity of thickness L(x) = L0 − b·x² and longitudinal order N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityParams {
    /// Thickness at the centre (m).
    pub l0: f64,
    /// Curvature of the thickness profile (1/m).
    pub b: f64,
    pub n_long: u32,
    /// Speed of light in the cavity medium (m/s).
    pub c: f64,
    /// Carrier frequency N·π·c/L0 (rad/s).
    pub omega0: f64,
    /// Transverse oscillator frequency c·√(2b/L0) (rad/s).
    pub omega_tilde: f64,
    /// ħω₀/c² (kg).
    pub m_eff: f64,
    /// 2ħω₀·b/L0 (kg/s²).
    pub gamma_eff: f64,
    /// √(ħ/(m_eff·ω̃)) = c/√(ω₀ω̃) (m).
    pub osc_length: f64,
}

impl CavityParams {
    /// Derived quantities without the validity checks of [`derive_params`].
    pub fn unchecked(l0: f64, b: f64, n_long: u32, c: f64) -> Result<Self> {
        for (name, v) in [("L0", l0), ("b", b), ("c", c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Precondition(format!(
                    "cavity {name} must be positive and finite, got {v}"
                )));
            }
        }
        if n_long == 0 {
            return Err(Error::Precondition(
                "cavity longitudinal index must be positive".into(),
            ));
        }
        let omega0 = n_long as f64 * PI * c / l0;
        let omega_tilde = c * (2.0 * b / l0).sqrt();
        let m_eff = HBAR * omega0 / (c * c);
        Ok(Self {
            l0,
            b,
            n_long,
            c,
            omega0,
            omega_tilde,
            m_eff,
            gamma_eff: 2.0 * HBAR * omega0 * b / l0,
            osc_length: c / (omega0 * omega_tilde).sqrt(),
        })
    }

    /// ω̃/ω₀.
    pub fn envelope_ratio(&self) -> f64 {
        self.omega_tilde / self.omega0
    }

    pub fn seconds(&self, t_dimensionless: f64) -> f64 {
        t_dimensionless / self.omega_tilde
    }

    pub fn meters(&self, x_dimensionless: f64) -> f64 {
        x_dimensionless * self.osc_length
    }
}

/// Map (L0, b, N, c) onto the oscillator picture, rejecting cavities whose
/// envelope frequency is not well below the carrier.
pub fn derive_params(l0: f64, b: f64, n_long: u32, c: f64) -> Result<CavityParams> {
    let p = CavityParams::unchecked(l0, b, n_long, c)?;
    let ratio = p.envelope_ratio();
    if ratio >= ENVELOPE_RATIO_LIMIT {
        return Err(Error::Validity {
            inequality: "omega_tilde / omega0 < 0.2".into(),
            value: ratio,
            limit: ENVELOPE_RATIO_LIMIT,
        });
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SveaReport {
    pub envelope_ratio: f64,
    pub envelope_ok: bool,
    /// Half-width of the simulated aperture along one axis (m).
    pub aperture: f64,
    /// max 2b·x²/L0 over the aperture.
    pub parabolic_max: f64,
    pub parabolic_ok: bool,
}

impl SveaReport {
    pub fn passed(&self) -> bool {
        self.envelope_ok && self.parabolic_ok
    }
}

/// Check the slowly-varying-envelope and locally-planar assumptions for the
/// aperture covered by `grid` (grid in oscillator lengths).
pub fn svea_check(params: &CavityParams, grid: &Grid1D) -> SveaReport {
    let envelope_ratio = params.envelope_ratio();
    let aperture = params.meters(grid.half_extent());
    let parabolic_max = 2.0 * params.b * aperture * aperture / params.l0;
    SveaReport {
        envelope_ratio,
        envelope_ok: envelope_ratio < ENVELOPE_RATIO_LIMIT,
        aperture,
        parabolic_max,
        parabolic_ok: parabolic_max < PARABOLIC_LIMIT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ModeExact,
    SplitStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagatorConfig {
    /// Step in units of 1/ω̃.
    pub dt: f64,
    pub steps: usize,
    pub scheme: Scheme,
    /// Permit dt above [`MAX_SPLIT_STEP_DT`].
    pub allow_large_dt: bool,
}

impl PropagatorConfig {
    /// One oscillator period in 2000 steps.
    pub fn one_period() -> Self {
        Self {
            dt: 2.0 * PI / 2000.0,
            steps: 2000,
            scheme: Scheme::SplitStep,
            allow_large_dt: false,
        }
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.steps as f64
    }
}

/// c[nₓ][nᵧ] ← c·e^(−i(nₓ + nᵧ + 1)t).
pub fn evolve_modes(state: &ModeState2D, t: f64) -> ModeState2D {
    state.map_coeffs(|nx, ny, c| {
        let phase = -((nx + ny + 1) as f64) * t;
        c * C64::from_polar(1.0, phase)
    })
}

/// Strang splitting: half potential kick, exact kinetic drift in Fourier
/// space, half potential kick.
pub struct SplitStepPropagator {
    grid: Grid1D,
    dt: f64,
    potential_half: DMatrix<C64>,
    kinetic: DMatrix<C64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SplitStepPropagator {
    pub fn new(grid: Grid1D, dt: f64) -> Self {
        let n = grid.count();
        let xs = grid.points();
        let ks = grid.wavenumbers();
        let potential_half = DMatrix::from_fn(n, n, |i, j| {
            let v = 0.5 * (xs[i] * xs[i] + xs[j] * xs[j]);
            C64::from_polar(1.0, -0.5 * v * dt)
        });
        let kinetic = DMatrix::from_fn(n, n, |i, j| {
            let t = 0.5 * (ks[i] * ks[i] + ks[j] * ks[j]);
            C64::from_polar(1.0, -t * dt)
        });
        let mut planner = FftPlanner::new();
        Self {
            grid,
            dt,
            potential_half,
            kinetic,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, psi: &mut DMatrix<C64>) {
        psi.component_mul_assign(&self.potential_half);
        self.forward.process(psi.as_mut_slice());
        psi.transpose_mut();
        self.forward.process(psi.as_mut_slice());
        // kinetic phase is symmetric in (kx, ky), so the transposed layout is fine
        psi.component_mul_assign(&self.kinetic);
        self.inverse.process(psi.as_mut_slice());
        psi.transpose_mut();
        self.inverse.process(psi.as_mut_slice());
        let scale = 1.0 / (self.grid.count() * self.grid.count()) as f64;
        psi.zip_apply(&self.potential_half, |v, p| *v *= p * scale);
    }

    /// Advance `steps` steps, failing if the norm drifts by more than
    /// [`NORM_DRIFT_LIMIT`] (relative).
    pub fn run(&self, field: &FieldGrid, steps: usize) -> Result<FieldGrid> {
        if field.grid() != &self.grid {
            return Err(Error::Precondition(
                "field grid differs from propagator grid".into(),
            ));
        }
        let initial = field.norm_sqr();
        let mut psi = field.values().clone();
        for _ in 0..steps {
            self.step(&mut psi);
        }
        let out = FieldGrid::new(self.grid, psi)?;
        let drift = (out.norm_sqr() - initial).abs() / initial.max(f64::MIN_POSITIVE);
        if drift > NORM_DRIFT_LIMIT {
            return Err(Error::IntegratorFailure {
                drift,
                steps,
                limit: NORM_DRIFT_LIMIT,
            });
        }
        Ok(out)
    }
}

fn check_dt(config: &PropagatorConfig) -> Result<()> {
    if !(config.dt.is_finite() && config.dt > 0.0) {
        return Err(Error::Precondition(format!(
            "time step must be positive, got {}",
            config.dt
        )));
    }
    if config.dt > MAX_SPLIT_STEP_DT && !config.allow_large_dt {
        return Err(Error::Precondition(format!(
            "split-step dt = {} exceeds {MAX_SPLIT_STEP_DT} (set allow_large_dt to override)",
            config.dt
        )));
    }
    Ok(())
}

pub fn evolve_splitstep(field: &FieldGrid, config: &PropagatorConfig) -> Result<FieldGrid> {
    check_dt(config)?;
    SplitStepPropagator::new(*field.grid(), config.dt).run(field, config.steps)
}

/// Split-step run that also returns the field every `every` steps
/// (including t = 0).
pub fn evolve_splitstep_frames(
    field: &FieldGrid,
    config: &PropagatorConfig,
    every: usize,
) -> Result<Vec<(f64, FieldGrid)>> {
    check_dt(config)?;
    if every == 0 {
        return Err(Error::Precondition("frame interval must be positive".into()));
    }
    let prop = SplitStepPropagator::new(*field.grid(), config.dt);
    let mut frames = vec![(0.0, field.clone())];
    let mut current = field.clone();
    let mut done = 0;
    while done < config.steps {
        let chunk = every.min(config.steps - done);
        current = prop.run(&current, chunk)?;
        done += chunk;
        frames.push((done as f64 * config.dt, current.clone()));
    }
    Ok(frames)
}

/// ⟨H⟩ with H = ½(x² − ∂ₓ²) + ½(y² − ∂ᵧ²).
pub fn energy(field: &FieldGrid) -> Result<f64> {
    let h = DiffOpSpec::hamiltonian();
    let id = DiffOpSpec::identity();
    Ok((expect_grid(field, &h, &id)?.value + expect_grid(field, &id, &h)?.value).re)
}

/// Radius (oscillator lengths) inside which nodal crossings are collected.
pub const NODAL_RADIUS: f64 = 2.5;

/// Orientation in [0, π) of the nodal line of Re ψ near the origin, or `None`
/// when Re ψ has no sign change there.
///
/// Zero crossings along every grid line inside [`NODAL_RADIUS`] are located by
/// cubic interpolation, then a total-least-squares line is fitted through them.
pub fn nodal_angle(field: &FieldGrid) -> Option<f64> {
    let g = field.grid();
    let n = g.count();
    let re = field.values().map(|v| v.re);
    let inside = |i: usize, j: usize| g.point(i).hypot(g.point(j)) <= NODAL_RADIUS;
    let mut scale: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if inside(i, j) {
                scale = scale.max(re[(i, j)].abs());
            }
        }
    }
    if scale == 0.0 {
        return None;
    }
    let noise = 1e-10 * scale;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if inside(i, j) && re[(i, j)] == 0.0 {
                points.push((g.point(i), g.point(j)));
            }
        }
    }
    // lines of constant j (varying x) and of constant i (varying y)
    for fixed in 0..n {
        for along_x in [true, false] {
            let value = |k: usize| if along_x { re[(k, fixed)] } else { re[(fixed, k)] };
            for k in 1..n.saturating_sub(2) {
                let (a, b) = (value(k), value(k + 1));
                if a * b >= 0.0 || a.abs().max(b.abs()) < noise {
                    continue;
                }
                let (pi, pj, qi, qj) = if along_x {
                    (k, fixed, k + 1, fixed)
                } else {
                    (fixed, k, fixed, k + 1)
                };
                if !(inside(pi, pj) && inside(qi, qj)) {
                    continue;
                }
                let s = cubic_root(value(k - 1), a, b, value(k + 2));
                let coord = g.point(k) + s * g.spacing();
                let other = g.point(fixed);
                points.push(if along_x { (coord, other) } else { (other, coord) });
            }
        }
    }
    if points.len() < 3 {
        return None;
    }
    let m = points.len() as f64;
    let (cx, cy) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.0 / m, sy + p.1 / m));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in &points {
        let (dx, dy) = (x - cx, y - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Some(angle.rem_euclid(PI))
}

/// Root in [0, 1] of the cubic through (−1, f0), (0, f1), (1, f2), (2, f3),
/// given f1·f2 < 0.
fn cubic_root(f0: f64, f1: f64, f2: f64, f3: f64) -> f64 {
    let p = |s: f64| {
        let l0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
        let l1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
        let l2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
        let l3 = (s + 1.0) * s * (s - 1.0) / 6.0;
        f0 * l0 + f1 * l1 + f2 * l2 + f3 * l3
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let f_lo = p(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (p(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationFit {
    /// Angular rate of the nodal line, radians per unit time (1/ω̃).
    pub rate: f64,
    pub offset: f64,
    /// RMS deviation of the unwrapped angles from the linear fit (rad).
    pub residual: f64,
    pub angles: Vec<f64>,
}

/// Fit angle(t) = rate·t + offset to the nodal-line orientation of Re ψ,
/// unwrapping the π-periodic orientation between consecutive frames.
pub fn measure_rotation_rate(frames: &[FieldGrid], times: &[f64]) -> Result<RotationFit> {
    if frames.len() < 4 || frames.len() != times.len() {
        return Err(Error::Precondition(format!(
            "need at least 4 frames with matching times, got {} frames and {} times",
            frames.len(),
            times.len()
        )));
    }
    let mut angles = Vec::with_capacity(frames.len());
    for (k, f) in frames.iter().enumerate() {
        let raw = nodal_angle(f).ok_or(Error::NoNode { frame: k })?;
        let unwrapped = match angles.last() {
            None => raw,
            Some(&prev) => {
                let d: f64 = raw - prev;
                prev + d - PI * (d / PI).round()
            }
        };
        angles.push(unwrapped);
    }
    let m = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / m;
    let a_mean = angles.iter().sum::<f64>() / m;
    let (mut stt, mut sta) = (0.0, 0.0);
    for (t, a) in times.iter().zip(&angles) {
        stt += (t - t_mean) * (t - t_mean);
        sta += (t - t_mean) * (a - a_mean);
    }
    if stt == 0.0 {
        return Err(Error::Precondition("frame times must not all coincide".into()));
    }
    let rate = sta / stt;
    let offset = a_mean - rate * t_mean;
    let residual = (times
        .iter()
        .zip(&angles)
        .map(|(t, a)| (a - rate * t - offset).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(RotationFit {
        rate,
        offset,
        residual,
        angles,
    })
}

/// Accumulated nodal phases at which the reference figure shows the field.
pub const FIGURE_PHASES: [f64; 4] = [0.0, FRAC_PI_4, 3.0 * FRAC_PI_4, 5.0 * FRAC_PI_4];

/// Time at which the nodal line has turned through `phase` at `rate`.
pub fn time_for_phase(phase: f64, rate: f64) -> f64 {
    phase / rate.abs()
}

/// Largest |ψ(p) − ψ_ref(R(−angle)·p)| over nodes p of `frame` within
/// `radius` of the origin, with ψ_ref resampled bilinearly.
pub fn rotation_deviation(
    reference: &FieldGrid,
    frame: &FieldGrid,
    angle: f64,
    radius: f64,
) -> Result<f64> {
    let g = frame.grid();
    let (s, c) = angle.sin_cos();
    let mut worst: f64 = 0.0;
    for i in 0..g.count() {
        for j in 0..g.count() {
            let (x, y) = (g.point(i), g.point(j));
            if x.hypot(y) > radius {
                continue;
            }
            let back = reference.interpolate(c * x + s * y, -s * x + c * y)?;
            worst = worst.max((frame.at(i, j) - back).norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{project, synthesize};
    use crate::fock::beamsplitter_state;
    use crate::modes::hg_mode;

    const C_LIGHT: f64 = 299_792_458.0;
    const UM: f64 = 1e-6;

    fn small_grid() -> Grid1D {
        Grid1D::new(8.0, 128).unwrap()
    }

    #[test]
    fn derived_parameters_for_micron_cavity() {
        let p = derive_params(2.0 * UM, 0.01 / UM, 1, C_LIGHT).unwrap();
        // ω̃ = c·√(2b/L0) = 0.1·c per micron
        assert!((p.omega_tilde - 0.1 * C_LIGHT / UM).abs() / p.omega_tilde < 1e-14);
        assert!((p.envelope_ratio() - 0.1 * 2.0 / PI).abs() < 1e-12);
        assert!((p.envelope_ratio() - 0.0637).abs() < 1e-4);
        // ω̃² = γ/m and ħ/(m ω̃) = osc_length²
        assert!((p.gamma_eff / p.m_eff - p.omega_tilde.powi(2)).abs() / p.omega_tilde.powi(2) < 1e-12);
        assert!((HBAR / (p.m_eff * p.omega_tilde) - p.osc_length.powi(2)).abs() / p.osc_length.powi(2) < 1e-12);
    }

    #[test]
    fn parameter_limits_and_scaling() {
        let flat = derive_params(2.0 * UM, 1e-12 / UM, 1, C_LIGHT).unwrap();
        assert!(flat.omega_tilde / flat.omega0 < 1e-6);
        let p1 = derive_params(2.0 * UM, 0.01 / UM, 1, C_LIGHT).unwrap();
        let p2 = derive_params(2.0 * UM, 0.01 / UM, 2, C_LIGHT).unwrap();
        assert!((p2.omega0 / p1.omega0 - 2.0).abs() < 1e-14);
        assert_eq!(p2.omega_tilde, p1.omega_tilde);
        assert!(derive_params(-1.0, 1.0, 1, 1.0).is_err());
        assert!(derive_params(1.0, 1.0, 0, 1.0).is_err());
    }

    #[test]
    fn derive_rejects_fast_envelope() {
        // ω̃/ω₀ = √(2bL0)/(Nπ) = 0.3
        let b = (0.3 * PI).powi(2) / 2.0;
        match derive_params(1.0, b, 1, 1.0) {
            Err(Error::Validity { value, .. }) => assert!((value - 0.3).abs() < 1e-12),
            other => panic!("expected validity error, got {other:?}"),
        }
    }

    #[test]
    fn svea_flags() {
        let grid = Grid1D::new(8.0, 256).unwrap();
        // strongly curved micron cavity: the ±8 oscillator-length aperture
        // reaches 2b·x²/L0 ≈ 4, far outside the locally planar regime
        let curved = derive_params(2.0 * UM, 0.01 / UM, 1, C_LIGHT).unwrap();
        let r = svea_check(&curved, &grid);
        assert!(r.envelope_ok);
        assert!(!r.parabolic_ok);
        assert!((r.parabolic_max - 12.8 / PI).abs() < 1e-9);

        let gentle = derive_params(10.0 * UM, 1e-5 / UM, 100, C_LIGHT).unwrap();
        let r = svea_check(&gentle, &grid);
        assert!(r.passed(), "{r:?}");

        // pick b so that 2b·x²/L0 = 0.5 at the edge, for L0 = 1, N = 100, c = 1:
        // 2b·64·ℓ²/L0 = 64√2·√(b)/(100π) = 0.5
        let b = (0.5 * 100.0 * PI / (64.0 * 2f64.sqrt())).powi(2);
        let p = derive_params(1.0, b, 100, 1.0).unwrap();
        let r = svea_check(&p, &grid);
        assert!((r.parabolic_max - 0.5).abs() < 1e-9);
        assert!(!r.parabolic_ok);

        let fast = CavityParams::unchecked(1.0, (0.3 * PI).powi(2) / 2.0, 1, 1.0).unwrap();
        let r = svea_check(&fast, &grid);
        assert!((r.envelope_ratio - 0.3).abs() < 1e-12);
        assert!(!r.envelope_ok);
    }

    #[test]
    fn mode_evolution_phases() {
        let s = ModeState2D::basis(3, 2, 1).unwrap();
        let back = evolve_modes(&s, 2.0 * PI);
        assert!((back.coeffs() - s.coeffs()).norm() < 1e-13);

        let ent = beamsplitter_state(8).unwrap();
        let t = 0.37;
        let evolved = evolve_modes(&ent, t);
        let global = C64::from_polar(1.0, -2.0 * t);
        assert!((evolved.coeffs() - ent.coeffs() * global).norm() < 1e-15);
        for (a, b) in evolved.coeffs().iter().zip(ent.coeffs().iter()) {
            assert_eq!(a.norm(), b.norm());
        }
    }

    #[test]
    fn split_step_one_period_matches_modes() {
        let g = small_grid();
        let ent = beamsplitter_state(4).unwrap();
        let f = synthesize(&ent, &g).unwrap();
        let out = evolve_splitstep(&f, &PropagatorConfig::one_period()).unwrap();
        let p = project(&out, 4).unwrap();
        let err = (p.state.coeffs() - ent.coeffs()).norm();
        assert!(err < 1e-5, "round-trip error {err:e}");
        assert!((out.norm_sqr() - f.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn ground_state_is_stationary() {
        let g = small_grid();
        let f = synthesize(&ModeState2D::basis(2, 0, 0).unwrap(), &g).unwrap();
        let cfg = PropagatorConfig {
            steps: 1000,
            ..PropagatorConfig::one_period()
        };
        let out = evolve_splitstep(&f, &cfg).unwrap();
        let worst = out
            .values()
            .iter()
            .zip(f.values().iter())
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst:e}");
    }

    #[test]
    fn displaced_gaussian_oscillates() {
        let g = small_grid();
        let x0 = 1.5;
        let f = FieldGrid::from_fn(g, |x, y| {
            C64::from(hg_mode(0, x - x0).unwrap() * hg_mode(0, y).unwrap())
        });
        let cfg = PropagatorConfig {
            dt: 2.0 * PI / 2000.0,
            steps: 2000,
            scheme: Scheme::SplitStep,
            allow_large_dt: false,
        };
        let frames = evolve_splitstep_frames(&f, &cfg, 250).unwrap();
        let h = g.spacing();
        for (t, frame) in &frames {
            let mean_x: f64 = (0..g.count())
                .flat_map(|i| (0..g.count()).map(move |j| (i, j)))
                .map(|(i, j)| g.point(i) * frame.at(i, j).norm_sqr())
                .sum::<f64>()
                * h
                * h;
            assert!((mean_x - x0 * t.cos()).abs() < 1e-4, "t={t}: {mean_x}");
        }
    }

    #[test]
    fn dt_guard_and_drift_error() {
        let g = small_grid();
        let f = synthesize(&ModeState2D::basis(1, 0, 0).unwrap(), &g).unwrap();
        let cfg = PropagatorConfig {
            dt: 0.5,
            steps: 1,
            scheme: Scheme::SplitStep,
            allow_large_dt: false,
        };
        assert!(matches!(evolve_splitstep(&f, &cfg), Err(Error::Precondition(_))));
        assert!(evolve_splitstep(&f, &PropagatorConfig { allow_large_dt: true, ..cfg }).is_ok());
    }

    fn max_energy_drift(state: &ModeState2D, cfg: &PropagatorConfig) -> f64 {
        let f = synthesize(state, &small_grid()).unwrap();
        let e0 = energy(&f).unwrap();
        evolve_splitstep_frames(&f, cfg, cfg.steps / 8)
            .unwrap()
            .iter()
            .map(|(_, fr)| (energy(fr).unwrap() - e0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn energy_is_conserved() {
        let ent = beamsplitter_state(4).unwrap();
        let drift = max_energy_drift(&ent, &PropagatorConfig::one_period());
        assert!(drift < 1e-6, "{drift:e}");

        // generic superpositions breathe at O(dt²) under Strang splitting
        let s = ModeState2D::from_coeffs(DMatrix::from_fn(3, 3, |i, j| {
            C64::new(1.0 / (1 + i + j) as f64, 0.1 * i as f64)
        }))
        .unwrap()
        .normalized()
        .unwrap();
        let f = synthesize(&s, &small_grid()).unwrap();
        let exact: f64 = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| (i + j + 1) as f64 * s.coeff(i, j).norm_sqr())
            .sum();
        assert!((energy(&f).unwrap() - exact).abs() < 1e-8);
        let fine = PropagatorConfig {
            dt: 2.0 * PI / 4000.0,
            steps: 4000,
            ..PropagatorConfig::one_period()
        };
        let drift = max_energy_drift(&s, &fine);
        assert!(drift < 1e-6, "{drift:e}");
    }

    fn mode_frames(times: &[f64]) -> Vec<FieldGrid> {
        let ent = beamsplitter_state(1).unwrap();
        let g = Grid1D::new(6.0, 192).unwrap();
        times
            .iter()
            .map(|&t| synthesize(&evolve_modes(&ent, t), &g).unwrap())
            .collect()
    }

    #[test]
    fn nodal_line_orientation_of_reference_field() {
        // Re ψ ∝ y at t = 0, so the nodal line is the x-axis
        let f = &mode_frames(&[0.0])[0];
        let a = nodal_angle(f).unwrap();
        assert!(a.min(PI - a) < 1e-9, "{a}");
        let ground = synthesize(&ModeState2D::basis(1, 0, 0).unwrap(), f.grid()).unwrap();
        assert_eq!(nodal_angle(&ground), None);
    }

    #[test]
    fn rotation_rate_from_mode_frames() {
        let times: Vec<f64> = (0..64).map(|k| k as f64 * 4.0 * PI / 63.0).collect();
        let frames = mode_frames(&times);
        let fit = measure_rotation_rate(&frames, &times).unwrap();
        assert!((fit.rate + 2.0).abs() < 1e-6, "rate {}", fit.rate);
        assert!(fit.residual < 1e-3);

        let reversed: Vec<FieldGrid> = frames.iter().rev().cloned().collect();
        let back = measure_rotation_rate(&reversed, &times).unwrap();
        assert!((back.rate + fit.rate).abs() < 1e-9);
    }

    #[test]
    fn frames_are_rotated_copies() {
        let ent = beamsplitter_state(1).unwrap();
        let g = Grid1D::new(4.0, 512).unwrap();
        let rate = -2.0;
        let f0 = synthesize(&ent, &g).unwrap();
        for phase in FIGURE_PHASES {
            let t = time_for_phase(phase, rate);
            let f = synthesize(&evolve_modes(&ent, t), &g).unwrap();
            let dev = rotation_deviation(&f0, &f, rate.signum() * phase, 3.0).unwrap();
            assert!(dev < 1e-4, "phase {phase}: {dev:e}");
            if phase > 0.0 {
                assert!(rotation_deviation(&f0, &f, -rate.signum() * phase, 3.0).unwrap() > 1e-2);
            }
        }
    }

    #[test]
    fn rotation_needs_a_node() {
        let g = Grid1D::new(6.0, 192).unwrap();
        let ground = ModeState2D::basis(1, 0, 0).unwrap();
        let times = [0.1, 0.2, 0.3, 0.4];
        let frames: Vec<FieldGrid> = times
            .iter()
            .map(|&t| synthesize(&evolve_modes(&ground, t), &g).unwrap())
            .collect();
        assert_eq!(
            measure_rotation_rate(&frames, &times),
            Err(Error::NoNode { frame: 0 })
        );
        assert!(measure_rotation_rate(&frames[..3], &times[..3]).is_err());
    }
}
