use cavity_bell::cavity::{
    evolve_modes, evolve_splitstep, evolve_splitstep_frames, measure_rotation_rate,
    PropagatorConfig, Scheme, SplitStepPropagator,
};
use cavity_bell::field::{project, synthesize, FieldGrid};
use cavity_bell::fock::{beamsplitter_state, ModeState2D};
use cavity_bell::modes::Grid1D;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

fn grid() -> Grid1D {
    Grid1D::new(8.0, 128).unwrap()
}

fn mixed_state() -> ModeState2D {
    ModeState2D::from_coeffs(DMatrix::from_fn(4, 4, |i, j| {
        if i + j > 3 {
            C64::new(0.0, 0.0)
        } else {
            C64::new((1.0 + i as f64).recip(), 0.3 * j as f64 - 0.1 * i as f64)
        }
    }))
    .unwrap()
    .normalized()
    .unwrap()
}

/// Coefficient error after one period against the exact phases.
fn period_error(state: &ModeState2D, steps: usize) -> f64 {
    let f = synthesize(state, &grid()).unwrap();
    let cfg = PropagatorConfig {
        dt: 2.0 * PI / steps as f64,
        steps,
        scheme: Scheme::SplitStep,
        allow_large_dt: false,
    };
    let out = evolve_splitstep(&f, &cfg).unwrap();
    let exact = evolve_modes(state, 2.0 * PI);
    (project(&out, state.nmax()).unwrap().state.coeffs() - exact.coeffs()).norm()
}

#[test]
fn strang_splitting_is_second_order() {
    let s = mixed_state();
    let coarse = period_error(&s, 200);
    let fine = period_error(&s, 400);
    let ratio = coarse / fine;
    assert!((3.5..=4.5).contains(&ratio), "errors {coarse:e} {fine:e} ratio {ratio}");
}

#[test]
fn norm_drift_per_thousand_steps() {
    let f = synthesize(&mixed_state(), &grid()).unwrap();
    let prop = SplitStepPropagator::new(grid(), 2.0 * PI / 2000.0);
    let out = prop.run(&f, 1000).unwrap();
    assert!((out.norm_sqr() - f.norm_sqr()).abs() < 1e-10);
}

#[test]
fn mode_magnitudes_survive_a_period() {
    let s = mixed_state();
    let f = synthesize(&s, &grid()).unwrap();
    let out = evolve_splitstep(&f, &PropagatorConfig::one_period()).unwrap();
    let p = project(&out, 3).unwrap().state;
    for (a, b) in p.coeffs().iter().zip(s.coeffs().iter()) {
        assert!((a.norm() - b.norm()).abs() < 1e-6);
    }
}

#[test]
fn split_step_rotation_matches_mode_rotation() {
    let ent = beamsplitter_state(1).unwrap();
    let f = synthesize(&ent, &grid()).unwrap();
    let cfg = PropagatorConfig {
        steps: 4000,
        ..PropagatorConfig::one_period()
    };
    let frames = evolve_splitstep_frames(&f, &cfg, 50).unwrap();
    let (times, fields): (Vec<f64>, Vec<FieldGrid>) = frames.into_iter().unzip();
    let split = measure_rotation_rate(&fields, &times).unwrap();
    let exact_frames: Vec<FieldGrid> = times
        .iter()
        .map(|&t| synthesize(&evolve_modes(&ent, t), &grid()).unwrap())
        .collect();
    let modes = measure_rotation_rate(&exact_frames, &times).unwrap();
    assert!(((split.rate - modes.rate) / modes.rate).abs() < 1e-3);
    assert!(split.residual < 1e-3 && modes.residual < 1e-3);
}
