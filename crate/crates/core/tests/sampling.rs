use cavity_bell::antenna::{
    collapse_run, collapse_statistics, reconstruct, sample, CollapseConfig, Layout, Outcome,
    SamplePlan,
};
use cavity_bell::field::synthesize;
use cavity_bell::fock::{beamsplitter_state, chsh_optimize, chsh_value, ModeState2D};
use cavity_bell::modes::Grid1D;
use cavity_bell::Error;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn grid() -> Grid1D {
    Grid1D::new(8.0, 256).unwrap()
}

/// Mean and standard error of the fixed-setting CHSH estimate over 1000 seeds.
fn estimate_stats(truth: &ModeState2D, noise: f64) -> (f64, f64, f64) {
    let f = synthesize(truth, &grid()).unwrap();
    let settings = chsh_optimize(&beamsplitter_state(3).unwrap()).unwrap().settings;
    let oracle = chsh_value(truth, &settings).unwrap();
    let plan = SamplePlan::generate(Layout::Halton, 100, 4.0, 0, f.grid()).unwrap();
    let estimates: Vec<f64> = (0..1000)
        .map(|seed| {
            let plan = SamplePlan { seed, ..plan.clone() };
            let rec = reconstruct(&sample(&f, &plan, noise).unwrap(), 3).unwrap();
            chsh_value(&rec.state, &settings).unwrap()
        })
        .collect();
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, sd / n.sqrt(), oracle)
}

#[test]
fn small_noise_estimate_is_unbiased() {
    // a partially entangled state where the fixed-setting CHSH value is not
    // stationary, so sampling noise enters at first order
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let mut truth = ModeState2D::zeros(3);
    truth = truth.map_coeffs(|nx, ny, _| match (nx, ny) {
        (0, 1) => C64::new(c, 0.0),
        (1, 0) => C64::new(0.0, s),
        _ => C64::new(0.0, 0.0),
    });
    let (mean, se, oracle) = estimate_stats(&truth, 1e-3);
    assert!((mean - oracle).abs() <= 3.0 * se, "mean {mean} oracle {oracle} se {se:e}");
}

#[test]
fn estimate_at_the_optimum_is_biased_low() {
    // the entangled state maximizes the Bell operator: every perturbation
    // lowers the value, so the bias and the spread are both second order
    let truth = beamsplitter_state(3).unwrap();
    let (mean, se, oracle) = estimate_stats(&truth, 1e-4);
    assert!(mean < oracle);
    assert!(oracle - mean < 1e-5, "{} {se:e}", oracle - mean);
}

#[test]
fn collapse_parity_grows_after_commitment() {
    let cfg = CollapseConfig {
        noise_sigma: 0.005,
        seed: 8,
        ..CollapseConfig::default()
    };
    let (_, runs) = collapse_statistics(&beamsplitter_state(1).unwrap(), &cfg, 30).unwrap();
    for run in runs {
        let p: Vec<f64> = run.trajectory.iter().map(|s| s.parity_x.abs()).collect();
        assert!(p.windows(2).skip(1).all(|w| w[1] >= w[0]), "{p:?}");
    }
}

#[test]
fn collapse_fixed_point_for_other_branch() {
    let run = collapse_run(&ModeState2D::basis(1, 1, 0).unwrap(), &CollapseConfig::default()).unwrap();
    assert_eq!(run.outcome, Outcome::OneZero);
    assert_eq!(run.trajectory.len(), 1);
}

fn random_state(nmax: usize, raw: &[f64]) -> ModeState2D {
    let k = nmax + 1;
    ModeState2D::from_coeffs(DMatrix::from_fn(k, k, |i, j| {
        C64::new(raw[2 * (i * k + j)], raw[2 * (i * k + j) + 1])
    }))
    .unwrap()
    .normalized()
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noiseless_reconstruction_is_consistent(
        raw in prop::collection::vec(-1.0f64..1.0, 32),
        seed in any::<u64>(),
        layout in prop::sample::select(vec![Layout::RandomUniform, Layout::Halton, Layout::UniformGrid]),
        aperture in 2.5f64..5.0,
    ) {
        prop_assume!(raw.iter().any(|v| v.abs() > 1e-3));
        let truth = random_state(3, &raw);
        let f = synthesize(&truth, &grid()).unwrap();
        let plan = SamplePlan::generate(layout, 144, aperture, seed, f.grid()).unwrap();
        match reconstruct(&sample(&f, &plan, 0.0).unwrap(), 3) {
            Ok(rec) if rec.condition < 1e4 => {
                prop_assert!((rec.state.coeffs() - truth.coeffs()).norm() < 1e-8);
            }
            Ok(_) | Err(Error::IllPosed { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
