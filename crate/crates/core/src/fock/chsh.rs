//! CHSH correlators on the two-axis mode space and the settings optimizer.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::{expect, spin_ops, ModeState2D, OperatorMatrix};
use crate::error::{Error, Result};

/// Direction on the Bloch sphere of one axis:
/// O(θ, φ) = cos θ·S_z + sin θ (cos φ·S_x + sin φ·S_y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    /// Components along (S_x, S_y, S_z).
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(st * cp, st * sp, ct)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        let u = v.normalize();
        Self {
            theta: u.z.clamp(-1.0, 1.0).acos(),
            phi: u.y.atan2(u.x),
        }
    }

    pub fn observable(&self, nmax: usize) -> Result<OperatorMatrix> {
        let (sx, sy, sz) = spin_ops(nmax)?;
        let v = self.unit_vector();
        OperatorMatrix::combination(&[(v.x, &sx), (v.y, &sy), (v.z, &sz)])
    }
}

/// One CHSH experiment: two observables on the x-axis, two on the y-axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub axis_x_a: BlochAngles,
    pub axis_x_b: BlochAngles,
    pub axis_y_a: BlochAngles,
    pub axis_y_b: BlochAngles,
}

impl ChshSettings {
    /// x-axis: S_z and S_x. y-axis: −(S_z + S_x)/√2 and (S_z − S_x)/√2.
    pub fn paper() -> Self {
        Self {
            axis_x_a: BlochAngles::new(0.0, 0.0),
            axis_x_b: BlochAngles::new(FRAC_PI_2, 0.0),
            axis_y_a: BlochAngles::new(3.0 * FRAC_PI_4, PI),
            axis_y_b: BlochAngles::new(FRAC_PI_4, PI),
        }
    }

    /// Same x-axis pair as [`ChshSettings::paper`] with S_y replacing S_x on
    /// the y-axis: −(S_z + S_y)/√2 and (S_y − S_z)/√2.
    pub fn sy_variant() -> Self {
        Self {
            axis_x_a: BlochAngles::new(0.0, 0.0),
            axis_x_b: BlochAngles::new(FRAC_PI_2, 0.0),
            axis_y_a: BlochAngles::new(3.0 * FRAC_PI_4, -FRAC_PI_2),
            axis_y_b: BlochAngles::new(3.0 * FRAC_PI_4, FRAC_PI_2),
        }
    }

    /// Every observable along S_z.
    pub fn identity() -> Self {
        let z = BlochAngles::new(0.0, 0.0);
        Self {
            axis_x_a: z,
            axis_x_b: z,
            axis_y_a: z,
            axis_y_b: z,
        }
    }

    pub fn from_angle_list(angles: &[f64]) -> Result<Self> {
        if angles.len() != 8 {
            return Err(Error::Precondition(format!(
                "explicit CHSH settings need 8 angles (θ, φ per observable), got {}",
                angles.len()
            )));
        }
        let b = |k: usize| BlochAngles::new(angles[2 * k], angles[2 * k + 1]);
        Ok(Self {
            axis_x_a: b(0),
            axis_x_b: b(1),
            axis_y_a: b(2),
            axis_y_b: b(3),
        })
    }
}

/// ⟨O_x(a) ⊗ O_y(b)⟩.
pub fn correlator(state: &ModeState2D, a: BlochAngles, b: BlochAngles) -> Result<C64> {
    let nmax = state.nmax();
    expect(state, &a.observable(nmax)?, &b.observable(nmax)?)
}

/// ⟨AₐBₐ⟩ + ⟨AₐB_b⟩ + ⟨A_bBₐ⟩ − ⟨A_bB_b⟩ (real part).
pub fn chsh_value(state: &ModeState2D, settings: &ChshSettings) -> Result<f64> {
    let nmax = state.nmax();
    let xa = settings.axis_x_a.observable(nmax)?;
    let xb = settings.axis_x_b.observable(nmax)?;
    let ya = settings.axis_y_a.observable(nmax)?;
    let yb = settings.axis_y_b.observable(nmax)?;
    let total = expect(state, &xa, &ya)? + expect(state, &xa, &yb)? + expect(state, &xb, &ya)?
        - expect(state, &xb, &yb)?;
    Ok(total.re)
}

/// T[i][j] = Re⟨S_i ⊗ S_j⟩ with i, j running over (x, y, z).
pub fn correlation_matrix(state: &ModeState2D) -> Result<Matrix3<f64>> {
    let (sx, sy, sz) = spin_ops(state.nmax())?;
    let ops = [&sx, &sy, &sz];
    let mut t = Matrix3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            t[(i, j)] = expect(state, ops[i], ops[j])?.re;
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshOptimum {
    pub settings: ChshSettings,
    /// Direct evaluation of `chsh_value` at `settings`.
    pub value: f64,
    /// 2√(t₁² + t₂²) from the correlation-matrix singular values.
    pub predicted: f64,
    pub singular_values: [f64; 3],
}

const DEGENERATE_SINGULAR: f64 = 1e-12;

/// Maximize CHSH over qubit observables via the singular values of T.
pub fn chsh_optimize(state: &ModeState2D) -> Result<ChshOptimum> {
    let t = correlation_matrix(state)?;
    let svd = t.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv = [
        svd.singular_values[order[0]],
        svd.singular_values[order[1]],
        svd.singular_values[order[2]],
    ];
    if sv[0] < DEGENERATE_SINGULAR {
        return Ok(ChshOptimum {
            settings: ChshSettings::identity(),
            value: 0.0,
            predicted: 0.0,
            singular_values: sv,
        });
    }
    let (t1, t2) = (sv[0], sv[1]);
    let u1: Vector3<f64> = u.column(order[0]).into_owned();
    let u2: Vector3<f64> = u.column(order[1]).into_owned();
    let v1: Vector3<f64> = v_t.row(order[0]).transpose();
    let v2: Vector3<f64> = v_t.row(order[1]).transpose();
    let alpha = t2.atan2(t1);
    let (sa, ca) = alpha.sin_cos();
    let settings = ChshSettings {
        axis_x_a: BlochAngles::from_vector(&u1),
        axis_x_b: BlochAngles::from_vector(&u2),
        axis_y_a: BlochAngles::from_vector(&(v1 * ca + v2 * sa)),
        axis_y_b: BlochAngles::from_vector(&(v1 * ca - v2 * sa)),
    };
    Ok(ChshOptimum {
        value: chsh_value(state, &settings)?,
        predicted: 2.0 * (t1 * t1 + t2 * t2).sqrt(),
        settings,
        singular_values: sv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::beamsplitter_state;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    const TSIRELSON: f64 = 2.0 * SQRT_2;

    // Independent 4×4 oracle: explicit 2×2 matrices in the (|0⟩, |1⟩) order,
    // S_z = diag(−1, +1) from 2a†a − 1, S_y e₀ = i e₁ from its ladder form.
    fn pauli(k: usize) -> DMatrix<C64> {
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        match k {
            0 => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
            1 => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
            _ => DMatrix::from_row_slice(2, 2, &[-o, z, z, o]),
        }
    }

    fn oracle_obs(v: [f64; 3]) -> DMatrix<C64> {
        pauli(0) * C64::from(v[0]) + pauli(1) * C64::from(v[1]) + pauli(2) * C64::from(v[2])
    }

    fn oracle_expect(psi: &DVector<C64>, a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        let op = a.kronecker(b);
        psi.dotc(&(op * psi)).re
    }

    fn oracle_chsh(psi: &DVector<C64>, v: [[f64; 3]; 4]) -> f64 {
        let [xa, xb, ya, yb] = v.map(oracle_obs);
        oracle_expect(psi, &xa, &ya) + oracle_expect(psi, &xa, &yb) + oracle_expect(psi, &xb, &ya)
            - oracle_expect(psi, &xb, &yb)
    }

    fn entangled_vec() -> DVector<C64> {
        // index 2·nx + ny
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
            C64::new(0.0, s),
            C64::new(0.0, 0.0),
        ])
    }

    fn qubit_state_from_vec(v: &DVector<C64>) -> ModeState2D {
        let mut c = DMatrix::zeros(2, 2);
        for nx in 0..2 {
            for ny in 0..2 {
                c[(nx, ny)] = v[2 * nx + ny];
            }
        }
        ModeState2D::from_coeffs(c).unwrap()
    }

    fn vec_of(a: BlochAngles) -> [f64; 3] {
        let u = a.unit_vector();
        [u.x, u.y, u.z]
    }

    #[test]
    fn oracle_values_for_fixed_quadruples() {
        let psi = entangled_vec();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let paper = oracle_chsh(&psi, [[0., 0., 1.], [1., 0., 0.], [-r, 0., -r], [-r, 0., r]]);
        let variant = oracle_chsh(&psi, [[0., 0., 1.], [1., 0., 0.], [0., -r, -r], [0., r, -r]]);
        // frozen from the oracle above
        assert!(paper.abs() < 1e-15);
        assert!((variant - TSIRELSON).abs() < 1e-14);

        let state = beamsplitter_state(8).unwrap();
        assert!((chsh_value(&state, &ChshSettings::paper()).unwrap() - 0.0).abs() < 1e-12);
        assert!((chsh_value(&state, &ChshSettings::sy_variant()).unwrap() - TSIRELSON).abs() < 1e-12);
    }

    #[test]
    fn settings_map_to_intended_vectors() {
        let p = ChshSettings::paper();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect_vec = |a: BlochAngles, v: [f64; 3]| {
            let u = vec_of(a);
            for k in 0..3 {
                assert!((u[k] - v[k]).abs() < 1e-15);
            }
        };
        expect_vec(p.axis_x_a, [0., 0., 1.]);
        expect_vec(p.axis_x_b, [1., 0., 0.]);
        expect_vec(p.axis_y_a, [-r, 0., -r]);
        expect_vec(p.axis_y_b, [-r, 0., r]);
    }

    #[test]
    fn optimizer_reaches_tsirelson_on_entangled_state() {
        let state = beamsplitter_state(8).unwrap();
        let opt = chsh_optimize(&state).unwrap();
        assert!((opt.value - TSIRELSON).abs() < 1e-9);
        assert!((opt.predicted - TSIRELSON).abs() < 1e-9);
        for s in opt.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optimizer_on_product_states() {
        for (nx, ny) in [(0, 0), (0, 1)] {
            let s = ModeState2D::basis(8, nx, ny).unwrap();
            let opt = chsh_optimize(&s).unwrap();
            assert!(opt.value <= 2.0 + 1e-9);
            assert!((opt.value - opt.predicted).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_correlations_report_zero() {
        // x-axis state √¾|0⟩ + ½|2⟩ has ⟨S_x⟩ = ⟨S_y⟩ = ⟨S_z⟩ = 0, so T vanishes for any product
        let x_amps = [C64::new(0.75f64.sqrt(), 0.0), C64::new(0.0, 0.0), C64::new(0.5, 0.0)];
        let s = ModeState2D::product(3, &x_amps, &[C64::new(1.0, 0.0)]).unwrap();
        assert!(correlation_matrix(&s).unwrap().norm() < 1e-15);
        let opt = chsh_optimize(&s).unwrap();
        assert_eq!(opt.value, 0.0);
        assert_eq!(opt.settings, ChshSettings::identity());
    }

    #[test]
    fn observables_square_to_identity_on_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let a = BlochAngles::new(rng.random_range(0.0..PI), rng.random_range(-PI..PI));
            let b = a.observable(4).unwrap().qubit_block();
            let sq = &b * &b;
            assert!((sq - DMatrix::<C64>::identity(2, 2)).norm() < 1e-12);
        }
    }

    fn random_qubit(rng: &mut ChaCha8Rng) -> [C64; 2] {
        let v: [C64; 2] = [
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        ];
        let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        [v[0] / n, v[1] / n]
    }

    fn random_angles(rng: &mut ChaCha8Rng) -> BlochAngles {
        BlochAngles::new(rng.random_range(0.0..PI), rng.random_range(-PI..PI))
    }

    #[test]
    fn matches_oracle_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut v = DVector::from_fn(4, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            v /= C64::from(v.norm());
            let settings = ChshSettings {
                axis_x_a: random_angles(&mut rng),
                axis_x_b: random_angles(&mut rng),
                axis_y_a: random_angles(&mut rng),
                axis_y_b: random_angles(&mut rng),
            };
            let oracle = oracle_chsh(
                &v,
                [
                    vec_of(settings.axis_x_a),
                    vec_of(settings.axis_x_b),
                    vec_of(settings.axis_y_a),
                    vec_of(settings.axis_y_b),
                ],
            );
            let state = qubit_state_from_vec(&v);
            assert!((chsh_value(&state, &settings).unwrap() - oracle).abs() < 1e-12);
            // the cutoff only pads with zeros
            assert!((chsh_value(&state.resized(6), &settings).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_bound_for_product_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..10_000 {
            let s = ModeState2D::product(1, &random_qubit(&mut rng), &random_qubit(&mut rng)).unwrap();
            let settings = ChshSettings {
                axis_x_a: random_angles(&mut rng),
                axis_x_b: random_angles(&mut rng),
                axis_y_a: random_angles(&mut rng),
                axis_y_b: random_angles(&mut rng),
            };
            assert!(chsh_value(&s, &settings).unwrap().abs() <= 2.0 + 1e-9);
        }
    }

    #[test]
    fn optimizer_dominates_random_settings() {
        let state = beamsplitter_state(8).unwrap();
        let best = chsh_optimize(&state).unwrap().value;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..1000 {
            let settings = ChshSettings {
                axis_x_a: random_angles(&mut rng),
                axis_x_b: random_angles(&mut rng),
                axis_y_a: random_angles(&mut rng),
                axis_y_b: random_angles(&mut rng),
            };
            assert!(chsh_value(&state, &settings).unwrap() <= best + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn tsirelson_bound(re in proptest::array::uniform4(-1.0f64..1.0),
                           im in proptest::array::uniform4(-1.0f64..1.0)) {
            let v = DVector::from_fn(4, |k, _| C64::new(re[k], im[k]));
            prop_assume!(v.norm() > 1e-3);
            let state = qubit_state_from_vec(&(v.clone() / C64::from(v.norm())));
            let opt = chsh_optimize(&state).unwrap();
            prop_assert!(opt.value <= 2.0 * SQRT_2 + 1e-9);
            prop_assert!((opt.value - opt.predicted).abs() < 1e-9);
        }
    }
}
