//! Hermite polynomials and normalized harmonic-oscillator eigenfunctions.
//!
//! Everything here is in oscillator units (ħ = m = ω̃ = 1), so the scaled
//! coordinate of the oscillator and the grid coordinate coincide.

use nalgebra::DMatrix;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Above this order `hg_mode` switches from the explicit Hermite form to the
/// normalized three-term recurrence.
pub const DIRECT_EVAL_MAX_ORDER: usize = 64;

/// Uniform periodic grid on `[-half_extent, half_extent)`, centred on 0.
///
/// Point `count / 2` sits exactly at the origin and point `count / 2 ± k` are
/// mirror images; point 0 at `-half_extent` is its own periodic image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    half_extent: f64,
    count: usize,
}

impl Grid1D {
    pub fn new(half_extent: f64, count: usize) -> Result<Self> {
        if !(half_extent.is_finite() && half_extent > 0.0) {
            return Err(Error::Precondition(format!(
                "grid half_extent must be positive and finite, got {half_extent}"
            )));
        }
        if count == 0 || !count.is_multiple_of(2) {
            return Err(Error::Precondition(format!(
                "grid count must be a positive even integer, got {count}"
            )));
        }
        Ok(Self { half_extent, count })
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.count as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        // integer offset from the centre keeps mirrored points bit-exact negatives
        (i as f64 - (self.count / 2) as f64) * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.point(i)).collect()
    }

    /// Largest representable coordinate (the periodic domain is half-open).
    pub fn max_point(&self) -> f64 {
        self.point(self.count - 1)
    }

    /// Index of the grid node nearest to `x`, clamped into range.
    pub fn nearest_index(&self, x: f64) -> usize {
        let raw = (x / self.spacing()).round() + (self.count / 2) as f64;
        raw.clamp(0.0, (self.count - 1) as f64) as usize
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.count;
        let dk = 2.0 * PI / (n as f64 * self.spacing());
        (0..n)
            .map(|m| {
                if m < n / 2 {
                    m as f64 * dk
                } else {
                    (m as f64 - n as f64) * dk
                }
            })
            .collect()
    }
}

/// Physicists' Hermite polynomial Hₙ(x) by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// ψ₀ … ψ_nmax at `x` through the normalized recurrence
/// ψₙ₊₁ = √(2/(n+1))·x·ψₙ − √(n/(n+1))·ψₙ₋₁.
///
/// Never forms 2ⁿn!, so it stays finite for large n.
pub fn hg_modes_upto(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    let psi0 = PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if nmax == 0 {
        return out;
    }
    out.push(2f64.sqrt() * x * psi0);
    for n in 1..nmax {
        let nf = n as f64;
        let next = (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
        out.push(next);
    }
    out
}

/// Normalized oscillator eigenfunction ψₙ(x) = π^(-1/4) (2ⁿ n!)^(-1/2) Hₙ(x) e^(-x²/2).
pub fn hg_mode(n: usize, x: f64) -> Result<f64> {
    let value = if n <= DIRECT_EVAL_MAX_ORDER {
        let norm = (1..=n).fold(1.0, |acc, k| acc / (2.0 * k as f64).sqrt());
        PI.powf(-0.25) * norm * hermite(n, x) * (-0.5 * x * x).exp()
    } else {
        hg_modes_upto(n, x)[n]
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("hg_mode(n = {n}, x = {x})")))
    }
}

/// `count × (nmax+1)` matrix whose column j samples ψⱼ on the grid.
pub fn eval_basis(nmax: usize, grid: &Grid1D) -> DMatrix<f64> {
    let mut basis = DMatrix::zeros(grid.count(), nmax + 1);
    for i in 0..grid.count() {
        for (n, v) in hg_modes_upto(nmax, grid.point(i)).into_iter().enumerate() {
            basis[(i, n)] = v;
        }
    }
    basis
}

/// ψ₀ … ψ_nmax at an arbitrary set of points, one row per point.
pub fn eval_at(nmax: usize, xs: &[f64]) -> DMatrix<f64> {
    let mut basis = DMatrix::zeros(xs.len(), nmax + 1);
    for (i, &x) in xs.iter().enumerate() {
        for (n, v) in hg_modes_upto(nmax, x).into_iter().enumerate() {
            basis[(i, n)] = v;
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_grid() -> Grid1D {
        Grid1D::new(8.0, 256).unwrap()
    }

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite(0, 3.7), 1.0);
        assert_eq!(hermite(1, 2.0), 4.0);
        // closed form 16x⁴ − 48x² + 12 at x = 0.5
        let x: f64 = 0.5;
        let closed = 16.0 * x.powi(4) - 48.0 * x * x + 12.0;
        assert_eq!(closed, 1.0);
        // H₂ = −1, H₃ = −5 at x = ½, then H₄ = 2x·H₃ − 6·H₂ = 1
        assert_eq!(hermite(4, 0.5), 1.0);
    }

    #[test]
    fn hg_mode_reference_values() {
        assert_eq!(hg_mode(1, 0.0).unwrap(), 0.0);
        assert!((hg_mode(0, 0.0).unwrap() - PI.powf(-0.25)).abs() < 1e-15);
        let expected = 2f64.sqrt() * PI.powf(-0.25) * (-0.5f64).exp();
        assert!((hg_mode(1, 1.0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn direct_and_recurrence_agree() {
        for n in 0..=DIRECT_EVAL_MAX_ORDER {
            for &x in &[-6.3, -1.1, 0.0, 0.4, 2.5, 7.9] {
                let direct = hg_mode(n, x).unwrap();
                let rec = hg_modes_upto(n, x)[n];
                let scale = direct.abs().max(1e-300);
                assert!(
                    (direct - rec).abs() <= 1e-10 * scale.max(1e-3),
                    "n={n} x={x}: {direct} vs {rec}"
                );
            }
        }
    }

    #[test]
    fn large_order_stays_finite() {
        for &x in &[0.0, 3.0, 15.0, 40.0] {
            assert!(hg_mode(500, x).unwrap().is_finite());
        }
    }

    #[test]
    fn ground_column_positive() {
        let basis = eval_basis(0, &default_grid());
        assert_eq!(basis.ncols(), 1);
        assert!(basis.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn basis_is_orthonormal_under_trapezoid() {
        let grid = default_grid();
        let basis = eval_basis(8, &grid);
        let gram = basis.transpose() * &basis * grid.spacing();
        for i in 0..9 {
            for j in 0..9 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - target).abs() < 1e-10, "({i},{j}) = {}", gram[(i, j)]);
            }
        }
    }

    #[test]
    fn odd_column_antisymmetric() {
        let grid = default_grid();
        let basis = eval_basis(1, &grid);
        let n = grid.count();
        for k in 1..n / 2 {
            let (plus, minus) = (basis[(n / 2 + k, 1)], basis[(n / 2 - k, 1)]);
            assert_eq!(plus, -minus);
        }
        assert_eq!(basis[(n / 2, 1)], 0.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(Grid1D::new(0.0, 256).is_err());
        assert!(Grid1D::new(8.0, 255).is_err());
        assert!(Grid1D::new(8.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn recurrence_consistency(x in -5.0f64..5.0, n in 1usize..=12) {
            let lhs = hermite(n + 1, x) - 2.0 * x * hermite(n, x) + 2.0 * n as f64 * hermite(n - 1, x);
            let scale = hermite(n + 1, x).abs()
                .max(2.0 * x.abs() * hermite(n, x).abs())
                .max(1.0);
            prop_assert!(lhs.abs() <= 1e-12 * scale);
        }

        #[test]
        fn parity_of_modes(x in -8.0f64..8.0, n in 0usize..=16) {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let (a, b) = (hg_mode(n, -x).unwrap(), hg_mode(n, x).unwrap());
            prop_assert!((a - sign * b).abs() <= 1e-14);
        }
    }
}
