//! The envelope ψ(x, y) sampled on a square grid.
//!
//! Differential operators act spectrally along one axis at a time; plane
//! integrals use the trapezoid (equivalently, periodic rectangle) rule with a
//! fixed summation order so results are reproducible bit for bit.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::f64::consts::SQRT_2;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::fock::{BlochAngles, ChshSettings, ModeState2D};
use crate::modes::{eval_basis, Grid1D};
use crate::Axis;

/// Amplitude above which a field touching the domain edge is flagged.
pub const EDGE_AMPLITUDE_LIMIT: f64 = 1e-8;

/// Highest derivative order a [`DiffOpSpec`] may contain.
pub const MAX_DERIVATIVE_ORDER: u32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    grid: Grid1D,
    /// `values[(i, j)] = ψ(xᵢ, yⱼ)`.
    values: DMatrix<C64>,
}

impl FieldGrid {
    pub fn new(grid: Grid1D, values: DMatrix<C64>) -> Result<Self> {
        let n = grid.count();
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::Precondition(format!(
                "field values must be {n}x{n}, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("field values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid1D, f: impl Fn(f64, f64) -> C64) -> Self {
        let n = grid.count();
        let values = DMatrix::from_fn(n, n, |i, j| f(grid.point(i), grid.point(j)));
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> C64 {
        self.values[(i, j)]
    }

    pub fn norm_sqr(&self) -> f64 {
        let h = self.grid.spacing();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.map(|v| v * factor),
        }
    }

    /// αf + βg on a shared grid.
    pub fn linear_combination(alpha: C64, f: &Self, beta: C64, g: &Self) -> Result<Self> {
        same_grid(f, g)?;
        Ok(Self {
            grid: f.grid,
            values: f.values.map(|v| v * alpha) + g.values.map(|v| v * beta),
        })
    }

    /// Largest |ψ| on the outermost rows and columns.
    pub fn edge_amplitude(&self) -> f64 {
        let n = self.grid.count();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for v in [
                self.values[(0, k)],
                self.values[(n - 1, k)],
                self.values[(k, 0)],
                self.values[(k, n - 1)],
            ] {
                worst = worst.max(v.norm());
            }
        }
        worst
    }

    /// Bilinear interpolation of ψ at an off-grid point.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<C64> {
        let (lo, hi) = (self.grid.point(0), self.grid.max_point());
        if !(x >= lo && x <= hi && y >= lo && y <= hi) {
            return Err(Error::OutsideDomain { x, y });
        }
        let h = self.grid.spacing();
        let locate = |u: f64| {
            let s = (u - lo) / h;
            let i0 = (s.floor() as usize).min(self.grid.count() - 2);
            (i0, s - i0 as f64)
        };
        let (i0, tx) = locate(x);
        let (j0, ty) = locate(y);
        let v = |i, j| self.values[(i, j)];
        Ok(v(i0, j0) * ((1.0 - tx) * (1.0 - ty))
            + v(i0 + 1, j0) * (tx * (1.0 - ty))
            + v(i0, j0 + 1) * ((1.0 - tx) * ty)
            + v(i0 + 1, j0 + 1) * (tx * ty))
    }

    /// Frame CSV: header `x,y,re,im`, x outer / y inner, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,y,re,im")?;
        let n = self.grid.count();
        for i in 0..n {
            let x = self.grid.point(i);
            for j in 0..n {
                let v = self.values[(i, j)];
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e}",
                    x,
                    self.grid.point(j),
                    v.re,
                    v.im
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

fn same_grid(f: &FieldGrid, g: &FieldGrid) -> Result<()> {
    if f.grid == g.grid {
        Ok(())
    } else {
        Err(Error::Precondition("fields live on different grids".into()))
    }
}

/// Minimum grid size for synthesizing modes up to `nmax`.
pub fn required_count(nmax: usize) -> usize {
    4 * (nmax + 1)
}

/// ψ(xᵢ, yⱼ) = Σ c[nₓ][nᵧ] ψ_nₓ(xᵢ) ψ_nᵧ(yⱼ).
pub fn synthesize(state: &ModeState2D, grid: &Grid1D) -> Result<FieldGrid> {
    let required = required_count(state.nmax());
    if grid.count() < required {
        return Err(Error::Resolution {
            count: grid.count(),
            nmax: state.nmax(),
            required,
        });
    }
    let basis = eval_basis(state.nmax(), grid).map(C64::from);
    let values = &basis * state.coeffs() * basis.transpose();
    FieldGrid::new(*grid, values)
}

#[derive(Debug, Clone)]
pub struct Projection {
    /// Raw overlaps, not renormalized.
    pub state: ModeState2D,
    /// ‖ψ‖² − Σ|c|²: weight outside the truncated basis.
    pub truncation_loss: f64,
}

/// c[nₓ][nᵧ] = ∬ ψ_nₓ(x) ψ_nᵧ(y) ψ(x, y) dx dy by the trapezoid rule.
pub fn project(field: &FieldGrid, nmax: usize) -> Result<Projection> {
    let h = field.grid.spacing();
    let basis = eval_basis(nmax, &field.grid).map(C64::from);
    let coeffs = basis.transpose() * &field.values * &basis * C64::from(h * h);
    let state = ModeState2D::from_coeffs(coeffs)?;
    let truncation_loss = field.norm_sqr() - state.norm_sqr();
    Ok(Projection {
        state,
        truncation_loss,
    })
}

/// ⟨f|g⟩ = ∬ f* g.
pub fn inner(f: &FieldGrid, g: &FieldGrid) -> Result<C64> {
    same_grid(f, g)?;
    let h = f.grid.spacing();
    let sum: C64 = f
        .values
        .iter()
        .zip(g.values.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(sum * (h * h))
}

pub fn normalize(field: &FieldGrid) -> Result<FieldGrid> {
    let norm = field.norm_sqr().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroNorm);
    }
    Ok(field.scaled(C64::from(1.0 / norm)))
}

/// One term c·x^p·∂^q of a one-axis differential operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffTerm {
    pub x_power: u32,
    pub d_order: u32,
    pub coefficient: C64,
}

/// Σ cᵢ x^(pᵢ) ∂^(qᵢ), applied derivative first, then coordinate power.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOpSpec {
    terms: Vec<DiffTerm>,
}

impl DiffOpSpec {
    pub fn new(terms: Vec<DiffTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Precondition("differential operator has no terms".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.d_order > MAX_DERIVATIVE_ORDER) {
            return Err(Error::Precondition(format!(
                "derivative order {} exceeds {MAX_DERIVATIVE_ORDER}",
                t.d_order
            )));
        }
        Ok(Self { terms })
    }

    fn real(scale: f64, terms: &[(u32, u32, f64)]) -> Self {
        Self {
            terms: terms
                .iter()
                .map(|&(x_power, d_order, c)| DiffTerm {
                    x_power,
                    d_order,
                    coefficient: C64::from(scale * c),
                })
                .collect(),
        }
    }

    pub fn terms(&self) -> &[DiffTerm] {
        &self.terms
    }

    pub fn identity() -> Self {
        Self::real(1.0, &[(0, 0, 1.0)])
    }

    /// a†a = ½(x² − ∂² − 1).
    pub fn number() -> Self {
        Self::real(0.5, &[(2, 0, 1.0), (0, 2, -1.0), (0, 0, -1.0)])
    }

    /// ½(x² − ∂²), the oscillator Hamiltonian of one axis.
    pub fn hamiltonian() -> Self {
        Self::real(0.5, &[(2, 0, 1.0), (0, 2, -1.0)])
    }

    /// S_z = 2a†a − 1 = x² − ∂² − 2.
    pub fn sz() -> Self {
        Self::real(1.0, &[(2, 0, 1.0), (0, 2, -1.0), (0, 0, -2.0)])
    }

    /// S_x = a†(1 − a†a) + a = (7x − x³ + (x² − 1)∂ + x∂² − ∂³)/(2√2).
    pub fn sx() -> Self {
        Self::real(
            1.0 / (2.0 * SQRT_2),
            &[
                (1, 0, 7.0),
                (3, 0, -1.0),
                (2, 1, 1.0),
                (0, 1, -1.0),
                (1, 2, 1.0),
                (0, 3, -1.0),
            ],
        )
    }

    /// S_y = i(a†(1 − a†a) − a) = i(3x − x³ + (x² − 5)∂ + x∂² − ∂³)/(2√2).
    pub fn sy() -> Self {
        let real = Self::real(
            1.0 / (2.0 * SQRT_2),
            &[
                (1, 0, 3.0),
                (3, 0, -1.0),
                (2, 1, 1.0),
                (0, 1, -5.0),
                (1, 2, 1.0),
                (0, 3, -1.0),
            ],
        );
        real.scaled(C64::new(0.0, 1.0))
    }

    /// cos θ·S_z + sin θ (cos φ·S_x + sin φ·S_y).
    pub fn bloch(angles: BlochAngles) -> Self {
        let v = angles.unit_vector();
        Self::combination(&[
            (C64::from(v.x), &Self::sx()),
            (C64::from(v.y), &Self::sy()),
            (C64::from(v.z), &Self::sz()),
        ])
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| DiffTerm {
                    coefficient: t.coefficient * factor,
                    ..*t
                })
                .collect(),
        }
    }

    /// Concatenated, weighted term lists (like terms are not merged).
    pub fn combination(parts: &[(C64, &DiffOpSpec)]) -> Self {
        Self {
            terms: parts
                .iter()
                .flat_map(|(w, spec)| spec.scaled(*w).terms)
                .collect(),
        }
    }

    fn max_order(&self) -> u32 {
        self.terms.iter().map(|t| t.d_order).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct Applied {
    pub field: FieldGrid,
    /// Input amplitude at the domain edge exceeded [`EDGE_AMPLITUDE_LIMIT`].
    pub edge_warning: bool,
}

/// Apply `spec` along `axis`.
pub fn apply_diff_op(field: &FieldGrid, spec: &DiffOpSpec, axis: Axis) -> Result<Applied> {
    let spec = DiffOpSpec::new(spec.terms.clone())?;
    let edge_warning = field.edge_amplitude() > EDGE_AMPLITUDE_LIMIT;
    let values = match axis {
        // columns of the column-major matrix are lines of constant y
        Axis::X => apply_along_columns(&field.values, &spec, &field.grid),
        Axis::Y => apply_along_columns(&field.values.transpose(), &spec, &field.grid).transpose(),
    };
    Ok(Applied {
        field: FieldGrid::new(field.grid, values)?,
        edge_warning,
    })
}

fn apply_along_columns(lines: &DMatrix<C64>, spec: &DiffOpSpec, grid: &Grid1D) -> DMatrix<C64> {
    let derivs = spectral_derivatives(lines, spec.max_order(), grid);
    let n = grid.count();
    let coords = grid.points();
    let mut out = DMatrix::zeros(n, n);
    for term in &spec.terms {
        let d = &derivs[term.d_order as usize];
        for j in 0..n {
            for i in 0..n {
                let w = term.coefficient * coords[i].powi(term.x_power as i32);
                out[(i, j)] += w * d[(i, j)];
            }
        }
    }
    out
}

/// ∂^q of every column for q = 0..=max_order.
fn spectral_derivatives(lines: &DMatrix<C64>, max_order: u32, grid: &Grid1D) -> Vec<DMatrix<C64>> {
    let n = grid.count();
    let mut out = vec![lines.clone()];
    if max_order == 0 {
        return out;
    }
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut spectrum = lines.clone();
    forward.process(spectrum.as_mut_slice());
    let k = grid.wavenumbers();
    let scale = 1.0 / n as f64;
    for q in 1..=max_order {
        let mut d = spectrum.clone();
        for (idx, v) in d.as_mut_slice().iter_mut().enumerate() {
            let m = idx % n;
            // modes past two thirds of the band hold only rounding noise for
            // resolved fields; k³ would amplify it
            let factor = if m > n / 3 && m < n - n / 3 {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, k[m]).powu(q)
            };
            *v *= factor * scale;
        }
        inverse.process(d.as_mut_slice());
        out.push(d);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridExpectation {
    pub value: C64,
    pub edge_warning: bool,
}

/// ∬ ψ* (Ô_x Ô_y ψ) dx dy.
pub fn expect_grid(field: &FieldGrid, spec_x: &DiffOpSpec, spec_y: &DiffOpSpec) -> Result<GridExpectation> {
    let ax = apply_diff_op(field, spec_x, Axis::X)?;
    let axy = apply_diff_op(&ax.field, spec_y, Axis::Y)?;
    Ok(GridExpectation {
        value: inner(field, &axy.field)?,
        edge_warning: ax.edge_warning || axy.edge_warning,
    })
}

/// Grid estimate of ⟨AₐBₐ⟩ + ⟨AₐB_b⟩ + ⟨A_bBₐ⟩ − ⟨A_bB_b⟩.
pub fn chsh_grid(field: &FieldGrid, settings: &ChshSettings) -> Result<GridExpectation> {
    let xa = DiffOpSpec::bloch(settings.axis_x_a);
    let xb = DiffOpSpec::bloch(settings.axis_x_b);
    let ya = DiffOpSpec::bloch(settings.axis_y_a);
    let yb = DiffOpSpec::bloch(settings.axis_y_b);
    let parts = [
        (1.0, expect_grid(field, &xa, &ya)?),
        (1.0, expect_grid(field, &xa, &yb)?),
        (1.0, expect_grid(field, &xb, &ya)?),
        (-1.0, expect_grid(field, &xb, &yb)?),
    ];
    Ok(GridExpectation {
        value: parts.iter().map(|(s, e)| e.value * *s).sum(),
        edge_warning: parts.iter().any(|(_, e)| e.edge_warning),
    })
}

/// Grid estimate of T[i][j] = Re⟨S_i ⊗ S_j⟩, i, j over (x, y, z).
pub fn correlation_matrix_grid(field: &FieldGrid) -> Result<[[f64; 3]; 3]> {
    let specs = [DiffOpSpec::sx(), DiffOpSpec::sy(), DiffOpSpec::sz()];
    let mut t = [[0.0; 3]; 3];
    for (i, si) in specs.iter().enumerate() {
        for (j, sj) in specs.iter().enumerate() {
            t[i][j] = expect_grid(field, si, sj)?.value.re;
        }
    }
    Ok(t)
}
