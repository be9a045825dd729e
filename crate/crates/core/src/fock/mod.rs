//! Truncated two-axis mode space: states, one-axis operators and exact
//! expectation values. This is the reference against which every grid and
//! sampled estimate is checked.

mod chsh;

pub use chsh::{
    chsh_optimize, chsh_value, correlation_matrix, correlator, BlochAngles, ChshOptimum,
    ChshSettings,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::Axis;

/// Complex coefficients c[nₓ][nᵧ] over the product basis ψ_nₓ(x)ψ_nᵧ(y).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState2D {
    coeffs: DMatrix<C64>,
}

impl ModeState2D {
    pub fn zeros(nmax: usize) -> Self {
        Self {
            coeffs: DMatrix::zeros(nmax + 1, nmax + 1),
        }
    }

    /// Product basis state |nₓ⟩|nᵧ⟩.
    pub fn basis(nmax: usize, nx: usize, ny: usize) -> Result<Self> {
        if nx > nmax || ny > nmax {
            return Err(Error::Precondition(format!(
                "basis state |{nx},{ny}> exceeds nmax = {nmax}"
            )));
        }
        let mut s = Self::zeros(nmax);
        s.coeffs[(nx, ny)] = C64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_coeffs(coeffs: DMatrix<C64>) -> Result<Self> {
        if coeffs.nrows() != coeffs.ncols() || coeffs.nrows() == 0 {
            return Err(Error::Precondition(format!(
                "coefficient matrix must be square and non-empty, got {}x{}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        if coeffs.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite("ModeState2D coefficients".into()));
        }
        Ok(Self { coeffs })
    }

    /// Separable state (Σ aₙ|n⟩) ⊗ (Σ bₘ|m⟩), zero-padded to `nmax`.
    pub fn product(nmax: usize, x_amps: &[C64], y_amps: &[C64]) -> Result<Self> {
        if x_amps.len() > nmax + 1 || y_amps.len() > nmax + 1 {
            return Err(Error::Precondition(
                "product amplitudes exceed the basis cutoff".into(),
            ));
        }
        let mut s = Self::zeros(nmax);
        for (i, a) in x_amps.iter().enumerate() {
            for (j, b) in y_amps.iter().enumerate() {
                s.coeffs[(i, j)] = a * b;
            }
        }
        Ok(s)
    }

    pub fn nmax(&self) -> usize {
        self.coeffs.nrows() - 1
    }

    pub fn coeffs(&self) -> &DMatrix<C64> {
        &self.coeffs
    }

    pub fn coeff(&self, nx: usize, ny: usize) -> C64 {
        self.coeffs[(nx, ny)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            coeffs: self.coeffs.unscale(norm),
        })
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        same_nmax(self.nmax(), other.nmax())?;
        Ok(self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Same state embedded in (or cut down to) a different cutoff.
    pub fn resized(&self, nmax: usize) -> Self {
        let mut out = Self::zeros(nmax);
        let k = self.nmax().min(nmax) + 1;
        out.coeffs
            .view_mut((0, 0), (k, k))
            .copy_from(&self.coeffs.view((0, 0), (k, k)));
        out
    }

    /// Largest |c| outside the {|0⟩,|1⟩}⊗{|0⟩,|1⟩} block.
    pub fn leakage_outside_qubit_block(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=self.nmax() {
            for j in 0..=self.nmax() {
                if i > 1 || j > 1 {
                    worst = worst.max(self.coeffs[(i, j)].norm());
                }
            }
        }
        worst
    }

    pub fn map_coeffs(&self, f: impl Fn(usize, usize, C64) -> C64) -> Self {
        let k = self.nmax() + 1;
        Self {
            coeffs: DMatrix::from_fn(k, k, |i, j| f(i, j, self.coeffs[(i, j)])),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModeStateJson::from(self)).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: ModeStateJson = serde_json::from_str(text)
            .map_err(|e| Error::Precondition(format!("invalid ModeState2D JSON: {e}")))?;
        parsed.try_into()
    }
}

/// Wire form: `{"nmax": n, "coeffs": [[re, im], ...]}` in row-major (nₓ outer) order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeStateJson {
    pub nmax: usize,
    pub coeffs: Vec<[f64; 2]>,
}

impl From<&ModeState2D> for ModeStateJson {
    fn from(s: &ModeState2D) -> Self {
        let k = s.nmax() + 1;
        let mut coeffs = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let c = s.coeffs[(i, j)];
                coeffs.push([c.re, c.im]);
            }
        }
        Self {
            nmax: s.nmax(),
            coeffs,
        }
    }
}

impl TryFrom<ModeStateJson> for ModeState2D {
    type Error = Error;

    fn try_from(j: ModeStateJson) -> Result<Self> {
        let k = j.nmax + 1;
        if j.coeffs.len() != k * k {
            return Err(Error::Precondition(format!(
                "expected {} coefficients for nmax = {}, found {}",
                k * k,
                j.nmax,
                j.coeffs.len()
            )));
        }
        let coeffs = DMatrix::from_fn(k, k, |r, c| {
            let [re, im] = j.coeffs[r * k + c];
            C64::new(re, im)
        });
        ModeState2D::from_coeffs(coeffs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpLabel {
    Lower,
    Raise,
    Number,
    Parity,
    Identity,
    Sx,
    Sy,
    Sz,
    Custom,
}

/// Dense one-axis operator in the truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub label: OpLabel,
    pub entries: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(label: OpLabel, entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::Precondition("operator matrix must be square".into()));
        }
        Ok(Self { label, entries })
    }

    pub fn nmax(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn identity(nmax: usize) -> Self {
        Self {
            label: OpLabel::Identity,
            entries: DMatrix::identity(nmax + 1, nmax + 1),
        }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.entries * v
    }

    pub fn dagger(&self) -> Self {
        Self {
            label: match self.label {
                OpLabel::Lower => OpLabel::Raise,
                OpLabel::Raise => OpLabel::Lower,
                other => other,
            },
            entries: self.entries.adjoint(),
        }
    }

    /// Restriction to the {|0⟩,|1⟩} block.
    pub fn qubit_block(&self) -> DMatrix<C64> {
        let k = 2.min(self.entries.nrows());
        self.entries.view((0, 0), (k, k)).into_owned()
    }

    /// Linear combination Σ wᵢ Oᵢ, tagged `Custom`.
    pub fn combination(terms: &[(f64, &OperatorMatrix)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Precondition("empty operator combination".into()))?;
        let nmax = first.1.nmax();
        let mut entries = DMatrix::zeros(nmax + 1, nmax + 1);
        for (w, op) in terms {
            same_nmax(nmax, op.nmax())?;
            entries += op.entries.map(|z| z * *w);
        }
        Ok(Self {
            label: OpLabel::Custom,
            entries,
        })
    }
}

fn same_nmax(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, found })
    }
}

fn require_ladder_room(nmax: usize) -> Result<()> {
    if nmax == 0 {
        Err(Error::Precondition(
            "nmax must be at least 1 for ladder operators".into(),
        ))
    } else {
        Ok(())
    }
}

/// Lowering and raising operators: a[n−1][n] = √n.
pub fn ladder(nmax: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
    require_ladder_room(nmax)?;
    let mut a = DMatrix::zeros(nmax + 1, nmax + 1);
    for n in 1..=nmax {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let lower = OperatorMatrix {
        label: OpLabel::Lower,
        entries: a,
    };
    let raise = lower.dagger();
    Ok((lower, raise))
}

pub fn number_op(nmax: usize) -> OperatorMatrix {
    OperatorMatrix {
        label: OpLabel::Number,
        entries: DMatrix::from_fn(nmax + 1, nmax + 1, |i, j| {
            if i == j {
                C64::new(i as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    }
}

/// [a, a†] − I. Zero except the corner, which carries −(nmax+1) from truncation.
pub fn commutator_defect(nmax: usize) -> Result<DMatrix<C64>> {
    let (a, adag) = ladder(nmax)?;
    let comm = &a.entries * &adag.entries - &adag.entries * &a.entries;
    Ok(comm - DMatrix::identity(nmax + 1, nmax + 1))
}

/// (S_x, S_y, S_z) built from the ladder algebra:
/// S_z = 2a†a − 1, S_x = a†(1 − a†a) + a, S_y = i(a†(1 − a†a) − a).
pub fn spin_ops(nmax: usize) -> Result<(OperatorMatrix, OperatorMatrix, OperatorMatrix)> {
    let (a, adag) = ladder(nmax)?;
    let id = DMatrix::<C64>::identity(nmax + 1, nmax + 1);
    let n = &adag.entries * &a.entries;
    let raise_part = &adag.entries * (&id - &n);
    let i = C64::new(0.0, 1.0);
    let sx = &raise_part + &a.entries;
    let sy = (&raise_part - &a.entries) * i;
    let sz = n * C64::new(2.0, 0.0) - id;
    Ok((
        OperatorMatrix {
            label: OpLabel::Sx,
            entries: sx,
        },
        OperatorMatrix {
            label: OpLabel::Sy,
            entries: sy,
        },
        OperatorMatrix {
            label: OpLabel::Sz,
            entries: sz,
        },
    ))
}

/// Π = diag((−1)ⁿ).
pub fn parity_op(nmax: usize) -> OperatorMatrix {
    OperatorMatrix {
        label: OpLabel::Parity,
        entries: DMatrix::from_fn(nmax + 1, nmax + 1, |i, j| {
            if i != j {
                C64::new(0.0, 0.0)
            } else if i % 2 == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(-1.0, 0.0)
            }
        }),
    }
}

/// 50/50 beamsplitter M = (1/√2)[[1, i], [i, 1]] acting on the
/// single-excitation amplitudes (output 1, output 2).
pub fn beamsplitter(input: [C64; 2]) -> [C64; 2] {
    let i = C64::new(0.0, 1.0);
    let s = FRAC_1_SQRT_2;
    [(input[0] + i * input[1]) * s, (i * input[0] + input[1]) * s]
}

/// Single-excitation state u|0⟩ₓ|1⟩ᵧ + v|1⟩ₓ|0⟩ᵧ for amplitudes (u, v).
pub fn single_excitation_state(nmax: usize, amps: [C64; 2]) -> Result<ModeState2D> {
    require_ladder_room(nmax)?;
    let mut s = ModeState2D::zeros(nmax);
    s.coeffs[(0, 1)] = amps[0];
    s.coeffs[(1, 0)] = amps[1];
    Ok(s)
}

/// One photon through the beamsplitter: (|0⟩|1⟩ + i|1⟩|0⟩)/√2.
pub fn beamsplitter_state(nmax: usize) -> Result<ModeState2D> {
    let out = beamsplitter([C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    single_excitation_state(nmax, out)
}

/// ⟨Ψ| op_x ⊗ op_y |Ψ⟩.
pub fn expect(state: &ModeState2D, op_x: &OperatorMatrix, op_y: &OperatorMatrix) -> Result<C64> {
    same_nmax(state.nmax(), op_x.nmax())?;
    same_nmax(state.nmax(), op_y.nmax())?;
    // (op_x ⊗ op_y) acting on c[nx][ny] is op_x · C · op_yᵀ
    let applied = &op_x.entries * &state.coeffs * op_y.entries.transpose();
    Ok(state
        .coeffs
        .iter()
        .zip(applied.iter())
        .map(|(c, a)| c.conj() * a)
        .sum())
}

/// ⟨Ψ| op ⊗ I |Ψ⟩ or ⟨Ψ| I ⊗ op |Ψ⟩.
pub fn axis_reduced_expectation(state: &ModeState2D, op: &OperatorMatrix, axis: Axis) -> Result<C64> {
    let id = OperatorMatrix::identity(state.nmax());
    match axis {
        Axis::X => expect(state, op, &id),
        Axis::Y => expect(state, &id, op),
    }
}

/// Apply op ⊗ I (or I ⊗ op) to the state without renormalizing.
pub fn apply_on_axis(state: &ModeState2D, op: &OperatorMatrix, axis: Axis) -> Result<ModeState2D> {
    same_nmax(state.nmax(), op.nmax())?;
    let coeffs = match axis {
        Axis::X => &op.entries * &state.coeffs,
        Axis::Y => &state.coeffs * op.entries.transpose(),
    };
    Ok(ModeState2D { coeffs })
}
