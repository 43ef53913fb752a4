//! Dense operator algebra on the qubit ⊗ truncated-oscillator space.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::eig::eigvalsh;
use crate::error::{Error, Result};

pub type CMatrix = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Tail population above which a thermal truncation is reported.
pub const THERMAL_TAIL_WARN: f64 = 1e-9;

/// Qubit-major tensor layout: joint index `q * meter_dim + k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertLayout {
    pub n_max: usize,
}

impl HilbertLayout {
    pub const QUBIT_DIM: usize = 2;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::param("n_max", "must be at least 1"));
        }
        Ok(Self { n_max })
    }

    pub fn meter_dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn joint_dim(&self) -> usize {
        Self::QUBIT_DIM * self.meter_dim()
    }

    pub fn index(&self, qubit: usize, fock: usize) -> usize {
        qubit * self.meter_dim() + fock
    }
}

/// Numerical slack for density-matrix validity checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateTolerances {
    pub hermiticity: f64,
    pub trace: f64,
    pub positivity: f64,
}

impl Default for StateTolerances {
    fn default() -> Self {
        Self {
            hermiticity: 1e-10,
            trace: 1e-8,
            positivity: 1e-7,
        }
    }
}

/// Measured deviations of a matrix from being a valid state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl StateReport {
    pub fn violation(&self, tol: &StateTolerances) -> Option<String> {
        if !(self.trace_error <= tol.trace) {
            return Some(format!("|Tr rho - 1| = {:e} > {:e}", self.trace_error, tol.trace));
        }
        if !(self.hermiticity_error <= tol.hermiticity) {
            return Some(format!(
                "|rho - rho^dagger|_max = {:e} > {:e}",
                self.hermiticity_error, tol.hermiticity
            ));
        }
        if !(self.min_eigenvalue >= -tol.positivity) {
            return Some(format!(
                "min eigenvalue {:e} < -{:e}",
                self.min_eigenvalue, tol.positivity
            ));
        }
        None
    }

    /// Worst-case merge of two reports.
    pub fn merge(self, other: StateReport) -> StateReport {
        StateReport {
            trace_error: self.trace_error.max(other.trace_error),
            hermiticity_error: self.hermiticity_error.max(other.hermiticity_error),
            min_eigenvalue: self.min_eigenvalue.min(other.min_eigenvalue),
        }
    }
}

/// A square complex matrix that was a valid quantum state when constructed.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates against the default tolerances.
    pub fn new(m: CMatrix) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        if !is_finite(&m) {
            return Err(Error::NonFinite);
        }
        let report = state_report(&m)?;
        if let Some(detail) = report.violation(&StateTolerances::default()) {
            return Err(Error::param("rho", detail));
        }
        Ok(Self(m))
    }

    /// Wraps a matrix already known to be a state (e.g. an integrator
    /// output that is checked separately).
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self(m)
    }

    /// `|psi><psi|` for a normalized vector.
    pub fn pure(psi: &[C64]) -> Self {
        let n = psi.len();
        Self(CMatrix::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj()))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(CMatrix::eye(dim).mapv(|z| z / dim as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn report(&self) -> Result<StateReport> {
        state_report(&self.0)
    }
}

pub fn state_report(m: &CMatrix) -> Result<StateReport> {
    let trace_error = (trace(m) - ONE).norm();
    let hermiticity_error = hermiticity_error(m);
    let herm = hermitian_part(m);
    let min_eigenvalue = eigvalsh(&herm)?.first().copied().unwrap_or(0.0);
    Ok(StateReport {
        trace_error,
        hermiticity_error,
        min_eigenvalue,
    })
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.t().mapv(|z| z.conj())
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    let mut h = m + &dagger(m);
    h.mapv_inplace(|z| z * 0.5);
    h
}

pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows().min(m.ncols());
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diag().iter().sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = CMatrix::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::eye(n)
}

pub fn pauli_x() -> CMatrix {
    ndarray::array![[ZERO, ONE], [ONE, ZERO]]
}

pub fn pauli_y() -> CMatrix {
    ndarray::array![[ZERO, -I], [I, ZERO]]
}

pub fn pauli_z() -> CMatrix {
    ndarray::array![[ONE, ZERO], [ZERO, -ONE]]
}

/// Truncated annihilation operator on `{|0>, ..., |n_max>}`.
pub fn annihilation(n_max: usize) -> CMatrix {
    let d = n_max + 1;
    let mut a = CMatrix::zeros((d, d));
    for k in 1..d {
        a[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn creation(n_max: usize) -> CMatrix {
    dagger(&annihilation(n_max))
}

pub fn number_op(n_max: usize) -> CMatrix {
    let d = n_max + 1;
    let mut n = CMatrix::zeros((d, d));
    for k in 0..d {
        n[(k, k)] = C64::new(k as f64, 0.0);
    }
    n
}

/// Field quadrature `a + a^dagger`.
pub fn quadrature(n_max: usize) -> CMatrix {
    let a = annihilation(n_max);
    &a + &dagger(&a)
}

/// Reduced qubit state `Tr_M rho` in the qubit-major layout.
pub fn partial_trace_meter(rho: &CMatrix, layout: &HilbertLayout) -> Result<CMatrix> {
    let d = layout.joint_dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.nrows(),
        });
    }
    let m = layout.meter_dim();
    let mut out = CMatrix::zeros((2, 2));
    for a in 0..2 {
        for b in 0..2 {
            out[(a, b)] = (0..m).map(|k| rho[(a * m + k, b * m + k)]).sum();
        }
    }
    Ok(out)
}

/// Reduced meter state `Tr_S rho`.
pub fn partial_trace_qubit(rho: &CMatrix, layout: &HilbertLayout) -> Result<CMatrix> {
    let d = layout.joint_dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.nrows(),
        });
    }
    let m = layout.meter_dim();
    Ok(CMatrix::from_shape_fn((m, m), |(i, j)| {
        rho[(i, j)] + rho[(m + i, m + j)]
    }))
}

/// `½ Σ |λ_k(ρ₁ − ρ₂)|`, in `[0, 1]` for valid states.
pub fn trace_distance(r1: &CMatrix, r2: &CMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(Error::DimensionMismatch {
            expected: r1.nrows(),
            found: r2.nrows(),
        });
    }
    let diff = hermitian_part(&(r1 - r2));
    if diff.nrows() == 2 {
        return Ok(trace_norm_2x2(&diff) * 0.5);
    }
    Ok(0.5 * eigvalsh(&diff)?.iter().map(|l| l.abs()).sum::<f64>())
}

fn trace_norm_2x2(h: &CMatrix) -> f64 {
    let a = h[(0, 0)].re;
    let d = h[(1, 1)].re;
    let b = h[(0, 1)];
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mean + radius).abs() + (mean - radius).abs()
}

/// Mean bath occupancy, given either directly or through `β` and `ω_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupancy {
    Mean(f64),
    Beta(f64),
}

impl Occupancy {
    pub fn mean(&self, omega_c: f64) -> Result<f64> {
        match *self {
            Occupancy::Mean(n) if n >= 0.0 && n.is_finite() => Ok(n),
            Occupancy::Mean(n) => Err(Error::param("n", format!("occupancy {n} must be >= 0"))),
            Occupancy::Beta(beta) if beta > 0.0 && omega_c > 0.0 => {
                Ok(1.0 / (beta * omega_c).exp_m1())
            }
            Occupancy::Beta(beta) => Err(Error::param(
                "beta",
                format!("inverse temperature {beta} must be > 0 (omega_c = {omega_c})"),
            )),
        }
    }
}

/// Population that a thermal state of mean `n` places above `n_max`.
pub fn thermal_tail(n: f64, n_max: usize) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    (n / (n + 1.0)).powi(n_max as i32 + 1)
}

/// Diagonal thermal state renormalized on the truncated space.
pub fn thermal_state(occupancy: Occupancy, omega_c: f64, n_max: usize) -> Result<DensityMatrix> {
    let n = occupancy.mean(omega_c)?;
    Ok(DensityMatrix::from_matrix_unchecked(thermal_matrix(n, n_max)))
}

pub(crate) fn thermal_matrix(n: f64, n_max: usize) -> CMatrix {
    let d = n_max + 1;
    let mut rho = CMatrix::zeros((d, d));
    if n <= 0.0 {
        rho[(0, 0)] = ONE;
        return rho;
    }
    let tail = thermal_tail(n, n_max);
    if tail > THERMAL_TAIL_WARN {
        log::warn!("thermal state n = {n} truncated at n_max = {n_max}: tail population {tail:e}");
    }
    let ratio = n / (n + 1.0);
    let weights: Vec<f64> = (0..d).map(|k| ratio.powi(k as i32)).collect();
    let z: f64 = weights.iter().sum();
    for (k, w) in weights.iter().enumerate() {
        rho[(k, k)] = C64::new(w / z, 0.0);
    }
    rho
}
