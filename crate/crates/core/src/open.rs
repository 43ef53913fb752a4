//! Qubit ⊗ damped-oscillator Lindblad dynamics.
//!
//! `H(t) = H_S(t) ⊗ (1 + x₀(a + a†)) + 1 ⊗ ω_c a†a` with thermal damping
//! `κ(n+1) D[a] + κn D[a†]` on the oscillator. The right-hand side is
//! evaluated in `O(d²)` by exploiting the tridiagonal quadrature and the
//! banded dissipators; a dense matrix-product route is kept for checking.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lz::{self, Branch, LzParams};
use crate::operator::{
    annihilation, commutator, creation, dagger, identity, kron, number_op, partial_trace_meter,
    quadrature, state_report, thermal_matrix, thermal_tail, CMatrix, HilbertLayout, Occupancy,
    StateReport, StateTolerances, ONE, ZERO,
};
use crate::qubit::Mat2;
use crate::trajectory::{SampleDiagnostics, TimeGrid, Trajectory, Window};

/// Tail population in the top two Fock levels above which results are flagged.
pub const METER_TAIL_WARN: f64 = 1e-6;

/// Damped-oscillator meter and its QND coupling amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeterParams {
    pub omega_c: f64,
    pub kappa: f64,
    /// Mean thermal occupancy `n` of the bath.
    pub n: f64,
    pub x0: f64,
    pub n_max: usize,
}

impl MeterParams {
    pub fn new(omega_c: f64, kappa: f64, occupancy: Occupancy, x0: f64, n_max: usize) -> Result<Self> {
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::param("omega_c", format!("{omega_c} must be > 0")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::param("kappa", format!("{kappa} must be >= 0")));
        }
        if !x0.is_finite() {
            return Err(Error::param("x0", "must be finite"));
        }
        if n_max < 1 {
            return Err(Error::param("n_max", "must be at least 1"));
        }
        let n = occupancy.mean(omega_c)?;
        Ok(Self {
            omega_c,
            kappa,
            n,
            x0,
            n_max,
        })
    }

    pub fn layout(&self) -> HilbertLayout {
        HilbertLayout { n_max: self.n_max }
    }

    pub fn with_x0(self, x0: f64) -> Self {
        Self { x0, ..self }
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    pub fn with_n(self, n: f64) -> Self {
        Self { n, ..self }
    }
}

/// Qubit coefficients of the instantaneous joint Hamiltonian
/// `bare ⊗ 1 + quad ⊗ (a + a†) + 1 ⊗ ω_c a†a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coupling {
    pub bare: Mat2,
    pub quad: Mat2,
}

impl Coupling {
    /// Continuous QND coupling `x₀ H_S(t) ⊗ (a + a†)`.
    pub fn continuous(t: f64, lz: &LzParams, x0: f64) -> Self {
        let h = lz::hamiltonian_mat2(t, lz);
        Coupling {
            bare: h,
            quad: h.scale_re(x0),
        }
    }
}

/// Time-dependent coupling schedule driving the joint evolution. `segment`
/// is the index of the [`Segment`] being integrated, so couplings that jump
/// at segment boundaries are unambiguous.
pub trait Protocol: Sync {
    fn coupling(&self, t: f64, segment: usize) -> Coupling;
}

/// Continuous QND coupling at fixed `x₀`.
#[derive(Clone, Copy, Debug)]
pub struct ContinuousCoupling {
    pub lz: LzParams,
    pub x0: f64,
}

impl Protocol for ContinuousCoupling {
    fn coupling(&self, t: f64, _segment: usize) -> Coupling {
        Coupling::continuous(t, &self.lz, self.x0)
    }
}

/// Structured Lindblad generator for a fixed meter.
#[derive(Clone, Debug)]
pub struct JointGenerator {
    m: usize,
    omega_c: f64,
    down: f64,
    up: f64,
    sqrt: Vec<f64>,
    // diagonal of the truncated a a†
    aad: Vec<f64>,
}

impl JointGenerator {
    pub fn new(meter: &MeterParams) -> Self {
        let m = meter.n_max + 1;
        let sqrt = (0..=m).map(|k| (k as f64).sqrt()).collect();
        let aad = (0..m).map(|k| if k + 1 < m { (k + 1) as f64 } else { 0.0 }).collect();
        Self {
            m,
            omega_c: meter.omega_c,
            down: meter.kappa * (meter.n + 1.0),
            up: meter.kappa * meter.n,
            sqrt,
            aad,
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.m
    }

    /// `out = L(t) rho` for flat row-major `d×d` buffers; `scratch` holds `H rho`.
    /// `rho` must be Hermitian: the commutator is formed as `Hρ − (Hρ)†`.
    pub fn apply(&self, c: &Coupling, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        let m = self.m;
        let d = 2 * m;
        debug_assert_eq!(rho.len(), d * d);
        let row = |q: usize, i: usize| &rho[(q * m + i) * d..(q * m + i + 1) * d];

        // scratch = H rho
        for a in 0..2 {
            for i in 0..m {
                let r = a * m + i;
                let y = &mut scratch[r * d..(r + 1) * d];
                let w = C64::new(self.omega_c * i as f64, 0.0);
                {
                    let own = row(a, i);
                    let coeff = c.bare.0[a][a] + w;
                    for (yc, x) in y.iter_mut().zip(own) {
                        *yc = coeff * x;
                    }
                }
                let other = 1 - a;
                axpy(y, c.bare.0[a][other], row(other, i));
                for b in 0..2 {
                    let coeff = c.quad.0[a][b];
                    if coeff == ZERO {
                        continue;
                    }
                    if i > 0 {
                        axpy(y, coeff * self.sqrt[i], row(b, i - 1));
                    }
                    if i + 1 < m {
                        axpy(y, coeff * self.sqrt[i + 1], row(b, i + 1));
                    }
                }
            }
        }

        // out = -i (H rho - (H rho)^dagger) + dissipators
        for r in 0..d {
            let i = r % m;
            for col in 0..d {
                let j = col % m;
                let y = scratch[r * d + col];
                let yt = scratch[col * d + r].conj();
                let diff = y - yt;
                let mut v = C64::new(diff.im, -diff.re);
                let here = rho[r * d + col];
                if self.down != 0.0 {
                    let mut acc = here * (-0.5 * (i + j) as f64);
                    if i + 1 < m && j + 1 < m {
                        acc += rho[(r + 1) * d + col + 1] * (self.sqrt[i + 1] * self.sqrt[j + 1]);
                    }
                    v += acc * self.down;
                }
                if self.up != 0.0 {
                    let mut acc = here * (-0.5 * (self.aad[i] + self.aad[j]));
                    if i > 0 && j > 0 {
                        acc += rho[(r - 1) * d + col - 1] * (self.sqrt[i] * self.sqrt[j]);
                    }
                    v += acc * self.up;
                }
                out[r * d + col] = v;
            }
        }
    }
}

#[inline]
fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    if a == ZERO {
        return;
    }
    for (yc, xc) in y.iter_mut().zip(x) {
        *yc += a * xc;
    }
}

/// Dense joint Hamiltonian `H_S ⊗ (1 + x₀(a + a†)) + 1 ⊗ ω_c a†a`.
pub fn joint_hamiltonian(t: f64, lz: &LzParams, m: &MeterParams) -> CMatrix {
    coupling_hamiltonian(&Coupling::continuous(t, lz, m.x0), m)
}

/// Dense Hamiltonian for an arbitrary coupling.
pub fn coupling_hamiltonian(c: &Coupling, m: &MeterParams) -> CMatrix {
    let dm = m.n_max + 1;
    let mut h = kron(&c.bare.to_cmatrix(), &identity(dm));
    h = h + kron(&c.quad.to_cmatrix(), &quadrature(m.n_max));
    h + kron(&identity(2), &number_op(m.n_max).mapv(|z| z * m.omega_c))
}

/// QND part `x₀ H_S(t) ⊗ (a + a†)`.
pub fn qnd_hamiltonian(t: f64, lz: &LzParams, m: &MeterParams) -> CMatrix {
    kron(
        &lz::hamiltonian_mat2(t, lz).scale_re(m.x0).to_cmatrix(),
        &quadrature(m.n_max),
    )
}

/// Dense reference right-hand side built from matrix products.
pub fn lindblad_rhs_dense(rho: &CMatrix, c: &Coupling, m: &MeterParams) -> CMatrix {
    let dm = m.n_max + 1;
    let h = coupling_hamiltonian(c, m);
    let id2 = identity(2);
    let a = kron(&id2, &annihilation(m.n_max));
    let ad = kron(&id2, &creation(m.n_max));
    let mut out = commutator(&h, rho).mapv(|z| z * C64::new(0.0, -1.0));
    let dissipator = |l: &CMatrix, ld: &CMatrix| {
        let ldl = ld.dot(l);
        l.dot(rho).dot(ld) - (ldl.dot(rho) + rho.dot(&ldl)).mapv(|z| z * 0.5)
    };
    if m.kappa > 0.0 {
        out = out + dissipator(&a, &ad).mapv(|z| z * m.kappa * (m.n + 1.0));
        out = out + dissipator(&ad, &a).mapv(|z| z * m.kappa * m.n);
    }
    debug_assert_eq!(out.nrows(), 2 * dm);
    out
}

/// `dρ/dt` of the joint Lindblad equation at time `t`.
pub fn lindblad_rhs(rho: &CMatrix, t: f64, lz: &LzParams, m: &MeterParams) -> Result<CMatrix> {
    let d = m.layout().joint_dim();
    if rho.dim() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.nrows(),
        });
    }
    let gen = JointGenerator::new(m);
    let rho = rho.as_standard_layout();
    let mut out = vec![ZERO; d * d];
    let mut scratch = vec![ZERO; d * d];
    gen.apply(
        &Coupling::continuous(t, lz, m.x0),
        rho.as_slice().expect("standard layout"),
        &mut out,
        &mut scratch,
    );
    Ok(CMatrix::from_shape_vec((d, d), out).expect("shape"))
}

/// Step bound `0.02 min(1/κ(n+1), 1/ω_c, 1/sqrt(g²+ε²t_max²), 1/(x₀ g sqrt n_max))`.
/// Also capped at `1.2 / ρ`, where `ρ` bounds the generator's spectral radius
/// on the truncated ladder (RK4 goes unstable near `1.5 / ρ`).
pub fn lindblad_dt(lz: &LzParams, m: &MeterParams, window: &Window) -> f64 {
    let gap = lz.gap(window.max_abs_time());
    let mut rate = m.omega_c.max(gap);
    rate = rate.max(m.kappa * (m.n + 1.0));
    rate = rate.max(m.x0.abs() * lz.g * (m.n_max as f64).sqrt());
    let dt = 0.02 / rate;
    dt.min(1.2 / ladder_radius(m, gap.max(lz.g), m.x0.abs()))
}

/// Rough spectral radius of the joint generator when the QND term carries
/// `quad_scale * H_S` with `|H_S| <= gap / 2`.
pub fn ladder_radius(m: &MeterParams, gap: f64, quad_scale: f64) -> f64 {
    let nm = m.n_max as f64;
    m.kappa * (2.0 * m.n + 1.0) * nm + m.omega_c * nm + 2.0 * quad_scale * gap * nm.sqrt() + gap
}

/// `|−⟩_{t}⟨−| ⊗ thermal(n)`.
pub fn initial_joint_state(t: f64, lz: &LzParams, m: &MeterParams) -> CMatrix {
    let qubit = lz::frame(t, lz).projector(Branch::Minus);
    product_state(&qubit, m)
}

/// `ρ_q ⊗ thermal(n)`.
pub fn product_state(qubit: &Mat2, m: &MeterParams) -> CMatrix {
    let tail = thermal_tail(m.n, m.n_max);
    if tail > METER_TAIL_WARN {
        log::warn!("initial thermal meter truncated: tail {tail:e} at n_max = {}", m.n_max);
    }
    kron(&qubit.to_cmatrix(), &thermal_matrix(m.n, m.n_max))
}

/// A stretch of the evolution integrated with a fixed step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub dt: f64,
}

/// Splits `window` at the given interior times, all with step `dt`.
pub fn segments_with_breaks(window: &Window, dt: f64, breaks: &[f64]) -> Vec<Segment> {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|t| *t > window.start && *t < window.end)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::with_capacity(cuts.len() + 1);
    let mut a = window.start;
    for c in cuts.into_iter().chain(std::iter::once(window.end)) {
        out.push(Segment { start: a, end: c, dt });
        a = c;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Target number of stored samples per segment set (segment ends are
    /// always stored).
    pub samples: usize,
    pub tolerances: StateTolerances,
    /// Abort with [`Error::InvariantViolation`] on the first bad sample.
    pub abort_on_violation: bool,
    /// Compute the joint minimum eigenvalue at every stored sample.
    pub check_positivity: bool,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            samples: 200,
            tolerances: StateTolerances::default(),
            abort_on_violation: true,
            check_positivity: true,
        }
    }
}

/// Output of a joint evolution.
#[derive(Clone, Debug)]
pub struct JointRun {
    pub trajectory: Trajectory,
    /// Reduced qubit state at every stored sample.
    pub reduced: Vec<Mat2>,
    pub final_state: CMatrix,
}

/// Diagnostics of a joint state in the qubit-major layout.
pub fn joint_diagnostics(rho: &CMatrix, layout: &HilbertLayout, positivity: bool) -> Result<SampleDiagnostics> {
    let m = layout.meter_dim();
    let state = if positivity {
        state_report(rho)?
    } else {
        StateReport {
            trace_error: (crate::operator::trace(rho) - ONE).norm(),
            hermiticity_error: crate::operator::hermiticity_error(rho),
            min_eigenvalue: f64::NAN,
        }
    };
    let mut quad = 0.0;
    let mut tail = 0.0;
    for q in 0..2 {
        for i in 0..m {
            let r = q * m + i;
            if i + 1 < m {
                quad += 2.0 * ((i + 1) as f64).sqrt() * rho[(r + 1, r)].re;
            }
            if i + 2 >= m {
                tail += rho[(r, r)].re;
            }
        }
    }
    Ok(SampleDiagnostics {
        state,
        field_quadrature: quad,
        meter_tail: tail,
    })
}

/// Fixed-step RK4 of the joint Lindblad equation over consecutive segments.
pub fn evolve_protocol(
    rho0: &CMatrix,
    segments: &[Segment],
    lz: &LzParams,
    m: &MeterParams,
    protocol: &dyn Protocol,
    opts: &EvolveOptions,
) -> Result<JointRun> {
    let layout = m.layout();
    let d = layout.joint_dim();
    if rho0.dim() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.nrows(),
        });
    }
    if segments.is_empty() {
        return Err(Error::param("segments", "at least one segment is required"));
    }
    let herm = crate::operator::hermiticity_error(rho0);
    if herm > 1e-12 {
        return Err(Error::NotHermitian(herm));
    }
    let gen = JointGenerator::new(m);
    let grids = segments
        .iter()
        .map(|s| TimeGrid::new(s.start, s.end, s.dt))
        .collect::<Result<Vec<_>>>()?;
    let total_steps: usize = grids.iter().map(|g| g.steps).sum();
    let stride = (total_steps / opts.samples.max(1)).max(1);

    let mut y: Vec<C64> = rho0.as_standard_layout().iter().copied().collect();
    let n2 = d * d;
    let mut k1 = vec![ZERO; n2];
    let mut k2 = vec![ZERO; n2];
    let mut k3 = vec![ZERO; n2];
    let mut k4 = vec![ZERO; n2];
    let mut tmp = vec![ZERO; n2];
    let mut scratch = vec![ZERO; n2];

    let mut traj = Trajectory::with_capacity(total_steps / stride + segments.len() + 2);
    let mut reduced = Vec::with_capacity(traj.times.capacity());
    let record = |t: f64, y: &[C64], traj: &mut Trajectory, reduced: &mut Vec<Mat2>| -> Result<()> {
        let rho = CMatrix::from_shape_vec((d, d), y.to_vec()).expect("shape");
        let diag = joint_diagnostics(&rho, &layout, opts.check_positivity)?;
        let red = Mat2::from_cmatrix(&partial_trace_meter(&rho, &layout)?);
        let p = lz::transfer_probability(&red, t, lz);
        if opts.abort_on_violation {
            let mut tol = opts.tolerances;
            if !opts.check_positivity {
                tol.positivity = f64::INFINITY;
            }
            let mut report = diag.state;
            if report.min_eigenvalue.is_nan() {
                report.min_eigenvalue = 0.0;
            }
            if let Some(detail) = report.violation(&tol) {
                return Err(Error::InvariantViolation { t, detail });
            }
            if !p.is_finite() {
                return Err(Error::InvariantViolation {
                    t,
                    detail: "non-finite transfer probability".into(),
                });
            }
        }
        traj.push(t, p, diag);
        reduced.push(red);
        Ok(())
    };

    record(segments[0].start, &y, &mut traj, &mut reduced)?;
    let mut step_counter = 0usize;
    for (seg, grid) in grids.iter().enumerate() {
        let h = grid.step();
        for k in 0..grid.steps {
            let t = grid.time(k);
            let c1 = protocol.coupling(t, seg);
            let c2 = protocol.coupling(t + 0.5 * h, seg);
            let c4 = protocol.coupling(t + h, seg);
            gen.apply(&c1, &y, &mut k1, &mut scratch);
            lincomb(&mut tmp, &y, 0.5 * h, &k1);
            gen.apply(&c2, &tmp, &mut k2, &mut scratch);
            lincomb(&mut tmp, &y, 0.5 * h, &k2);
            gen.apply(&c2, &tmp, &mut k3, &mut scratch);
            lincomb(&mut tmp, &y, h, &k3);
            gen.apply(&c4, &tmp, &mut k4, &mut scratch);
            let w = h / 6.0;
            for i in 0..n2 {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
            }
            step_counter += 1;
            let last_in_segment = k + 1 == grid.steps;
            if step_counter % stride == 0 || last_in_segment {
                record(grid.time(k + 1), &y, &mut traj, &mut reduced)?;
            }
        }
    }

    Ok(JointRun {
        trajectory: traj,
        reduced,
        final_state: CMatrix::from_shape_vec((d, d), y).expect("shape"),
    })
}

#[inline]
fn lincomb(out: &mut [C64], y: &[C64], a: f64, k: &[C64]) {
    for ((o, yv), kv) in out.iter_mut().zip(y).zip(k) {
        *o = yv + kv * a;
    }
}

/// Continuous-coupling evolution of `rho0` over `window`.
pub fn evolve(
    rho0: &CMatrix,
    window: &Window,
    dt: f64,
    lz: &LzParams,
    m: &MeterParams,
    opts: &EvolveOptions,
) -> Result<JointRun> {
    let protocol = ContinuousCoupling { lz: *lz, x0: m.x0 };
    let segments = segments_with_breaks(window, dt, &[0.0]);
    evolve_protocol(rho0, &segments, lz, m, &protocol, opts)
}

/// Result of a continuous-coupling infidelity run.
#[derive(Clone, Debug)]
pub struct ContinuousResult {
    pub trajectory: Trajectory,
    /// `P(t_f)`.
    pub t_final: f64,
    pub max_meter_tail: f64,
    /// `<a + a†>` at the stored sample nearest `t = 0` (NaN if outside).
    pub quadrature_at_zero: f64,
    pub worst_state: StateReport,
}

/// Runs `|−⟩_{t_i} ⊗ thermal(n)` through the window and reports `T = P(t_f)`.
pub fn run_continuous(lz: &LzParams, m: &MeterParams, window: &Window, dt: f64) -> Result<ContinuousResult> {
    run_continuous_with(lz, m, window, dt, &EvolveOptions::default())
}

pub fn run_continuous_with(
    lz: &LzParams,
    m: &MeterParams,
    window: &Window,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<ContinuousResult> {
    let rho0 = initial_joint_state(window.start, lz, m);
    let run = evolve(&rho0, window, dt, lz, m, opts)?;
    let traj = run.trajectory;
    let tail = traj.max_meter_tail();
    if tail > METER_TAIL_WARN {
        log::warn!("meter tail population {tail:e} exceeds {METER_TAIL_WARN:e}; increase n_max");
    }
    let quadrature_at_zero = if window.contains(0.0) {
        traj.nearest_index(0.0)
            .map(|i| traj.diagnostics[i].field_quadrature)
            .unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    Ok(ContinuousResult {
        t_final: traj.final_p(),
        max_meter_tail: tail,
        quadrature_at_zero,
        worst_state: traj.worst_report(),
        trajectory: traj,
    })
}

/// Meter-dressed gap at the anticrossing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveGap {
    /// `Δ_R = g (1 + 2 x₀ <a + a†>)`.
    pub delta_r: f64,
    pub quadrature: f64,
    /// Time of the sample used (exactly 0 when the window straddles it).
    pub sample_time: f64,
    pub t_final: f64,
}

pub fn effective_gap(lz: &LzParams, m: &MeterParams, window: &Window, dt: f64) -> Result<EffectiveGap> {
    if !(window.start < 0.0 && window.end > 0.0) {
        return Err(Error::param("window", "effective gap needs a window straddling t = 0"));
    }
    let res = run_continuous(lz, m, window, dt)?;
    let idx = res.trajectory.nearest_index(0.0).expect("non-empty trajectory");
    let quad = res.trajectory.diagnostics[idx].field_quadrature;
    Ok(EffectiveGap {
        delta_r: lz.g * (1.0 + 2.0 * m.x0 * quad),
        quadrature: quad,
        sample_time: res.trajectory.times[idx],
        t_final: res.t_final,
    })
}

/// Meter-only generator of the damped oscillator acting on `m×m` operators,
/// evaluated entrywise from the ladder structure of `a`.
fn meter_liouvillian(x: &CMatrix, m: &MeterParams) -> CMatrix {
    let top = m.n_max;
    let down = m.kappa * (m.n + 1.0);
    let up = m.kappa * m.n;
    // diagonal of the truncated a a†
    let aad = |k: usize| if k < top { (k + 1) as f64 } else { 0.0 };
    CMatrix::from_shape_fn((top + 1, top + 1), |(i, j)| {
        let xij = x[(i, j)];
        let mut v = xij * C64::new(0.0, -m.omega_c * (i as f64 - j as f64));
        if i < top && j < top {
            v += x[(i + 1, j + 1)] * (down * (((i + 1) * (j + 1)) as f64).sqrt());
        }
        if i > 0 && j > 0 {
            v += x[(i - 1, j - 1)] * (up * ((i * j) as f64).sqrt());
        }
        v - xij * (0.5 * (down * (i + j) as f64 + up * (aad(i) + aad(j))))
    })
}

fn rk4_meter(x: &CMatrix, h: f64, m: &MeterParams) -> CMatrix {
    let k1 = meter_liouvillian(x, m);
    let k2 = meter_liouvillian(&(x + &k1.mapv(|z| z * (0.5 * h))), m);
    let k3 = meter_liouvillian(&(x + &k2.mapv(|z| z * (0.5 * h))), m);
    let k4 = meter_liouvillian(&(x + &k3.mapv(|z| z * h)), m);
    x + &((k1 + (k2 + k3).mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0)))
}

/// Step used when propagating the regression operators.
pub fn regression_dt(m: &MeterParams) -> f64 {
    let accuracy = 0.01 / m.omega_c.max(m.kappa * (m.n + 1.0)).max(1e-12);
    // RK4 stability: the damping rates reach κ(2n+1) n_max
    let radius = (m.kappa * (2.0 * m.n + 1.0) + m.omega_c) * (m.n_max + 1) as f64;
    accuracy.min(1.0 / radius)
}

/// `C_XX(τ) = x₀² [Tr{a† e^{Lτ}(a R₀)} + Tr{a e^{Lτ}(a† R₀)}]` by propagating
/// the operator-valued initial conditions under the meter Liouvillian.
/// `tau_grid` must be non-negative and ascending.
pub fn regression_autocorrelation(m: &MeterParams, tau_grid: &[f64]) -> Result<Vec<C64>> {
    if tau_grid.iter().any(|t| *t < 0.0) || tau_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param("tau_grid", "must be non-negative and ascending"));
    }
    let tail = thermal_tail(m.n, m.n_max);
    if tail > METER_TAIL_WARN {
        log::warn!("regression oracle: thermal tail {tail:e} at n_max = {}", m.n_max);
    }
    let r0 = thermal_matrix(m.n, m.n_max);
    let a = annihilation(m.n_max);
    let ad = dagger(&a);
    let mut x1 = a.dot(&r0);
    let mut x2 = ad.dot(&r0);
    let h_max = regression_dt(m);
    // Tr(a† X) = Σ √k X_{k-1,k},  Tr(a X) = Σ √k X_{k,k-1}
    let corr = |x1: &CMatrix, x2: &CMatrix| {
        let mut acc = C64::new(0.0, 0.0);
        for k in 1..=m.n_max {
            acc += (x1[(k - 1, k)] + x2[(k, k - 1)]) * (k as f64).sqrt();
        }
        acc * (m.x0 * m.x0)
    };
    let mut out = Vec::with_capacity(tau_grid.len());
    let mut tau = 0.0;
    for &target in tau_grid {
        if target > tau {
            let n = ((target - tau) / h_max).ceil().max(1.0) as usize;
            let h = (target - tau) / n as f64;
            for _ in 0..n {
                x1 = rk4_meter(&x1, h, m);
                x2 = rk4_meter(&x2, h, m);
            }
            tau = target;
        }
        out.push(corr(&x1, &x2));
    }
    Ok(out)
}

/// `2 ∫₀^∞ Re C_XX(τ) dτ` from the regression numerics (Simpson, truncated
/// where `e^{-κτ/2} < 1e-12`).
pub fn regression_spectral_weight(m: &MeterParams) -> Result<f64> {
    if m.kappa <= 0.0 {
        return Err(Error::param("kappa", "spectral weight needs kappa > 0"));
    }
    let tau_max = 2.0 * 28.0 / m.kappa;
    let h = regression_dt(m).min(0.01 / m.omega_c);
    let mut n = (tau_max / h).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let h = tau_max / n as f64;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    let c = regression_autocorrelation(m, &grid)?;
    let mut acc = c[0].re + c[n].re;
    for (k, v) in c.iter().enumerate().take(n).skip(1) {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * v.re;
    }
    Ok(2.0 * acc * h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{hermiticity_error, max_abs, trace};

    fn meter_liouvillian_dense(x: &CMatrix, m: &MeterParams) -> CMatrix {
        let dm = m.n_max + 1;
        let a = annihilation(m.n_max);
        let ad = dagger(&a);
        let num = number_op(m.n_max);
        let aad = a.dot(&ad);
        let mut out = commutator(&num, x).mapv(|z| z * C64::new(0.0, -m.omega_c));
        if m.kappa > 0.0 {
            let d1 = a.dot(x).dot(&ad) - (num.dot(x) + x.dot(&num)).mapv(|z| z * 0.5);
            let d2 = ad.dot(x).dot(&a) - (aad.dot(x) + x.dot(&aad)).mapv(|z| z * 0.5);
            out = out + d1.mapv(|z| z * m.kappa * (m.n + 1.0)) + d2.mapv(|z| z * m.kappa * m.n);
        }
        debug_assert_eq!(out.nrows(), dm);
        out
    }

    fn meter(x0: f64, kappa: f64, n: f64, n_max: usize) -> MeterParams {
        MeterParams::new(1.0, kappa, Occupancy::Mean(n), x0, n_max).unwrap()
    }

    #[test]
    fn meter_liouvillian_matches_dense_products() {
        for (k, m) in [meter(1.0, 0.7, 0.4, 6), meter(1.0, 2.0, 0.0, 3), meter(1.0, 0.0, 1.0, 4)].iter().enumerate() {
            let x = random_state(m.n_max + 1, 40 + k as u64).mapv(|z| z * C64::new(0.3, -1.1));
            let fast = meter_liouvillian(&x, m);
            let dense = meter_liouvillian_dense(&x, m);
            assert!(max_abs(&(&fast - &dense)) < 1e-13);
        }
    }

    fn random_state(d: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let b = CMatrix::from_shape_fn((d, d), |_| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let rho = b.dot(&dagger(&b));
        let tr = trace(&rho);
        rho.mapv(|z| z / tr)
    }

    #[test]
    fn structured_rhs_matches_dense_products() {
        let lz = LzParams::new(0.8, 1.3).unwrap();
        for (k, m) in [meter(0.7, 0.4, 0.3, 5), meter(0.0, 2.0, 0.0, 3), meter(1.5, 0.0, 1.0, 4)]
            .iter()
            .enumerate()
        {
            let rho = random_state(m.layout().joint_dim(), k as u64);
            let t = 0.37 - k as f64;
            let fast = lindblad_rhs(&rho, t, &lz, m).unwrap();
            let dense = lindblad_rhs_dense(&rho, &Coupling::continuous(t, &lz, m.x0), m);
            assert!(max_abs(&(&fast - &dense)) < 1e-12, "case {k}");
        }
    }

    #[test]
    fn rhs_traceless_and_hermitian() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let m = meter(1.0, 0.5, 0.2, 6);
        let rho = random_state(m.layout().joint_dim(), 11);
        let rhs = lindblad_rhs(&rho, -0.8, &lz, &m).unwrap();
        assert!(trace(&rhs).norm() < 1e-12);
        assert!(hermiticity_error(&rhs) < 1e-12);
    }

    #[test]
    fn thermal_product_is_steady_without_drive() {
        // g = 0, eps -> 0 and x0 = 0: the qubit is frozen and the meter is thermal
        let lz = LzParams::new(0.0, 1e-300).unwrap();
        let m = meter(0.0, 0.9, 0.4, 8);
        let qubit = Mat2::real(0.6, 0.1, 0.1, 0.4);
        let rho = product_state(&qubit, &m);
        let rhs = lindblad_rhs(&rho, 0.0, &lz, &m).unwrap();
        assert!(max_abs(&rhs) < 1e-14);
    }

    #[test]
    fn unitary_limit_conserves_energy() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let m = meter(0.8, 0.0, 0.0, 5);
        let rho = random_state(m.layout().joint_dim(), 3);
        let t = 0.4;
        let rhs = lindblad_rhs(&rho, t, &lz, &m).unwrap();
        let h = joint_hamiltonian(t, &lz, &m);
        assert!(trace(&h.dot(&rhs)).norm() < 1e-12);
    }

    #[test]
    fn joint_hamiltonian_structure() {
        let lz = LzParams::new(0.9, 1.2).unwrap();
        let m0 = meter(0.0, 1.0, 0.0, 4);
        let t = 0.63;
        let decoupled = kron(&lz::hamiltonian(t, &lz), &identity(5))
            + kron(&identity(2), &number_op(4));
        assert!(max_abs(&(&joint_hamiltonian(t, &lz, &m0) - &decoupled)) < 1e-15);

        let m = meter(1.3, 1.0, 0.0, 4);
        for k in 0..10 {
            let t = -3.0 + 0.6 * k as f64;
            let h = joint_hamiltonian(t, &lz, &m);
            assert!(hermiticity_error(&h) < 1e-15);
            let hs = kron(&lz::hamiltonian(t, &lz), &identity(5));
            assert!(max_abs(&commutator(&qnd_hamiltonian(t, &lz, &m), &hs)) <= 1e-12);
        }

        // rotate the qubit factor into the instantaneous basis: block diagonal
        let fr = lz::frame(t, &lz);
        let u = Mat2::real(fr.minus_state[0], fr.plus_state[0], fr.minus_state[1], fr.plus_state[1]);
        let uu = kron(&u.to_cmatrix(), &identity(5));
        let rotated = dagger(&uu).dot(&joint_hamiltonian(t, &lz, &m)).dot(&uu);
        let x = quadrature(4);
        let num = number_op(4);
        for (q, e) in [(0, fr.e_minus), (1, fr.e_plus)] {
            for i in 0..5 {
                for j in 0..5 {
                    let expect = if i == j { C64::new(e, 0.0) } else { ZERO }
                        + x[(i, j)] * (e * m.x0)
                        + num[(i, j)];
                    assert!((rotated[(q * 5 + i, q * 5 + j)] - expect).norm() < 1e-12);
                    assert!(rotated[((1 - q) * 5 + i, q * 5 + j)].norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn decoupled_meter_reproduces_coherent_dynamics() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(3.0).unwrap();
        let m = meter(0.0, 1.7, 0.3, 8);
        let dt = 0.005;
        let res = run_continuous(&lz, &m, &window, dt).unwrap();
        let coherent = lz::coherent_trajectory(&lz, &window, dt, usize::MAX).unwrap();
        assert!(res.trajectory.max_deviation(&coherent) < 1e-6);
        assert!(res.trajectory.p_values[0].abs() < 1e-14);
    }

    #[test]
    fn effective_gap_trivial_cases() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(2.0).unwrap();
        let m = meter(0.0, 1.0, 0.0, 6);
        let gap = effective_gap(&lz, &m, &window, 0.01).unwrap();
        assert_eq!(gap.sample_time, 0.0);
        assert!((gap.delta_r - 1.0).abs() < 1e-12);
        let late = Window::new(0.5, 2.0).unwrap();
        assert!(effective_gap(&lz, &m, &late, 0.01).is_err());
    }

    #[test]
    fn invariant_violation_aborts() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let m = meter(1.0, 1.0, 0.0, 10);
        let window = Window::symmetric(5.0).unwrap();
        let err = run_continuous(&lz, &m, &window, 0.6).unwrap_err();
        assert!(matches!(err, Error::InvariantViolation { .. }), "{err}");
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let m = meter(0.5, 1.0, 0.0, 3);
        let mut rho = initial_joint_state(-1.0, &lz, &m);
        rho[(0, 1)] = C64::new(0.0, 0.3);
        let window = Window::symmetric(1.0).unwrap();
        let err = evolve(&rho, &window, 0.01, &lz, &m, &EvolveOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotHermitian(_)));
    }

    #[test]
    fn regression_oracle_equal_time_value() {
        let m = meter(0.7, 1.0, 0.5, 30);
        let c = regression_autocorrelation(&m, &[0.0]).unwrap();
        assert!((c[0] - C64::new(0.49 * 2.0, 0.0)).norm() < 1e-9);
        assert!(regression_autocorrelation(&m, &[1.0, 0.5]).is_err());
    }
}
