//! Adiabatic dephasing master equation for the bare qubit.
//!
//! `∂ρ = −i[H_S, ρ] − γ(t)(P₋ρP₊ + P₊ρP₋)` with `γ(t) = G(0)(E₊ − E₋)²/2`.
//! The Lamb-shift contribution is not part of the generator.
//!
//! Integration happens in the instantaneous eigenbasis, where the state is a
//! Bloch vector `r` obeying `ṙ = M(t) r` with
//!
//! ```text
//!        | −γ   −ΔE   −θ̇ |
//!   M =  |  ΔE   −γ    0  |
//!        |  θ̇    0     0  |
//! ```
//!
//! `ΔE = sqrt(g² + ε²t²)` and `θ̇ = −gε/ΔE²`. Steps use the fourth-order
//! Magnus exponential, so strong dephasing (`γ dt ≫ 1`) stays stable.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lz::{self, Branch, LzParams};
use crate::open::MeterParams;
use crate::operator::{StateReport, StateTolerances};
use crate::qubit::Mat2;
use crate::trajectory::{SampleDiagnostics, TimeGrid, Trajectory, Window};

/// Time dependence of the dephasing rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateProfile {
    /// `γ(t) = G(0)(g² + ε²t²)/2`.
    GapScaled,
    /// `γ(t) = γ₀`; a Markovian surrogate, not the adiabatic generator.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DephasingSource {
    Explicit,
    Meter(MeterParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DephasingModel {
    /// Rate at the anticrossing.
    pub gamma0: f64,
    /// Zero-frequency spectral weight `G(0)`.
    pub g0_spectral: f64,
    pub source: DephasingSource,
    pub profile: RateProfile,
}

impl DephasingModel {
    /// No dephasing.
    pub fn coherent() -> Self {
        Self {
            gamma0: 0.0,
            g0_spectral: 0.0,
            source: DephasingSource::Explicit,
            profile: RateProfile::GapScaled,
        }
    }

    /// `γ₀` given directly; `G(0) = 2γ₀/g²`.
    pub fn explicit(gamma0: f64, lz: &LzParams) -> Result<Self> {
        if !(gamma0 >= 0.0 && gamma0.is_finite()) {
            return Err(Error::param("gamma0", format!("{gamma0} must be >= 0")));
        }
        if lz.g == 0.0 && gamma0 > 0.0 {
            return Err(Error::param("gamma0", "needs g > 0 to fix G(0)"));
        }
        let g0_spectral = if gamma0 == 0.0 { 0.0 } else { 2.0 * gamma0 / (lz.g * lz.g) };
        Ok(Self {
            gamma0,
            g0_spectral,
            source: DephasingSource::Explicit,
            profile: RateProfile::GapScaled,
        })
    }

    /// `G(0)` from the meter spectral weight; `γ₀ = G(0) g²/2`.
    pub fn from_meter(m: &MeterParams, lz: &LzParams) -> Self {
        let g0_spectral = spectral_g0(m);
        Self {
            gamma0: 0.5 * g0_spectral * lz.g * lz.g,
            g0_spectral,
            source: DephasingSource::Meter(*m),
            profile: RateProfile::GapScaled,
        }
    }

    /// Constant-rate dephasing at `gamma`.
    pub fn constant(gamma: f64, lz: &LzParams) -> Result<Self> {
        Ok(Self::explicit(gamma, lz)?.with_profile(RateProfile::Constant))
    }

    pub fn with_profile(self, profile: RateProfile) -> Self {
        Self { profile, ..self }
    }
}

/// `G(0) = x₀²(2n+1) κ / ((κ/2)² + ω_c²)`.
pub fn spectral_g0(m: &MeterParams) -> f64 {
    m.x0 * m.x0 * (2.0 * m.n + 1.0) * m.kappa / (0.25 * m.kappa * m.kappa + m.omega_c * m.omega_c)
}

/// `C_XX(τ) = x₀² e^{−κτ/2}[(n+1)e^{−iω_cτ} + n e^{iω_cτ}]`.
pub fn analytic_autocorrelation(m: &MeterParams, tau: f64) -> C64 {
    let phase = C64::from_polar(1.0, -m.omega_c * tau);
    (phase * (m.n + 1.0) + phase.conj() * m.n) * (m.x0 * m.x0 * (-0.5 * m.kappa * tau).exp())
}

pub fn dephasing_rate(t: f64, lz: &LzParams, model: &DephasingModel) -> f64 {
    match model.profile {
        RateProfile::GapScaled => {
            0.5 * model.g0_spectral * (lz.g * lz.g + lz.eps * lz.eps * t * t)
        }
        RateProfile::Constant => model.gamma0,
    }
}

/// Lab-frame generator `−i[H_S, ρ] − γ(t)(P₋ρP₊ + P₊ρP₋)`.
pub fn ame_rhs(rho: &Mat2, t: f64, lz: &LzParams, model: &DephasingModel) -> Mat2 {
    let h = lz::hamiltonian_mat2(t, lz);
    let unitary = h.commutator(rho).scale(C64::new(0.0, -1.0));
    let gamma = dephasing_rate(t, lz, model);
    if gamma == 0.0 {
        return unitary;
    }
    let fr = lz::frame(t, lz);
    let pp = fr.projector(Branch::Plus);
    let pm = fr.projector(Branch::Minus);
    unitary - (pm * *rho * pp + pp * *rho * pm).scale_re(gamma)
}

/// Dissipative part of [`ame_rhs`] alone.
pub fn ame_dissipator(rho: &Mat2, t: f64, lz: &LzParams, model: &DephasingModel) -> Mat2 {
    let fr = lz::frame(t, lz);
    let pp = fr.projector(Branch::Plus);
    let pm = fr.projector(Branch::Minus);
    (pm * *rho * pp + pp * *rho * pm).scale_re(-dephasing_rate(t, lz, model))
}

type M3 = [[f64; 3]; 3];

fn generator(t: f64, lz: &LzParams, model: &DephasingModel) -> M3 {
    let gap2 = lz.g * lz.g + lz.eps * lz.eps * t * t;
    let de = gap2.sqrt();
    let theta_dot = -lz.g * lz.eps / gap2;
    let gamma = dephasing_rate(t, lz, model);
    [[-gamma, -de, -theta_dot], [de, -gamma, 0.0], [theta_dot, 0.0, 0.0]]
}

fn mul3(a: &M3, b: &M3) -> M3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

fn apply3(a: &M3, v: [f64; 3]) -> [f64; 3] {
    [
        a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
        a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
        a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
    ]
}

/// Scaling and squaring with an order-18 Taylor polynomial.
fn expm3(a: &M3) -> M3 {
    let norm = a
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(s);
    let b: M3 = a.map(|r| r.map(|x| x * scale));
    let mut out = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = out;
    for k in 1..=18 {
        term = mul3(&term, &b).map(|r| r.map(|x| x / k as f64));
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        out = mul3(&out, &out);
    }
    out
}

/// One fourth-order Magnus step over `[t, t + h]`.
fn magnus_step(t: f64, h: f64, lz: &LzParams, model: &DephasingModel) -> M3 {
    let c = 3f64.sqrt() / 6.0;
    let a1 = generator(t + (0.5 - c) * h, lz, model);
    let a2 = generator(t + (0.5 + c) * h, lz, model);
    let comm = {
        let p = mul3(&a2, &a1);
        let q = mul3(&a1, &a2);
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = p[i][j] - q[i][j];
            }
        }
        m
    };
    let w = 3f64.sqrt() * h * h / 12.0;
    let mut omega = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            omega[i][j] = 0.5 * h * (a1[i][j] + a2[i][j]) + w * comm[i][j];
        }
    }
    expm3(&omega)
}

/// Lab-frame state to the instantaneous-basis Bloch vector (`z = P₊ − P₋`).
fn to_bloch(rho: &Mat2, t: f64, lz: &LzParams) -> [f64; 3] {
    let fr = lz::frame(t, lz);
    let (p, m) = (fr.plus_state, fr.minus_state);
    let pp = rho.expect_real(p).re;
    let mm = rho.expect_real(m).re;
    let r = &rho.0;
    // <+|rho|->
    let pm = r[0][0] * p[0] * m[0] + r[0][1] * p[0] * m[1] + r[1][0] * p[1] * m[0] + r[1][1] * p[1] * m[1];
    [2.0 * pm.re, -2.0 * pm.im, pp - mm]
}

fn from_bloch(r: [f64; 3], t: f64, lz: &LzParams) -> Mat2 {
    let fr = lz::frame(t, lz);
    let (p, m) = (fr.plus_state, fr.minus_state);
    let c = C64::new(0.5 * r[0], -0.5 * r[1]);
    let outer = |u: [f64; 2], v: [f64; 2]| Mat2::outer_real(u, v);
    outer(p, p).scale_re(0.5 * (1.0 + r[2]))
        + outer(m, m).scale_re(0.5 * (1.0 - r[2]))
        + outer(p, m).scale(c)
        + outer(m, p).scale(c.conj())
}

/// Validity of a 2×2 state.
pub fn qubit_report(rho: &Mat2) -> StateReport {
    let r = &rho.0;
    let tr = rho.trace();
    let herm = (r[0][1] - r[1][0].conj())
        .norm()
        .max(r[0][0].im.abs())
        .max(r[1][1].im.abs());
    let a = r[0][0].re;
    let d = r[1][1].re;
    let b = 0.5 * (r[0][1] + r[1][0].conj());
    let min_eig = 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    StateReport {
        trace_error: (tr - C64::new(1.0, 0.0)).norm(),
        hermiticity_error: herm,
        min_eigenvalue: min_eig,
    }
}

/// Default step: resolves the gap phase across the window and the
/// anticrossing time scale `g/ε`.
pub fn ame_dt(lz: &LzParams, window: &Window) -> f64 {
    lz::schrodinger_dt(lz, window).min(0.02 * lz.g / lz.eps)
}

#[derive(Clone, Debug)]
pub struct AmeRun {
    pub trajectory: Trajectory,
    pub reduced: Vec<Mat2>,
    pub t_final: f64,
}

/// Evolves `rho0` (lab frame) through `window`, keeping about `samples`
/// stored points. Requires `g > 0`.
pub fn evolve_ame_with(
    rho0: &Mat2,
    window: &Window,
    dt: f64,
    lz: &LzParams,
    model: &DephasingModel,
    samples: usize,
) -> Result<AmeRun> {
    if lz.g <= 0.0 {
        return Err(Error::param("g", "the adiabatic master equation needs g > 0"));
    }
    let tol = StateTolerances::default();
    if let Some(detail) = qubit_report(rho0).violation(&tol) {
        return Err(Error::param("rho0", detail));
    }
    let grid = TimeGrid::new(window.start, window.end, dt)?;
    let h = grid.step();
    let stride = grid.stride_for(samples);
    let mut r = to_bloch(rho0, window.start, lz);
    let mut traj = Trajectory::with_capacity(grid.steps / stride + 2);
    let mut reduced = Vec::with_capacity(grid.steps / stride + 2);
    let mut record = |t: f64, r: [f64; 3]| -> Result<()> {
        let rho = from_bloch(r, t, lz);
        let report = qubit_report(&rho);
        if let Some(detail) = report.violation(&tol) {
            return Err(Error::InvariantViolation { t, detail });
        }
        traj.push(
            t,
            0.5 * (1.0 + r[2]),
            SampleDiagnostics {
                state: report,
                ..Default::default()
            },
        );
        reduced.push(rho);
        Ok(())
    };
    record(window.start, r)?;
    for k in 0..grid.steps {
        let prop = magnus_step(grid.time(k), h, lz, model);
        r = apply3(&prop, r);
        if !r.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        if (k + 1) % stride == 0 || k + 1 == grid.steps {
            record(grid.time(k + 1), r)?;
        }
    }
    let t_final = traj.final_p();
    Ok(AmeRun {
        trajectory: traj,
        reduced,
        t_final,
    })
}

/// [`evolve_ame_with`] from `|−⟩_{t_i}` with 400 stored samples.
pub fn evolve_ame(window: &Window, dt: f64, lz: &LzParams, model: &DephasingModel) -> Result<AmeRun> {
    let rho0 = lz::frame(window.start, lz).projector(Branch::Minus);
    evolve_ame_with(&rho0, window, dt, lz, model, 400)
}

/// `Q(x) = (π/2) x (2 + sqrt(1+x²)) / (sqrt(1+x²) (sqrt(1+x²) + 1)²)`.
pub fn avron_q(x: f64) -> f64 {
    let s = (1.0 + x * x).sqrt();
    0.5 * PI * x * (2.0 + s) / (s * (s + 1.0) * (s + 1.0))
}

/// Leading-order infidelity `(ε/2g²) Q(γ₀/g)`.
pub fn asymptotic_infidelity(lz: &LzParams, model: &DephasingModel) -> f64 {
    if lz.g <= 0.0 {
        return f64::NAN;
    }
    let root_eps = lz.eps.sqrt();
    if !(root_eps < 0.3 * lz.g && root_eps < 0.3 * model.gamma0.max(f64::MIN_POSITIVE)) {
        log::warn!(
            "asymptotic infidelity outside its validity regime: sqrt(eps) = {root_eps}, g = {}, gamma0 = {}",
            lz.g,
            model.gamma0
        );
    }
    lz.eps / (2.0 * lz.g * lz.g) * avron_q(model.gamma0 / lz.g)
}

/// Strong-dephasing limit `πε/(4γ₀g)`.
pub fn strong_dephasing_infidelity(lz: &LzParams, gamma0: f64) -> f64 {
    PI * lz.eps / (4.0 * gamma0 * lz.g)
}

/// `δT = T − T_LZ` with both runs on the same window and step.
pub fn relative_infidelity(lz: &LzParams, model: &DephasingModel, window: &Window, dt: f64) -> Result<f64> {
    let t = evolve_ame(window, dt, lz, model)?.t_final;
    let t_lz = evolve_ame(window, dt, lz, &DephasingModel::coherent())?.t_final;
    Ok(t - t_lz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Occupancy;

    fn meter(kappa: f64, n: f64, x0: f64) -> MeterParams {
        MeterParams::new(1.0, kappa, Occupancy::Mean(n), x0, 10).unwrap()
    }

    #[test]
    fn spectral_weight_values() {
        assert!((spectral_g0(&meter(2.0, 0.0, 1.0)) - 1.0).abs() < 1e-15);
        let r = spectral_g0(&meter(0.7, 1.0, 0.4)) / spectral_g0(&meter(0.7, 0.0, 0.4));
        assert!((r - 3.0).abs() < 1e-14);
        assert!(spectral_g0(&meter(1e9, 0.0, 1.0)) < 1e-8);
        assert_eq!(spectral_g0(&meter(0.0, 0.3, 1.0)), 0.0);
    }

    #[test]
    fn autocorrelation_limits() {
        let m = meter(0.8, 0.5, 0.6);
        assert!((analytic_autocorrelation(&m, 0.0) - C64::new(0.36 * 2.0, 0.0)).norm() < 1e-15);
        let vac = meter(0.8, 0.0, 0.6);
        let tau = 1.3;
        let expect = C64::from_polar(0.36 * (-0.4 * tau as f64).exp(), -tau);
        assert!((analytic_autocorrelation(&vac, tau) - expect).norm() < 1e-15);
        for k in 0..50 {
            let tau = 0.1 * k as f64;
            let bound = 0.36 * 2.0 * (-0.4 * tau).exp();
            assert!(analytic_autocorrelation(&m, tau).norm() <= bound + 1e-15);
        }
    }

    #[test]
    fn rate_profile() {
        let lz = LzParams::new(2.0, 0.5).unwrap();
        let model = DephasingModel::explicit(0.3, &lz).unwrap();
        assert!((dephasing_rate(0.0, &lz, &model) - 0.3).abs() < 1e-15);
        let t = 400.0;
        let ratio = dephasing_rate(t, &lz, &model) / (0.5 * model.g0_spectral * lz.eps * lz.eps * t * t);
        assert!((ratio - 1.0).abs() < 1e-2);
        assert_eq!(dephasing_rate(3.0, &lz, &DephasingModel::coherent()), 0.0);
        let m = meter(1.5, 0.2, 0.7);
        let derived = DephasingModel::from_meter(&m, &lz);
        assert!((derived.gamma0 - 0.5 * spectral_g0(&m) * 4.0).abs() < 1e-15);
        assert!(DephasingModel::explicit(-1.0, &lz).is_err());
    }

    #[test]
    fn dissipator_structure() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let model = DephasingModel::explicit(0.7, &lz).unwrap();
        let t = 0.35;
        let fr = lz::frame(t, &lz);
        let pm = fr.projector(Branch::Minus);
        assert!(ame_dissipator(&pm, t, &lz, &model).max_abs() < 1e-16);
        let c = C64::new(0.2, -0.15);
        let coh = Mat2::outer_real(fr.plus_state, fr.minus_state).scale(c)
            + Mat2::outer_real(fr.minus_state, fr.plus_state).scale(c.conj());
        let gamma = dephasing_rate(t, &lz, &model);
        let diff = ame_dissipator(&coh, t, &lz, &model) + coh.scale_re(gamma);
        assert!(diff.max_abs() < 1e-15);
        let rho = Mat2([
            [C64::new(0.6, 0.0), C64::new(0.1, 0.2)],
            [C64::new(0.1, -0.2), C64::new(0.4, 0.0)],
        ]);
        let rhs = ame_rhs(&rho, t, &lz, &model);
        assert!(rhs.trace().norm() < 1e-15);
        assert!((rhs.0[0][1] - rhs.0[1][0].conj()).norm() < 1e-15);
    }

    #[test]
    fn bloch_round_trip() {
        let lz = LzParams::new(0.7, 1.1).unwrap();
        let rho = Mat2([
            [C64::new(0.3, 0.0), C64::new(0.1, 0.25)],
            [C64::new(0.1, -0.25), C64::new(0.7, 0.0)],
        ]);
        for t in [-3.0, 0.0, 0.4] {
            let r = to_bloch(&rho, t, &lz);
            assert!((from_bloch(r, t, &lz) - rho).max_abs() < 1e-15);
            assert!((0.5 * (1.0 + r[2]) - lz::transfer_probability(&rho, t, &lz)).abs() < 1e-15);
        }
    }

    #[test]
    fn matrix_exponential() {
        let rot: M3 = [[0.0, -2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]];
        let e = expm3(&rot);
        assert!((e[0][0] - 2f64.cos()).abs() < 1e-14);
        assert!((e[1][0] - 2f64.sin()).abs() < 1e-14);
        let damp: M3 = [[-300.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
        let e = expm3(&damp);
        assert!(e[0][0].abs() < 1e-100);
        assert!((e[1][1] - (-1f64).exp()).abs() < 1e-12);
    }

    fn rk4_lab(lz: &LzParams, model: &DephasingModel, window: &Window, h: f64) -> Vec<(f64, f64)> {
        let grid = TimeGrid::new(window.start, window.end, h).unwrap();
        let h = grid.step();
        let mut rho = lz::frame(window.start, lz).projector(Branch::Minus);
        let mut out = vec![(window.start, 0.0)];
        for k in 0..grid.steps {
            let t = grid.time(k);
            let k1 = ame_rhs(&rho, t, lz, model);
            let k2 = ame_rhs(&(rho + k1.scale_re(0.5 * h)), t + 0.5 * h, lz, model);
            let k3 = ame_rhs(&(rho + k2.scale_re(0.5 * h)), t + 0.5 * h, lz, model);
            let k4 = ame_rhs(&(rho + k3.scale_re(h)), t + h, lz, model);
            rho = rho + (k1 + (k2 + k3).scale_re(2.0) + k4).scale_re(h / 6.0);
            let tn = grid.time(k + 1);
            out.push((tn, lz::transfer_probability(&rho, tn, lz)));
        }
        out
    }

    #[test]
    fn magnus_matches_lab_frame_rk4() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(5.0).unwrap();
        for gamma0 in [0.3, 2.0] {
            let model = DephasingModel::explicit(gamma0, &lz).unwrap();
            let run = evolve_ame_with(
                &lz::frame(-5.0, &lz).projector(Branch::Minus),
                &window,
                0.01,
                &lz,
                &model,
                usize::MAX,
            )
            .unwrap();
            let reference = rk4_lab(&lz, &model, &window, 2e-4);
            let last = reference.last().unwrap();
            assert!((run.t_final - last.1).abs() < 1e-7, "gamma0 = {gamma0}");
            let mid = run.trajectory.nearest_index(0.0).unwrap();
            let r_mid = reference.iter().min_by(|a, b| a.0.abs().total_cmp(&b.0.abs())).unwrap();
            assert!((run.trajectory.p_values[mid] - r_mid.1).abs() < 1e-7);
        }
    }

    #[test]
    fn coherent_limit_matches_schrodinger() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(5.0).unwrap();
        let dt = lz::schrodinger_dt(&lz, &window);
        let run = evolve_ame_with(
            &lz::frame(-5.0, &lz).projector(Branch::Minus),
            &window,
            dt,
            &lz,
            &DephasingModel::coherent(),
            usize::MAX,
        )
        .unwrap();
        let coherent = lz::coherent_trajectory(&lz, &window, dt, usize::MAX).unwrap();
        assert!(run.trajectory.max_deviation(&coherent) < 1e-8);
    }

    #[test]
    fn avron_function() {
        assert_eq!(avron_q(0.0), 0.0);
        assert!((avron_q(1.0) - 0.650_65).abs() < 1e-5);
        let x = 1e3;
        assert!((x * avron_q(x) / (0.5 * PI) - 1.0).abs() < 5e-3);
        let lz = LzParams::from_adiabaticity(20.0, 1.0).unwrap();
        let model = DephasingModel::explicit(lz.g, &lz).unwrap();
        assert!((asymptotic_infidelity(&lz, &model) - avron_q(1.0) / 40.0).abs() < 1e-15);
        assert_eq!(asymptotic_infidelity(&lz, &DephasingModel::coherent()), 0.0);
    }

    #[test]
    fn relative_infidelity_vanishes_without_dephasing() {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let window = Window::symmetric(5.0).unwrap();
        let d = relative_infidelity(&lz, &DephasingModel::coherent(), &window, 0.01).unwrap();
        assert_eq!(d, 0.0);
    }
}
