//! Closed Landau–Zener qubit: `H(t) = (εt/2) σ_z + (g/2) σ_x`.
//!
//! Instantaneous basis, analytic infidelity laws, coherent RK4 propagation
//! and the first-order adiabatic-perturbation amplitude.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{CMatrix, ZERO};
use crate::qubit::Mat2;
use crate::trajectory::{SampleDiagnostics, TimeGrid, Trajectory, Window};

/// Sweep parameters: gap `g` at the anticrossing and sweep rate `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LzParams {
    pub g: f64,
    pub eps: f64,
}

impl LzParams {
    pub fn new(g: f64, eps: f64) -> Result<Self> {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(Error::param("g", format!("{g} must be >= 0")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::param("eps", format!("{eps} must be > 0")));
        }
        Ok(Self { g, eps })
    }

    /// Parameters with adiabaticity `g²/ε = ratio` at sweep rate `eps`.
    pub fn from_adiabaticity(ratio: f64, eps: f64) -> Result<Self> {
        if !(ratio >= 0.0) {
            return Err(Error::param("g2_over_eps", format!("{ratio} must be >= 0")));
        }
        Self::new((ratio * eps).sqrt(), eps)
    }

    pub fn adiabaticity(&self) -> f64 {
        self.g * self.g / self.eps
    }

    /// Instantaneous gap `E₊ − E₋ = sqrt(g² + ε²t²)`.
    pub fn gap(&self, t: f64) -> f64 {
        self.g.hypot(self.eps * t)
    }

    /// `[-s g/ε, +s g/ε]`.
    pub fn window_in_gap_units(&self, s: f64) -> Result<Window> {
        if self.g <= 0.0 {
            return Err(Error::param("g", "windows in units of g/eps need g > 0"));
        }
        Window::symmetric(s * self.g / self.eps)
    }

    /// Symmetric window of half-width `20 max(g, sqrt ε)/ε` used for
    /// infinite-time comparisons.
    pub fn long_window(&self) -> Window {
        Window::symmetric(20.0 * self.g.max(self.eps.sqrt()) / self.eps)
            .expect("positive half-width")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

pub fn hamiltonian(t: f64, p: &LzParams) -> CMatrix {
    hamiltonian_mat2(t, p).to_cmatrix()
}

pub fn hamiltonian_mat2(t: f64, p: &LzParams) -> Mat2 {
    let z = 0.5 * p.eps * t;
    let x = 0.5 * p.g;
    Mat2::real(z, x, x, -z)
}

/// Instantaneous eigenbasis on the continuous branch `θ = atan2(g, εt)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdiabaticFrame {
    pub t: f64,
    pub theta: f64,
    pub plus_state: [f64; 2],
    pub minus_state: [f64; 2],
    pub e_plus: f64,
    pub e_minus: f64,
}

impl AdiabaticFrame {
    pub fn state(&self, branch: Branch) -> [f64; 2] {
        match branch {
            Branch::Plus => self.plus_state,
            Branch::Minus => self.minus_state,
        }
    }

    pub fn projector(&self, branch: Branch) -> Mat2 {
        let v = self.state(branch);
        Mat2::outer_real(v, v)
    }
}

pub fn adiabatic_frame(t: f64, p: &LzParams) -> Result<AdiabaticFrame> {
    if p.g == 0.0 && t == 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(frame(t, p))
}

/// Infallible frame; at the degenerate point it returns θ = 0.
pub(crate) fn frame(t: f64, p: &LzParams) -> AdiabaticFrame {
    let theta = p.g.atan2(p.eps * t);
    let (s, c) = (0.5 * theta).sin_cos();
    let half_gap = 0.5 * p.gap(t);
    AdiabaticFrame {
        t,
        theta,
        plus_state: [c, s],
        minus_state: [-s, c],
        e_plus: half_gap,
        e_minus: -half_gap,
    }
}

/// `T = exp(−π g² / 2ε)`.
pub fn lz_infidelity_asymptotic(p: &LzParams) -> f64 {
    (-std::f64::consts::PI * p.g * p.g / (2.0 * p.eps)).exp()
}

/// Leading finite-window edge contribution
/// `(ε²/16g⁴) [g⁶/(g²+ε²t₁²)³ + g⁶/(g²+ε²t₂²)³]`.
pub fn lz_infidelity_finite(t1: f64, t2: f64, p: &LzParams) -> f64 {
    let edge = |t: f64| {
        if p.eps * t.abs() < p.g {
            log::warn!("finite-window formula used at t = {t} inside |eps t| < g");
        }
        let g2 = p.g * p.g;
        let d = g2 + p.eps * p.eps * t * t;
        g2 * g2 * g2 / (d * d * d)
    };
    let g4 = p.g.powi(4);
    if g4 == 0.0 {
        return 0.0;
    }
    p.eps * p.eps / (16.0 * g4) * (edge(t1) + edge(t2))
}

/// `⟨+|ρ|+⟩_t`.
pub fn transfer_probability(rho: &Mat2, t: f64, p: &LzParams) -> f64 {
    rho.expect_real(frame(t, p).plus_state).re
}

pub fn transfer_probability_matrix(rho: &CMatrix, t: f64, p: &LzParams) -> f64 {
    transfer_probability(&Mat2::from_cmatrix(rho), t, p)
}

/// Step bound `0.02 min(1/sqrt(g² + ε² t_max²), 1/g)`; keeps the RK4 norm
/// drift over the long window well inside [`NORM_DRIFT_TOL`].
pub fn schrodinger_dt(p: &LzParams, window: &Window) -> f64 {
    let mut dt = 0.02 / p.gap(window.max_abs_time());
    if p.g > 0.0 {
        dt = dt.min(0.02 / p.g);
    }
    dt
}

/// Stored pure-state evolution.
#[derive(Clone, Debug)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<[C64; 2]>,
}

impl StateTrajectory {
    pub fn transfer_probabilities(&self, p: &LzParams) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, psi)| amplitude(psi, frame(t, p).plus_state).norm_sqr())
            .collect()
    }

    pub fn last(&self) -> (f64, [C64; 2]) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }
}

fn amplitude(psi: &[C64; 2], v: [f64; 2]) -> C64 {
    psi[0] * v[0] + psi[1] * v[1]
}

pub const NORM_DRIFT_TOL: f64 = 1e-8;

/// RK4 on `i ∂ψ/∂t = H(t) ψ` from `t1` to `t2`; every step is stored.
pub fn propagate_schrodinger(
    psi0: [C64; 2],
    t1: f64,
    t2: f64,
    p: &LzParams,
    dt: f64,
) -> Result<StateTrajectory> {
    let norm0 = psi0[0].norm_sqr() + psi0[1].norm_sqr();
    if !((norm0 - 1.0).abs() <= NORM_DRIFT_TOL) {
        return Err(Error::param("psi0", format!("norm^2 = {norm0} is not 1")));
    }
    let grid = TimeGrid::new(t1, t2, dt)?;
    let h = grid.step();
    let mi = C64::new(0.0, -1.0);
    let f = |t: f64, y: [C64; 2]| {
        let v = hamiltonian_mat2(t, p).apply(y);
        [v[0] * mi, v[1] * mi]
    };
    let axpy = |y: [C64; 2], a: f64, k: [C64; 2]| [y[0] + k[0] * a, y[1] + k[1] * a];

    let mut times = Vec::with_capacity(grid.steps + 1);
    let mut states = Vec::with_capacity(grid.steps + 1);
    let mut y = psi0;
    times.push(t1);
    states.push(y);
    for k in 0..grid.steps {
        let t = grid.time(k);
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, axpy(y, 0.5 * h, k1));
        let k3 = f(t + 0.5 * h, axpy(y, 0.5 * h, k2));
        let k4 = f(t + h, axpy(y, h, k3));
        for i in 0..2 {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        times.push(grid.time(k + 1));
        states.push(y);
    }
    let drift = (y[0].norm_sqr() + y[1].norm_sqr() - 1.0).abs();
    if !(drift <= NORM_DRIFT_TOL) {
        return Err(Error::NormDrift {
            drift,
            tol: NORM_DRIFT_TOL,
        });
    }
    Ok(StateTrajectory { times, states })
}

/// Coherent `P(t)` starting from `|−⟩_{t_i}`, keeping about `samples` points.
pub fn coherent_trajectory(
    p: &LzParams,
    window: &Window,
    dt: f64,
    samples: usize,
) -> Result<Trajectory> {
    let psi0 = minus_ket(window.start, p);
    let states = propagate_schrodinger(psi0, window.start, window.end, p, dt)?;
    let grid = TimeGrid::new(window.start, window.end, dt)?;
    let stride = grid.stride_for(samples);
    let probs = states.transfer_probabilities(p);
    let mut traj = Trajectory::with_capacity(grid.steps / stride + 2);
    for k in 0..=grid.steps {
        if k % stride == 0 || k == grid.steps {
            traj.push(states.times[k], probs[k], SampleDiagnostics::default());
        }
    }
    Ok(traj)
}

pub fn minus_ket(t: f64, p: &LzParams) -> [C64; 2] {
    let v = frame(t, p).minus_state;
    [C64::new(v[0], 0.0), C64::new(v[1], 0.0)]
}

/// Infinite-time infidelity estimate: coherent run over the long window,
/// averaged over its trailing 10 %.
pub fn trailing_average_infidelity(p: &LzParams, dt: f64) -> Result<f64> {
    let window = p.long_window();
    let traj = coherent_trajectory(p, &window, dt, usize::MAX)?;
    Ok(traj.mean_p_after(window.end - 0.1 * window.duration()))
}

/// `∫ sqrt(g² + ε²τ²) dτ` from 0 to `t`, closed form.
pub(crate) fn gap_integral(t: f64, p: &LzParams) -> f64 {
    if p.g == 0.0 {
        return 0.5 * p.eps * t * t.abs();
    }
    0.5 * (t * p.gap(t) + p.g * p.g / p.eps * (p.eps * t / p.g).asinh())
}

/// `μ_a(t, t') = ∫_{t'}^{t} E_a(τ) dτ` by composite Simpson. The geometric
/// term `⟨a|ȧ⟩` vanishes for the real eigenvectors.
pub fn accumulated_phase(branch: Branch, t_prime: f64, t: f64, p: &LzParams) -> Result<f64> {
    if t_prime > t {
        return Err(Error::InvalidWindow {
            start: t_prime,
            end: t,
        });
    }
    let half_gap = |tau: f64| 0.5 * p.gap(tau);
    let h_max = phase_quadrature_step(p);
    // split at the anticrossing where the g = 0 integrand has a kink
    let total = if t_prime < 0.0 && t > 0.0 {
        simpson(half_gap, t_prime, 0.0, h_max) + simpson(half_gap, 0.0, t, h_max)
    } else {
        simpson(half_gap, t_prime, t, h_max)
    };
    Ok(branch.sign() * total)
}

fn phase_quadrature_step(p: &LzParams) -> f64 {
    let scale = if p.g > 0.0 { p.g.max(p.eps.sqrt()) } else { p.eps.sqrt() };
    0.02 * scale / p.eps
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, h_max: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut n = ((b - a) / h_max).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// First-order amplitude
/// `α₊₋(t,t') = ½ ∫_{t'}^{t} dτ gε/(g²+ε²τ²) exp[i ∫_{t'}^{τ} sqrt(g²+ε²u²) du]`.
///
/// Composite Simpson on the outer integral; the inner phase is accumulated
/// panel by panel on the same nodes.
pub fn apt_alpha(t_prime: f64, t: f64, p: &LzParams) -> Result<C64> {
    if t_prime > t {
        return Err(Error::InvalidWindow {
            start: t_prime,
            end: t,
        });
    }
    if t == t_prime || p.g == 0.0 {
        return Ok(ZERO);
    }
    let max_gap = p.gap(t_prime.abs().max(t.abs()));
    let h_max = (0.01 * p.g / p.eps).min(0.02 / max_gap);
    let mut n = ((t - t_prime) / h_max).ceil() as usize;
    n = n.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    let h = (t - t_prime) / n as f64;
    let weight = |tau: f64| 0.5 * p.g * p.eps / (p.g * p.g + p.eps * p.eps * tau * tau);

    let mut phase = 0.0;
    let mut acc = ZERO;
    for k in 0..=n {
        let tau = t_prime + k as f64 * h;
        if k > 0 {
            let a = tau - h;
            phase += h / 6.0 * (p.gap(a) + 4.0 * p.gap(a + 0.5 * h) + p.gap(tau));
        }
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += C64::from_polar(w * weight(tau), phase);
    }
    Ok(acc * (h / 3.0))
}

/// `α₋₊ = −α₊₋*`.
pub fn apt_alpha_minus_plus(t_prime: f64, t: f64, p: &LzParams) -> Result<C64> {
    Ok(-apt_alpha(t_prime, t, p)?.conj())
}

/// Upper-branch amplitude in the adiabatic interaction picture, phase-
/// referenced to the lower-branch amplitude: `|c̃₊| = |⟨+|ψ⟩|` and `c̃₊` is
/// stationary once diabatic transitions stop.
pub fn interaction_picture_amplitude(psi: &[C64; 2], t: f64, p: &LzParams) -> C64 {
    let fr = frame(t, p);
    let cp = amplitude(psi, fr.plus_state);
    let cm = amplitude(psi, fr.minus_state);
    let reference = if cm.norm() > 0.0 { cm.conj() / cm.norm() } else { C64::new(1.0, 0.0) };
    cp * reference * C64::from_polar(1.0, gap_integral(t, p))
}

/// Edge weight of a symmetric window `[−s g/ε, s g/ε]`, extracted from the
/// coherent dynamics as the incoherent sum of the start-edge and end-edge
/// amplitudes. Each amplitude is the shift of the stationary
/// interaction-picture amplitude `c̃₊` relative to a run over the long
/// window.
pub fn finite_window_edge_weight(p: &LzParams, s: f64, dt: f64) -> Result<f64> {
    let edge = p.window_in_gap_units(s)?;
    let long = p.long_window();
    if long.end <= edge.end {
        return Err(Error::param("s", "window must be shorter than the long window"));
    }
    let reference = propagate_schrodinger(minus_ket(long.start, p), long.start, long.end, p, dt)?;
    let (t_ref, psi_ref) = reference.last();
    let c_inf = interaction_picture_amplitude(&psi_ref, t_ref, p);

    let to_edge = propagate_schrodinger(minus_ket(edge.start, p), edge.start, edge.end, p, dt)?;
    let (t_e, psi_e) = to_edge.last();
    let c_edge = interaction_picture_amplitude(&psi_e, t_e, p);
    let beyond = propagate_schrodinger(psi_e, edge.end, long.end, p, dt)?;
    let (t_l, psi_l) = beyond.last();
    let c_late = interaction_picture_amplitude(&psi_l, t_l, p);

    Ok((c_late - c_inf).norm_sqr() + (c_edge - c_late).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::hermitian_eig;

    fn unit() -> LzParams {
        LzParams::new(1.0, 1.0).unwrap()
    }

    #[test]
    fn hamiltonian_entries() {
        let p = LzParams::new(1.0, 0.7).unwrap();
        let h = hamiltonian_mat2(0.0, &p);
        assert_eq!(h, Mat2::real(0.0, 0.5, 0.5, 0.0));
        let p0 = LzParams::new(0.0, 2.0).unwrap();
        assert_eq!(hamiltonian_mat2(1.5, &p0), Mat2::real(1.5, 0.0, 0.0, -1.5));
        let (t, g, e) = (-1.3, 0.4, 2.2);
        let h = hamiltonian(t, &LzParams::new(g, e).unwrap());
        assert_eq!(h[(0, 0)].re, e * t / 2.0);
        assert_eq!(h[(0, 1)].re, g / 2.0);
        assert_eq!(h[(1, 0)].re, g / 2.0);
        assert_eq!(h[(1, 1)].re, -e * t / 2.0);
    }

    #[test]
    fn eigenenergies_at_anticrossing() {
        let eig = hermitian_eig(&hamiltonian(0.0, &unit())).unwrap();
        assert!((eig.values[0] + 0.5).abs() < 1e-15);
        assert!((eig.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn frame_limits_and_symmetry() {
        let p = unit();
        let far = adiabatic_frame(-1e9, &p).unwrap();
        assert!((far.minus_state[0].abs() - 1.0).abs() < 1e-9);
        let late = adiabatic_frame(1e9, &p).unwrap();
        assert!((late.minus_state[1].abs() - 1.0).abs() < 1e-9);
        let mid = adiabatic_frame(0.0, &p).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((mid.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((mid.minus_state[0] + s).abs() < 1e-15 && (mid.minus_state[1] - s).abs() < 1e-15);
        assert!(matches!(
            adiabatic_frame(0.0, &LzParams::new(0.0, 1.0).unwrap()),
            Err(Error::DegenerateSpectrum)
        ));
    }

    #[test]
    fn frame_eigen_residual_matches_eigensolver() {
        let p = LzParams::new(0.8, 1.7).unwrap();
        let mut prev_theta = f64::INFINITY;
        for k in 0..200 {
            let t = -6.0 + 0.06 * k as f64;
            let fr = adiabatic_frame(t, &p).unwrap();
            let h = hamiltonian_mat2(t, &p);
            for (v, e) in [(fr.plus_state, fr.e_plus), (fr.minus_state, fr.e_minus)] {
                let hv = h.apply([C64::new(v[0], 0.0), C64::new(v[1], 0.0)]);
                let res = ((hv[0].re - e * v[0]).powi(2) + (hv[1].re - e * v[1]).powi(2)).sqrt();
                assert!(res < 1e-12);
            }
            let dot = fr.plus_state[0] * fr.minus_state[0] + fr.plus_state[1] * fr.minus_state[1];
            assert!(dot.abs() < 1e-12);
            assert!(fr.theta < prev_theta);
            prev_theta = fr.theta;
            let mirror = adiabatic_frame(-t, &p).unwrap();
            assert!((mirror.theta - (std::f64::consts::PI - fr.theta)).abs() < 1e-12);
            let eig = hermitian_eig(&h.to_cmatrix()).unwrap();
            assert!((eig.values[0] - fr.e_minus).abs() < 1e-12);
            assert!((eig.values[1] - fr.e_plus).abs() < 1e-12);
        }
    }

    #[test]
    fn asymptotic_law_values() {
        let t1 = lz_infidelity_asymptotic(&LzParams::from_adiabaticity(1.0, 1.0).unwrap());
        assert!((t1 - 0.207880).abs() < 5e-7);
        assert_eq!(lz_infidelity_asymptotic(&LzParams::new(0.0, 1.0).unwrap()), 1.0);
        let t4 = lz_infidelity_asymptotic(&LzParams::from_adiabaticity(4.0, 1.0).unwrap());
        assert!((t4 - 1.8674e-3).abs() < 1e-7);
        let mut prev = 2.0;
        for k in 0..20 {
            let v = lz_infidelity_asymptotic(&LzParams::from_adiabaticity(0.25 * k as f64, 1.0).unwrap());
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn finite_window_formula() {
        let p = unit();
        let v = lz_infidelity_finite(-5.0, 5.0, &p);
        assert!((v - 1.0 / 140608.0).abs() < 1e-18);
        assert!(lz_infidelity_finite(-1e6, 1e6, &p) < 1e-30);
        let half = lz_infidelity_finite(-5.0, 1e9, &p);
        assert!((2.0 * half - v).abs() < 1e-18);
    }

    #[test]
    fn transfer_probability_basics() {
        let p = unit();
        let t = 0.7;
        let fr = frame(t, &p);
        assert!(transfer_probability(&fr.projector(Branch::Minus), t, &p).abs() < 1e-15);
        assert!((transfer_probability(&fr.projector(Branch::Plus), t, &p) - 1.0).abs() < 1e-15);
        assert!((transfer_probability(&Mat2::IDENTITY.scale_re(0.5), t, &p) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn decoupled_sweep_is_pure_dephasing() {
        let p = LzParams::new(0.0, 1.3).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi0 = [C64::new(s, 0.0), C64::new(0.0, s)];
        let traj = propagate_schrodinger(psi0, 0.0, 3.0, &p, 1e-3).unwrap();
        for (&t, psi) in traj.times.iter().zip(&traj.states) {
            let phase = p.eps * t * t / 4.0;
            let up = psi0[0] * C64::from_polar(1.0, -phase);
            let down = psi0[1] * C64::from_polar(1.0, phase);
            assert!((psi[0] - up).norm() < 1e-9 && (psi[1] - down).norm() < 1e-9);
        }
    }

    #[test]
    fn norm_conserved_and_coarse_step_rejected() {
        let p = unit();
        let traj = propagate_schrodinger(minus_ket(-5.0, &p), -5.0, 5.0, &p, 0.005).unwrap();
        let (_, psi) = traj.last();
        assert!((psi[0].norm_sqr() + psi[1].norm_sqr() - 1.0).abs() < 1e-8);
        let coarse = propagate_schrodinger(minus_ket(-40.0, &p), -40.0, 40.0, &p, 0.5);
        assert!(matches!(coarse, Err(Error::NormDrift { .. })));
    }

    #[test]
    fn accumulated_phase_quadrature() {
        let p = LzParams::new(0.9, 1.4).unwrap();
        assert_eq!(accumulated_phase(Branch::Plus, 1.0, 1.0, &p).unwrap(), 0.0);
        for (a, b) in [(-4.0, 3.0), (0.5, 6.0), (-7.0, -1.0)] {
            let exact = 0.5 * (gap_integral(b, &p) - gap_integral(a, &p));
            let mu = accumulated_phase(Branch::Plus, a, b, &p).unwrap();
            assert!(((mu - exact) / exact).abs() < 1e-8, "{mu} vs {exact}");
            let mu_minus = accumulated_phase(Branch::Minus, a, b, &p).unwrap();
            assert_eq!(mu_minus, -mu);
        }
        let p0 = LzParams::new(0.0, 2.0).unwrap();
        let t = 3.0;
        let mu = accumulated_phase(Branch::Plus, 0.0, t, &p0).unwrap();
        assert!((mu - p0.eps * t * t / 4.0).abs() < 1e-12);
        assert!(accumulated_phase(Branch::Plus, 2.0, 1.0, &p).is_err());
    }

    #[test]
    fn eigenvectors_are_real_so_geometric_term_vanishes() {
        // <a|ȧ> by central difference of the real continuous-branch vectors
        let p = LzParams::new(0.6, 1.1).unwrap();
        for k in 0..50 {
            let t = -3.0 + 0.12 * k as f64;
            let dt = 1e-6;
            for b in [Branch::Plus, Branch::Minus] {
                let v = frame(t, &p).state(b);
                let vp = frame(t + dt, &p).state(b);
                let vm = frame(t - dt, &p).state(b);
                let dot = v[0] * (vp[0] - vm[0]) / (2.0 * dt) + v[1] * (vp[1] - vm[1]) / (2.0 * dt);
                assert!(dot.abs() < 1e-8);
            }
        }
    }

    #[test]
    fn apt_alpha_definition_checks() {
        let p = unit();
        assert_eq!(apt_alpha(1.0, 1.0, &p).unwrap(), ZERO);
        let a = apt_alpha(-3.0, 2.0, &p).unwrap();
        let b = apt_alpha_minus_plus(-3.0, 2.0, &p).unwrap();
        assert_eq!(b, -a.conj());
        assert!(apt_alpha(2.0, 1.0, &p).is_err());
    }

    #[test]
    fn apt_alpha_tracks_schrodinger_in_adiabatic_regime() {
        let p = LzParams::from_adiabaticity(10.0, 1.0).unwrap();
        let w = p.window_in_gap_units(5.0).unwrap();
        let alpha = apt_alpha(w.start, w.end, &p).unwrap();
        let dt = schrodinger_dt(&p, &w).min(2e-3);
        let traj = propagate_schrodinger(minus_ket(w.start, &p), w.start, w.end, &p, dt).unwrap();
        let numeric = traj.transfer_probabilities(&p).last().copied().unwrap();
        let rel = (alpha.norm_sqr() - numeric).abs() / numeric;
        assert!(rel < 0.2, "|alpha|^2 = {:e}, P = {numeric:e}", alpha.norm_sqr());
    }
}
