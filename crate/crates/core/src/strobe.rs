//! Stroboscopic (pulsed) QND coupling and timing-jitter Monte Carlo.
//!
//! Each pulse is a rectangle of duration `T_P` centred on `j δt`. Inside a
//! pulse the joint Hamiltonian gains `A (a + a†) ⊗ H_S(t + t_j)`; outside it
//! only the bare qubit and the damped meter evolve.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lz::{self, LzParams};
use crate::open::{self, Coupling, EvolveOptions, MeterParams, Protocol, Segment};
use crate::operator::StateReport;
use crate::qubit::Mat2;
use crate::trajectory::{Trajectory, Window};

/// Minimum number of RK4 steps inside one pulse.
pub const MIN_PULSE_STEPS: usize = 20;

/// How the pulse amplitude `A` relates to `x₀` and `T_P`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeConvention {
    /// `A = x₀`.
    #[default]
    Linear,
    /// `A = x₀ / T_P`, so each pulse carries the weight of `x₀ δ(t - jδt)`.
    UnitArea,
}

impl AmplitudeConvention {
    pub fn amplitude(self, x0: f64, t_p: f64) -> f64 {
        match self {
            AmplitudeConvention::Linear => x0,
            AmplitudeConvention::UnitArea => x0 / t_p,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AmplitudeConvention::Linear => "linear",
            AmplitudeConvention::UnitArea => "unit_area",
        }
    }
}

/// Pulse train: centres, common duration and per-pulse timing offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub centers: Vec<f64>,
    pub duration: f64,
    pub shifts: Vec<f64>,
}

impl PulseSchedule {
    pub fn empty(duration: f64) -> Self {
        Self {
            centers: Vec::new(),
            duration,
            shifts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Same pulses with the given timing offsets.
    pub fn with_shifts(mut self, shifts: Vec<f64>) -> Result<Self> {
        if shifts.len() != self.centers.len() {
            return Err(Error::DimensionMismatch {
                expected: self.centers.len(),
                found: shifts.len(),
            });
        }
        if shifts.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite);
        }
        self.shifts = shifts;
        Ok(self)
    }

    /// Pulse intervals clipped to `window`.
    pub fn intervals(&self, window: &Window) -> Vec<(f64, f64)> {
        let half = 0.5 * self.duration;
        self.centers
            .iter()
            .map(|&c| ((c - half).max(window.start), (c + half).min(window.end)))
            .filter(|(a, b)| b > a)
            .collect()
    }
}

/// Pulses centred on every multiple of `delta_t` inside `window`. Pulses at
/// the window edges are clipped to it.
pub fn build_schedule(window: &Window, delta_t: f64, t_p: f64) -> Result<PulseSchedule> {
    if !(t_p > 0.0 && t_p.is_finite()) {
        return Err(Error::param("t_p", format!("pulse duration {t_p} must be positive")));
    }
    if !delta_t.is_finite() || delta_t <= t_p {
        return Err(Error::OverlappingPulses { delta_t, t_p });
    }
    let lo = (window.start / delta_t).ceil() as i64;
    let hi = (window.end / delta_t).floor() as i64;
    let centers: Vec<f64> = (lo..=hi).map(|j| j as f64 * delta_t).collect();
    let shifts = vec![0.0; centers.len()];
    Ok(PulseSchedule {
        centers,
        duration: t_p,
        shifts,
    })
}

/// Step controls for pulsed runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrobeOptions {
    pub convention: AmplitudeConvention,
    /// Step inside pulses; `None` picks [`pulse_dt`].
    pub pulse_dt: Option<f64>,
    pub evolve: EvolveOptions,
}

impl Default for StrobeOptions {
    fn default() -> Self {
        Self {
            convention: AmplitudeConvention::Linear,
            pulse_dt: None,
            evolve: EvolveOptions::default(),
        }
    }
}

/// Step between pulses: the continuous bound with the coupling switched off.
pub fn gap_dt(lz: &LzParams, m: &MeterParams, window: &Window) -> f64 {
    open::lindblad_dt(lz, &m.with_x0(0.0), window)
}

/// Step inside pulses: the continuous bound at `x₀ = A`, and at least
/// [`MIN_PULSE_STEPS`] steps per pulse.
pub fn pulse_dt(lz: &LzParams, m: &MeterParams, window: &Window, amplitude: f64, t_p: f64) -> f64 {
    open::lindblad_dt(lz, &m.with_x0(amplitude), window).min(t_p / MIN_PULSE_STEPS as f64)
}

struct StrobeProtocol {
    lz: LzParams,
    amplitude: f64,
    /// Timing offset of the pulse covering each segment, if any.
    active: Vec<Option<f64>>,
}

impl Protocol for StrobeProtocol {
    fn coupling(&self, t: f64, segment: usize) -> Coupling {
        let bare = lz::hamiltonian_mat2(t, &self.lz);
        let quad = match self.active[segment] {
            Some(shift) => lz::hamiltonian_mat2(t + shift, &self.lz).scale_re(self.amplitude),
            None => Mat2::ZERO,
        };
        Coupling { bare, quad }
    }
}

/// Output of a pulsed run.
#[derive(Clone, Debug)]
pub struct StrobeRun {
    pub trajectory: Trajectory,
    pub t_final: f64,
    pub amplitude: f64,
    pub convention: AmplitudeConvention,
    /// Clipped pulse intervals, in schedule order.
    pub pulses: Vec<(f64, f64)>,
    pub max_meter_tail: f64,
}

/// Pulsed run from `|−⟩_{t_i} ⊗ thermal(n)` with the default options. `dt`
/// is the step between pulses.
pub fn run_stroboscopic(
    lz: &LzParams,
    m: &MeterParams,
    schedule: &PulseSchedule,
    window: &Window,
    dt: f64,
) -> Result<StrobeRun> {
    run_stroboscopic_with(lz, m, schedule, window, dt, &StrobeOptions::default())
}

pub fn run_stroboscopic_with(
    lz: &LzParams,
    m: &MeterParams,
    schedule: &PulseSchedule,
    window: &Window,
    dt: f64,
    opts: &StrobeOptions,
) -> Result<StrobeRun> {
    if schedule.shifts.len() != schedule.centers.len() {
        return Err(Error::DimensionMismatch {
            expected: schedule.centers.len(),
            found: schedule.shifts.len(),
        });
    }
    let t_p = schedule.duration;
    let amplitude = opts.convention.amplitude(m.x0, t_p);
    let h_pulse = opts
        .pulse_dt
        .unwrap_or_else(|| pulse_dt(lz, m, window, amplitude, t_p))
        .min(t_p / MIN_PULSE_STEPS as f64);

    let mut segments = Vec::new();
    let mut active = Vec::new();
    let mut cursor = window.start;
    let half = 0.5 * t_p;
    let mut pulses = Vec::new();
    for (&c, &shift) in schedule.centers.iter().zip(&schedule.shifts) {
        let a = (c - half).max(window.start);
        let b = (c + half).min(window.end);
        if b <= a {
            continue;
        }
        if a < cursor {
            return Err(Error::OverlappingPulses {
                delta_t: a - cursor + t_p,
                t_p,
            });
        }
        if a > cursor {
            segments.push(Segment { start: cursor, end: a, dt });
            active.push(None);
        }
        segments.push(Segment {
            start: a,
            end: b,
            dt: h_pulse,
        });
        active.push(Some(shift));
        pulses.push((a, b));
        cursor = b;
    }
    if cursor < window.end || segments.is_empty() {
        segments.push(Segment {
            start: cursor,
            end: window.end,
            dt,
        });
        active.push(None);
    }

    let protocol = StrobeProtocol {
        lz: *lz,
        amplitude,
        active,
    };
    let rho0 = open::initial_joint_state(window.start, lz, m);
    let run = open::evolve_protocol(&rho0, &segments, lz, m, &protocol, &opts.evolve)?;
    let traj = run.trajectory;
    let tail = traj.max_meter_tail();
    if tail > open::METER_TAIL_WARN {
        log::warn!("meter tail population {tail:e} during pulsed run; increase n_max");
    }
    Ok(StrobeRun {
        t_final: traj.final_p(),
        max_meter_tail: tail,
        trajectory: traj,
        amplitude,
        convention: opts.convention,
        pulses,
    })
}

/// Kink strength of `P(t)` at each pulse: the slope change across the pulse
/// per unit time, divided by the mean slope change per unit time between
/// consecutive stored intervals in the neighbouring pulse-free stretches.
/// NaN where a pulse touches the window edge.
pub fn cusp_ratios(traj: &Trajectory, pulses: &[(f64, f64)]) -> Vec<f64> {
    let n = traj.len();
    let slope = |k: usize| (traj.p_values[k + 1] - traj.p_values[k]) / (traj.times[k + 1] - traj.times[k]);
    let mid = |k: usize| 0.5 * (traj.times[k] + traj.times[k + 1]);
    let idx = |t: f64| traj.times.iter().position(|&s| (s - t).abs() <= 1e-9);
    let mut out = Vec::with_capacity(pulses.len());
    for (j, &(a, b)) in pulses.iter().enumerate() {
        let (Some(ia), Some(ib)) = (idx(a), idx(b)) else {
            out.push(f64::NAN);
            continue;
        };
        if ia == 0 || ib + 1 >= n {
            out.push(f64::NAN);
            continue;
        }
        let (k_in, k_out) = (ia - 1, ib);
        let kink = (slope(k_out) - slope(k_in)).abs() / (mid(k_out) - mid(k_in));

        let lo = if j > 0 { pulses[j - 1].1 } else { f64::NEG_INFINITY };
        let hi = pulses.get(j + 1).map_or(f64::INFINITY, |p| p.0);
        let in_gap = |k: usize| {
            let (t0, t1) = (traj.times[k], traj.times[k + 1]);
            t1 > t0 && ((t0 >= lo - 1e-9 && t1 <= a + 1e-9) || (t0 >= b - 1e-9 && t1 <= hi + 1e-9))
        };
        let mut sum = 0.0;
        let mut count = 0usize;
        for k in 0..n.saturating_sub(2) {
            if in_gap(k) && in_gap(k + 1) && traj.times[k + 1] != a {
                sum += (slope(k + 1) - slope(k)).abs() / (mid(k + 1) - mid(k));
                count += 1;
            }
        }
        out.push(if count == 0 { f64::NAN } else { kink / (sum / count as f64) });
    }
    out
}

/// Timing-jitter statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation of the uniform shift distribution.
    pub tau: f64,
    pub n_it: usize,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(tau: f64, n_it: usize, seed: u64) -> Result<Self> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(Error::param("tau", format!("{tau} must be finite and non-negative")));
        }
        if n_it < 2 {
            return Err(Error::param("n_it", "at least two samples are required"));
        }
        Ok(Self { tau, n_it, seed })
    }

    /// Shifts for `sample`, uniform on `[−√3 τ, √3 τ]`. ChaCha8 keyed by
    /// `seed` with the sample index as stream number.
    pub fn shifts(&self, sample: u64, count: usize) -> Vec<f64> {
        if self.tau == 0.0 {
            return vec![0.0; count];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(sample);
        let half = 3f64.sqrt() * self.tau;
        (0..count).map(|_| rng.random_range(-half..=half)).collect()
    }
}

/// Sample-averaged pulsed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCSummary {
    pub times: Vec<f64>,
    pub mean_p: Vec<f64>,
    /// `sample_std / sqrt(n_it)` at each time.
    pub stderr: Vec<f64>,
    /// Final `P` of every sample, in sample order.
    pub finals: Vec<f64>,
    pub seed: u64,
    pub tau: f64,
    pub delta_t: f64,
    pub convention: AmplitudeConvention,
    /// Worst state report over all samples.
    pub worst_state: StateReport,
    pub max_meter_tail: f64,
}

impl MCSummary {
    pub fn mean_final(&self) -> f64 {
        self.mean_p.last().copied().unwrap_or(f64::NAN)
    }

    pub fn stderr_final(&self) -> f64 {
        self.stderr.last().copied().unwrap_or(f64::NAN)
    }
}

/// Monte Carlo over timing offsets with pulses of duration `1/x₀`.
pub fn run_noisy_mc(
    lz: &LzParams,
    m: &MeterParams,
    delta_t: f64,
    noise: &NoiseSpec,
    window: &Window,
    dt: f64,
) -> Result<MCSummary> {
    if !(m.x0 > 0.0) {
        return Err(Error::param("x0", "pulse duration 1/x0 needs x0 > 0"));
    }
    let schedule = build_schedule(window, delta_t, 1.0 / m.x0)?;
    run_noisy_mc_with(lz, m, &schedule, delta_t, noise, window, dt, &StrobeOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn run_noisy_mc_with(
    lz: &LzParams,
    m: &MeterParams,
    schedule: &PulseSchedule,
    delta_t: f64,
    noise: &NoiseSpec,
    window: &Window,
    dt: f64,
    opts: &StrobeOptions,
) -> Result<MCSummary> {
    let noise = NoiseSpec::new(noise.tau, noise.n_it, noise.seed)?;
    let runs = (0..noise.n_it)
        .into_par_iter()
        .map(|i| {
            let shifts = noise.shifts(i as u64, schedule.len());
            let sched = schedule.clone().with_shifts(shifts)?;
            run_stroboscopic_with(lz, m, &sched, window, dt, opts)
        })
        .collect::<Result<Vec<_>>>()?;

    let times = runs[0].trajectory.times.clone();
    if runs.iter().any(|r| r.trajectory.times != times) {
        return Err(Error::param("schedule", "samples produced different time grids"));
    }
    let n = runs.len() as f64;
    let mut mean_p = vec![0.0; times.len()];
    let mut stderr = vec![0.0; times.len()];
    for (k, (mu, se)) in mean_p.iter_mut().zip(stderr.iter_mut()).enumerate() {
        // offset from the first sample keeps identical samples exact
        let base = runs[0].trajectory.p_values[k];
        let mut sum = 0.0;
        for r in &runs {
            sum += r.trajectory.p_values[k] - base;
        }
        let mean = base + sum / n;
        let mut ss = 0.0;
        for r in &runs {
            let d = r.trajectory.p_values[k] - mean;
            ss += d * d;
        }
        *mu = mean;
        *se = (ss / (n - 1.0)).sqrt() / n.sqrt();
    }
    Ok(MCSummary {
        times,
        mean_p,
        stderr,
        finals: runs.iter().map(|r| r.t_final).collect(),
        seed: noise.seed,
        tau: noise.tau,
        delta_t,
        convention: opts.convention,
        worst_state: runs
            .iter()
            .map(|r| r.trajectory.worst_report())
            .reduce(StateReport::merge)
            .expect("n_it >= 2"),
        max_meter_tail: runs.iter().fold(0.0, |a, r| a.max(r.max_meter_tail)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Occupancy;

    fn small() -> (LzParams, MeterParams, Window) {
        let lz = LzParams::new(1.0, 1.0).unwrap();
        let m = MeterParams::new(1.0, 2.0, Occupancy::Mean(0.0), 2.0, 12).unwrap();
        (lz, m, Window::new(-2.0, 2.0).unwrap())
    }

    #[test]
    fn schedule_clips_edges() {
        let w = Window::new(-5.0, 5.0).unwrap();
        let s = build_schedule(&w, 1.0, 0.1).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s.centers[0], -5.0);
        assert_eq!(s.centers[10], 5.0);
        let iv = s.intervals(&w);
        assert_eq!(iv[0], (-5.0, -4.95));
        assert_eq!(iv[10], (4.95, 5.0));
        assert!(s.shifts.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn schedule_single_and_overlap() {
        let w = Window::new(-5.0, 5.0).unwrap();
        let s = build_schedule(&w, 20.0, 0.1).unwrap();
        assert_eq!(s.centers, vec![0.0]);
        assert!(matches!(build_schedule(&w, 0.1, 0.1), Err(Error::OverlappingPulses { .. })));
        assert!(matches!(build_schedule(&w, 0.05, 0.1), Err(Error::OverlappingPulses { .. })));
    }

    #[test]
    fn amplitude_conventions() {
        assert_eq!(AmplitudeConvention::Linear.amplitude(10.0, 0.1), 10.0);
        assert!((AmplitudeConvention::UnitArea.amplitude(10.0, 0.1) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn empty_schedule_matches_uncoupled_run() {
        let (lz, m, w) = small();
        let dt = 0.01;
        let run = run_stroboscopic(&lz, &m, &PulseSchedule::empty(0.5), &w, dt).unwrap();
        let reference = open::run_continuous(&lz, &m.with_x0(0.0), &w, dt).unwrap();
        assert!((run.t_final - reference.t_final).abs() < 1e-12);
        assert!(run.pulses.is_empty());
    }

    #[test]
    fn pulse_covering_window_matches_continuous_run() {
        let (lz, m, w) = small();
        let sched = PulseSchedule {
            centers: vec![0.0],
            duration: 10.0,
            shifts: vec![0.0],
        };
        let opts = StrobeOptions {
            pulse_dt: Some(0.005),
            ..Default::default()
        };
        let run = run_stroboscopic_with(&lz, &m, &sched, &w, 0.005, &opts).unwrap();
        let reference = open::run_continuous(&lz, &m, &w, 0.005).unwrap();
        assert!((run.t_final - reference.t_final).abs() < 1e-6, "{} vs {}", run.t_final, reference.t_final);
    }

    #[test]
    fn shifts_are_seeded_and_bounded() {
        let spec = NoiseSpec::new(0.2, 4, 99).unwrap();
        let a = spec.shifts(3, 50);
        assert_eq!(a, spec.shifts(3, 50));
        assert_ne!(a, spec.shifts(2, 50));
        let half = 3f64.sqrt() * 0.2;
        assert!(a.iter().all(|x| x.abs() <= half));
        assert!(NoiseSpec::new(0.1, 1, 0).is_err());
        assert_eq!(NoiseSpec::new(0.0, 2, 0).unwrap().shifts(0, 3), vec![0.0; 3]);
    }

    #[test]
    fn zero_jitter_has_zero_stderr() {
        let (lz, m, w) = small();
        let noise = NoiseSpec::new(0.0, 3, 5).unwrap();
        let mc = run_noisy_mc(&lz, &m, 1.0, &noise, &w, 0.01).unwrap();
        assert!(mc.stderr.iter().all(|s| *s == 0.0));
        assert!(mc.finals.windows(2).all(|f| f[0] == f[1]));
        let sched = build_schedule(&w, 1.0, 0.5).unwrap();
        let perfect = run_stroboscopic(&lz, &m, &sched, &w, 0.01).unwrap();
        assert_eq!(mc.mean_final(), perfect.t_final);
    }

    #[test]
    fn cusp_ratio_flags_kinks_only() {
        use crate::trajectory::SampleDiagnostics;
        // P = 0.1 t² with a slope drop of 0.5 across the pulse [1, 1.1]
        let mut kinked = Trajectory::default();
        let mut smooth = Trajectory::default();
        for k in 0..=300 {
            let t = k as f64 * 0.01;
            let base = 0.1 * t * t;
            let u = (t - 1.0).clamp(0.0, 0.1);
            let drop = -2.5 * u * u - 0.5 * (t - 1.1).max(0.0);
            kinked.push(t, base + drop, SampleDiagnostics::default());
            smooth.push(t, base, SampleDiagnostics::default());
        }
        let pulses = [(1.0, 1.1)];
        let r_kink = cusp_ratios(&kinked, &pulses)[0];
        let r_smooth = cusp_ratios(&smooth, &pulses)[0];
        assert!(r_kink > 10.0, "{r_kink}");
        assert!((r_smooth - 1.0).abs() < 1e-6, "{r_smooth}");
        assert!(cusp_ratios(&smooth, &[(0.0, 0.1)])[0].is_nan());
    }
}
