//! Acceptance suite behind `verify`.
//!
//! Each criterion runs its own simulations and returns named checks with the
//! measured value and the bound it was held to. State diagnostics of every
//! run are folded into an [`Audit`]; criterion 12 checks the union.

use std::f64::consts::PI;
use std::time::Instant;

use lzqnd_core::ame::{self, DephasingModel};
use lzqnd_core::lz::{self, LzParams};
use lzqnd_core::nonmarkov::{self, PairGrid};
use lzqnd_core::open::{self, MeterParams};
use lzqnd_core::operator::{thermal_tail, Occupancy, StateReport, StateTolerances};
use lzqnd_core::strobe::{self, NoiseSpec, StrobeOptions};
use lzqnd_core::trajectory::Trajectory;
use lzqnd_core::Window;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Comparison that must hold: `measured <relation> bound`.
    pub relation: String,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn cmp(name: &str, measured: f64, relation: &str, bound: f64) -> Self {
        let pass = match relation {
            "<=" => measured <= bound,
            "<" => measured < bound,
            ">=" => measured >= bound,
            ">" => measured > bound,
            _ => unreachable!("relation {relation}"),
        };
        Self {
            name: name.to_string(),
            measured,
            relation: relation.to_string(),
            bound,
            pass,
            detail: String::new(),
        }
    }

    pub fn le(name: &str, measured: f64, bound: f64) -> Self {
        Self::cmp(name, measured, "<=", bound)
    }

    pub fn lt(name: &str, measured: f64, bound: f64) -> Self {
        Self::cmp(name, measured, "<", bound)
    }

    pub fn ge(name: &str, measured: f64, bound: f64) -> Self {
        Self::cmp(name, measured, ">=", bound)
    }

    pub fn gt(name: &str, measured: f64, bound: f64) -> Self {
        Self::cmp(name, measured, ">", bound)
    }

    /// Boolean property, stored as 1 or 0 against `>= 1`.
    pub fn holds(name: &str, ok: bool) -> Self {
        Self::cmp(name, if ok { 1.0 } else { 0.0 }, ">=", 1.0)
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }
}

/// Worst state diagnostics over a set of runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub runs: usize,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub max_meter_tail: f64,
}

impl Default for Audit {
    fn default() -> Self {
        Self {
            runs: 0,
            max_trace_error: 0.0,
            max_hermiticity_error: 0.0,
            min_eigenvalue: f64::INFINITY,
            max_meter_tail: 0.0,
        }
    }
}

impl Audit {
    pub fn add(&mut self, r: StateReport, tail: f64) {
        self.runs += 1;
        self.max_trace_error = self.max_trace_error.max(r.trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(r.hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(r.min_eigenvalue);
        self.max_meter_tail = self.max_meter_tail.max(tail);
    }

    pub fn add_trajectory(&mut self, t: &Trajectory) {
        self.add(t.worst_report(), t.max_meter_tail());
    }

    /// Pure-state runs: the norm is guarded inside the propagator.
    pub fn add_pure(&mut self) {
        self.add(
            StateReport {
                trace_error: 0.0,
                hermiticity_error: 0.0,
                min_eigenvalue: 0.0,
            },
            0.0,
        );
    }

    pub fn merge(&mut self, o: &Audit) {
        self.runs += o.runs;
        self.max_trace_error = self.max_trace_error.max(o.max_trace_error);
        self.max_hermiticity_error = self.max_hermiticity_error.max(o.max_hermiticity_error);
        self.min_eigenvalue = self.min_eigenvalue.min(o.min_eigenvalue);
        self.max_meter_tail = self.max_meter_tail.max(o.max_meter_tail);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: String,
    pub title: String,
    pub checks: Vec<Check>,
    pub audit: Audit,
    /// Runtime error that stopped the criterion.
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn pass(&self) -> bool {
        self.error.is_none() && !self.checks.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    /// One summary line plus one indented line per check.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{} {}: {} ({:.1} s)",
            if self.pass() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds
        );
        if let Some(e) = &self.error {
            s.push_str(&format!("\n    error: {e}"));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "\n    [{}] {}: {:.6e} {} {:.6e}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                c.relation,
                c.bound
            ));
            if !c.detail.is_empty() {
                s.push_str(&format!("  ({})", c.detail));
            }
        }
        s
    }
}

/// Suite-wide settings. `dt_scale` multiplies every automatic step; values
/// above one are a deliberate way to break the state checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Context {
    pub dt_scale: f64,
}

impl Default for Context {
    fn default() -> Self {
        Self { dt_scale: 1.0 }
    }
}

impl Context {
    fn dt(&self, dt: f64) -> f64 {
        dt * self.dt_scale
    }
}

type Body = fn(&Context, &mut Audit) -> Result<Vec<Check>>;

pub const CRITERIA: [(&str, &str, Body); 11] = [
    ("c01", "closed-system LZ law", c01),
    ("c02", "finite-window edge scaling", c02),
    ("c03", "decoupling identity", c03),
    ("c04", "autocorrelation oracle", c04),
    ("c05", "adiabatic ME vs Lindblad", c05),
    ("c06", "dephasing asymptotics", c06),
    ("c07", "dephasing helps fast drives", c07),
    ("c08", "T(kappa), T(x0), T(n) structure", c08),
    ("c09", "BLP sanity", c09),
    ("c10", "stroboscopic suppression", c10),
    ("c11", "timing-error robustness", c11),
];

pub const STATE_CRITERION: (&str, &str) = ("c12", "state validity over all runs");

/// Which criteria a `--only` filter selects: `all`, `analytic`, or a comma
/// list of ids such as `c03,c12`.
pub fn select(filter: &str) -> Result<Vec<String>> {
    let f = filter.trim();
    if f.is_empty() || f == "all" {
        let mut ids: Vec<String> = CRITERIA.iter().map(|c| c.0.to_string()).collect();
        ids.push(STATE_CRITERION.0.to_string());
        return Ok(ids);
    }
    f.split(',')
        .map(|id| {
            let id = id.trim().to_lowercase();
            let known = id == "analytic"
                || id == STATE_CRITERION.0
                || CRITERIA.iter().any(|c| c.0 == id);
            if known {
                Ok(id)
            } else {
                Err(BenchError::config(format!(
                    "--only: unknown filter `{id}` (use all, analytic, or c01..c12)"
                )))
            }
        })
        .collect()
}

fn run_one(id: &str, title: &str, body: Body, ctx: &Context) -> CriterionReport {
    let start = Instant::now();
    let mut audit = Audit::default();
    let (checks, error) = match body(ctx, &mut audit) {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CriterionReport {
        id: id.to_string(),
        title: title.to_string(),
        checks,
        audit,
        error,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the selected criteria in order. `progress` sees each report as soon
/// as it is done.
pub fn run_suite(filter: &str, ctx: &Context, mut progress: impl FnMut(&CriterionReport)) -> Result<Vec<CriterionReport>> {
    let ids = select(filter)?;
    let mut reports = Vec::new();
    if ids.iter().any(|i| i == "analytic") {
        let r = analytic_report();
        progress(&r);
        reports.push(r);
    }
    for (id, title, body) in CRITERIA {
        if ids.iter().any(|i| i == id) {
            let r = run_one(id, title, body, ctx);
            progress(&r);
            reports.push(r);
        }
    }
    if ids.iter().any(|i| i == STATE_CRITERION.0) {
        let start = Instant::now();
        let r = state_validity(&reports, start);
        progress(&r);
        reports.push(r);
    }
    Ok(reports)
}

fn state_validity(reports: &[CriterionReport], start: Instant) -> CriterionReport {
    let mut total = Audit::default();
    let mut worst_tail = ("-", 0.0);
    let mut worst_eig = ("-", f64::INFINITY);
    for r in reports {
        total.merge(&r.audit);
        if r.audit.max_meter_tail > worst_tail.1 {
            worst_tail = (r.id.as_str(), r.audit.max_meter_tail);
        }
        if r.audit.min_eigenvalue < worst_eig.1 {
            worst_eig = (r.id.as_str(), r.audit.min_eigenvalue);
        }
    }
    let tol = StateTolerances::default();
    let (checks, error) = if total.runs == 0 {
        (Vec::new(), Some("no audited runs; select other criteria together with c12".to_string()))
    } else {
        let ids: Vec<&str> = reports.iter().filter(|r| r.audit.runs > 0).map(|r| r.id.as_str()).collect();
        (
            vec![
                Check::le("trace error", total.max_trace_error, tol.trace).detail(format!("{} runs from {}", total.runs, ids.join(","))),
                Check::le("hermiticity error", total.max_hermiticity_error, tol.hermiticity),
                Check::ge("min eigenvalue", total.min_eigenvalue, -tol.positivity).detail(format!("worst in {}", worst_eig.0)),
                Check::lt("meter tail", total.max_meter_tail, open::METER_TAIL_WARN).detail(format!("worst in {}", worst_tail.0)),
            ],
            None,
        )
    };
    CriterionReport {
        id: STATE_CRITERION.0.to_string(),
        title: STATE_CRITERION.1.to_string(),
        checks,
        audit: total,
        error,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ")
}

fn unit_lz() -> LzParams {
    LzParams::new(1.0, 1.0).expect("valid")
}

/// Smallest decrement along `v`; positive iff strictly decreasing.
fn min_decrement(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
}

/// Strictly rising to an interior maximum, then strictly falling.
fn unimodal_interior(v: &[f64]) -> bool {
    let k = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    k > 0 && k + 1 < v.len() && v[..=k].windows(2).all(|w| w[1] > w[0]) && v[k..].windows(2).all(|w| w[1] < w[0])
}

/// Formula-level checks that run no dynamics.
pub fn analytic_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let p = unit_lz();
    out.push(Check::le(
        "T_LZ(g2/eps=1) = exp(-pi/2)",
        (lz::lz_infidelity_asymptotic(&p) - (-PI / 2.0).exp()).abs(),
        1e-15,
    ));
    let p20 = LzParams::from_adiabaticity(20.0, 1.0).expect("valid");
    let q1 = 0.5 * PI * (2.0 + 2f64.sqrt()) / (2f64.sqrt() * (2f64.sqrt() + 1.0).powi(2));
    out.push(Check::le("Q(1) closed form", (ame::avron_q(1.0) - q1).abs(), 1e-15));
    let t = ame::asymptotic_infidelity(&p20, &DephasingModel::explicit(p20.g, &p20).expect("valid"));
    out.push(Check::le("(eps/2g^2) Q(1) at g2/eps=20", (t - 0.01627).abs(), 5e-6).detail(format!("{t:.6}")));
    out.push(Check::le("Q(x) ~ pi/(2x) for large x", rel(ame::avron_q(1e6) * 1e6, 0.5 * PI), 1e-5));
    out.push(Check::le(
        "strong-dephasing law at gamma0/g=50",
        rel(ame::strong_dephasing_infidelity(&p, 50.0), PI / 200.0),
        1e-15,
    ));
    let edge = lz::lz_infidelity_finite(-5.0, 5.0, &p);
    out.push(Check::le("finite-window envelope at s=5", rel(edge, 2.0 / (16.0 * 26f64.powi(3))), 1e-14));
    let m = MeterParams::new(1.0, 2.0, Occupancy::Mean(0.0), 1.0, 10).expect("valid");
    out.push(Check::le("G(0) at kappa=2 omega_c, n=0, x0=1", (ame::spectral_g0(&m) - 1.0).abs(), 1e-15));
    let c0 = ame::analytic_autocorrelation(&m.with_n(0.5), 0.0);
    out.push(Check::le("C(0) = x0^2 (2n+1)", (c0.re - 2.0).abs() + c0.im.abs(), 1e-14));
    out.push(Check::le("thermal tail at n=0", thermal_tail(0.0, 10), 0.0));
    let w = Window::symmetric(5.0).expect("valid");
    let s = strobe::build_schedule(&w, 1.0, 0.1).expect("valid");
    out.push(Check::holds("window [-5,5], dt=1, T_P=0.1 gives 11 pulses", s.len() == 11).detail(format!("{}", s.len())));
    out.push(Check::holds(
        "overlapping pulses rejected",
        strobe::build_schedule(&w, 0.1, 0.1).is_err(),
    ));
    out
}

fn analytic_report() -> CriterionReport {
    let start = Instant::now();
    CriterionReport {
        id: "analytic".into(),
        title: "closed-form values".into(),
        checks: analytic_checks(),
        audit: Audit::default(),
        error: None,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn c01(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let start = Instant::now();
    let mut out = Vec::new();
    for r in [0.5, 1.0, 2.0] {
        let p = LzParams::from_adiabaticity(r, 1.0)?;
        let dt = ctx.dt(lz::schrodinger_dt(&p, &p.long_window()));
        let t = lz::trailing_average_infidelity(&p, dt)?;
        audit.add_pure();
        let law = lz::lz_infidelity_asymptotic(&p);
        out.push(Check::le(&format!("g2/eps={r}: |T/T_LZ - 1|"), rel(t, law), 0.02).detail(format!("T = {t:.6}, law {law:.6}")));
    }
    out.push(Check::lt("runtime [s]", start.elapsed().as_secs_f64(), 5.0));
    Ok(out)
}

fn c02(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let p = unit_lz();
    let dt = ctx.dt(lz::schrodinger_dt(&p, &p.long_window()));
    let s_vals = [5.0, 8.0, 10.0];
    let mut w = Vec::new();
    let mut law = Vec::new();
    let mut out = Vec::new();
    for s in s_vals {
        let x = lz::finite_window_edge_weight(&p, s, dt)?;
        audit.add_pure();
        let l = lz::lz_infidelity_finite(-s * p.g / p.eps, s * p.g / p.eps, &p);
        let ratio = x / l;
        out.push(
            Check::le(&format!("s={s}: max(r, 1/r), r = residual/envelope"), ratio.max(1.0 / ratio), 3.0)
                .detail(format!("residual {x:.4e}, envelope {l:.4e}")),
        );
        w.push(x);
        law.push(l);
    }
    out.push(Check::gt("residual decreasing in s (min decrement)", min_decrement(&w), 0.0).detail(list(&w)));
    let scaling = (w[0] / w[2]) / (law[0] / law[2]);
    out.push(
        Check::le("s=5 vs s=10 growth relative to (g2+eps2 t2)^-3", scaling.max(1.0 / scaling), 3.0)
            .detail(format!("numeric {:.2}, law {:.2}", w[0] / w[2], law[0] / law[2])),
    );
    Ok(out)
}

fn c03(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let p = unit_lz();
    let w = p.window_in_gap_units(5.0)?;
    let mut out = Vec::new();
    for (kappa, n) in [(1.0, 0.5), (3.0, 0.0)] {
        let start = Instant::now();
        let m = MeterParams::new(1.0, kappa, Occupancy::Mean(n), 0.0, 50)?;
        let dt0 = ctx.dt(open::lindblad_dt(&p, &m, &w));
        // equal steps on both sides of the t = 0 break so the grids coincide
        let half = w.end;
        let dt = half / (half / dt0).ceil();
        let joint = open::run_continuous_with(
            &p,
            &m,
            &w,
            dt,
            &open::EvolveOptions {
                samples: 400,
                ..Default::default()
            },
        )?;
        audit.add_trajectory(&joint.trajectory);
        let coherent = lz::coherent_trajectory(&p, &w, dt, usize::MAX)?;
        audit.add_pure();
        let dev = joint.trajectory.max_deviation(&coherent);
        out.push(
            Check::le(&format!("kappa={kappa}, n={n}: max |P_joint - P_coherent|"), dev, 1e-6)
                .detail(format!("{} samples", joint.trajectory.len())),
        );
        out.push(Check::lt(&format!("kappa={kappa}, n={n}: runtime [s]"), start.elapsed().as_secs_f64(), 30.0));
    }
    Ok(out)
}

fn c04(_ctx: &Context, _audit: &mut Audit) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (n, kappa) in [(0.0, 1.0), (0.5, 2.0)] {
        let m = MeterParams::new(1.0, kappa, Occupancy::Mean(n), 1.0, 40)?;
        let taus: Vec<f64> = (0..=400).map(|k| k as f64 * 10.0 / kappa / 400.0).collect();
        let num = open::regression_autocorrelation(&m, &taus)?;
        let dev = taus
            .iter()
            .zip(&num)
            .map(|(t, c)| (c - ame::analytic_autocorrelation(&m, *t)).norm())
            .fold(0.0, f64::max);
        out.push(Check::le(&format!("n={n}, kappa={kappa}: max |C_num - C|"), dev, 1e-6));
        let weight = 0.5 * open::regression_spectral_weight(&m)?;
        let g0 = 0.5 * ame::spectral_g0(&m);
        out.push(
            Check::le(&format!("n={n}, kappa={kappa}: int Re C vs G(0)/2"), rel(weight, g0), 1e-4)
                .detail(format!("{weight:.8} vs {g0:.8}")),
        );
    }
    Ok(out)
}

/// `n_max` at least `floor` with the thermal tail below the warning level.
fn n_max_for(n: f64, floor: usize) -> usize {
    (floor..).find(|&k| thermal_tail(n, k) <= open::METER_TAIL_WARN).expect("tail decays")
}

fn c05(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let start = Instant::now();
    let p = unit_lz();
    let w = p.window_in_gap_units(5.0)?;
    let ns = [0.0, 1.0, 2.0, 3.0, 4.0];
    let (mut lind, mut ame_t, mut gammas) = (Vec::new(), Vec::new(), Vec::new());
    for n in ns {
        let m = MeterParams::new(1.0, 20.0, Occupancy::Mean(n), 1.0, n_max_for(n, 50))?;
        let res = open::run_continuous(&p, &m, &w, ctx.dt(open::lindblad_dt(&p, &m, &w)))?;
        audit.add_trajectory(&res.trajectory);
        lind.push(res.t_final);
        let model = DephasingModel::from_meter(&m, &p);
        let run = ame::evolve_ame(&w, ctx.dt(ame::ame_dt(&p, &w)), &p, &model)?;
        audit.add_trajectory(&run.trajectory);
        ame_t.push(run.t_final);
        gammas.push(model.gamma0);
    }
    let worst = lind.iter().zip(&ame_t).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);
    Ok(vec![
        Check::holds("Lindblad T(gamma0) single interior maximum", unimodal_interior(&lind))
            .detail(format!("gamma0/g = {}; T = {}", list(&gammas), list(&lind))),
        Check::holds("AME T(gamma0) single interior maximum", unimodal_interior(&ame_t)).detail(format!("T = {}", list(&ame_t))),
        Check::le("max relative difference", worst, 0.15),
        Check::lt("runtime [s]", start.elapsed().as_secs_f64(), 600.0),
    ])
}

fn c06(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let p = LzParams::from_adiabaticity(20.0, 1.0)?;
    let w = p.window_in_gap_units(20.0)?;
    let dt = ctx.dt(ame::ame_dt(&p, &w));
    let run = |model: &DephasingModel, audit: &mut Audit| -> Result<f64> {
        let r = ame::evolve_ame(&w, dt, &p, model)?;
        audit.add_trajectory(&r.trajectory);
        Ok(r.t_final)
    };
    let mut out = Vec::new();
    for x in [0.5, 1.0, 2.0] {
        let model = DephasingModel::explicit(x * p.g, &p)?;
        let t = run(&model, audit)?;
        let law = ame::asymptotic_infidelity(&p, &model);
        let t_const = run(&model.with_profile(ame::RateProfile::Constant), audit)?;
        out.push(
            Check::le(&format!("gamma0/g={x}: |T/law - 1|"), rel(t, law), 0.10)
                .detail(format!("T = {t:.6}, law {law:.6}; constant-rate T = {t_const:.6}")),
        );
    }
    let model = DephasingModel::explicit(50.0 * p.g, &p)?;
    let t = run(&model, audit)?;
    let law = ame::strong_dephasing_infidelity(&p, model.gamma0);
    let t_const = run(&model.with_profile(ame::RateProfile::Constant), audit)?;
    out.push(
        Check::le("gamma0/g=50: |T/(pi eps/4 gamma0 g) - 1|", rel(t, law), 0.10)
            .detail(format!("T = {t:.4e}, law {law:.4e}; constant-rate T = {t_const:.4e}")),
    );
    Ok(out)
}

fn c07(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let p = unit_lz();
    let w = p.window_in_gap_units(5.0)?;
    let dt = ctx.dt(ame::ame_dt(&p, &w));
    let bare = ame::evolve_ame(&w, dt, &p, &DephasingModel::coherent())?;
    audit.add_trajectory(&bare.trajectory);
    let grid = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
    let mut delta = Vec::new();
    for x in grid {
        let r = ame::evolve_ame(&w, dt, &p, &DephasingModel::explicit(x * p.g, &p)?)?;
        audit.add_trajectory(&r.trajectory);
        delta.push(r.t_final - bare.t_final);
    }
    let changes = delta.windows(2).filter(|d| d[0].signum() != d[1].signum()).count();
    let mut out = vec![Check::holds(
        "delta T: one sign change, + to -",
        changes == 1 && delta[0] > 0.0 && delta[delta.len() - 1] < 0.0,
    )
    .detail(format!("delta T = {}", list(&delta)))];

    let mut best = (f64::INFINITY, 0.0, 0.0);
    'search: for r in [0.9, 0.8] {
        let q = LzParams::from_adiabaticity(r, 1.0)?;
        let wq = q.window_in_gap_units(5.0)?;
        for x in [15.0, 20.0] {
            let run = ame::evolve_ame(&wq, ctx.dt(ame::ame_dt(&q, &wq)), &q, &DephasingModel::explicit(x * q.g, &q)?)?;
            audit.add_trajectory(&run.trajectory);
            if run.t_final < best.0 {
                best = (run.t_final, r, x);
            }
            if best.0 <= 0.05 {
                break 'search;
            }
        }
    }
    out.push(Check::le("min T with g2/eps < 1, gamma0 > 10g", best.0, 0.05).detail(format!("at g2/eps = {}, gamma0/g = {}", best.1, best.2)));
    Ok(out)
}

fn c08(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let start = Instant::now();
    let p = unit_lz();
    let w = p.window_in_gap_units(5.0)?;
    let t_of = |m: MeterParams, audit: &mut Audit| -> Result<f64> {
        let res = open::run_continuous(&p, &m, &w, ctx.dt(open::lindblad_dt(&p, &m, &w)))?;
        audit.add_trajectory(&res.trajectory);
        Ok(res.t_final)
    };
    let base = MeterParams::new(1.0, 1.0, Occupancy::Beta(10.0), 1.0, 50)?;
    let lz_law = (-PI / 2.0).exp();
    let mut out = Vec::new();

    let kappas = [0.1, 0.3, 1.0, 3.0, 10.0];
    let tk = kappas.iter().map(|&k| t_of(base.with_kappa(k), audit)).collect::<Result<Vec<_>>>()?;
    let k_min = (0..tk.len()).min_by(|a, b| tk[*a].total_cmp(&tk[*b])).expect("non-empty");
    out.push(
        Check::holds("(a) interior minimum of T(kappa)", k_min > 0 && k_min + 1 < tk.len())
            .detail(format!("kappa = {}; T = {}", list(&kappas), list(&tk))),
    );
    out.push(Check::lt("(a) minimum below exp(-pi/2)", tk[k_min], lz_law));
    let after: Vec<f64> = tk[k_min..].iter().rev().copied().collect();
    out.push(Check::gt("(a) rising after the minimum (min increment)", min_decrement(&after), 0.0));

    let x0s = [0.0, 0.5, 1.0, 1.5, 2.0];
    let tx = x0s.iter().map(|&x| t_of(base.with_x0(x), audit)).collect::<Result<Vec<_>>>()?;
    let drops: Vec<f64> = tx.windows(2).map(|d| d[0] - d[1]).collect();
    out.push(Check::gt("(b) T(x0) decreasing (min decrement)", min_decrement(&tx), 0.0).detail(format!("T = {}", list(&tx))));
    out.push(Check::gt("(b) plateau is nonzero", tx[tx.len() - 1], 0.0));
    let largest = drops.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.push(Check::lt("(b) last decrement / largest", drops[drops.len() - 1] / largest, 1.0));

    let ns = [0.0, 0.5, 1.0, 1.5, 2.0];
    let tn = ns
        .iter()
        .map(|&n| t_of(MeterParams::new(1.0, 10.0, Occupancy::Mean(n), 1.0, 50)?, audit))
        .collect::<Result<Vec<_>>>()?;
    out.push(Check::gt("(c) kappa=10: T(n) decreasing (min decrement)", min_decrement(&tn), 0.0).detail(format!("T = {}", list(&tn))));
    out.push(Check::lt("runtime [s]", start.elapsed().as_secs_f64(), 1800.0));
    Ok(out)
}

fn c09(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let p = unit_lz();
    let w = p.window_in_gap_units(5.0)?;
    let grid = PairGrid::default();
    let mut out = Vec::new();

    let model = DephasingModel::constant(0.5, &p)?;
    let map = nonmarkov::ame_reduced_map(&p, &model, &w, ctx.dt(ame::ame_dt(&p, &w)), nonmarkov::BLP_SAMPLES)?;
    audit.add(map.worst_state, 0.0);
    out.push(Check::le("constant-rate surrogate N", nonmarkov::blp_from_map(&map, &grid)?.n_value, 1e-4));

    let nm = |kappa: f64, x0: f64, n_max: usize, audit: &mut Audit| -> Result<f64> {
        let m = MeterParams::new(1.0, kappa, Occupancy::Beta(10.0), x0, n_max)?;
        let dt = ctx.dt(open::lindblad_dt(&p, &m, &w));
        let map = nonmarkov::joint_reduced_map(&p, &m, &w, dt, nonmarkov::BLP_SAMPLES)?;
        if let Some(detail) = map.worst_state.violation(&StateTolerances::default()) {
            return Err(lzqnd_core::Error::InvariantViolation { t: w.end, detail }.into());
        }
        audit.add(map.worst_state, map.max_meter_tail);
        Ok(nonmarkov::blp_from_map(&map, &grid)?.n_value)
    };
    out.push(Check::le("x0=0 N", nm(1.0, 0.0, 20, audit)?, 1e-10));
    let strong = nm(0.05, 1.0, 50, audit)?;
    let weak = nm(1.0, 0.2, 50, audit)?;
    out.push(
        Check::gt("N(kappa=0.05, x0=1) / N(kappa=1, x0=0.2)", strong / weak, 1.0)
            .detail(format!("{strong:.6} vs {weak:.6}")),
    );
    Ok(out)
}

fn fig7_meter(n_max: usize) -> Result<MeterParams> {
    Ok(MeterParams::new(1.0, 2.0, Occupancy::Mean(0.0), 10.0, n_max)?)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

const T_P: f64 = 0.1;

fn c10(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let p = unit_lz();
    let w = p.window_in_gap_units(5.0)?;
    let m = fig7_meter(75)?;
    let opts = StrobeOptions {
        pulse_dt: Some(ctx.dt(strobe::pulse_dt(&p, &m, &w, m.x0, T_P))),
        evolve: open::EvolveOptions {
            samples: 1000,
            ..Default::default()
        },
        ..Default::default()
    };
    let gap = ctx.dt(strobe::gap_dt(&p, &m, &w));
    let mut ts = Vec::new();
    let mut out = Vec::new();
    for delta_t in [2.0, 1.0, 0.5] {
        let sched = strobe::build_schedule(&w, delta_t, T_P)?;
        let run = strobe::run_stroboscopic_with(&p, &m, &sched, &w, gap, &opts)?;
        audit.add_trajectory(&run.trajectory);
        let ratios = strobe::cusp_ratios(&run.trajectory, &run.pulses);
        let central: Vec<f64> = run
            .pulses
            .iter()
            .zip(&ratios)
            .filter(|((a, b), _)| (0.5 * (a + b)).abs() <= 2.0)
            .map(|(_, r)| *r)
            .collect();
        out.push(
            Check::ge(&format!("delta_t={delta_t}: median cusp ratio, |t| <= 2"), median(central.clone()), 2.0)
                .detail(format!("{} pulses", central.len())),
        );
        ts.push(run.t_final);
    }
    let bare = lz::coherent_trajectory(&p, &w, ctx.dt(lz::schrodinger_dt(&p, &w)), 2)?.final_p();
    audit.add_pure();
    out.insert(0, Check::gt("T decreasing as delta_t shrinks (min decrement)", min_decrement(&ts), 0.0).detail(format!("T = {}", list(&ts))));
    out.insert(1, Check::lt("densest T vs bare finite-window T", ts[2], bare).detail(format!("bare {bare:.6}")));
    Ok(out)
}

fn c11(ctx: &Context, audit: &mut Audit) -> Result<Vec<Check>> {
    let p = unit_lz();
    let w = p.window_in_gap_units(5.0)?;
    let delta_t = 1.0;
    let sched = strobe::build_schedule(&w, delta_t, T_P)?;
    let small = fig7_meter(40)?;
    let full = fig7_meter(75)?;
    let opts = StrobeOptions {
        pulse_dt: Some(ctx.dt(5e-4)),
        ..Default::default()
    };
    let gap = ctx.dt(strobe::gap_dt(&p, &small, &w));
    let perfect = strobe::run_stroboscopic_with(&p, &small, &sched, &w, gap, &opts)?;
    audit.add_trajectory(&perfect.trajectory);
    let reference_opts = StrobeOptions {
        pulse_dt: Some(ctx.dt(strobe::pulse_dt(&p, &full, &w, full.x0, T_P))),
        ..Default::default()
    };
    let reference = strobe::run_stroboscopic_with(&p, &full, &sched, &w, ctx.dt(strobe::gap_dt(&p, &full, &w)), &reference_opts)?;
    audit.add_trajectory(&reference.trajectory);
    let t0 = perfect.t_final;
    let mut out = vec![Check::le("perfect T: reduced vs full resolution", (t0 - reference.t_final).abs(), 1e-6)
        .detail(format!("{t0:.8} vs {:.8}", reference.t_final))];

    let seed = 20240601;
    let mc = |tau: f64, n_it: usize, audit: &mut Audit| -> Result<(f64, f64)> {
        let noise = NoiseSpec::new(tau, n_it, seed)?;
        let s = strobe::run_noisy_mc_with(&p, &small, &sched, delta_t, &noise, &w, gap, &opts)?;
        audit.add(s.worst_state, s.max_meter_tail);
        Ok((s.mean_final(), s.stderr_final()))
    };
    let (mean, se) = mc(0.1, 50, audit)?;
    out.push(
        Check::le("tau=0.1, n_it=50: |<T>/T_perfect - 1|", rel(mean, t0), 0.25)
            .detail(format!("<T> = {mean:.6} +- {se:.6}, perfect {t0:.6}")),
    );
    let taus = [0.05, 0.025, 0.0125];
    let devs = taus
        .iter()
        .map(|&tau| mc(tau, 16, audit).map(|(m, _)| (m - t0).abs()))
        .collect::<Result<Vec<_>>>()?;
    out.push(
        Check::gt("tau -> 0: |<T> - T_perfect| decreasing (min decrement)", min_decrement(&devs), 0.0)
            .detail(format!("tau = {}; deviation = {}", list(&taus), list(&devs))),
    );
    Ok(out)
}
