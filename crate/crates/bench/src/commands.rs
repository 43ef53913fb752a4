//! Subcommands that write one run to CSV.

use std::path::{Path, PathBuf};

use lzqnd_core::ame::{self, DephasingModel};
use lzqnd_core::lz::{self, Branch};
use lzqnd_core::nonmarkov::{self, NmResult};
use lzqnd_core::open::{self, EvolveOptions};
use lzqnd_core::strobe::{self, NoiseSpec, PulseSchedule, StrobeOptions};
use lzqnd_core::trajectory::Trajectory;

use crate::config::{Config, Engine};
use crate::error::{BenchError, Result};
use crate::output::{fmt_f64, tagged_path, write_table, Meta};

pub const TRAJECTORY_COLUMNS: [&str; 7] = [
    "t",
    "P",
    "trace_error",
    "hermiticity_error",
    "min_eigenvalue",
    "field_quadrature",
    "meter_tail",
];

pub fn trajectory_rows(traj: &Trajectory) -> Vec<Vec<String>> {
    traj.times
        .iter()
        .zip(&traj.p_values)
        .zip(&traj.diagnostics)
        .map(|((t, p), d)| {
            vec![
                fmt_f64(*t),
                fmt_f64(*p),
                fmt_f64(d.state.trace_error),
                fmt_f64(d.state.hermiticity_error),
                fmt_f64(d.state.min_eigenvalue),
                fmt_f64(d.field_quadrature),
                fmt_f64(d.meter_tail),
            ]
        })
        .collect()
}

fn evolve_options(cfg: &Config) -> Result<EvolveOptions> {
    Ok(EvolveOptions {
        samples: cfg.samples()?,
        ..Default::default()
    })
}

/// Joint Lindblad trajectory with the meter coupled continuously.
pub fn lindblad_trace(cfg: &Config) -> Result<(Trajectory, f64)> {
    let (lz, m, w) = (cfg.lz()?, cfg.meter()?, cfg.window()?);
    let dt = cfg.fixed_dt()?.unwrap_or_else(|| open::lindblad_dt(&lz, &m, &w));
    let res = open::run_continuous_with(&lz, &m, &w, dt, &evolve_options(cfg)?)?;
    Ok((res.trajectory, dt))
}

pub fn coherent_trace(cfg: &Config) -> Result<(Trajectory, f64)> {
    let (lz, w) = (cfg.lz()?, cfg.window()?);
    let dt = cfg.fixed_dt()?.unwrap_or_else(|| lz::schrodinger_dt(&lz, &w));
    Ok((lz::coherent_trajectory(&lz, &w, dt, cfg.samples()?)?, dt))
}

pub fn ame_trace(cfg: &Config, model: &DephasingModel) -> Result<(Trajectory, f64)> {
    let (lz, w) = (cfg.lz()?, cfg.window()?);
    let dt = cfg.fixed_dt()?.unwrap_or_else(|| ame::ame_dt(&lz, &w));
    let rho0 = lz::adiabatic_frame(w.start, &lz)?.projector(Branch::Minus);
    Ok((ame::evolve_ame_with(&rho0, &w, dt, &lz, model, cfg.samples()?)?.trajectory, dt))
}

/// Writes one trajectory CSV (one per `γ₀` for the AME engine).
pub fn cmd_trace(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let engine = cfg.run.engine;
    let runs: Vec<(Option<String>, Trajectory, f64, Meta)> = match engine {
        Engine::Lindblad => {
            let (traj, dt) = lindblad_trace(cfg)?;
            vec![(None, traj, dt, Meta::new("trace", cfg))]
        }
        Engine::Coherent => {
            let (traj, dt) = coherent_trace(cfg)?;
            vec![(None, traj, dt, Meta::new("trace", cfg))]
        }
        Engine::Ame => cfg
            .dephasing_models()?
            .into_iter()
            .map(|(ratio, model)| {
                let (traj, dt) = ame_trace(cfg, &model)?;
                let meta = Meta::new("trace", cfg)
                    .with("gamma0", fmt_f64(model.gamma0))
                    .with("rate_profile", format!("{:?}", model.profile));
                Ok((ratio.map(|r| format!("gamma0_{r}")), traj, dt, meta))
            })
            .collect::<Result<_>>()?,
    };
    let mut paths = Vec::new();
    for (tag, traj, dt, meta) in runs {
        let path = tag.map_or_else(|| out.to_path_buf(), |t| tagged_path(out, &t));
        let meta = meta
            .with("engine_kind", format!("{engine:?}").to_lowercase())
            .with("dt", fmt_f64(dt))
            .with("T_final", fmt_f64(traj.final_p()))
            .with("max_meter_tail", fmt_f64(traj.max_meter_tail()));
        write_table(&path, &meta, &TRAJECTORY_COLUMNS, &trajectory_rows(&traj))?;
        paths.push(path);
    }
    Ok(paths)
}

/// Pulse schedule from `[strobe]`; `delta_t` is in units of `g/ε`.
pub fn schedule(cfg: &Config) -> Result<(PulseSchedule, f64, f64)> {
    let w = cfg.window()?;
    let delta_t = cfg.strobe.delta_t * cfg.time_unit()?;
    let t_p = match cfg.strobe.t_p {
        Some(t) => t,
        None if cfg.meter.x0 > 0.0 => 1.0 / cfg.meter.x0,
        None => return Err(BenchError::config("[strobe] t_p defaults to 1/x0 and needs meter.x0 > 0")),
    };
    Ok((strobe::build_schedule(&w, delta_t, t_p)?, delta_t, t_p))
}

pub fn strobe_options(cfg: &Config) -> Result<StrobeOptions> {
    if let Some(dt) = cfg.strobe.pulse_dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(BenchError::config(format!("[strobe] pulse_dt = {dt} must be > 0")));
        }
    }
    Ok(StrobeOptions {
        convention: cfg.strobe.convention,
        pulse_dt: cfg.strobe.pulse_dt,
        evolve: evolve_options(cfg)?,
    })
}

pub fn cmd_strobe(cfg: &Config, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let (lz, m, w) = (cfg.lz()?, cfg.meter()?, cfg.window()?);
    let (sched, delta_t, t_p) = schedule(cfg)?;
    let opts = strobe_options(cfg)?;
    let dt = cfg.fixed_dt()?.unwrap_or_else(|| strobe::gap_dt(&lz, &m, &w));
    let run = strobe::run_stroboscopic_with(&lz, &m, &sched, &w, dt, &opts)?;
    let ratios: Vec<f64> = strobe::cusp_ratios(&run.trajectory, &run.pulses);
    let meta = Meta::new("strobe", cfg)
        .with("delta_t", fmt_f64(delta_t))
        .with("t_p", fmt_f64(t_p))
        .with("amplitude", fmt_f64(run.amplitude))
        .with("amplitude_convention", run.convention.as_str())
        .with("pulses", run.pulses.len())
        .with("gap_dt", fmt_f64(dt))
        .with("T_final", fmt_f64(run.t_final))
        .with("max_meter_tail", fmt_f64(run.max_meter_tail))
        .with(
            "cusp_ratios",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" "),
        );
    write_table(out, &meta, &TRAJECTORY_COLUMNS, &trajectory_rows(&run.trajectory))?;
    Ok(out.to_path_buf())
}

/// Writes `(t, mean_P, stderr)` and a per-sample `finals` table.
pub fn cmd_noise_mc(cfg: &Config, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (lz, m, w) = (cfg.lz()?, cfg.meter()?, cfg.window()?);
    let (sched, delta_t, t_p) = schedule(cfg)?;
    let opts = strobe_options(cfg)?;
    let tau = cfg.noise.tau * cfg.time_unit()?;
    let noise = NoiseSpec::new(tau, cfg.noise.n_it, cfg.run.seed).map_err(|e| BenchError::config(format!("[noise] {e}")))?;
    let dt = cfg.fixed_dt()?.unwrap_or_else(|| strobe::gap_dt(&lz, &m, &w));
    let mc = strobe::run_noisy_mc_with(&lz, &m, &sched, delta_t, &noise, &w, dt, &opts)?;
    let header = serde_json::json!({
        "seed": mc.seed,
        "tau": mc.tau,
        "delta_t": mc.delta_t,
        "t_p": t_p,
        "n_it": cfg.noise.n_it,
        "amplitude_convention": mc.convention.as_str(),
        "rng": "ChaCha8, stream = sample index",
    });
    let meta = Meta::new("noise-mc", cfg)
        .with("mc", header)
        .with("mean_T_final", fmt_f64(mc.mean_final()))
        .with("stderr_T_final", fmt_f64(mc.stderr_final()))
        .with("max_meter_tail", fmt_f64(mc.max_meter_tail));
    let rows: Vec<Vec<String>> = mc
        .times
        .iter()
        .zip(&mc.mean_p)
        .zip(&mc.stderr)
        .map(|((t, p), s)| vec![fmt_f64(*t), fmt_f64(*p), fmt_f64(*s)])
        .collect();
    write_table(out, &meta, &["t", "mean_P", "stderr"], &rows)?;
    let finals_path = tagged_path(out, "finals");
    let finals: Vec<Vec<String>> = mc
        .finals
        .iter()
        .enumerate()
        .map(|(i, p)| vec![i.to_string(), fmt_f64(*p)])
        .collect();
    write_table(&finals_path, &meta, &["sample", "T_final"], &finals)?;
    Ok(vec![out.to_path_buf(), finals_path])
}

/// BLP measure for the configured engine (`lindblad` or `ame`).
pub fn nm_measure(cfg: &Config) -> Result<NmResult> {
    let (lz, w) = (cfg.lz()?, cfg.window()?);
    let grid = cfg.pair_grid()?;
    match cfg.run.engine {
        Engine::Lindblad => {
            let m = cfg.meter()?;
            let dt = cfg.fixed_dt()?.unwrap_or_else(|| open::lindblad_dt(&lz, &m, &w));
            Ok(nonmarkov::blp_measure(&lz, &m, &w, dt, &grid)?)
        }
        Engine::Ame => {
            let models = cfg.dephasing_models()?;
            let [(_, model)] = models.as_slice() else {
                return Err(BenchError::config("[dephasing] nm with the ame engine needs exactly one model"));
            };
            let dt = cfg.fixed_dt()?.unwrap_or_else(|| ame::ame_dt(&lz, &w));
            let map = nonmarkov::ame_reduced_map(&lz, model, &w, dt, nonmarkov::BLP_SAMPLES)?;
            Ok(nonmarkov::blp_from_map(&map, &grid)?)
        }
        Engine::Coherent => Err(BenchError::config("[run] nm needs engine = lindblad or ame")),
    }
}

pub fn cmd_nm(cfg: &Config, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let res = nm_measure(cfg)?;
    let meta = Meta::new("nm", cfg)
        .with("N", fmt_f64(res.n_value))
        .with("best_theta", fmt_f64(res.best_pair.theta))
        .with("best_phi", fmt_f64(res.best_pair.phi))
        .with("pairs_evaluated", res.pairs_evaluated);
    let rows: Vec<Vec<String>> = res
        .times
        .iter()
        .zip(&res.d_trajectory)
        .map(|(t, d)| vec![fmt_f64(*t), fmt_f64(*d)])
        .collect();
    write_table(out, &meta, &["t", "D"], &rows)?;
    Ok(out.to_path_buf())
}

pub fn cmd_gap(cfg: &Config, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let (lz, m, w) = (cfg.lz()?, cfg.meter()?, cfg.window()?);
    let dt = cfg.fixed_dt()?.unwrap_or_else(|| open::lindblad_dt(&lz, &m, &w));
    let g = open::effective_gap(&lz, &m, &w, dt)?;
    let meta = Meta::new("gap", cfg).with("dt", fmt_f64(dt));
    let row = vec![
        fmt_f64(lz.g),
        fmt_f64(g.delta_r),
        fmt_f64(g.quadrature),
        fmt_f64(g.sample_time),
        fmt_f64(g.t_final),
    ];
    write_table(out, &meta, &["g", "delta_r", "quadrature", "sample_time", "T_final"], &[row])?;
    Ok(out.to_path_buf())
}
