//! Cartesian parameter sweeps.
//!
//! Cells are enumerated with the last axis varying fastest, run on a rayon
//! pool, and written in cell order. A failing cell records its error in the
//! `status` column and the sweep carries on.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lzqnd_core::ame::DephasingModel;
use lzqnd_core::open;
use lzqnd_core::operator::StateReport;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::commands;
use crate::config::{Config, TaskKind};
use crate::error::{BenchError, Result};
use crate::output::{fmt_f64, write_table, Meta, ENGINE_VERSION};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Named {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
    pub meter_tail: f64,
}

impl Diagnostics {
    fn from_report(r: StateReport, tail: f64) -> Self {
        Self {
            trace_error: r.trace_error,
            hermiticity_error: r.hermiticity_error,
            min_eigenvalue: r.min_eigenvalue,
            meter_tail: tail,
        }
    }
}

/// One sweep cell's outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub cell: usize,
    pub coords: Vec<Named>,
    pub status: String,
    pub scalars: Vec<Named>,
    pub diagnostics: Diagnostics,
    pub wall_seconds: f64,
    pub engine_version: String,
    pub config_hash: String,
}

pub fn scalar_names(task: TaskKind) -> &'static [&'static str] {
    match task {
        TaskKind::ContinuousT => &["T"],
        TaskKind::AmeT => &["T", "gamma0"],
        TaskKind::DeltaT => &["delta_T", "T", "T_LZ", "gamma0"],
        TaskKind::NmMeasure => &["N", "best_theta", "best_phi"],
        TaskKind::EffectiveGap => &["delta_r", "quadrature", "T"],
    }
}

/// Axis names and the full cell list, last axis fastest.
pub fn cells(cfg: &Config) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let axes = &cfg.sweep.axes;
    if axes.is_empty() {
        return Err(BenchError::config("[sweep] needs at least one axis"));
    }
    let mut names = Vec::new();
    let mut grids = Vec::new();
    for a in axes {
        if a.name.is_empty() {
            return Err(BenchError::config("[sweep] axis without a name"));
        }
        if names.contains(&a.name) {
            return Err(BenchError::config(format!("[sweep] axis `{}` repeated", a.name)));
        }
        names.push(a.name.clone());
        grids.push(a.resolve()?);
    }
    let total = grids.iter().try_fold(1usize, |acc, g| acc.checked_mul(g.len()));
    match total {
        Some(n) if n <= cfg.sweep.budget => {}
        _ => {
            return Err(BenchError::config(format!(
                "[sweep] {} cells exceed budget {}",
                grids.iter().map(|g| g.len().to_string()).collect::<Vec<_>>().join("x"),
                cfg.sweep.budget
            )))
        }
    }
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for g in &grids {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                g.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(*v);
                    c
                })
            })
            .collect();
    }
    Ok((names, out))
}

fn single_model(cfg: &Config) -> Result<DephasingModel> {
    let models = cfg.dephasing_models()?;
    match models.as_slice() {
        [(_, m)] => Ok(*m),
        _ => Err(BenchError::config("[dephasing] this task needs exactly one model")),
    }
}

/// Runs one task on a fully resolved configuration.
pub fn run_task(cfg: &Config, task: TaskKind) -> Result<(Vec<f64>, Diagnostics)> {
    cfg.validate()?;
    match task {
        TaskKind::ContinuousT => {
            let (lz, m, w) = (cfg.lz()?, cfg.meter()?, cfg.window()?);
            let dt = cfg.fixed_dt()?.unwrap_or_else(|| open::lindblad_dt(&lz, &m, &w));
            let res = open::run_continuous(&lz, &m, &w, dt)?;
            Ok((vec![res.t_final], Diagnostics::from_report(res.worst_state, res.max_meter_tail)))
        }
        TaskKind::AmeT => {
            let model = single_model(cfg)?;
            let (traj, _) = commands::ame_trace(cfg, &model)?;
            Ok((vec![traj.final_p(), model.gamma0], Diagnostics::from_report(traj.worst_report(), 0.0)))
        }
        TaskKind::DeltaT => {
            let model = single_model(cfg)?;
            let (traj, _) = commands::ame_trace(cfg, &model)?;
            let (bare, _) = commands::ame_trace(cfg, &DephasingModel::coherent())?;
            let (t, t_lz) = (traj.final_p(), bare.final_p());
            Ok((
                vec![t - t_lz, t, t_lz, model.gamma0],
                Diagnostics::from_report(traj.worst_report().merge(bare.worst_report()), 0.0),
            ))
        }
        TaskKind::NmMeasure => {
            let res = commands::nm_measure(cfg)?;
            Ok((
                vec![res.n_value, res.best_pair.theta, res.best_pair.phi],
                Diagnostics::default(),
            ))
        }
        TaskKind::EffectiveGap => {
            let (lz, m, w) = (cfg.lz()?, cfg.meter()?, cfg.window()?);
            let dt = cfg.fixed_dt()?.unwrap_or_else(|| open::lindblad_dt(&lz, &m, &w));
            let g = open::effective_gap(&lz, &m, &w, dt)?;
            Ok((vec![g.delta_r, g.quadrature, g.t_final], Diagnostics::default()))
        }
    }
}

fn run_cell(base: &Config, task: TaskKind, index: usize, names: &[String], coords: &[f64]) -> ResultRecord {
    let start = Instant::now();
    let resolved = names
        .iter()
        .zip(coords)
        .try_fold(base.clone(), |cfg, (n, v)| cfg.with_value(n, *v));
    let config_hash = resolved.as_ref().map(Config::hash).unwrap_or_default();
    let outcome = resolved.and_then(|cfg| run_task(&cfg, task));
    let (status, values, diagnostics) = match outcome {
        Ok((v, d)) => ("ok".to_string(), v, d),
        Err(e) => {
            log::warn!("cell {index}: {e}");
            (format!("error: {e}"), vec![f64::NAN; scalar_names(task).len()], Diagnostics::default())
        }
    };
    ResultRecord {
        cell: index,
        coords: names
            .iter()
            .zip(coords)
            .map(|(n, v)| Named { name: n.clone(), value: *v })
            .collect(),
        status,
        scalars: scalar_names(task)
            .iter()
            .zip(values)
            .map(|(n, v)| Named { name: n.to_string(), value: v })
            .collect(),
        diagnostics,
        wall_seconds: start.elapsed().as_secs_f64(),
        engine_version: ENGINE_VERSION.to_string(),
        config_hash,
    }
}

/// Runs every cell on `workers` threads (all cores when `None`).
pub fn run_sweep(cfg: &Config, workers: Option<usize>) -> Result<Vec<ResultRecord>> {
    let (names, cells) = cells(cfg)?;
    let task = cfg.sweep.task;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| BenchError::config(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, c)| run_cell(cfg, task, i, &names, c))
            .collect()
    }))
}

/// Writes the sweep table and a JSON sidecar with the full records.
pub fn cmd_sweep(cfg: &Config, out: &Path, workers: Option<usize>) -> Result<Vec<PathBuf>> {
    let records = run_sweep(cfg, workers)?;
    let task = cfg.sweep.task;
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(cfg.sweep.axes.iter().map(|a| a.name.clone()));
    header.push("status".into());
    header.extend(scalar_names(task).iter().map(|s| s.to_string()));
    header.extend(["trace_error", "hermiticity_error", "min_eigenvalue", "meter_tail", "config_hash"].map(String::from));
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.cell.to_string()];
            row.extend(r.coords.iter().map(|c| fmt_f64(c.value)));
            row.push(r.status.clone());
            row.extend(r.scalars.iter().map(|s| fmt_f64(s.value)));
            let d = &r.diagnostics;
            row.extend([d.trace_error, d.hermiticity_error, d.min_eigenvalue, d.meter_tail].map(fmt_f64));
            row.push(r.config_hash.clone());
            row
        })
        .collect();
    let failed = records.iter().filter(|r| r.status != "ok").count();
    let meta = Meta::new("sweep", cfg)
        .with("task", task.as_str())
        .with("cells", records.len())
        .with("failed_cells", failed);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(out, &meta, &header_refs, &rows)?;
    let sidecar = out.with_extension("json");
    let text = serde_json::to_string_pretty(&records)?;
    std::fs::write(&sidecar, text).map_err(|e| BenchError::io(&sidecar, e))?;
    Ok(vec![out.to_path_buf(), sidecar])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Axis;

    fn with_axes(axes: Vec<Axis>) -> Config {
        let mut c = Config::default();
        c.sweep.axes = axes;
        c
    }

    #[test]
    fn cells_in_index_order() {
        let c = with_axes(vec![
            Axis { name: "meter.kappa".into(), values: vec![1.0, 2.0], ..Default::default() },
            Axis { name: "meter.x0".into(), values: vec![0.0, 0.5, 1.0], ..Default::default() },
        ]);
        let (names, cells) = cells(&c).unwrap();
        assert_eq!(names, ["meter.kappa", "meter.x0"]);
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1], vec![1.0, 0.5]);
        assert_eq!(cells[3], vec![2.0, 0.0]);
    }

    #[test]
    fn budget_is_enforced() {
        let mut c = with_axes(vec![Axis { name: "meter.kappa".into(), linear: Some([0.1, 1.0, 10.0]), ..Default::default() }]);
        c.sweep.budget = 9;
        assert!(cells(&c).unwrap_err().to_string().contains("budget"));
    }

    #[test]
    fn failing_cells_are_recorded() {
        let mut c = with_axes(vec![Axis { name: "meter.kappa".into(), values: vec![-1.0, 1.0], ..Default::default() }]);
        c.sweep.task = TaskKind::EffectiveGap;
        c.meter.n_max = 4;
        c.window.half_width = 0.5;
        let recs = run_sweep(&c, Some(1)).unwrap();
        assert!(recs[0].status.starts_with("error") && recs[0].status.contains("kappa"));
        assert!(recs[0].scalars[0].value.is_nan());
        assert_eq!(recs[1].status, "ok");
    }

    #[test]
    fn integer_axes_and_lists() {
        let c = Config::default();
        assert_eq!(c.with_value("meter.n_max", 12.0).unwrap().meter.n_max, 12);
        assert!(c.with_value("meter.n_max", 1.5).is_err());
        assert_eq!(c.with_value("dephasing.gamma0_over_g", 2.0).unwrap().dephasing.gamma0_over_g, vec![2.0]);
        assert!(c.with_value("meter.kapa", 1.0).is_err());
    }
}
