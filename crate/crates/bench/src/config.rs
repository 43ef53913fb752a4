//! Run configuration.
//!
//! One TOML file with flat sections (`[lz]`, `[meter]`, `[window]`, `[run]`,
//! `[dephasing]`, `[strobe]`, `[noise]`, `[nm]`, `[sweep]`). Every field has a
//! default, so an empty file is valid. `--set section.key=value` overrides
//! are merged on top of the file before deserialisation.
//!
//! Units: energies and rates in the units of `g`; times in inverse energy.
//! `window.half_width`, `strobe.delta_t` and `noise.tau` are given in units
//! of `g/ε`.

use std::path::Path;

use lzqnd_core::ame::{DephasingModel, RateProfile};
use lzqnd_core::nonmarkov::PairGrid;
use lzqnd_core::operator::Occupancy;
use lzqnd_core::strobe::AmplitudeConvention;
use lzqnd_core::{LzParams, MeterParams, Window};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

pub const UNITS: &str = "energies in units of g; times in 1/energy; window.half_width, strobe.delta_t, noise.tau in units of g/eps";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub lz: LzSection,
    pub meter: MeterSection,
    pub window: WindowSection,
    pub run: RunSection,
    pub dephasing: DephasingSection,
    pub strobe: StrobeSection,
    pub noise: NoiseSection,
    pub nm: NmSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LzSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    pub eps: f64,
    /// Alternative to `g`: adiabaticity `g²/ε`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g2_over_eps: Option<f64>,
}

impl Default for LzSection {
    fn default() -> Self {
        Self {
            g: None,
            eps: 1.0,
            g2_over_eps: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeterSection {
    pub omega_c: f64,
    pub kappa: f64,
    /// Mean bath occupancy. Mutually exclusive with `beta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    /// Inverse temperature.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub x0: f64,
    pub n_max: usize,
}

impl Default for MeterSection {
    fn default() -> Self {
        Self {
            omega_c: 1.0,
            kappa: 1.0,
            n: None,
            beta: None,
            x0: 0.0,
            n_max: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSection {
    /// Symmetric window `±half_width · g/ε`.
    pub half_width: f64,
    /// Absolute start time; overrides `half_width` together with `end`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub end: Option<f64>,
}

impl Default for WindowSection {
    fn default() -> Self {
        Self {
            half_width: 5.0,
            start: None,
            end: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Joint qubit ⊗ meter Lindblad equation.
    #[default]
    Lindblad,
    /// Adiabatic dephasing master equation.
    Ame,
    /// Closed qubit.
    Coherent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub engine: Engine,
    /// Fixed step; the engine's automatic bound when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            engine: Engine::Lindblad,
            dt: None,
            samples: 400,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DephasingSection {
    /// Explicit `γ₀/g` values for the AME engine.
    pub gamma0_over_g: Vec<f64>,
    /// Take `γ₀` from the meter spectral weight instead.
    pub from_meter: bool,
    pub profile: RateProfile,
}

impl Default for DephasingSection {
    fn default() -> Self {
        Self {
            gamma0_over_g: Vec::new(),
            from_meter: false,
            profile: RateProfile::GapScaled,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrobeSection {
    pub delta_t: f64,
    /// Pulse duration; `1/x₀` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_p: Option<f64>,
    pub convention: AmplitudeConvention,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_dt: Option<f64>,
}

impl Default for StrobeSection {
    fn default() -> Self {
        Self {
            delta_t: 1.0,
            t_p: None,
            convention: AmplitudeConvention::Linear,
            pulse_dt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub tau: f64,
    pub n_it: usize,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { tau: 0.1, n_it: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NmSection {
    pub n_theta: usize,
    pub n_phi: usize,
    pub refine: bool,
}

impl Default for NmSection {
    fn default() -> Self {
        let g = PairGrid::default();
        Self {
            n_theta: g.n_theta,
            n_phi: g.n_phi,
            refine: g.refine,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    ContinuousT,
    AmeT,
    DeltaT,
    NmMeasure,
    EffectiveGap,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::ContinuousT => "continuous_t",
            TaskKind::AmeT => "ame_t",
            TaskKind::DeltaT => "delta_t",
            TaskKind::NmMeasure => "nm_measure",
            TaskKind::EffectiveGap => "effective_gap",
        }
    }
}

/// One sweep axis. Exactly one of `values`, `linear`, `log` is used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    /// `[start, stop, count]`, inclusive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear: Option<[f64; 3]>,
    /// `[start, stop, count]`, geometric, inclusive.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<[f64; 3]>,
}

impl Axis {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let given = !self.values.is_empty() as u8 + self.linear.is_some() as u8 + self.log.is_some() as u8;
        if given != 1 {
            return Err(BenchError::config(format!(
                "sweep.axes `{}`: give exactly one of values, linear, log",
                self.name
            )));
        }
        let count = |c: f64| -> Result<usize> {
            if c >= 1.0 && c.fract() == 0.0 {
                Ok(c as usize)
            } else {
                Err(BenchError::config(format!("sweep.axes `{}`: count {c} must be a positive integer", self.name)))
            }
        };
        let vals = if let Some([a, b, c]) = self.linear {
            let n = count(c)?;
            (0..n)
                .map(|k| if n == 1 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 })
                .collect()
        } else if let Some([a, b, c]) = self.log {
            if !(a > 0.0 && b > 0.0) {
                return Err(BenchError::config(format!("sweep.axes `{}`: log grid needs positive bounds", self.name)));
            }
            let n = count(c)?;
            let (la, lb) = (a.ln(), b.ln());
            (0..n)
                .map(|k| if n == 1 { a } else { (la + (lb - la) * k as f64 / (n - 1) as f64).exp() })
                .collect()
        } else {
            self.values.clone()
        };
        if vals.iter().any(|v: &f64| !v.is_finite()) {
            return Err(BenchError::config(format!("sweep.axes `{}`: non-finite value", self.name)));
        }
        Ok(vals)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub task: TaskKind,
    /// Maximum number of cells.
    pub budget: usize,
    pub axes: Vec<Axis>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            task: TaskKind::ContinuousT,
            budget: 2000,
            axes: Vec::new(),
        }
    }
}

fn section_err(section: &str, e: lzqnd_core::Error) -> BenchError {
    BenchError::config(format!("[{section}] {e}"))
}

impl Config {
    /// Reads `path` (if any) and applies `key.path=value` overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| BenchError::io(p, e))?,
            None => String::new(),
        };
        let origin = path.map_or("<defaults>".to_string(), |p| p.display().to_string());
        if overrides.is_empty() {
            return toml::from_str(&text).map_err(|e| BenchError::config(format!("{origin}: {e}")));
        }
        let mut table: toml::Table = toml::from_str(&text).map_err(|e| BenchError::config(format!("{origin}: {e}")))?;
        for ov in overrides {
            apply_override(&mut table, ov)?;
        }
        let merged = toml::to_string(&table).map_err(|e| BenchError::config(e.to_string()))?;
        toml::from_str(&merged).map_err(|e| BenchError::config(format!("{origin} with overrides: {e}")))
    }

    pub fn lz(&self) -> Result<LzParams> {
        let s = &self.lz;
        let p = match (s.g, s.g2_over_eps) {
            (Some(_), Some(_)) => {
                return Err(BenchError::config("[lz] give either g or g2_over_eps, not both"));
            }
            (Some(g), None) => LzParams::new(g, s.eps),
            (None, Some(r)) => LzParams::from_adiabaticity(r, s.eps),
            (None, None) => LzParams::new(1.0, s.eps),
        };
        p.map_err(|e| section_err("lz", e))
    }

    pub fn occupancy(&self) -> Result<Occupancy> {
        match (self.meter.n, self.meter.beta) {
            (Some(_), Some(_)) => Err(BenchError::config("[meter] give either n or beta, not both")),
            (Some(n), None) => Ok(Occupancy::Mean(n)),
            (None, Some(b)) => Ok(Occupancy::Beta(b)),
            (None, None) => Ok(Occupancy::Mean(0.0)),
        }
    }

    pub fn meter(&self) -> Result<MeterParams> {
        let s = &self.meter;
        MeterParams::new(s.omega_c, s.kappa, self.occupancy()?, s.x0, s.n_max).map_err(|e| section_err("meter", e))
    }

    pub fn window(&self) -> Result<Window> {
        let s = &self.window;
        match (s.start, s.end) {
            (Some(a), Some(b)) => Window::new(a, b).map_err(|e| section_err("window", e)),
            (None, None) => {
                let lz = self.lz()?;
                if !(s.half_width > 0.0) {
                    return Err(BenchError::config("[window] half_width must be > 0"));
                }
                if lz.g <= 0.0 {
                    return Err(BenchError::config("[window] half_width is in units of g/eps and needs g > 0"));
                }
                lz.window_in_gap_units(s.half_width).map_err(|e| section_err("window", e))
            }
            _ => Err(BenchError::config("[window] start and end must be given together")),
        }
    }

    /// `g/ε`, the time unit of `half_width`, `delta_t` and `tau`.
    pub fn time_unit(&self) -> Result<f64> {
        let lz = self.lz()?;
        Ok(lz.g / lz.eps)
    }

    pub fn samples(&self) -> Result<usize> {
        if self.run.samples < 2 {
            return Err(BenchError::config("[run] samples must be at least 2"));
        }
        Ok(self.run.samples)
    }

    pub fn fixed_dt(&self) -> Result<Option<f64>> {
        match self.run.dt {
            Some(dt) if !(dt > 0.0 && dt.is_finite()) => Err(BenchError::config(format!("[run] dt = {dt} must be > 0"))),
            other => Ok(other),
        }
    }

    /// AME models, one per `γ₀/g` entry (or one from the meter).
    pub fn dephasing_models(&self) -> Result<Vec<(Option<f64>, DephasingModel)>> {
        let lz = self.lz()?;
        let d = &self.dephasing;
        if d.from_meter {
            if !d.gamma0_over_g.is_empty() {
                return Err(BenchError::config("[dephasing] from_meter excludes gamma0_over_g"));
            }
            let m = DephasingModel::from_meter(&self.meter()?, &lz).with_profile(d.profile);
            return Ok(vec![(None, m)]);
        }
        if d.gamma0_over_g.is_empty() {
            return Err(BenchError::config(
                "[dephasing] gamma0_over_g is empty; give at least one value or set from_meter = true",
            ));
        }
        d.gamma0_over_g
            .iter()
            .map(|&r| {
                let m = DephasingModel::explicit(r * lz.g, &lz)
                    .map_err(|e| section_err("dephasing", e))?
                    .with_profile(d.profile);
                Ok((Some(r), m))
            })
            .collect()
    }

    pub fn pair_grid(&self) -> Result<PairGrid> {
        if self.nm.n_theta == 0 || self.nm.n_phi == 0 {
            return Err(BenchError::config("[nm] n_theta and n_phi must be >= 1"));
        }
        Ok(PairGrid {
            n_theta: self.nm.n_theta,
            n_phi: self.nm.n_phi,
            refine: self.nm.refine,
        })
    }

    /// Checks every section that the commands may read.
    pub fn validate(&self) -> Result<()> {
        self.lz()?;
        self.meter()?;
        self.window()?;
        self.samples()?;
        self.fixed_dt()?;
        self.pair_grid()?;
        if self.sweep.budget == 0 {
            return Err(BenchError::config("[sweep] budget must be >= 1"));
        }
        Ok(())
    }

    /// Copy with `key` (dotted path) set to `value`. List-valued fields
    /// such as `dephasing.gamma0_over_g` become a one-element list.
    pub fn with_value(&self, key: &str, value: f64) -> Result<Config> {
        let mut table = toml::Table::try_from(self).map_err(|e| BenchError::config(e.to_string()))?;
        let parts: Vec<&str> = key.split('.').collect();
        let (last, sections) = parts.split_last().expect("split yields one part");
        let mut cur = &mut table;
        for p in sections {
            cur = cur
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| BenchError::config(format!("sweep axis `{key}`: `{p}` is not a section")))?;
        }
        let is_list = matches!(cur.get(*last), Some(toml::Value::Array(_)));
        let is_int = matches!(cur.get(*last), Some(toml::Value::Integer(_)));
        let v = if is_int {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(BenchError::config(format!("sweep axis `{key}` needs non-negative integers, got {value}")));
            }
            toml::Value::Integer(value as i64)
        } else {
            toml::Value::Float(value)
        };
        cur.insert(last.to_string(), if is_list { toml::Value::Array(vec![v]) } else { v });
        let merged = toml::to_string(&table).map_err(|e| BenchError::config(e.to_string()))?;
        toml::from_str(&merged).map_err(|e| BenchError::config(format!("sweep axis `{key}`: {e}")))
    }

    /// Canonical TOML of the effective configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of [`Config::to_toml`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// `a.b.c=value`; the value is parsed as a TOML value, falling back to a
/// bare string.
fn apply_override(table: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| BenchError::config(format!("override `{ov}` is not key=value")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(BenchError::config(format!("override key `{key}` is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| BenchError::config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
