//! CSV emission: `#` metadata lines, a header row, then data rows.
//!
//! Floats are written with 17 significant digits so they round-trip.
//! Only the `# timestamp` line varies between identical runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::{Config, UNITS};
use crate::error::{BenchError, Result};

pub const ENGINE_VERSION: &str = concat!("lzqnd-bench ", env!("CARGO_PKG_VERSION"));

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Metadata block written above every table.
#[derive(Clone, Debug)]
pub struct Meta {
    pub command: String,
    pub config: Config,
    /// Extra `key: value` lines specific to the command.
    pub extra: Vec<(String, String)>,
}

impl Meta {
    pub fn new(command: &str, config: &Config) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(w, "# engine: {ENGINE_VERSION}")?;
        writeln!(w, "# command: {}", self.command)?;
        writeln!(w, "# units: {UNITS}")?;
        writeln!(w, "# seed: {}", self.config.run.seed)?;
        writeln!(w, "# config_hash: {}", self.config.hash())?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "# timestamp: {ts}")?;
        writeln!(w, "# effective config:")?;
        for line in self.config.to_toml().lines() {
            writeln!(w, "#   {line}")?;
        }
        Ok(())
    }
}

/// Writes `meta`, `header` and `rows` to `path`.
pub fn write_table(path: &Path, meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut buf = BufWriter::new(file);
    meta.write(&mut buf).map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))?;
    Ok(())
}

/// `out/trace.csv` with tag `g0.5` becomes `out/trace_g0.5.csv`.
pub fn tagged_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_{tag}.{ext}"))
}

/// Parsed table: metadata lines (without `# `), header and rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub meta: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| BenchError::config(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| BenchError::config(format!("column `{name}`: {e}")))
            })
            .collect()
    }

    /// Header row and data rows, i.e. everything outside the metadata block.
    pub fn body(&self) -> String {
        let mut s = self.header.join(",");
        for r in &self.rows {
            s.push('\n');
            s.push_str(&r.join(","));
        }
        s
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let meta = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim_start().to_string())
        .collect();
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok(Table { meta, header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/t.csv");
        let meta = Meta::new("trace", &Config::default()).with("amplitude_convention", "linear");
        let rows = vec![vec![fmt_f64(0.5), "ok".to_string()]];
        write_table(&p, &meta, &["t", "status"], &rows).unwrap();
        let t = read_table(&p).unwrap();
        assert_eq!(t.header, vec!["t", "status"]);
        assert_eq!(t.rows, rows);
        assert!(t.meta.iter().any(|l| l == "amplitude_convention: linear"));
        assert!(t.meta.iter().any(|l| l.starts_with("config_hash: ")));
        assert_eq!(t.floats("t").unwrap(), vec![0.5]);
        assert_eq!(tagged_path(&p, "g2").file_name().unwrap(), "t_g2.csv");
    }
}
