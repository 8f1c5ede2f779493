//! Machine-readable run artifacts: the report JSON, fixed-column CSV tables,
//! optional gnuplot scripts and a timing sidecar.
//!
//! The report holds only seed-determined values so that two runs with the
//! same config and seed are byte-identical; wall-clock timing lives in the
//! sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::studies::{AkrRow, SweepRow};
use super::surface::Surface;
use crate::error::Result;

pub const TOOL: &str = "qcka";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_digest: Option<String>,
    pub body: Value,
}

impl Report {
    pub fn new(command: &str, seed: u64, config_digest: Option<String>, body: impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config_digest,
            body: serde_json::to_value(body)?,
        })
    }

    /// Pretty JSON with object keys in sorted order and a trailing newline.
    pub fn to_json(&self) -> Result<String> {
        // Value maps are BTreeMaps, so a round trip through Value sorts keys.
        let v = serde_json::to_value(self)?;
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json()?.as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub command: String,
    pub stages: Vec<(String, f64)>,
}

impl Timing {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), stages: Vec::new() }
    }

    pub fn record(&mut self, stage: &str, seconds: f64) {
        self.stages.push((stage.into(), seconds));
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.1).sum()
    }

    /// Sidecar path for a report: `foo.json` -> `foo.timing.json`.
    pub fn sidecar_path(report: &Path) -> PathBuf {
        let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        report.with_file_name(format!("{stem}.timing.json"))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        write_file(path, s.as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub const AKR_COLUMNS: [&str; 8] = [
    "topology",
    "loss_db",
    "model_rate_hz",
    "g_r_hz",
    "akr",
    "key_rate_hz",
    "switched_rate_hz",
    "switched_key_rate_hz",
];

pub const SWEEP_COLUMNS: [&str; 15] = [
    "rounds",
    "p",
    "m",
    "n",
    "q_x_m",
    "qber_m",
    "eps_ec",
    "eps_pa",
    "bound_fraction",
    "bound_bits",
    "realized_fraction",
    "realized_bits",
    "code_rate",
    "leakage_bits",
    "status",
];

/// Feasible grid points only; masked points are counted in the report.
pub const SURFACE_COLUMNS: [&str; 6] = ["p1", "p2", "p3", "q_x", "grad_p1", "grad_p2"];

fn csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

pub fn akr_csv(rows: &[AkrRow]) -> String {
    csv(
        &AKR_COLUMNS,
        rows.iter().map(|r| {
            vec![
                format!("\"{}\"", r.topology),
                r.loss_db.to_string(),
                r.model_rate_hz.to_string(),
                r.g_r_hz.to_string(),
                r.akr.to_string(),
                r.key_rate_hz.to_string(),
                r.switched_rate_hz.to_string(),
                r.switched_key_rate_hz.to_string(),
            ]
        }),
    )
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    csv(
        &SWEEP_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.rounds.to_string(),
                r.p.to_string(),
                r.m.to_string(),
                r.n.to_string(),
                r.q_x_m.to_string(),
                r.qber_m.to_string(),
                r.eps_ec.to_string(),
                r.eps_pa.to_string(),
                r.bound_fraction.to_string(),
                r.bound_bits.to_string(),
                r.realized_fraction.to_string(),
                r.realized_bits.to_string(),
                r.code_rate.clone().unwrap_or_default(),
                r.leakage_bits.to_string(),
                r.status.clone(),
            ]
        }),
    )
}

pub fn surface_csv(s: &Surface) -> String {
    csv(
        &SURFACE_COLUMNS,
        s.points.iter().map(|p| {
            vec![
                p.p1.to_string(),
                p.p2.to_string(),
                p.p3.to_string(),
                p.q_x.to_string(),
                p.grad_p1.to_string(),
                p.grad_p2.to_string(),
            ]
        }),
    )
}

/// gnuplot script for the AKR table: key rate against loss, with the
/// switched-rate extrapolation.
pub fn akr_gnuplot(csv_name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set xlabel 'total loss (dB)'");
    let _ = writeln!(s, "set ylabel 'rate (Hz)'");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(
        s,
        "plot '{csv_name}' using 2:4 with linespoints title 'g_R', \\\n     '{csv_name}' using 2:6 with linespoints title 'AKR g_R', \\\n     '{csv_name}' using 2:8 with points title 'switched'"
    );
    s
}

/// gnuplot script for the sweep: bound and realized key fraction against `L`.
pub fn sweep_gnuplot(csv_name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale x");
    let _ = writeln!(s, "set xlabel 'rounds L'");
    let _ = writeln!(s, "set ylabel 'key / L'");
    let _ = writeln!(
        s,
        "plot '{csv_name}' using 1:9 with lines title 'bound', \\\n     '{csv_name}' using 1:11 with linespoints title 'realized'"
    );
    s
}

pub fn surface_gnuplot(csv_name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set xlabel 'p1'");
    let _ = writeln!(s, "set ylabel 'p2'");
    let _ = writeln!(s, "set view map");
    let _ = writeln!(s, "splot '{csv_name}' using 1:2:4 every ::1 with points palette pointtype 5 notitle");
    s
}

/// Write `text` to `dir/name`, creating `dir`.
pub fn write_table(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    write_file(&path, text.as_bytes())?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::surface::topology_noise_surface;

    #[test]
    fn report_json_is_sorted_and_stable() {
        #[derive(Serialize)]
        struct B {
            zeta: u32,
            alpha: f64,
        }
        let r = Report::new("keyrate", 7, None, B { zeta: 1, alpha: 0.5 }).unwrap();
        let j = r.to_json().unwrap();
        assert!(j.find("\"alpha\"").unwrap() < j.find("\"zeta\"").unwrap());
        assert!(j.find("\"body\"").unwrap() < j.find("\"command\"").unwrap());
        assert_eq!(j, Report::new("keyrate", 7, None, B { zeta: 1, alpha: 0.5 }).unwrap().to_json().unwrap());
    }

    #[test]
    fn csv_headers_are_fixed() {
        let s = surface_csv(&topology_noise_surface(1.5, 0.25).unwrap());
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), SURFACE_COLUMNS.join(","));
        assert!(lines.all(|l| l.split(',').count() == SURFACE_COLUMNS.len()));
        assert_eq!(akr_csv(&[]), AKR_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(Timing::sidecar_path(Path::new("out/run.json")), PathBuf::from("out/run.timing.json"));
    }
}
