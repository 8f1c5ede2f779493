//! LDPC decoding-threshold scan used to produce the rate-selection table.

use std::fmt::Write as _;

use qcka::postprocess::{measure_fer, CodeRate, FerPoint, LdpcCode};
use qcka::Result;

#[derive(Debug, Clone)]
pub struct ScanSettings {
    pub block_j: usize,
    pub blocks: usize,
    pub max_iters: usize,
    pub qber_start: f64,
    pub qber_step: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RateScan {
    pub rate: CodeRate,
    pub points: Vec<FerPoint>,
    /// Highest scanned QBER at which every block decoded, with all lower
    /// points also clean.
    pub threshold: Option<f64>,
}

/// Walk QBER upward from `qber_start` until a point records a failure.
pub fn scan_rate(rate: CodeRate, s: &ScanSettings) -> Result<RateScan> {
    let code = LdpcCode::construct(rate, s.block_j)?;
    let mut points = Vec::new();
    let mut threshold = None;
    for i in 0.. {
        let q = s.qber_start + i as f64 * s.qber_step;
        if q >= 0.2 {
            break;
        }
        let pt = measure_fer(&code, q, s.blocks, s.max_iters, s.seed.wrapping_add(i))?;
        let clean = pt.failures == 0;
        points.push(pt);
        if !clean {
            break;
        }
        threshold = Some(q);
    }
    Ok(RateScan { rate, points, threshold })
}

/// Rate table in the format read by `postprocess.thresholds_file`.
pub fn thresholds_toml(scans: &[RateScan], s: &ScanSettings) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Measured by `fer-scan`: block_j = {}, {} blocks per point,", s.block_j, s.blocks);
    let _ = writeln!(
        out,
        "# max_iters = {}, QBER grid {} + k * {}, seed {}.",
        s.max_iters, s.qber_start, s.qber_step, s.seed
    );
    let _ = writeln!(out, "# max_qber is the last grid point before the first decoding failure.");
    let _ = writeln!(out, "margin = 0.0");
    for sc in scans {
        if let Some(t) = sc.threshold {
            let _ = writeln!(out, "\n[[thresholds]]\nrate = \"{}\"\nmax_qber = {}", sc.rate, round6(t));
        }
    }
    out
}

/// FER table as CSV: `rate,block_j,qber,blocks,failures,mean_iterations`.
pub fn fer_csv(scans: &[RateScan]) -> String {
    let mut out = String::from("rate,block_j,qber,blocks,failures,mean_iterations\n");
    for sc in scans {
        for p in &sc.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                p.rate,
                p.block_j,
                round6(p.qber),
                p.blocks,
                p.failures,
                p.mean_iterations
            );
        }
    }
    out
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}
