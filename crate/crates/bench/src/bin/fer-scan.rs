//! `fer-scan [block_j] [blocks] [out.toml] [out.csv]`

use std::time::Instant;

use qcka::postprocess::CodeRate;
use qcka_bench::{fer_csv, scan_rate, thresholds_toml, ScanSettings};

fn main() -> qcka::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let s = ScanSettings {
        block_j: arg(0, "64800").parse().expect("block_j"),
        blocks: arg(1, "20").parse().expect("blocks"),
        max_iters: 50,
        qber_start: 0.005,
        qber_step: 0.0025,
        seed: 2024,
    };
    let mut scans = Vec::new();
    for rate in CodeRate::ALL {
        let t = Instant::now();
        let sc = scan_rate(rate, &s)?;
        eprintln!("{rate}: threshold {:?} ({:.1} s)", sc.threshold, t.elapsed().as_secs_f64());
        scans.push(sc);
    }
    let toml = thresholds_toml(&scans, &s);
    match args.get(2) {
        Some(p) => std::fs::write(p, &toml)?,
        None => print!("{toml}"),
    }
    if let Some(p) = args.get(3) {
        std::fs::write(p, fer_csv(&scans))?;
    }
    Ok(())
}
