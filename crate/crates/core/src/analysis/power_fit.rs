//! Linear pump-power trends of the two error rates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise_model::SourceNoise;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSample {
    pub power_mw: f64,
    pub q_x: f64,
    pub qber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub qx_slope: f64,
    pub qx_intercept: f64,
    /// Through the origin: the QBER vanishes at zero power.
    pub qber_slope: f64,
    pub qx_slope_se: f64,
    pub qx_intercept_se: f64,
    pub qber_slope_se: f64,
}

impl PowerFit {
    /// Source model at `pump_power_mw` with visibility taken from the intercept.
    pub fn source_noise(&self, pump_power_mw: f64, bobs: usize) -> Result<SourceNoise> {
        let s = SourceNoise {
            t_interference: 1.0 - 2.0 * self.qx_intercept,
            qx_slope: self.qx_slope,
            qber_slope: self.qber_slope,
            qx_intercept: self.qx_intercept,
            pump_power_mw,
            bobs,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Affine least squares for `Q_X`, through-origin least squares for QBER.
pub fn fit_power_trend(samples: &[PowerSample]) -> Result<PowerFit> {
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.power_mw).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.power_mw - mean_x).powi(2)).sum();
    if samples.len() < 2 || !(sxx > 1e-12 * (1.0 + mean_x * mean_x)) {
        return Err(invalid("power fit needs at least two distinct powers"));
    }
    let mean_y = samples.iter().map(|s| s.q_x).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.power_mw - mean_x) * (s.q_x - mean_y)).sum();
    let qx_slope = sxy / sxx;
    let qx_intercept = mean_y - qx_slope * mean_x;
    let rss_x: f64 = samples.iter().map(|s| (s.q_x - qx_intercept - qx_slope * s.power_mw).powi(2)).sum();
    let s2_x = if samples.len() > 2 { rss_x / (n - 2.0) } else { 0.0 };

    let sx2: f64 = samples.iter().map(|s| s.power_mw * s.power_mw).sum();
    let qber_slope = samples.iter().map(|s| s.power_mw * s.qber).sum::<f64>() / sx2;
    let rss_q: f64 = samples.iter().map(|s| (s.qber - qber_slope * s.power_mw).powi(2)).sum();
    let s2_q = rss_q / (n - 1.0);

    Ok(PowerFit {
        qx_slope,
        qx_intercept,
        qber_slope,
        qx_slope_se: (s2_x / sxx).sqrt(),
        qx_intercept_se: (s2_x * (1.0 / n + mean_x * mean_x / sxx)).sqrt(),
        qber_slope_se: (s2_q / sx2).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand_distr::{Distribution, Normal};

    fn exact(powers: &[f64], a: f64, b: f64, c: f64) -> Vec<PowerSample> {
        powers.iter().map(|&p| PowerSample { power_mw: p, q_x: a * p + b, qber: c * p }).collect()
    }

    #[test]
    fn exact_data_is_recovered() {
        let f = fit_power_trend(&exact(&[20.0, 40.0, 60.0, 80.0, 100.0], 1e-4, 0.05, 1.59e-4)).unwrap();
        assert!((f.qx_slope - 1e-4).abs() < 1e-12);
        assert!((f.qx_intercept - 0.05).abs() < 1e-12);
        assert!((f.qber_slope - 1.59e-4).abs() < 1e-12);
        let src = f.source_noise(100.0, 3).unwrap();
        assert!((src.t_interference - 0.9).abs() < 1e-9);
    }

    #[test]
    fn degenerate_designs_are_rejected() {
        assert!(fit_power_trend(&exact(&[50.0], 0.0, 0.05, 0.0)).is_err());
        assert!(fit_power_trend(&exact(&[50.0, 50.0], 0.0, 0.05, 0.0)).is_err());
    }

    #[test]
    fn noisy_fit_within_three_sigma() {
        let mut r = rng::from_seed(11);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let powers: Vec<f64> = (1..=20).map(|i| 5.0 * i as f64).collect();
        let samples: Vec<PowerSample> = powers
            .iter()
            .map(|&p| PowerSample {
                power_mw: p,
                q_x: 2e-4 * p + 0.05 + noise.sample(&mut r),
                qber: 1.59e-4 * p + noise.sample(&mut r),
            })
            .collect();
        let f = fit_power_trend(&samples).unwrap();
        assert!((f.qx_slope - 2e-4).abs() < 3.0 * f.qx_slope_se);
        assert!((f.qx_intercept - 0.05).abs() < 3.0 * f.qx_intercept_se);
        assert!((f.qber_slope - 1.59e-4).abs() < 3.0 * f.qber_slope_se);
    }
}
