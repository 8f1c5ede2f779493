//! `Q_X` over the split of a fixed total depolarizing noise between three
//! Bob links, with Alice's link noiseless.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::noise_model::{expected_qx_depol, DepolarizingParams};

/// `f(p1, p2) = Q_X(0; p1, p2, c - p1 - p2)`.
pub fn surface_value(p1: f64, p2: f64, c: f64) -> Result<f64> {
    let p3 = (c - p1 - p2).clamp(0.0, 1.0);
    expected_qx_depol(&DepolarizingParams::new(0.0, vec![p1, p2, p3])?)
}

/// Analytic `(df/dp1, df/dp2)`.
pub fn surface_gradient(p1: f64, p2: f64, c: f64) -> (f64, f64) {
    (0.5 * (p2 - 1.0) * (c - 2.0 * p1 - p2), 0.5 * (p1 - 1.0) * (c - p1 - 2.0 * p2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub q_x: f64,
    pub grad_p1: f64,
    pub grad_p2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub c: f64,
    pub grid_step: f64,
    /// Feasible grid points (`0 <= p3 <= 1`) in row-major `(p1, p2)` order.
    pub points: Vec<SurfacePoint>,
    pub masked: usize,
    pub argmin: (f64, f64),
    pub min_q_x: f64,
}

pub fn topology_noise_surface(c: f64, grid_step: f64) -> Result<Surface> {
    if !(0.0..=3.0).contains(&c) {
        return Err(invalid(format!("total noise c = {c} outside [0, 3]")));
    }
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(invalid(format!("grid step {grid_step} outside (0, 1]")));
    }
    let steps = (1.0 / grid_step).round() as usize;
    let tol = 1e-9;
    let mut points = Vec::new();
    let mut masked = 0;
    for i in 0..=steps {
        let p1 = i as f64 / steps as f64;
        for j in 0..=steps {
            let p2 = j as f64 / steps as f64;
            let p3 = c - p1 - p2;
            if !(-tol..=1.0 + tol).contains(&p3) {
                masked += 1;
                continue;
            }
            let (grad_p1, grad_p2) = surface_gradient(p1, p2, c);
            points.push(SurfacePoint { p1, p2, p3: p3.clamp(0.0, 1.0), q_x: surface_value(p1, p2, c)?, grad_p1, grad_p2 });
        }
    }
    let (argmin, min_q_x) = points
        .iter()
        .min_by(|a, b| a.q_x.total_cmp(&b.q_x))
        .map(|b| ((b.p1, b.p2), b.q_x))
        .ok_or_else(|| invalid(format!("no feasible grid point for c = {c}")))?;
    Ok(Surface { c, grid_step, points, masked, argmin, min_q_x })
}
