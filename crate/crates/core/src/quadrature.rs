//! Composite Gauss–Legendre quadrature with panel doubling.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Nodes and weights of the m-point rule on [−1, 1], by Newton iteration on P_m.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    for i in 0..m {
        let mut z = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 0 { 1.0 } else if m == 1 { z } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (z * p - pm1) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x.push(z);
        w.push(2.0 / ((1.0 - z * z) * dp * dp));
    }
    (x, w)
}

const RULE: usize = 20;
const MAX_PANELS: usize = 1 << 12;

/// ∫_a^b f, doubling the number of 20-point panels until two successive
/// levels differ by less than `tol`. Returns the value and that difference.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let (x, w) = gauss_legendre(RULE);
    let mut rule = |panels: usize| -> f64 {
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (xi, wi) in x.iter().zip(w.iter()) {
                s += wi * f(mid + 0.5 * h * xi);
            }
        }
        0.5 * h * s
    };
    let mut panels = 1;
    let mut prev = rule(panels);
    while panels < MAX_PANELS {
        panels *= 2;
        let cur = rule(panels);
        let diff = (cur - prev).abs();
        if diff < tol {
            return Ok((cur, diff));
        }
        prev = cur;
    }
    Err(Error::Quadrature(format!("no convergence to {tol} with {MAX_PANELS} panels")))
}
