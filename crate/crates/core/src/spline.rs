//! One-dimensional piecewise-cubic interpolants.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

fn check_nodes(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Mismatch(alloc::format!(
            "interpolation needs >= 2 matching nodes, got {} x and {} y",
            xs.len(),
            ys.len()
        )));
    }
    if !xs.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::GridGap(alloc::string::String::from("interpolation nodes must be strictly increasing")));
    }
    Ok(())
}

#[inline]
fn locate(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    match xs.binary_search_by(|v| v.total_cmp(&x)) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(n - 2),
    }
}

/// Piecewise cubic Hermite interpolant given node values and slopes.
#[derive(Debug, Clone)]
pub struct HermiteCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl HermiteCubic {
    /// Evaluates the interpolant; outside the node range the end cubic is continued.
    pub fn eval(&self, x: f64) -> f64 {
        let i = locate(&self.xs, x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }
}

/// Natural cubic spline (zero second derivative at both ends).
pub fn natural_cubic(xs: &[f64], ys: &[f64]) -> Result<HermiteCubic> {
    check_nodes(xs, ys)?;
    let n = xs.len();
    if n == 2 {
        let d = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return Ok(HermiteCubic { xs: xs.to_vec(), ys: ys.to_vec(), ds: vec![d, d] });
    }
    // Solve for second derivatives M_i with M_0 = M_{n-1} = 0 (Thomas algorithm).
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let m = n - 2;
    let mut diag = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    let mut sub = vec![0.0; m];
    let mut sup = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        sub[k] = h[i - 1];
        sup[k] = h[i];
        rhs[k] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
    }
    for k in 1..m {
        let w = sub[k] / diag[k - 1];
        diag[k] -= w * sup[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    let mut second = vec![0.0; n];
    for k in (0..m).rev() {
        let next = if k + 1 < m { second[k + 2] } else { 0.0 };
        second[k + 1] = (rhs[k] - sup[k] * next) / diag[k];
    }
    let mut ds = vec![0.0; n];
    for i in 0..n - 1 {
        ds[i] = (ys[i + 1] - ys[i]) / h[i] - h[i] * (2.0 * second[i] + second[i + 1]) / 6.0;
    }
    let i = n - 2;
    ds[n - 1] = (ys[i + 1] - ys[i]) / h[i] + h[i] * (second[i] + 2.0 * second[i + 1]) / 6.0;
    Ok(HermiteCubic { xs: xs.to_vec(), ys: ys.to_vec(), ds })
}

/// Monotone cubic (Fritsch–Carlson / PCHIP) interpolant.
pub fn monotone_cubic(xs: &[f64], ys: &[f64]) -> Result<HermiteCubic> {
    check_nodes(xs, ys)?;
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
    if n == 2 {
        return Ok(HermiteCubic { xs: xs.to_vec(), ys: ys.to_vec(), ds: vec![delta[0], delta[0]] });
    }
    let mut ds = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            ds[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            ds[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    ds[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
    ds[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    Ok(HermiteCubic { xs: xs.to_vec(), ys: ys.to_vec(), ds })
}

// Three-point end slope, limited to preserve shape.
fn pchip_end(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && d.abs() > (3.0 * d0).abs() {
        3.0 * d0
    } else {
        d
    }
}
