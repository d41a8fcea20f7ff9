//! Adaptive Dormand–Prince 5(4) integration with continuous (dense) output.
//!
//! Step-size control follows the PI controller of Hairer, Nørsett & Wanner;
//! the interpolant is the classic 4th-order `contd5` polynomial. Stepping is
//! fully deterministic: no randomized restarts, no thread-dependent state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OdeConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Upper bound on the step size (`f64::MAX` for none).
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-11, rel_tol: 1e-11, max_step: f64::MAX, max_steps: 2_000_000 }
    }
}

impl OdeConfig {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t <= 1e-2;
        if !ok(self.abs_tol) || !ok(self.rel_tol) {
            return Err(Error::InvalidIntegration(format!(
                "tolerances must lie in (0, 1e-2], got abs {} rel {}",
                self.abs_tol, self.rel_tol
            )));
        }
        if !(self.max_step > 0.0) || self.max_steps == 0 {
            return Err(Error::InvalidIntegration(format!(
                "max_step {} / max_steps {} must be positive",
                self.max_step, self.max_steps
            )));
        }
        Ok(())
    }
}

/// Accepted steps of an integration together with their interpolants.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    // five coefficient vectors per step
    coeffs: Vec<f64>,
}

impl DenseTrajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Node times `t_0 < t_1 < ... < t_K`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// State at node `k`.
    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.times.len() - 1)
    }

    /// Interpolated state at `t`; times outside the span are clamped.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n_steps = self.n_steps();
        if n_steps == 0 || t <= self.times[0] {
            out.copy_from_slice(self.state(0));
            return;
        }
        if t >= self.t_end() {
            out.copy_from_slice(self.final_state());
            return;
        }
        // last node <= t
        let k = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return out.copy_from_slice(self.state(i)),
            Err(i) => i - 1,
        };
        let h = self.times[k + 1] - self.times[k];
        let s = (t - self.times[k]) / h;
        let s1 = 1.0 - s;
        let d = self.dim;
        let c = &self.coeffs[k * 5 * d..(k + 1) * 5 * d];
        for i in 0..d {
            out[i] = c[i] + s * (c[d + i] + s1 * (c[2 * d + i] + s * (c[3 * d + i] + s1 * c[4 * d + i])));
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
// 1/fac1 and 1/fac2 with fac1 = 0.2, fac2 = 10
const FACC1: f64 = 5.0;
const FACC2: f64 = 0.1;

struct Step<'a> {
    t: f64,
    h: f64,
    y0: &'a [f64],
    y1: &'a [f64],
    k1: &'a [f64],
    k3: &'a [f64],
    k4: &'a [f64],
    k5: &'a [f64],
    k6: &'a [f64],
    k7: &'a [f64],
}

fn check_finite(v: &[f64], t: f64) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { t })
    }
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], span: f64, cfg: &OdeConfig) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let sk = |i: usize| cfg.abs_tol + cfg.rel_tol * y0[i].abs();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        dnf += (f0[i] / sk(i)) * (f0[i] / sk(i));
        dny += (y0[i] / sk(i)) * (y0[i] / sk(i));
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { libm::sqrt(dny / dnf) * 0.01 };
    h = h.min(cfg.max_step).min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h, &y1, &mut f1);
    check_finite(&f1, t0 + h)?;
    let mut der2 = 0.0;
    for i in 0..n {
        let d = (f1[i] - f0[i]) / sk(i);
        der2 += d * d;
    }
    let der2 = libm::sqrt(der2) / h;
    let der12 = der2.max(libm::sqrt(dnf));
    let h1 = if der12 <= 1e-15 {
        (1e-6f64).max(h * 1e-3)
    } else {
        libm::pow(0.01 / der12, 0.2)
    };
    Ok((100.0 * h).min(h1).min(cfg.max_step).min(span))
}

fn drive<F, S>(mut rhs: F, y0: &[f64], t_span: (f64, f64), cfg: &OdeConfig, mut on_step: S) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(&Step<'_>),
{
    cfg.validate()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
        return Err(Error::InvalidIntegration(format!("time span ({}, {}) must be increasing", t0, t1)));
    }
    check_finite(y0, t0)?;
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut y1 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];

    rhs(t0, &y, &mut k1);
    check_finite(&k1, t0)?;
    let mut h = initial_step(&mut rhs, t0, &y, &k1, t1 - t0, cfg)?;
    let mut t = t0;
    let mut facold: f64 = 1e-4;
    let mut reject = false;
    let mut steps = 0usize;

    while t < t1 {
        if steps >= cfg.max_steps {
            return Err(Error::StepLimit { t, max_steps: cfg.max_steps });
        }
        steps += 1;
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + h, &ytmp, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(t + h, &y1, &mut k7);
        if !(k7.iter().chain(&y1).all(|v| v.is_finite())) {
            return Err(Error::Divergence { t: t + h });
        }

        let mut err = 0.0;
        for i in 0..n {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y1[i].abs());
            err += (e / sk) * (e / sk);
        }
        let err = libm::sqrt(err / n.max(1) as f64);
        if !err.is_finite() {
            return Err(Error::Divergence { t: t + h });
        }

        let fac11 = libm::pow(err, EXPO1);
        let fac = (fac11 / libm::pow(facold, BETA) / SAFETY).clamp(FACC2, FACC1);
        let hnew = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            on_step(&Step { t, h, y0: &y, y1: &y1, k1: &k1, k3: &k3, k4: &k4, k5: &k5, k6: &k6, k7: &k7 });
            core::mem::swap(&mut k1, &mut k7);
            core::mem::swap(&mut y, &mut y1);
            t = if last { t1 } else { t + h };
            let mut hn = hnew.min(cfg.max_step);
            if reject {
                hn = hn.min(h);
            }
            reject = false;
            h = hn;
        } else {
            h /= (fac11 / SAFETY).min(FACC1);
            reject = true;
        }
        if h < 1e-14 * t.abs().max(1.0) && t < t1 {
            return Err(Error::Divergence { t });
        }
    }
    Ok(y)
}

/// Integrates `y' = rhs(t, y)` over `t_span`, keeping dense output.
pub fn integrate<F>(rhs: F, y0: &[f64], t_span: (f64, f64), cfg: &OdeConfig) -> Result<DenseTrajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let dim = y0.len();
    let mut times = vec![t_span.0];
    let mut states = y0.to_vec();
    let mut coeffs = Vec::new();
    drive(rhs, y0, t_span, cfg, |s| {
        let h = s.h;
        for i in 0..dim {
            coeffs.push(s.y0[i]);
        }
        for i in 0..dim {
            coeffs.push(s.y1[i] - s.y0[i]);
        }
        for i in 0..dim {
            coeffs.push(h * s.k1[i] - (s.y1[i] - s.y0[i]));
        }
        for i in 0..dim {
            let ydiff = s.y1[i] - s.y0[i];
            let bspl = h * s.k1[i] - ydiff;
            coeffs.push(ydiff - h * s.k7[i] - bspl);
        }
        for i in 0..dim {
            coeffs.push(h * (D1 * s.k1[i] + D3 * s.k3[i] + D4 * s.k4[i] + D5 * s.k5[i] + D6 * s.k6[i] + D7 * s.k7[i]));
        }
        times.push(s.t + s.h);
        states.extend_from_slice(s.y1);
    })?;
    // the final step lands exactly on t1
    *times.last_mut().unwrap() = t_span.1;
    Ok(DenseTrajectory { dim, times, states, coeffs })
}

/// Integrates and returns only the final state.
pub fn integrate_final<F>(rhs: F, y0: &[f64], t_span: (f64, f64), cfg: &OdeConfig) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    drive(rhs, y0, t_span, cfg, |_| {})
}
