//! Damped Newton shooting for the initial Lax eigenvector.
//!
//! The default parameterization integrates over a unit horizon and lets `L0`
//! float; the physical time follows from the constraint norm at `t = 0`.
//! A fixed-resource mode with explicit `tau` is available for comparison.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lattice::{constraint_norm, LatticeSpec};
use crate::ode::{integrate, integrate_final, OdeConfig};
use crate::propagator::transfer_fidelity;
use crate::reduced::{assemble_protocol_with, reconstruct_couplings, ChiralAmplitude, Protocol, ReducedSystem};

/// Free initial data: `y_2(0) .. y_N(0)` and `L0` (unit horizon).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShootingUnknowns {
    pub y_tail: Vec<f64>,
    pub l0: f64,
}

impl ShootingUnknowns {
    pub fn new(y_tail: Vec<f64>, l0: f64) -> Self {
        Self { y_tail, l0 }
    }

    pub fn n_sites(&self) -> usize {
        self.y_tail.len() + 1
    }

    fn to_vec(&self) -> Vec<f64> {
        let mut v = self.y_tail.clone();
        v.push(self.l0);
        v
    }

    fn from_slice(u: &[f64]) -> Self {
        let n = u.len() - 1;
        Self { y_tail: u[..n].to_vec(), l0: u[n] }
    }

    /// `alpha(0) = (e_1 / sqrt 2, i y)` as a flat `x || y` state.
    pub fn initial_state(&self) -> Vec<f64> {
        let n = self.n_sites();
        let mut s = vec![0.0; 2 * n];
        s[0] = FRAC_1_SQRT_2;
        s[n + 1..].copy_from_slice(&self.y_tail);
        s
    }

    pub fn is_finite(&self) -> bool {
        self.l0.is_finite() && self.y_tail.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShootingConfig {
    /// Convergence threshold on the Euclidean residual norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative central-difference step.
    pub fd_step: f64,
    /// Backtracking factor.
    pub damping: f64,
    /// Smallest accepted Newton step fraction.
    pub min_step: f64,
    /// Cap on a full Newton step per component, relative to `max(1, |u_i|)`.
    pub max_newton_step: f64,
    pub jitter_retries: usize,
    pub jitter: f64,
    pub seed: u64,
    /// Required `1 - fidelity` margin of the forward check.
    pub fidelity_tol: f64,
    pub nodes: usize,
    pub ode: OdeConfig,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            fd_step: 1e-7,
            damping: 0.5,
            min_step: 1e-4,
            max_newton_step: 0.5,
            jitter_retries: 5,
            jitter: 1e-2,
            seed: 0x5eed,
            fidelity_tol: 1e-6,
            nodes: crate::reduced::DEFAULT_NODES,
            ode: OdeConfig::default(),
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        self.ode.validate()?;
        let ok = self.tol > 0.0
            && self.max_iter > 0
            && self.fd_step > 0.0
            && self.damping > 0.0
            && self.damping < 1.0
            && self.min_step > 0.0
            && self.min_step <= 1.0
            && self.max_newton_step > 0.0
            && self.fidelity_tol > 0.0
            && self.nodes >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidIntegration(String::from("invalid shooting configuration")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShootingResult {
    pub protocol: Protocol,
    pub unknowns: ShootingUnknowns,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub j0_tau: f64,
    pub fidelity: f64,
}

fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Shooting residual: `x_1(1) .. x_{N-1}(1)` and `|alpha(0)|^2 - 1`.
pub fn residual(u: &ShootingUnknowns, spec: &LatticeSpec) -> Result<Vec<f64>> {
    residual_with(u, spec, &OdeConfig::default())
}

pub fn residual_with(u: &ShootingUnknowns, spec: &LatticeSpec, ode: &OdeConfig) -> Result<Vec<f64>> {
    let n = spec.n_sites();
    if u.n_sites() != n {
        return Err(Error::Mismatch(format!("{} unknowns for {} sites", u.y_tail.len(), n)));
    }
    let sys = ReducedSystem::new(spec);
    flow_residual(&sys, &u.initial_state(), u.l0, 1.0, ode)
}

fn flow_residual(sys: &ReducedSystem, s0: &[f64], l0: f64, horizon: f64, ode: &OdeConfig) -> Result<Vec<f64>> {
    let n = sys.n();
    let end = integrate_final(|_, s, d| sys.rhs(l0, s, d), s0, (0.0, horizon), ode)?;
    let mut r = Vec::with_capacity(n);
    r.extend_from_slice(&end[..n - 1]);
    r.push(s0.iter().map(|v| v * v).sum::<f64>() - 1.0);
    Ok(r)
}

/// Central-difference Jacobian of `f` at `u`; steps are `h max(1, |u_i|)`.
pub fn fd_jacobian<F>(f: &mut F, u: &[f64], h: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let k = u.len();
    let mut jac: Option<DMatrix<f64>> = None;
    let mut w = u.to_vec();
    for i in 0..k {
        let step = h * u[i].abs().max(1.0);
        w[i] = u[i] + step;
        let fp = f(&w)?;
        w[i] = u[i] - step;
        let fm = f(&w)?;
        w[i] = u[i];
        let m = jac.get_or_insert_with(|| DMatrix::zeros(fp.len(), k));
        for r in 0..fp.len() {
            m[(r, i)] = (fp[r] - fm[r]) / (2.0 * step);
        }
    }
    jac.ok_or_else(|| Error::Mismatch(String::from("empty unknown vector")))
}

/// Outcome of a Newton iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Newton with backtracking on the residual norm. `admissible`
/// rejects iterates outside the domain (treated like a failed evaluation).
pub fn damped_newton<F, A>(mut f: F, admissible: A, u0: &[f64], cfg: &ShootingConfig) -> Result<NewtonOutcome>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
    A: Fn(&[f64]) -> bool,
{
    let mut u = u0.to_vec();
    let mut r = f(&u)?;
    let mut rn = norm2(&r);
    let mut it = 0;
    while it < cfg.max_iter {
        if rn < cfg.tol {
            return Ok(NewtonOutcome { u, residual_norm: rn, iterations: it, converged: true });
        }
        it += 1;
        let jac = fd_jacobian(&mut f, &u, cfg.fd_step)?;
        let rhs = -DVector::from_column_slice(&r);
        let delta = match jac.clone().lu().solve(&rhs) {
            Some(d) if d.iter().all(|v| v.is_finite()) => d,
            _ => jac.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::Mismatch(String::from(e)))?,
        };
        let excess = u
            .iter()
            .zip(delta.iter())
            .map(|(a, d)| d.abs() / (cfg.max_newton_step * a.abs().max(1.0)))
            .fold(1.0, f64::max);
        let delta = delta / excess;
        let mut lambda = 1.0;
        let mut accepted = false;
        while lambda >= cfg.min_step {
            let trial: Vec<f64> = u.iter().zip(delta.iter()).map(|(a, d)| a + lambda * d).collect();
            if admissible(&trial) {
                if let Ok(rt) = f(&trial) {
                    let tn = norm2(&rt);
                    if tn.is_finite() && tn < (1.0 - 1e-4 * lambda) * rn {
                        u = trial;
                        r = rt;
                        rn = tn;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= cfg.damping;
        }
        if !accepted {
            break;
        }
    }
    Ok(NewtonOutcome { converged: rn < cfg.tol, u, residual_norm: rn, iterations: it })
}

fn jittered(u: &[f64], rng: &mut ChaCha8Rng, amount: f64) -> Vec<f64> {
    let k = u.len();
    u.iter()
        .enumerate()
        .map(|(i, v)| {
            let e: f64 = rng.random_range(-1.0..1.0);
            if i + 1 == k {
                v * (1.0 + amount * e)
            } else {
                v + amount * e
            }
        })
        .collect()
}

fn finish(
    spec: &LatticeSpec,
    unknowns: ShootingUnknowns,
    horizon: f64,
    outcome: &NewtonOutcome,
    cfg: &ShootingConfig,
) -> Result<ShootingResult> {
    let sys = ReducedSystem::new(spec);
    let l0 = unknowns.l0;
    let traj = integrate(|_, s, d| sys.rhs(l0, s, d), &unknowns.initial_state(), (0.0, horizon), &cfg.ode)?;
    let mut protocol = assemble_protocol_with(&traj, spec, l0, horizon, cfg.nodes)?;
    let fidelity = transfer_fidelity(&protocol)?;
    protocol.diagnostics.insert(String::from("fidelity"), fidelity);
    protocol.diagnostics.insert(String::from("residual_norm"), outcome.residual_norm);
    protocol.diagnostics.insert(String::from("iterations"), outcome.iterations as f64);
    if fidelity < 1.0 - cfg.fidelity_tol {
        return Err(Error::Inconsistent { fidelity });
    }
    Ok(ShootingResult {
        j0_tau: protocol.j0_tau(),
        protocol,
        unknowns,
        residual_norm: outcome.residual_norm,
        iterations: outcome.iterations,
        converged: true,
        fidelity,
    })
}

// Each y_m(0) with m >= 2 may be flipped independently (site sign gauge,
// since x_m(0) = 0 there); report the representative with y >= 0.
fn canonical(u: &[f64]) -> ShootingUnknowns {
    let mut s = ShootingUnknowns::from_slice(u);
    s.y_tail.iter_mut().for_each(|v| *v = v.abs());
    s
}

fn run_with_retries<S>(u0: Vec<f64>, cfg: &ShootingConfig, mut attempt: S) -> Result<ShootingResult>
where
    S: FnMut(&[f64]) -> Result<ShootingResult>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut last_err = None;
    for k in 0..=cfg.jitter_retries {
        let start = if k == 0 { u0.clone() } else { jittered(&u0, &mut rng, cfg.jitter) };
        match attempt(&start) {
            Ok(r) => return Ok(r),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or(Error::SeedNotConverged))
}

/// Solves one instance from `guess` (unit-horizon parameterization) and
/// verifies the root by forward Schrödinger propagation.
pub fn solve_instance(spec: &LatticeSpec, guess: &ShootingUnknowns, cfg: &ShootingConfig) -> Result<ShootingResult> {
    cfg.validate()?;
    let n = spec.n_sites();
    if guess.n_sites() != n {
        return Err(Error::Mismatch(format!("guess has {} unknowns for {} sites", guess.y_tail.len(), n)));
    }
    if !guess.is_finite() {
        return Err(Error::Domain(String::from("guess is not finite")));
    }
    let sys = ReducedSystem::new(spec);
    run_with_retries(guess.to_vec(), cfg, |start| {
        let f = |u: &[f64]| {
            let s = ShootingUnknowns::from_slice(u);
            flow_residual(&sys, &s.initial_state(), s.l0, 1.0, &cfg.ode)
        };
        let out = damped_newton(f, |u| u[u.len() - 1] > 0.0, start, cfg)?;
        if !out.converged {
            return Err(Error::NotConverged {
                best_residual: out.residual_norm,
                iterations: out.iterations,
                iterate: out.u,
            });
        }
        finish(spec, canonical(&out.u), 1.0, &out, cfg)
    })
}

/// Initial data for the fixed-resource parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedResourceGuess {
    pub unknowns: ShootingUnknowns,
    pub tau: f64,
}

impl FixedResourceGuess {
    /// Converts a unit-horizon guess to physical `L0` and `tau` for the spec's `j0`.
    pub fn from_unit_horizon(spec: &LatticeSpec, u: &ShootingUnknowns) -> Self {
        let a = ChiralAmplitude::from_state(&u.initial_state(), u.l0);
        let c = libm::sqrt(constraint_norm(spec, &reconstruct_couplings(&a, spec)));
        let scale = spec.j0() / c;
        Self { unknowns: ShootingUnknowns::new(u.y_tail.clone(), u.l0 * scale), tau: 1.0 / scale }
    }
}

/// Literal parameterization: unknowns `(y, L0, tau)` with the constraint
/// norm at `t = 0` pinned to `j0^2`.
pub fn solve_fixed_resource(
    spec: &LatticeSpec,
    guess: &FixedResourceGuess,
    cfg: &ShootingConfig,
) -> Result<ShootingResult> {
    cfg.validate()?;
    let n = spec.n_sites();
    if guess.unknowns.n_sites() != n {
        return Err(Error::Mismatch(format!("guess has {} unknowns for {} sites", guess.unknowns.y_tail.len(), n)));
    }
    let sys = ReducedSystem::new(spec);
    let target = spec.j0() * spec.j0();
    let mut u0 = guess.unknowns.to_vec();
    u0.push(guess.tau);
    run_with_retries(u0, cfg, |start| {
        let f = |u: &[f64]| {
            let k = u.len();
            let s = ShootingUnknowns::from_slice(&u[..k - 1]);
            let s0 = s.initial_state();
            let mut r = flow_residual(&sys, &s0, s.l0, u[k - 1], &cfg.ode)?;
            let a = ChiralAmplitude::from_state(&s0, s.l0);
            r.push(constraint_norm(spec, &reconstruct_couplings(&a, spec)) / target - 1.0);
            Ok(r)
        };
        let out = damped_newton(f, |u| u[u.len() - 1] > 0.0 && u[u.len() - 2] > 0.0, start, cfg)?;
        if !out.converged {
            return Err(Error::NotConverged {
                best_residual: out.residual_norm,
                iterations: out.iterations,
                iterate: out.u,
            });
        }
        let k = out.u.len();
        finish(spec, canonical(&out.u[..k - 1]), out.u[k - 1], &out, cfg)
    })
}

/// Solves from every guess and keeps the shortest verified transfer time.
pub fn solve_best(spec: &LatticeSpec, guesses: &[ShootingUnknowns], cfg: &ShootingConfig) -> Result<ShootingResult> {
    let mut best: Option<ShootingResult> = None;
    let mut first_err = None;
    for g in guesses {
        match solve_instance(spec, g, cfg) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.j0_tau < b.j0_tau) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(Error::SeedNotConverged))
}

/// Solves `specs` in order, warm-starting each from the previous converged
/// solution. Failures are recorded and the sweep continues from the last success.
pub fn continuation_sweep(
    specs: &[LatticeSpec],
    seed: &ShootingResult,
    cfg: &ShootingConfig,
) -> Result<Vec<Result<ShootingResult>>> {
    if !seed.converged {
        return Err(Error::SeedNotConverged);
    }
    let mut prev = seed.unknowns.clone();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        let guess = if prev.n_sites() == spec.n_sites() {
            prev.clone()
        } else {
            crate::warmstart::resample_unknowns(&prev, spec.n_sites())?
        };
        let r = solve_instance(spec, &guess, cfg);
        if let Ok(ok) = &r {
            prev = ok.unknowns.clone();
        }
        out.push(r);
    }
    Ok(out)
}
