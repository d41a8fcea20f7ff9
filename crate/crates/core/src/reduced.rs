//! Reduced dynamics of the Lax eigenvector `alpha = x + i y` (Q basis) and
//! reconstruction of couplings, wavefunction and protocols from it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{
    constraint_norm, hamiltonian_unchecked, i_pow, trace_norm_squared, Basis, CouplingMatrix, HermitianOperator,
    LatticeSpec, C64,
};
use crate::ode::DenseTrajectory;

/// Default number of output nodes of an assembled protocol.
pub const DEFAULT_NODES: usize = 512;

/// Lax eigenvector in the Q basis together with the eigenvalue `L0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChiralAmplitude {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub l0: f64,
}

impl ChiralAmplitude {
    pub fn new(x: Vec<f64>, y: Vec<f64>, l0: f64) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Mismatch(format!("x has {} entries, y has {}", x.len(), y.len())));
        }
        Ok(Self { x, y, l0 })
    }

    /// Splits a flat `x || y` state.
    pub fn from_state(state: &[f64], l0: f64) -> Self {
        let n = state.len() / 2;
        Self { x: state[..n].to_vec(), y: state[n..2 * n].to_vec(), l0 }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Flat `x || y` layout used by the integrator.
    pub fn to_state(&self) -> Vec<f64> {
        let mut s = Vec::with_capacity(2 * self.n());
        s.extend_from_slice(&self.x);
        s.extend_from_slice(&self.y);
        s
    }

    /// `sum(x^2 + y^2)`.
    pub fn norm_sqr(&self) -> f64 {
        self.x.iter().chain(&self.y).map(|v| v * v).sum()
    }

    /// Lax operator `L0 (|a><a| - |b><b|)` in the Q basis, with
    /// entries `2 i L0 (y_m x_n - x_m y_n)`.
    pub fn lax_operator(&self) -> HermitianOperator {
        let n = self.n();
        let values = DMatrix::from_fn(n, n, |m, k| {
            C64::new(0.0, 2.0 * self.l0 * (self.y[m] * self.x[k] - self.x[m] * self.y[k]))
        });
        HermitianOperator { values, basis: Basis::Q }
    }
}

/// Precomputed pair coefficients of the masked reduced system.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    n: usize,
    pairs: Vec<(usize, usize, f64)>,
}

impl ReducedSystem {
    pub fn new(spec: &LatticeSpec) -> Self {
        let pairs = spec
            .allowed_pairs()
            .into_iter()
            .map(|(m, k)| (m, k, 2.0 / spec.weight(m, k).unwrap_or(1.0)))
            .collect();
        Self { n: spec.n_sites(), pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Writes `d(x || y)/dt` for the flat state `s`.
    #[inline]
    pub fn rhs(&self, l0: f64, s: &[f64], ds: &mut [f64]) {
        let n = self.n;
        let (x, y) = s.split_at(n);
        ds.iter_mut().for_each(|v| *v = 0.0);
        let (dx, dy) = ds.split_at_mut(n);
        for &(m, k, c) in &self.pairs {
            let b = c * l0 * (y[m] * x[k] - x[m] * y[k]);
            dx[m] += b * x[k];
            dy[m] += b * y[k];
            dx[k] -= b * x[m];
            dy[k] -= b * y[m];
        }
    }
}

/// Time derivative `(dx, dy)` of the reduced dynamics.
pub fn reduced_rhs(state: &ChiralAmplitude, spec: &LatticeSpec) -> (Vec<f64>, Vec<f64>) {
    let sys = ReducedSystem::new(spec);
    let s = state.to_state();
    let mut ds = vec![0.0; s.len()];
    sys.rhs(state.l0, &s, &mut ds);
    let dy = ds.split_off(state.n());
    (ds, dy)
}

/// `J_mn = 2 L0 (x_m y_n - x_n y_m) / g_mn` on allowed pairs, zero elsewhere.
pub fn reconstruct_couplings(state: &ChiralAmplitude, spec: &LatticeSpec) -> CouplingMatrix {
    let mut j = CouplingMatrix::zeros(spec.n_sites());
    for (m, k) in spec.allowed_pairs() {
        let g = spec.weight(m, k).unwrap_or(1.0);
        j.set(m, k, 2.0 * state.l0 * (state.x[m] * state.y[k] - state.x[k] * state.y[m]) / g);
    }
    j
}

/// Site-basis wavefunction `Q^-1 sqrt(2) x`.
pub fn reconstruct_wavefunction(state: &ChiralAmplitude) -> Vec<C64> {
    let r = libm::sqrt(2.0);
    state.x.iter().enumerate().map(|(m, &xm)| i_pow(-(m as i64)) * (r * xm)).collect()
}

/// Time-dependent coupling protocol together with its generating Lax eigenvector.
///
/// Times are physical (units of `1/J0` scaled by the spec's `j0`), couplings
/// satisfy `constraint_norm = j0^2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Protocol {
    pub spec: LatticeSpec,
    pub times: Vec<f64>,
    pub couplings: Vec<CouplingMatrix>,
    pub tau: f64,
    pub l0: f64,
    pub alpha_series: Vec<ChiralAmplitude>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Protocol {
    /// Dimensionless transfer time `J0 tau`.
    pub fn j0_tau(&self) -> f64 {
        self.spec.j0() * self.tau
    }

    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }

    /// Series of one coupling over the grid.
    pub fn coupling_series(&self, m: usize, n: usize) -> Vec<f64> {
        self.couplings.iter().map(|j| j.get(m, n)).collect()
    }

    /// Protocol generating the inverse evolution: `J'(t) = -J(tau - t)`.
    pub fn time_reversed(&self) -> Protocol {
        let times = self.times.iter().rev().map(|t| self.tau - t).collect();
        let couplings = self.couplings.iter().rev().map(|j| j.scaled(-1.0)).collect();
        Protocol {
            spec: self.spec.clone(),
            times,
            couplings,
            tau: self.tau,
            l0: self.l0,
            alpha_series: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    /// Protocol sampled from closed-form couplings on a uniform grid.
    pub fn from_fn<F>(spec: &LatticeSpec, tau: f64, nodes: usize, mut f: F) -> Result<Protocol>
    where
        F: FnMut(f64) -> CouplingMatrix,
    {
        if nodes < 2 || !(tau > 0.0) {
            return Err(Error::GridGap(format!("need >= 2 nodes and tau > 0, got {} and {}", nodes, tau)));
        }
        let times: Vec<f64> = (0..nodes).map(|k| tau * k as f64 / (nodes - 1) as f64).collect();
        let mut couplings = Vec::with_capacity(nodes);
        for &t in &times {
            let j = f(t);
            j.check_mask(spec)?;
            couplings.push(j);
        }
        Ok(Protocol {
            spec: spec.clone(),
            times,
            couplings,
            tau,
            l0: 0.0,
            alpha_series: Vec::new(),
            diagnostics: BTreeMap::new(),
        })
    }
}

fn expected_lax_spectrum(n: usize, l0: f64) -> Vec<f64> {
    let mut ev = vec![0.0; n];
    ev[0] = -l0.abs();
    ev[n - 1] = l0.abs();
    ev
}

/// Largest deviation of the Lax spectrum from `{-L0, 0, ..., 0, +L0}`.
pub fn lax_spectrum_residual(state: &ChiralAmplitude) -> f64 {
    let ev = state.lax_operator().eigenvalues();
    let want = expected_lax_spectrum(state.n(), state.l0);
    ev.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Samples an `alpha` trajectory on a uniform grid, rescales it to the spec's
/// resource `j0` and fills invariant diagnostics.
///
/// `l0` and `tau` refer to the trajectory's own time variable; the returned
/// protocol carries physical values.
pub fn assemble_protocol(alpha: &DenseTrajectory, spec: &LatticeSpec, l0: f64, tau: f64) -> Result<Protocol> {
    assemble_protocol_with(alpha, spec, l0, tau, DEFAULT_NODES)
}

pub fn assemble_protocol_with(
    alpha: &DenseTrajectory,
    spec: &LatticeSpec,
    l0: f64,
    tau: f64,
    nodes: usize,
) -> Result<Protocol> {
    let n = spec.n_sites();
    if alpha.dim() != 2 * n {
        return Err(Error::Mismatch(format!("trajectory has dimension {}, lattice needs {}", alpha.dim(), 2 * n)));
    }
    let span = alpha.t_end() - alpha.t_start();
    if (span - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::Mismatch(format!("trajectory spans {}, expected tau = {}", span, tau)));
    }
    if nodes < 2 {
        return Err(Error::GridGap(format!("need at least 2 output nodes, got {}", nodes)));
    }
    let t0 = alpha.t_start();
    let start = ChiralAmplitude::from_state(alpha.state(0), l0);
    let c0 = constraint_norm(spec, &reconstruct_couplings(&start, spec));
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::Domain(String::from("initial couplings vanish; no transfer is possible")));
    }
    let c = libm::sqrt(c0);
    let scale = spec.j0() / c;
    let l0_phys = l0 * scale;
    let tau_phys = tau / scale;

    let mut times = Vec::with_capacity(nodes);
    let mut couplings = Vec::with_capacity(nodes);
    let mut alpha_series = Vec::with_capacity(nodes);
    let mut buf = vec![0.0; 2 * n];
    for k in 0..nodes {
        let s = if k + 1 == nodes { alpha.t_end() } else { t0 + tau * k as f64 / (nodes - 1) as f64 };
        alpha.eval_into(s, &mut buf);
        let a = ChiralAmplitude::from_state(&buf, l0_phys);
        times.push(if k + 1 == nodes { tau_phys } else { (s - t0) / scale });
        couplings.push(reconstruct_couplings(&a, spec));
        alpha_series.push(a);
    }

    let mut diag = BTreeMap::new();
    let target = spec.j0() * spec.j0();
    let constraint_drift = couplings
        .iter()
        .map(|j| (constraint_norm(spec, j) / target - 1.0).abs())
        .fold(0.0, f64::max);
    let norm_drift = alpha_series.iter().map(|a| (a.norm_sqr() - 1.0).abs()).fold(0.0, f64::max);
    let x_drift = alpha_series
        .iter()
        .map(|a| (a.x.iter().map(|v| v * v).sum::<f64>() - 0.5).abs())
        .fold(0.0, f64::max);
    let stride = (nodes / 64).max(1);
    let mut lax_drift: f64 = 0.0;
    let mut chirality: f64 = 0.0;
    let mut k = 0;
    while k < nodes {
        lax_drift = lax_drift.max(lax_spectrum_residual(&alpha_series[k]));
        let h = hamiltonian_unchecked(&couplings[k], Basis::Site);
        chirality = chirality
            .max(h.to_basis(Basis::Q).max_real_part())
            .max(h.chiral_anticommutator_residual());
        k = if k + 1 == nodes { nodes } else { (k + stride).min(nodes - 1) };
    }
    let last = &alpha_series[nodes - 1];
    let jmax = couplings
        .iter()
        .flat_map(|j| (0..n).flat_map(move |m| (m + 1..n).map(move |q| j.get(m, q).abs())))
        .fold(0.0, f64::max);
    let mut boundary: f64 = 0.0;
    for m in 1..n {
        for q in m + 1..n {
            boundary = boundary.max(couplings[0].get(m, q).abs());
        }
    }
    for m in 0..n - 1 {
        for q in m + 1..n - 1 {
            boundary = boundary.max(couplings[nodes - 1].get(m, q).abs());
        }
    }
    diag.insert(String::from("constraint_drift"), constraint_drift);
    diag.insert(String::from("alpha_norm_drift"), norm_drift);
    diag.insert(String::from("x_norm_drift"), x_drift);
    diag.insert(String::from("lax_drift"), lax_drift);
    diag.insert(String::from("chirality"), chirality);
    diag.insert(String::from("boundary_residual"), if jmax > 0.0 { boundary / jmax } else { 0.0 });
    diag.insert(String::from("alpha_fidelity"), 2.0 * last.x[n - 1] * last.x[n - 1]);
    diag.insert(
        String::from("trace_norm_ratio"),
        trace_norm_squared(spec, &couplings[0]) / constraint_norm(spec, &couplings[0]),
    );
    diag.insert(String::from("j0_tau"), spec.j0() * tau_phys);

    Ok(Protocol {
        spec: spec.clone(),
        times,
        couplings,
        tau: tau_phys,
        l0: l0_phys,
        alpha_series,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::WeightProfile;
    use crate::ode::{integrate, OdeConfig};
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn two_site() -> (LatticeSpec, ChiralAmplitude) {
        let spec = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
        let a = ChiralAmplitude::new(vec![FRAC_1_SQRT_2, 0.0], vec![0.0, FRAC_1_SQRT_2], 1.0).unwrap();
        (spec, a)
    }

    #[test]
    fn two_site_derivative() {
        let (spec, a) = two_site();
        let (dx, dy) = reduced_rhs(&a, &spec);
        assert!((dx[0]).abs() < 1e-15 && (dx[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((dy[0] + FRAC_1_SQRT_2).abs() < 1e-15 && dy[1].abs() < 1e-15);
    }

    #[test]
    fn frozen_without_y() {
        let spec = LatticeSpec::all_to_all(4, WeightProfile::quadratic()).unwrap();
        let a = ChiralAmplitude::new(vec![0.3, -0.2, 0.5, 0.1], vec![0.0; 4], 2.0).unwrap();
        let (dx, dy) = reduced_rhs(&a, &spec);
        assert!(dx.iter().chain(&dy).all(|v| *v == 0.0));
        assert!(reconstruct_couplings(&a, &spec).max_abs_diff(&CouplingMatrix::zeros(4)) == 0.0);
    }

    #[test]
    fn two_site_couplings_and_flow() {
        let (spec, a) = two_site();
        let j = reconstruct_couplings(&a, &spec);
        assert!((j.get(0, 1) - 1.0).abs() < 1e-15);

        let sys = ReducedSystem::new(&spec);
        let traj = integrate(|_, s, d| sys.rhs(1.0, s, d), &a.to_state(), (0.0, FRAC_PI_2), &OdeConfig::default())
            .unwrap();
        let end = traj.final_state();
        assert!(end[0].abs() < 1e-9 && (end[1] - FRAC_1_SQRT_2).abs() < 1e-9);

        let p = assemble_protocol(&traj, &spec, 1.0, FRAC_PI_2).unwrap();
        assert_eq!(p.n_nodes(), DEFAULT_NODES);
        assert!((p.j0_tau() - FRAC_PI_2).abs() < 1e-12);
        for j in &p.couplings {
            assert!((j.get(0, 1) - 1.0).abs() < 1e-9);
        }
        assert!(p.diagnostics["lax_drift"] < 1e-8);
        assert!((p.diagnostics["trace_norm_ratio"] - 2.0).abs() < 1e-12);
        assert!((p.diagnostics["alpha_fidelity"] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn wavefunction_boundaries() {
        let e1 = ChiralAmplitude::new(vec![FRAC_1_SQRT_2, 0.0, 0.0], vec![0.0, 0.4, 0.3], 1.0).unwrap();
        let psi = reconstruct_wavefunction(&e1);
        assert!((psi[0].re - 1.0).abs() < 1e-15 && psi[1].norm_sqr() == 0.0);
        let en = ChiralAmplitude::new(vec![0.0, 0.0, FRAC_1_SQRT_2], vec![0.0; 3], 1.0).unwrap();
        let psi = reconstruct_wavefunction(&en);
        assert!((psi[2].norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lax_spectrum_of_unit_eigenvector() {
        let x = [FRAC_1_SQRT_2, 0.0, 0.0];
        let y = [0.0, 0.6 * FRAC_1_SQRT_2, 0.8 * FRAC_1_SQRT_2];
        let a = ChiralAmplitude::new(x.to_vec(), y.to_vec(), 2.5).unwrap();
        assert!(lax_spectrum_residual(&a) < 1e-12);
        assert!(a.lax_operator().max_real_part() == 0.0);
    }

    #[test]
    fn mismatched_trajectory_is_rejected() {
        let (spec, a) = two_site();
        let sys = ReducedSystem::new(&spec);
        let traj = integrate(|_, s, d| sys.rhs(1.0, s, d), &a.to_state(), (0.0, 1.0), &OdeConfig::default()).unwrap();
        assert!(matches!(assemble_protocol(&traj, &spec, 1.0, 2.0), Err(Error::Mismatch(_))));
        let spec3 = LatticeSpec::all_to_all(3, WeightProfile::quadratic()).unwrap();
        assert!(matches!(assemble_protocol(&traj, &spec3, 1.0, 1.0), Err(Error::Mismatch(_))));
    }
}
