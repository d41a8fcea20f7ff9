//! Full-matrix brachistochrone flow of the Lax operator and the wavefunction.
//! Used only to cross-validate protocols produced by the reduced solver.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{cabs, Basis, CouplingMatrix, HermitianOperator, LatticeSpec, C64};
use crate::ode::{integrate, OdeConfig};
use crate::reduced::Protocol;

/// Lax operator (Q basis) and wavefunction (Q basis).
#[derive(Debug, Clone, PartialEq)]
pub struct QbeState {
    pub lax: HermitianOperator,
    pub psi: Vec<C64>,
}

/// Time derivative of a [`QbeState`].
#[derive(Debug, Clone, PartialEq)]
pub struct QbeDerivative {
    pub lax: DMatrix<C64>,
    pub psi: Vec<C64>,
}

impl QbeState {
    pub fn new(lax: HermitianOperator, psi: Vec<C64>) -> Result<Self> {
        if lax.n() != psi.len() {
            return Err(Error::Mismatch(format!("operator is {}x{}, state has {} entries", lax.n(), lax.n(), psi.len())));
        }
        Ok(Self { lax: lax.to_basis(Basis::Q), psi })
    }

    pub fn n(&self) -> usize {
        self.psi.len()
    }

    /// Hamiltonian read off the Lax operator.
    pub fn hamiltonian(&self, spec: &LatticeSpec) -> HermitianOperator {
        HermitianOperator { values: hamiltonian_from_lax(&self.lax.values, spec), basis: Basis::Q }
    }

    /// Couplings `J = Re(i L / g)` on allowed pairs.
    pub fn couplings(&self, spec: &LatticeSpec) -> CouplingMatrix {
        couplings_from_lax(&self.lax.values, spec)
    }

    fn to_flat(&self) -> Vec<f64> {
        let n = self.n();
        let mut s = Vec::with_capacity(2 * n * n + 2 * n);
        for m in 0..n {
            for k in 0..n {
                let z = self.lax.values[(m, k)];
                s.push(z.re);
                s.push(z.im);
            }
        }
        for z in &self.psi {
            s.push(z.re);
            s.push(z.im);
        }
        s
    }

    fn from_flat(n: usize, s: &[f64]) -> Self {
        let values = DMatrix::from_fn(n, n, |m, k| C64::new(s[2 * (m * n + k)], s[2 * (m * n + k) + 1]));
        let off = 2 * n * n;
        let psi = (0..n).map(|m| C64::new(s[off + 2 * m], s[off + 2 * m + 1])).collect();
        Self { lax: HermitianOperator { values, basis: Basis::Q }, psi }
    }
}

fn hamiltonian_from_lax(lax: &DMatrix<C64>, spec: &LatticeSpec) -> DMatrix<C64> {
    let n = lax.nrows();
    let mut h = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (m, k) in spec.allowed_pairs() {
        let g = spec.weight(m, k).unwrap_or(1.0);
        h[(m, k)] = lax[(m, k)] / g;
        h[(k, m)] = lax[(k, m)] / g;
    }
    h
}

fn couplings_from_lax(lax: &DMatrix<C64>, spec: &LatticeSpec) -> CouplingMatrix {
    let mut j = CouplingMatrix::zeros(spec.n_sites());
    for (m, k) in spec.allowed_pairs() {
        let g = spec.weight(m, k).unwrap_or(1.0);
        j.set(m, k, (C64::new(0.0, 1.0) * lax[(m, k)]).re / g);
    }
    j
}

/// `dL/dt = -i [H, L]`, `dpsi/dt = -i H psi`.
pub fn qbe_rhs(state: &QbeState, spec: &LatticeSpec) -> QbeDerivative {
    let l = &state.lax.to_basis(Basis::Q).values;
    let h = hamiltonian_from_lax(l, spec);
    let mi = C64::new(0.0, -1.0);
    let lax = (&h * l - l * &h) * mi;
    let psi = (&h * nalgebra::DVector::from_column_slice(&state.psi)) * mi;
    QbeDerivative { lax, psi: psi.iter().copied().collect() }
}

/// Residuals of the full-matrix flow against a reduced-solver protocol.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QbeReport {
    /// Max coupling difference over the grid, in units of `j0`.
    pub coupling_deviation: f64,
    /// Weight of `L(0)` outside the first row and column, relative to `max |L|`.
    pub initial_support: f64,
    /// Weight of `L(tau)` outside the last row and column, relative to `max |L|`.
    pub final_support: f64,
    pub spectrum_drift: f64,
    /// Number of eigenvalues with magnitude above `1e-8` (two for a valid flow).
    pub rank: usize,
    /// Max real part of the Q-basis Lax operator.
    pub chirality: f64,
    /// `|psi_N(tau)|^2` from the full-matrix wavefunction.
    pub fidelity: f64,
}

impl QbeReport {
    /// Copies the residuals into a diagnostics map under `qbe_*` keys.
    pub fn insert_into(&self, diag: &mut BTreeMap<String, f64>) {
        diag.insert(String::from("qbe_coupling_deviation"), self.coupling_deviation);
        diag.insert(String::from("qbe_initial_support"), self.initial_support);
        diag.insert(String::from("qbe_final_support"), self.final_support);
        diag.insert(String::from("qbe_spectrum_drift"), self.spectrum_drift);
        diag.insert(String::from("qbe_rank"), self.rank as f64);
        diag.insert(String::from("qbe_chirality"), self.chirality);
        diag.insert(String::from("qbe_fidelity"), self.fidelity);
    }
}

/// Initial Lax operator of a protocol: from `alpha(0)` when available, otherwise
/// `G(H(0))`, which requires every first-row pair to be allowed.
pub fn initial_lax(protocol: &Protocol) -> Result<HermitianOperator> {
    if let Some(a) = protocol.alpha_series.first() {
        return Ok(a.lax_operator());
    }
    let spec = &protocol.spec;
    let n = spec.n_sites();
    let j = protocol.couplings.first().ok_or_else(|| Error::GridGap(String::from("protocol has no nodes")))?;
    if (1..n).any(|k| !spec.is_allowed(0, k)) {
        return Err(Error::Mismatch(String::from(
            "protocol carries no alpha series and the first row is masked; L(0) is not determined by H(0)",
        )));
    }
    let mut values = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for (m, k) in spec.allowed_pairs() {
        let v = C64::new(0.0, -spec.weight(m, k).unwrap_or(1.0) * j.get(m, k));
        values[(m, k)] = v;
        values[(k, m)] = v.conj();
    }
    Ok(HermitianOperator { values, basis: Basis::Q })
}

fn support_residual(l: &DMatrix<C64>, keep: usize) -> f64 {
    let n = l.nrows();
    let mut off: f64 = 0.0;
    let mut all: f64 = 0.0;
    for m in 0..n {
        for k in 0..n {
            let a = cabs(l[(m, k)]);
            all = all.max(a);
            if m != keep && k != keep {
                off = off.max(a);
            }
        }
    }
    if all > 0.0 {
        off / all
    } else {
        0.0
    }
}

fn rank(ev: &[f64]) -> usize {
    ev.iter().filter(|v| v.abs() > 1e-8).count()
}

/// Integrates the full-matrix flow from the protocol's `L(0)` and `psi(0) = |1>`
/// over `[0, tau]` and compares it with the protocol.
pub fn crosscheck(protocol: &Protocol) -> Result<QbeReport> {
    crosscheck_with(protocol, &OdeConfig::default())
}

pub fn crosscheck_with(protocol: &Protocol, cfg: &OdeConfig) -> Result<QbeReport> {
    let spec = &protocol.spec;
    let n = spec.n_sites();
    let nodes = protocol.times.len();
    if nodes < 2 || protocol.couplings.len() != nodes {
        return Err(Error::GridGap(format!(
            "{} times and {} coupling samples",
            protocol.times.len(),
            protocol.couplings.len()
        )));
    }
    if !protocol.alpha_series.is_empty() && protocol.alpha_series.len() != nodes {
        return Err(Error::GridGap(format!("{} alpha samples on {} nodes", protocol.alpha_series.len(), nodes)));
    }
    let span = protocol.times[nodes - 1] - protocol.times[0];
    if protocol.times[0].abs() > 1e-12 || (span - protocol.tau).abs() > 1e-9 * protocol.tau.max(1.0) {
        return Err(Error::GridGap(format!("grid spans [{}, {}], tau = {}", protocol.times[0], protocol.times[nodes - 1], protocol.tau)));
    }
    let mut psi0 = vec![C64::new(0.0, 0.0); n];
    psi0[0] = C64::new(1.0, 0.0);
    let start = QbeState::new(initial_lax(protocol)?, psi0)?;
    let ev0 = start.lax.eigenvalues();

    let rhs = |_t: f64, s: &[f64], ds: &mut [f64]| {
        let st = QbeState::from_flat(n, s);
        let d = qbe_rhs(&st, spec);
        for m in 0..n {
            for k in 0..n {
                let z = d.lax[(m, k)];
                ds[2 * (m * n + k)] = z.re;
                ds[2 * (m * n + k) + 1] = z.im;
            }
        }
        let off = 2 * n * n;
        for (m, z) in d.psi.iter().enumerate() {
            ds[off + 2 * m] = z.re;
            ds[off + 2 * m + 1] = z.im;
        }
    };
    let traj = integrate(rhs, &start.to_flat(), (0.0, protocol.tau), cfg)?;

    let j0 = spec.j0();
    let mut coupling_deviation: f64 = 0.0;
    let mut chirality: f64 = 0.0;
    let mut spectrum_drift: f64 = 0.0;
    let mut max_rank = rank(&ev0);
    let stride = (nodes / 64).max(1);
    let mut buf = vec![0.0; traj.dim()];
    for k in 0..nodes {
        traj.eval_into(protocol.times[k], &mut buf);
        let st = QbeState::from_flat(n, &buf);
        let j = st.couplings(spec);
        coupling_deviation = coupling_deviation.max(j.max_abs_diff(&protocol.couplings[k]) / j0);
        chirality = chirality.max(st.lax.max_real_part());
        if k % stride == 0 || k + 1 == nodes {
            let ev = st.lax.eigenvalues();
            spectrum_drift = ev.iter().zip(&ev0).map(|(a, b)| (a - b).abs()).fold(spectrum_drift, f64::max);
            max_rank = max_rank.max(rank(&ev));
        }
    }
    let end = QbeState::from_flat(n, traj.final_state());
    let fidelity = end.psi[n - 1].norm_sqr();
    Ok(QbeReport {
        coupling_deviation,
        initial_support: support_residual(&start.lax.values, 0),
        final_support: support_residual(&end.lax.values, n - 1),
        spectrum_drift,
        rank: max_rank,
        chirality,
        fidelity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hamiltonian, Mask, WeightProfile};
    use crate::oracles::three_qubit_optimal;
    use crate::reduced::ChiralAmplitude;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn random_state(n: usize, seed: u64) -> QbeState {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let x: Vec<f64> = (0..n).map(|_| next()).collect();
        let y: Vec<f64> = (0..n).map(|_| next()).collect();
        let a = ChiralAmplitude::new(x, y, 1.3).unwrap();
        let psi = (0..n).map(|_| C64::new(next(), next())).collect();
        QbeState::new(a.lax_operator(), psi).unwrap()
    }

    #[test]
    fn commuting_two_site_flow_is_static() {
        let spec = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
        let j = CouplingMatrix::from_pairs(2, &[(0, 1, 0.8)]);
        let h = build_hamiltonian(&spec, &j, Basis::Q).unwrap();
        let st = QbeState::new(h, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        let d = qbe_rhs(&st, &spec);
        assert!(d.lax.iter().all(|z| cabs(*z) < 1e-15));
    }

    #[test]
    fn flow_is_traceless_and_isospectral() {
        let spec = LatticeSpec::all_to_all(5, WeightProfile::quadratic()).unwrap();
        let st = random_state(5, 7);
        let d = qbe_rhs(&st, &spec);
        let tr: C64 = (0..5).map(|m| d.lax[(m, m)]).sum();
        assert!(cabs(tr) < 1e-14);
        // first-order eigenvalue shifts <v|dL|v> vanish
        let eig = st.lax.values.clone().symmetric_eigen();
        for c in 0..5 {
            let v = eig.eigenvectors.column(c);
            let shift = (v.adjoint() * &d.lax * v)[(0, 0)];
            assert!(cabs(shift) < 1e-12);
        }
    }

    #[test]
    fn three_site_chain_equations() {
        let g = 3.0;
        let spec = LatticeSpec::chain(&[1.0, g]).unwrap();
        let st = random_state(3, 11);
        let d = qbe_rhs(&st, &spec);
        let i = C64::new(0.0, 1.0);
        let l = &st.lax.values;
        let (j12, j23, omega) = ((i * l[(0, 1)]).re, (i * l[(1, 2)]).re / g, (i * l[(0, 2)]).re);
        let (dj12, dj23, domega) = ((i * d.lax[(0, 1)]).re, (i * d.lax[(1, 2)]).re / g, (i * d.lax[(0, 2)]).re);
        assert!((dj12 + omega * j23).abs() < 1e-14);
        assert!((dj23 - omega * j12 / g).abs() < 1e-14);
        assert!((domega + (g - 1.0) * j12 * j23).abs() < 1e-14);
    }

    #[test]
    fn two_site_exact_protocol() {
        let spec = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
        let p = Protocol::from_fn(&spec, FRAC_PI_2, 64, |_| CouplingMatrix::from_pairs(2, &[(0, 1, 1.0)])).unwrap();
        let r = crosscheck(&p).unwrap();
        assert!(r.coupling_deviation < 1e-10);
        assert!(r.initial_support < 1e-10 && r.final_support < 1e-10);
        assert!(r.spectrum_drift < 1e-10);
        assert!((r.fidelity - 1.0).abs() < 1e-10);
        assert_eq!(r.rank, 2);
    }

    #[test]
    fn three_qubit_analytic_protocol() {
        let sol = three_qubit_optimal(3.0).unwrap();
        let r = crosscheck(&sol.protocol(256).unwrap()).unwrap();
        assert!(r.coupling_deviation < 1e-7, "{:?}", r);
        assert!(r.final_support < 1e-7);
        assert!((r.fidelity - 1.0).abs() < 1e-8);
        assert!(r.chirality < 1e-12);
    }

    #[test]
    fn masked_first_row_needs_alpha() {
        let spec = LatticeSpec::new(3, WeightProfile::quadratic(), Mask::NearestNeighbor, 1.0).unwrap();
        let p = Protocol::from_fn(&spec, 1.0, 8, |_| CouplingMatrix::from_pairs(3, &[(0, 1, FRAC_1_SQRT_2)])).unwrap();
        assert!(matches!(crosscheck(&p), Err(Error::Mismatch(_))));
    }

    #[test]
    fn bad_grid() {
        let spec = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
        let mut p = Protocol::from_fn(&spec, 1.0, 8, |_| CouplingMatrix::from_pairs(2, &[(0, 1, 1.0)])).unwrap();
        p.times.pop();
        assert!(matches!(crosscheck(&p), Err(Error::GridGap(_))));
    }
}
