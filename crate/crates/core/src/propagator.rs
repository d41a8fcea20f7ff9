//! Schrödinger propagation of a single excitation under a sampled protocol.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{i_pow, C64};
use crate::ode::{integrate_final, OdeConfig};
use crate::reduced::Protocol;
use crate::spline::{natural_cubic, HermiteCubic};

/// `|psi_target|^2`, with a 0-based target site.
pub fn fidelity(psi: &[C64], target_site: usize) -> f64 {
    psi.get(target_site).map(|z| z.norm_sqr()).unwrap_or(0.0)
}

pub fn norm(psi: &[C64]) -> f64 {
    libm::sqrt(psi.iter().map(|z| z.norm_sqr()).sum())
}

/// Site basis vector `|k>`, 0-based.
pub fn basis_state(n: usize, k: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[k] = C64::new(1.0, 0.0);
    v
}

fn check_grid(p: &Protocol) -> Result<()> {
    let n = p.spec.n_sites();
    if p.times.len() < 2 || p.times.len() != p.couplings.len() {
        return Err(Error::GridGap(format!(
            "{} times for {} coupling samples",
            p.times.len(),
            p.couplings.len()
        )));
    }
    if p.couplings.iter().any(|j| j.n() != n) {
        return Err(Error::Mismatch(String::from("coupling samples do not match the lattice size")));
    }
    let tol = 1e-9 * p.tau.abs().max(1.0);
    if p.times[0].abs() > tol || (p.times[p.times.len() - 1] - p.tau).abs() > tol {
        return Err(Error::GridGap(format!(
            "grid covers [{}, {}], expected [0, {}]",
            p.times[0],
            p.times[p.times.len() - 1],
            p.tau
        )));
    }
    if !p.times.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::GridGap(String::from("grid is not strictly increasing")));
    }
    Ok(())
}

struct Link {
    m: usize,
    k: usize,
    phase: C64,
    spline: HermiteCubic,
}

/// Solves `i d/dt psi = H(t) psi` over `[0, tau]` with couplings interpolated
/// by natural cubic splines. Returns `psi(tau)` in the site basis.
pub fn propagate_schrodinger(protocol: &Protocol, psi0: &[C64]) -> Result<Vec<C64>> {
    propagate_schrodinger_with(protocol, psi0, &OdeConfig::default())
}

pub fn propagate_schrodinger_with(protocol: &Protocol, psi0: &[C64], cfg: &OdeConfig) -> Result<Vec<C64>> {
    check_grid(protocol)?;
    let n = protocol.spec.n_sites();
    if psi0.len() != n {
        return Err(Error::Mismatch(format!("state has {} entries, lattice has {} sites", psi0.len(), n)));
    }
    let nrm = norm(psi0);
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized { norm: nrm });
    }
    let mut links = Vec::new();
    for m in 0..n {
        for k in m + 1..n {
            let ys: Vec<f64> = protocol.couplings.iter().map(|j| j.get(m, k)).collect();
            if ys.iter().all(|v| *v == 0.0) {
                continue;
            }
            links.push(Link {
                m,
                k,
                phase: i_pow((k - m) as i64 - 1),
                spline: natural_cubic(&protocol.times, &ys)?,
            });
        }
    }
    let mut y0 = vec![0.0; 2 * n];
    for (m, z) in psi0.iter().enumerate() {
        y0[2 * m] = z.re;
        y0[2 * m + 1] = z.im;
    }
    let rhs = |t: f64, s: &[f64], ds: &mut [f64]| {
        ds.iter_mut().for_each(|v| *v = 0.0);
        for l in &links {
            let h = l.phase * l.spline.eval(t);
            let pm = C64::new(s[2 * l.m], s[2 * l.m + 1]);
            let pk = C64::new(s[2 * l.k], s[2 * l.k + 1]);
            // d psi = -i H psi, H_mk = h, H_km = conj(h)
            let dm = C64::new(0.0, -1.0) * h * pk;
            let dk = C64::new(0.0, -1.0) * h.conj() * pm;
            ds[2 * l.m] += dm.re;
            ds[2 * l.m + 1] += dm.im;
            ds[2 * l.k] += dk.re;
            ds[2 * l.k + 1] += dk.im;
        }
    };
    let end = integrate_final(rhs, &y0, (0.0, protocol.tau), cfg)?;
    Ok((0..n).map(|m| C64::new(end[2 * m], end[2 * m + 1])).collect())
}

/// Transfer fidelity `|<N|psi(tau)>|^2` starting from the first site.
pub fn transfer_fidelity(protocol: &Protocol) -> Result<f64> {
    let n = protocol.spec.n_sites();
    let psi = propagate_schrodinger(protocol, &basis_state(n, 0))?;
    Ok(fidelity(&psi, n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{CouplingMatrix, LatticeSpec, Mask, WeightProfile};
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    #[test]
    fn fidelity_is_phase_insensitive() {
        let n = 4;
        let mut psi = basis_state(n, 3);
        assert_eq!(fidelity(&psi, 3), 1.0);
        psi[3] = -psi[3];
        assert_eq!(fidelity(&psi, 3), 1.0);
        let mut half = vec![C64::new(0.0, 0.0); n];
        half[0] = C64::new(FRAC_1_SQRT_2, 0.0);
        half[3] = C64::new(FRAC_1_SQRT_2, 0.0);
        assert!((fidelity(&half, 3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn direct_coupling_reaches_speed_limit() {
        let n = 5;
        let spec = LatticeSpec::new(n, WeightProfile::unpenalized(), Mask::Pairs { pairs: vec![(0, 4)] }, 1.0).unwrap();
        let j = CouplingMatrix::from_pairs(n, &[(0, 4, 1.0)]);
        let p = Protocol::from_fn(&spec, FRAC_PI_2, 16, |_| j.clone()).unwrap();
        let psi = propagate_schrodinger(&p, &basis_state(n, 0)).unwrap();
        assert!((fidelity(&psi, 4) - 1.0).abs() < 1e-9);
        assert!((norm(&psi) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let spec = LatticeSpec::all_to_all(3, WeightProfile::quadratic()).unwrap();
        let p = Protocol::from_fn(&spec, 2.0, 8, |_| CouplingMatrix::zeros(3)).unwrap();
        let psi0 = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)];
        let psi = propagate_schrodinger(&p, &psi0).unwrap();
        for (a, b) in psi.iter().zip(&psi0) {
            assert!((a - b).norm_sqr() < 1e-30);
        }
    }

    #[test]
    fn time_reversal_recovers_initial_state() {
        let spec = LatticeSpec::all_to_all(3, WeightProfile::quadratic()).unwrap();
        let p = Protocol::from_fn(&spec, PI, 200, |t| {
            CouplingMatrix::from_pairs(3, &[(0, 1, libm::cos(t)), (1, 2, 0.5 * libm::sin(2.0 * t)), (0, 2, 0.3)])
        })
        .unwrap();
        let psi0 = basis_state(3, 0);
        let mid = propagate_schrodinger(&p, &psi0).unwrap();
        let back = propagate_schrodinger(&p.time_reversed(), &mid).unwrap();
        for (a, b) in back.iter().zip(&psi0) {
            assert!((a - b).norm_sqr() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
        let mut p = Protocol::from_fn(&spec, 1.0, 4, |_| CouplingMatrix::zeros(2)).unwrap();
        let bad = vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(propagate_schrodinger(&p, &bad), Err(Error::NotNormalized { .. })));
        p.times[3] = 0.5;
        assert!(matches!(propagate_schrodinger(&p, &basis_state(2, 0)), Err(Error::GridGap(_))));
    }
}
