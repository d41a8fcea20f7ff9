//! Closed-form reference solutions, bounds and fits.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use core::f64::consts::{FRAC_PI_2, PI};

use crate::elliptic::{complete_k, jacobi};
use crate::error::{Error, Result};
use crate::lattice::{CouplingMatrix, LatticeSpec, WeightProfile};
use crate::ode::{integrate_final, OdeConfig};
use crate::reduced::Protocol;

/// Slope of the classical consecutive-hopping bound.
pub const CLASSICAL_SLOPE: f64 = 1.13031;

/// Optimal 3-site protocol with unit nearest-neighbour weights and weight
/// `g` on the long link (`J0 = 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThreeQubitSolution {
    pub g: f64,
    pub a: f64,
    pub b: f64,
    pub omega: f64,
    pub tau: f64,
}

impl ThreeQubitSolution {
    /// `(J12, J23, J13)` at time `t`.
    pub fn couplings(&self, t: f64) -> (f64, f64, f64) {
        let (s, c) = libm::sincos(self.omega * t);
        (self.a * c, self.a * s, self.b)
    }

    pub fn coupling_matrix(&self, t: f64) -> CouplingMatrix {
        let (j12, j23, j13) = self.couplings(t);
        CouplingMatrix::from_pairs(3, &[(0, 1, j12), (1, 2, j23), (0, 2, j13)])
    }

    /// The all-to-all lattice this solution lives on.
    pub fn spec(&self) -> LatticeSpec {
        LatticeSpec::all_to_all(3, WeightProfile::PerDistance { values: vec![1.0, self.g] })
            .expect("weights are positive")
    }

    pub fn protocol(&self, nodes: usize) -> Result<Protocol> {
        Protocol::from_fn(&self.spec(), self.tau, nodes, |t| self.coupling_matrix(t))
    }
}

/// Closed-form 3-site optimum; exists for `g >= 2`.
pub fn three_qubit_optimal(g: f64) -> Result<ThreeQubitSolution> {
    if !(g >= 2.0 && g.is_finite()) {
        return Err(Error::Domain(format!(
            "three-site optimum requires g >= 2, got {}; use direct_hop_time below that",
            g
        )));
    }
    let a = libm::sqrt((g - 2.0) * (3.0 * g - 2.0) / ((g - 1.0) * (3.0 * g - 4.0)));
    let b = 1.0 / libm::sqrt((g - 1.0) * (3.0 * g - 4.0));
    let omega = libm::sqrt((g - 1.0) / (3.0 * g - 4.0));
    let tau = FRAC_PI_2 * libm::sqrt((3.0 * g - 4.0) / (g - 1.0));
    Ok(ThreeQubitSolution { g, a, b, omega, tau })
}

/// Single direct hop with weight `g`: `pi sqrt(g) / 2`.
pub fn direct_hop_time(g: f64) -> f64 {
    FRAC_PI_2 * libm::sqrt(g)
}

/// Unweighted 3-site nearest-neighbour chain: `sqrt(3) pi / 2`.
pub fn nn_chain_time_3q() -> f64 {
    libm::sqrt(3.0) * FRAC_PI_2
}

/// 3-site chain with link weights `(1, g)` driven by Jacobi elliptic couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EllipticChainSolution {
    pub g: f64,
    pub omega: f64,
    pub m: f64,
    pub tau: f64,
    pub fidelity: f64,
}

impl EllipticChainSolution {
    /// `(J12, J23)` at time `t`.
    pub fn couplings(&self, t: f64) -> (f64, f64) {
        elliptic_couplings(self.g, self.omega, self.m, t)
    }

    pub fn spec(&self) -> LatticeSpec {
        LatticeSpec::chain(&[1.0, self.g]).expect("weights are positive")
    }

    pub fn protocol(&self, nodes: usize) -> Result<Protocol> {
        Protocol::from_fn(&self.spec(), self.tau, nodes, |t| {
            let (a, b) = self.couplings(t);
            CouplingMatrix::from_pairs(3, &[(0, 1, a), (1, 2, b)])
        })
    }
}

fn elliptic_couplings(g: f64, omega: f64, m: f64, t: f64) -> (f64, f64) {
    match jacobi(omega * t, m) {
        Ok(j) => (j.cn, j.sn / libm::sqrt(g)),
        Err(_) => (f64::NAN, f64::NAN),
    }
}

fn elliptic_parameter(g: f64, omega: f64) -> f64 {
    (g - 1.0) / (g * omega * omega)
}

// Q-basis amplitudes at tau = K(m)/omega, starting from the first site.
fn elliptic_final_state(g: f64, omega: f64) -> Result<[f64; 3]> {
    let m = elliptic_parameter(g, omega);
    let tau = complete_k(m)? / omega;
    let rhs = |t: f64, s: &[f64], d: &mut [f64]| {
        let (a, b) = elliptic_couplings(g, omega, m, t);
        d[0] = -a * s[1];
        d[1] = a * s[0] - b * s[2];
        d[2] = b * s[1];
    };
    let end = integrate_final(rhs, &[1.0, 0.0, 0.0], (0.0, tau), &OdeConfig::default())?;
    Ok([end[0], end[1], end[2]])
}

/// Finds the frequency `omega` for which the elliptic protocol completes the
/// transfer in a quarter period, taking the largest such `omega` (shortest time).
pub fn weighted_nn_chain_3q(g: f64) -> Result<EllipticChainSolution> {
    if !(g >= 1.0 && g.is_finite()) {
        return Err(Error::Domain(format!("weighted chain requires g >= 1, got {}", g)));
    }
    let omega_min = libm::sqrt((g - 1.0) / g);
    let f = |w: f64| elliptic_final_state(g, w).map(|s| s[0]);

    // Descending scan with steps shrinking geometrically towards omega_min,
    // where the quarter period diverges.
    let mut hi = 1.2_f64.max(omega_min + 0.5);
    let mut f_hi = f(hi)?;
    let mut bracket = None;
    for _ in 0..2000 {
        let gap = hi - omega_min;
        if gap < 1e-9 {
            break;
        }
        let lo = hi - (0.05_f64).min(0.2 * gap);
        let f_lo = f(lo)?;
        if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
            bracket = Some((lo, f_lo, hi, f_hi));
            break;
        }
        hi = lo;
        f_hi = f_lo;
    }
    let (mut lo, mut f_lo, mut hi, mut f_hi) =
        bracket.ok_or_else(|| Error::Bracket(format!("no transfer frequency found for g = {}", g)))?;

    // Illinois regula falsi.
    let mut side = 0i32;
    for _ in 0..200 {
        if (hi - lo).abs() < 1e-14 * hi || f_lo == 0.0 {
            break;
        }
        let w = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let fw = f(w)?;
        if fw == 0.0 {
            lo = w;
            f_lo = 0.0;
            break;
        }
        if fw.signum() == f_lo.signum() {
            lo = w;
            f_lo = fw;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = w;
            f_hi = fw;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    let omega = if f_lo.abs() <= f_hi.abs() { lo } else { hi };
    let m = elliptic_parameter(g, omega);
    let tau = complete_k(m)? / omega;
    let end = elliptic_final_state(g, omega)?;
    let fidelity = end[2] * end[2];
    if fidelity < 1.0 - 1e-8 {
        return Err(Error::Bracket(format!("root at omega = {} has fidelity {}", omega, fidelity)));
    }
    Ok(EllipticChainSolution { g, omega, m, tau, fidelity })
}

/// Classical consecutive-hopping estimate `1.13031 (N - 1)`.
pub fn classical_bound(n: usize) -> f64 {
    CLASSICAL_SLOPE * (n as f64 - 1.0)
}

/// Large-`N` expansion of the optimal `J0 tau` for `g_p = p^2`.
pub fn asymptotic_fit(n: usize) -> f64 {
    let x = n as f64;
    0.757 * x + 2.018 - 14.198 / x + 47.438 / (x * x) - 61.228 / (x * x * x)
}

/// Least-squares line `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Mismatch(String::from("linear fit needs >= 2 matching points")));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain(String::from("linear fit needs distinct abscissae")));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).abs())
        .fold(0.0, f64::max);
    Ok(LinearFit { slope, intercept, max_abs_residual })
}

/// Fits `y = c x^k` by a line in log-log coordinates; `slope` is the exponent `k`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::Domain(String::from("power-law fit needs positive data")));
    }
    let lx: alloc::vec::Vec<f64> = xs.iter().map(|v| libm::log(*v)).collect();
    let ly: alloc::vec::Vec<f64> = ys.iter().map(|v| libm::log(*v)).collect();
    linear_fit(&lx, &ly)
}

/// `pi / 2`, the unpenalized optimum for any lattice size.
pub fn unpenalized_time() -> f64 {
    PI / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::transfer_fidelity;

    #[test]
    fn three_qubit_values() {
        let s = three_qubit_optimal(3.0).unwrap();
        assert!((s.tau - 2.48365).abs() < 5e-6);
        assert!((s.omega - 0.632_455_532_033_675_9).abs() < 1e-12);
        assert!((s.a - 0.83666).abs() < 5e-6 && (s.b - 0.31623).abs() < 5e-6);
        let s2 = three_qubit_optimal(2.0).unwrap();
        assert!(s2.a == 0.0 && (s2.tau - direct_hop_time(2.0)).abs() < 1e-12);
        assert!((three_qubit_optimal(4.0).unwrap().tau - 2.56510).abs() < 5e-6);
        assert!(three_qubit_optimal(1.9).is_err());
        assert!((s.tau / nn_chain_time_3q() - 0.9129).abs() < 5e-5);
    }

    #[test]
    fn three_qubit_constraint_and_frequency() {
        for k in 0..=980 {
            let g = 2.0 + 0.1 * k as f64;
            let s = three_qubit_optimal(g).unwrap();
            assert!((s.a * s.a + g * s.b * s.b - 1.0).abs() < 1e-12);
            assert!((s.omega - (g - 1.0) * s.b).abs() < 1e-12);
        }
    }

    #[test]
    fn three_qubit_tau_monotone_and_bounded() {
        let mut prev = three_qubit_optimal(2.0).unwrap().tau;
        assert!((prev - PI / libm::sqrt(2.0)).abs() < 1e-12);
        for k in 1..2000 {
            let t = three_qubit_optimal(2.0 + 0.05 * k as f64).unwrap().tau;
            assert!(t > prev && t < nn_chain_time_3q());
            prev = t;
        }
        assert!((three_qubit_optimal(1e9).unwrap().tau - nn_chain_time_3q()).abs() < 1e-8);
    }

    #[test]
    fn three_qubit_protocol_transfers() {
        let s = three_qubit_optimal(3.0).unwrap();
        let f = transfer_fidelity(&s.protocol(512).unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-8, "fidelity {}", f);
    }

    #[test]
    fn direct_and_chain_times() {
        assert!((direct_hop_time(1.0) - FRAC_PI_2).abs() < 1e-15);
        assert!((direct_hop_time(4.0) - PI).abs() < 1e-15);
        assert!((direct_hop_time(9.0) - 1.5 * PI).abs() < 1e-15);
        assert!((nn_chain_time_3q() - 2.72070).abs() < 5e-6);
    }

    #[test]
    fn elliptic_chain_unweighted_limit() {
        let s = weighted_nn_chain_3q(1.0).unwrap();
        assert!((s.tau - nn_chain_time_3q()).abs() < 1e-6);
        assert!((s.omega - 1.0 / libm::sqrt(3.0)).abs() < 1e-6);
        let near = weighted_nn_chain_3q(1.0 + 1e-6).unwrap();
        assert!((near.tau - nn_chain_time_3q()).abs() < 1e-4);
    }

    #[test]
    fn elliptic_chain_weighted_values() {
        let s = weighted_nn_chain_3q(4.0).unwrap();
        assert!((s.tau - 4.19).abs() < 5e-3, "tau {}", s.tau);
        assert!(s.m >= 0.0 && s.m < 1.0);
        let f = transfer_fidelity(&s.protocol(1024).unwrap()).unwrap();
        assert!(f > 1.0 - 1e-6, "fidelity {}", f);
        assert!((weighted_nn_chain_3q(9.0).unwrap().tau - 5.73).abs() < 5e-3);
        assert!(weighted_nn_chain_3q(0.5).is_err());
    }

    #[test]
    fn bounds_and_fits() {
        assert!((classical_bound(10) - 10.17279).abs() < 1e-12);
        assert!((classical_bound(2) - 1.13031).abs() < 1e-15);
        assert!((classical_bound(5) - 4.52124).abs() < 1e-12);
        assert!((asymptotic_fit(20) - 16.5659).abs() < 0.15);
        assert!((asymptotic_fit(40) - 31.9746).abs() < 0.4);
        let big = (asymptotic_fit(200_001) - asymptotic_fit(100_001)) / 100_000.0;
        assert!((big - 0.757).abs() < 1e-6);
        let fit = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14 && (fit.intercept - 1.0).abs() < 1e-14);
        let pl = power_law_fit(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]).unwrap();
        assert!((pl.slope - 2.0).abs() < 1e-14);
    }
}
