//! Classical trajectories: forward hopping sequences from the first to the
//! last site, each timed as an optimally driven weighted subchain.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{LatticeSpec, WeightProfile};
use crate::oracles::{classical_bound, direct_hop_time, weighted_nn_chain_3q};
use crate::shooting::{continuation_sweep, solve_best, ShootingConfig};
use crate::warmstart::seed_guesses;

/// Largest lattice enumerated without an explicit override.
pub const ENUMERATION_CAP: usize = 20;

/// Strictly increasing 1-based site sequence from 1 to N.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectorySpec {
    sites: Vec<usize>,
}

impl TrajectorySpec {
    pub fn new(sites: Vec<usize>) -> Result<Self> {
        if sites.len() < 2 || sites[0] != 1 || !sites.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidSpec(format!(
                "trajectory must start at site 1 and strictly increase, got {:?}",
                sites
            )));
        }
        Ok(Self { sites })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    /// Lattice size (last visited site).
    pub fn n(&self) -> usize {
        self.sites[self.sites.len() - 1]
    }

    /// Hop lengths `p_k`.
    pub fn hops(&self) -> Vec<usize> {
        self.sites.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Number of hops `f`.
    pub fn n_hops(&self) -> usize {
        self.sites.len() - 1
    }

    /// The same path traversed from the far end.
    pub fn mirrored(&self) -> TrajectorySpec {
        let n = self.n();
        Self { sites: self.sites.iter().rev().map(|s| n + 1 - s).collect() }
    }

    /// Comma-separated label such as `1,2,4`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.sites.iter().map(|s| format!("{}", s)).collect();
        parts.join(",")
    }
}

/// All `2^(N-2)` forward trajectories in lexicographic order.
pub fn enumerate_trajectories(n: usize, override_cap: bool) -> Result<Vec<TrajectorySpec>> {
    if n < 2 {
        return Err(Error::InvalidSpec(format!("need at least 2 sites, got {}", n)));
    }
    if n > ENUMERATION_CAP && !override_cap {
        return Err(Error::EnumerationCap { n, cap: ENUMERATION_CAP });
    }
    if n - 2 >= usize::BITS as usize {
        return Err(Error::EnumerationCap { n, cap: usize::BITS as usize + 1 });
    }
    let inner = n - 2;
    let mut out = Vec::with_capacity(1 << inner);
    for mask in 0usize..(1usize << inner) {
        let mut sites = Vec::with_capacity(inner + 2);
        sites.push(1);
        for k in 0..inner {
            if mask >> k & 1 == 1 {
                sites.push(k + 2);
            }
        }
        sites.push(n);
        out.push(TrajectorySpec { sites });
    }
    out.sort();
    Ok(out)
}

/// Link weights `g` along the path.
pub fn link_weights(traj: &TrajectorySpec, weights: &WeightProfile) -> Result<Vec<f64>> {
    traj.sites
        .windows(2)
        .map(|w| {
            weights
                .pair_weight(w[0] - 1, w[1] - 1)
                .ok_or_else(|| Error::InvalidSpec(format!("no weight for hop {} -> {}", w[0], w[1])))
        })
        .collect()
}

/// Nearest-neighbour chain with one link per hop.
pub fn trajectory_instance(traj: &TrajectorySpec, weights: &WeightProfile) -> Result<LatticeSpec> {
    LatticeSpec::chain(&link_weights(traj, weights)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TimingMethod {
    ClosedForm,
    Shooting,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryTiming {
    pub spec: TrajectorySpec,
    /// `NaN` when no solve converged.
    pub j0_tau: f64,
    pub converged: bool,
    pub method: TimingMethod,
    /// Independent elliptic-oracle time for 2-hop paths.
    pub cross_check: Option<f64>,
}

/// Optimal transfer time along one trajectory.
pub fn time_trajectory(traj: &TrajectorySpec, weights: &WeightProfile, cfg: &ShootingConfig) -> TrajectoryTiming {
    let ws = match link_weights(traj, weights) {
        Ok(ws) => ws,
        Err(_) => {
            return TrajectoryTiming {
                spec: traj.clone(),
                j0_tau: f64::NAN,
                converged: false,
                method: TimingMethod::Shooting,
                cross_check: None,
            }
        }
    };
    if ws.len() == 1 {
        return TrajectoryTiming {
            spec: traj.clone(),
            j0_tau: direct_hop_time(ws[0]),
            converged: true,
            method: TimingMethod::ClosedForm,
            cross_check: None,
        };
    }
    let cross_check = if ws.len() == 2 {
        let (lo, hi) = if ws[0] <= ws[1] { (ws[0], ws[1]) } else { (ws[1], ws[0]) };
        weighted_nn_chain_3q(hi / lo).ok().map(|s| libm::sqrt(lo) * s.tau)
    } else {
        None
    };
    // A path and its mirror image have the same optimal time (time reversal);
    // seeds reach the minimal root more reliably from one orientation, so both are solved.
    let mut orientations = vec![ws.clone()];
    let rev: Vec<f64> = ws.iter().rev().copied().collect();
    if rev != ws {
        orientations.push(rev);
    }
    let solved = orientations
        .iter()
        .filter_map(|w| LatticeSpec::chain(w).and_then(|spec| solve_best(&spec, &seed_guesses(&spec), cfg)).ok())
        .map(|r| r.j0_tau)
        .chain(homotopy_solve(&ws, cfg))
        .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))));
    match solved {
        Some(j0_tau) => TrajectoryTiming {
            spec: traj.clone(),
            j0_tau,
            converged: true,
            method: TimingMethod::Shooting,
            cross_check,
        },
        None => TrajectoryTiming {
            spec: traj.clone(),
            j0_tau: f64::NAN,
            converged: false,
            method: TimingMethod::Shooting,
            cross_check,
        },
    }
}

/// Continues the uniform chain solution to the target link weights along
/// `w(s) = 1 + s (w - 1)`.
fn homotopy_solve(ws: &[f64], cfg: &ShootingConfig) -> Option<f64> {
    let uniform = LatticeSpec::chain(&vec![1.0; ws.len()]).ok()?;
    let start = solve_best(&uniform, &seed_guesses(&uniform), cfg).ok()?;
    let spread = ws.iter().fold(1.0f64, |a, &w| a.max(w).max(1.0 / w));
    let steps = libm::ceil(4.0 * libm::log2(spread)).max(1.0) as usize;
    let specs: Vec<LatticeSpec> = (1..=steps)
        .map(|k| {
            let s = k as f64 / steps as f64;
            let w: Vec<f64> = ws.iter().map(|w| 1.0 + s * (w - 1.0)).collect();
            LatticeSpec::chain(&w)
        })
        .collect::<Result<_>>()
        .ok()?;
    let path = continuation_sweep(&specs, &start, cfg).ok()?;
    match path.last()? {
        Ok(r) if path.iter().all(|r| r.is_ok()) => Some(r.j0_tau),
        _ => None,
    }
}

/// Comparison of the optimal protocol against classical transport.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdvantageReport {
    pub n: usize,
    pub optimal: f64,
    pub classical_bound: f64,
    pub classical_min: f64,
    pub timings: Vec<TrajectoryTiming>,
    pub all_converged: bool,
    pub beats_bound: bool,
    pub beats_all_trajectories: bool,
}

/// Builds the report from already computed trajectory timings.
pub fn advantage_from_timings(n: usize, optimal: f64, timings: Vec<TrajectoryTiming>) -> AdvantageReport {
    let classical_min = timings.iter().filter(|t| t.converged).map(|t| t.j0_tau).fold(f64::INFINITY, f64::min);
    let all_converged = timings.iter().all(|t| t.converged);
    let bound = classical_bound(n);
    AdvantageReport {
        n,
        optimal,
        classical_bound: bound,
        classical_min,
        beats_bound: optimal < bound,
        beats_all_trajectories: all_converged && optimal < classical_min,
        all_converged,
        timings,
    }
}

/// Enumerates and times every trajectory of an `n`-site lattice sequentially.
pub fn advantage_report(
    n: usize,
    weights: &WeightProfile,
    optimal_j0_tau: f64,
    cfg: &ShootingConfig,
) -> Result<AdvantageReport> {
    let timings = enumerate_trajectories(n, false)?.iter().map(|t| time_trajectory(t, weights, cfg)).collect();
    Ok(advantage_from_timings(n, optimal_j0_tau, timings))
}
