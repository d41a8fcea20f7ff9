//! Reference comparisons: optimal times, trajectory times, the three-site
//! closed form and the large-N fits.

use std::f64::consts::{FRAC_PI_2, PI};

use brach_core::lattice::{LatticeSpec, WeightProfile};
use brach_core::oracles::{
    classical_bound, direct_hop_time, linear_fit, nn_chain_time_3q, power_law_fit, three_qubit_optimal,
    weighted_nn_chain_3q,
};
use brach_core::shooting::{continuation_sweep, solve_best, ShootingConfig, ShootingResult};
use brach_core::trajectories::{enumerate_trajectories, time_trajectory, TrajectoryTiming};
use brach_core::warmstart::{seed_guesses, warm_solve, GuessLibrary, SolutionRecord};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::export::SeriesPoint;
use crate::store::SolutionStore;

/// Optimal `J0 tau` for `g_p = p^2`, all-to-all couplings.
pub const REFERENCE_OPTIMAL: [(usize, f64); 39] = [
    (2, FRAC_PI_2),
    (3, 2.5651),
    (4, 3.4885),
    (5, 4.3766),
    (6, 5.2427),
    (7, 6.0932),
    (8, 6.9321),
    (9, 7.7618),
    (10, 8.5840),
    (11, 9.3999),
    (12, 10.2104),
    (13, 11.0164),
    (14, 11.8183),
    (15, 12.6166),
    (16, 13.4117),
    (17, 14.2040),
    (18, 14.9936),
    (19, 15.7808),
    (20, 16.5659),
    (21, 17.3490),
    (22, 18.1301),
    (23, 18.9096),
    (24, 19.6874),
    (25, 20.4637),
    (26, 21.2386),
    (27, 22.0122),
    (28, 22.7845),
    (29, 23.5557),
    (30, 24.3257),
    (31, 25.0946),
    (32, 25.8625),
    (33, 26.6295),
    (34, 27.3955),
    (35, 28.1607),
    (36, 28.9250),
    (37, 29.6885),
    (38, 30.4513),
    (39, 31.2133),
    (40, 31.9746),
];

/// Trajectory times for `g_p = p^2`; mirror pairs share a row.
pub const REFERENCE_TRAJECTORIES: [(&str, f64); 21] = [
    ("1,2,3", 2.72),
    ("1,3", PI),
    ("1,2,3,4", 3.85),
    ("1,2,4;1,3,4", 4.19),
    ("1,4", 1.5 * PI),
    ("1,2,3,4,5", 4.99),
    ("1,2,3,5;1,3,4,5", 5.30),
    ("1,2,4,5", 5.23),
    ("1,3,5", 5.44),
    ("1,2,5;1,4,5", 5.73),
    ("1,5", 2.0 * PI),
    ("1,2,3,4,5,6", 6.12),
    ("1,2,4,5,6;1,2,3,5,6", 6.34),
    ("1,2,3,4,6;1,3,4,5,6", 6.43),
    ("1,3,4,6", 6.71),
    ("1,2,5,6", 6.75),
    ("1,2,3,6;1,4,5,6", 6.84),
    ("1,2,4,6;1,3,5,6", 6.48),
    ("1,3,6;1,4,6", 6.87),
    ("1,2,6;1,5,6", 7.29),
    ("1,6", 2.5 * PI),
];

pub const POWER_LAW_EXPONENT: f64 = 0.960;
pub const LINEAR_SLOPE: f64 = 0.757;

pub fn reference_optimal(n: usize) -> Option<f64> {
    REFERENCE_OPTIMAL.iter().find(|(m, _)| *m == n).map(|(_, v)| *v)
}

pub fn reference_trajectory(label: &str) -> Option<f64> {
    REFERENCE_TRAJECTORIES
        .iter()
        .find(|(l, _)| l.split(';').any(|p| p.trim() == label))
        .map(|(_, v)| *v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `|value - reference| <= tolerance`.
    Near,
    /// `value < reference`.
    Below,
}

/// One compared quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub group: String,
    pub label: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub relation: Relation,
}

impl Check {
    pub fn new(group: &str, label: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self { group: String::from(group), label: label.into(), value, reference, tolerance, relation: Relation::Near }
    }

    pub fn below(group: &str, label: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            group: String::from(group),
            label: label.into(),
            value,
            reference: bound,
            tolerance: 0.0,
            relation: Relation::Below,
        }
    }

    pub fn delta(&self) -> f64 {
        self.value - self.reference
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite()
            && match self.relation {
                Relation::Near => self.delta().abs() <= self.tolerance,
                Relation::Below => self.value < self.reference,
            }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        match self.relation {
            Relation::Near => format!(
                "{} {} {}: value {:.8} reference {:.8} delta {:+.3e} tol {:.1e}",
                verdict,
                self.group,
                self.label,
                self.value,
                self.reference,
                self.delta(),
                self.tolerance
            ),
            Relation::Below => format!(
                "{} {} {}: value {:.6} < bound {:.6} margin {:.4}",
                verdict,
                self.group,
                self.label,
                self.value,
                self.reference,
                -self.delta()
            ),
        }
    }
}

/// One size of an optimal-time sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub n: usize,
    pub record: Option<SolutionRecord>,
    /// Present when the size was solved in this run rather than read from the store.
    pub result: Option<ShootingResult>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn j0_tau(&self) -> Option<f64> {
        self.record.as_ref().map(|r| r.j0_tau)
    }
}

/// Solves `sizes` in order with warm-start recursion. With a store, stored
/// sizes seed the library, are reused when `reuse` is set, and new solutions
/// are appended.
pub fn optimal_sweep(
    template: &LatticeSpec,
    sizes: &[usize],
    store: Option<&SolutionStore>,
    reuse: bool,
    cfg: &ShootingConfig,
) -> Result<Vec<SweepPoint>> {
    let key = template.profile_key();
    let mut lib = match store {
        Some(s) => s.library(&key)?,
        None => GuessLibrary::new(),
    };
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if reuse {
            if let Some(r) = lib.get(&key, n) {
                out.push(SweepPoint { n, record: Some(r.clone()), result: None, error: None });
                continue;
            }
        }
        let spec = template.resized(n)?;
        match warm_solve(&spec, &lib, cfg) {
            Ok(r) => {
                let rec = SolutionRecord::from_result(&spec, &r);
                if let Some(s) = store {
                    s.append(&rec, cfg.fidelity_tol)?;
                }
                lib.insert(rec.clone());
                out.push(SweepPoint { n, record: Some(rec), result: Some(r), error: None });
            }
            Err(e) => out.push(SweepPoint { n, record: None, result: None, error: Some(e.to_string()) }),
        }
    }
    Ok(out)
}

/// Sweep results against the reference optimal times: `5e-3` up to
/// `N = 12`, `2e-2` beyond.
pub fn optimal_time_checks(points: &[SweepPoint]) -> Vec<Check> {
    points
        .iter()
        .filter_map(|p| {
            let r = reference_optimal(p.n)?;
            let tol = if p.n <= 12 { 5e-3 } else { 2e-2 };
            Some(Check::new("optimal", format!("N={}", p.n), p.j0_tau().unwrap_or(f64::NAN), r, tol))
        })
        .collect()
}

fn fit_points(points: &[SweepPoint], lo: usize, hi: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in lo..=hi {
        let t = points.iter().find(|p| p.n == n)?.j0_tau()?;
        xs.push(n as f64);
        ys.push(t);
    }
    Some((xs, ys))
}

/// Power-law exponent over `N = 3..40` and linear slope over `N = 25..40`.
/// Missing sizes make the corresponding value `NaN`.
pub fn fit_checks(points: &[SweepPoint]) -> Vec<Check> {
    let exponent = fit_points(points, 3, 40)
        .and_then(|(x, y)| power_law_fit(&x, &y).ok())
        .map_or(f64::NAN, |f| f.slope);
    let slope = fit_points(points, 25, 40).and_then(|(x, y)| linear_fit(&x, &y).ok()).map_or(f64::NAN, |f| f.slope);
    vec![
        Check::new("fits", "power-law exponent N=3..40", exponent, POWER_LAW_EXPONENT, 0.02),
        Check::new("fits", "linear slope N=25..40", slope, LINEAR_SLOPE, 0.02),
    ]
}

/// Times every trajectory of an `n`-site lattice in parallel, in enumeration order.
pub fn trajectory_timings(
    n: usize,
    weights: &WeightProfile,
    override_cap: bool,
    cfg: &ShootingConfig,
) -> Result<Vec<TrajectoryTiming>> {
    let all = enumerate_trajectories(n, override_cap)?;
    Ok(all.par_iter().map(|t| time_trajectory(t, weights, cfg)).collect())
}

pub fn trajectory_checks(timings: &[TrajectoryTiming]) -> Vec<Check> {
    timings
        .iter()
        .filter_map(|t| {
            let label = t.spec.label();
            let r = reference_trajectory(&label)?;
            Some(Check::new("trajectory", label, t.j0_tau, r, 0.01))
        })
        .collect()
}

/// Three-site all-to-all instance with long-link weight `g`.
pub fn three_site_spec(g: f64) -> Result<LatticeSpec> {
    Ok(LatticeSpec::all_to_all(3, WeightProfile::PerDistance { values: vec![1.0, g] })?)
}

/// Solver against the closed form for each `g >= 2`: time and pointwise couplings.
pub fn three_qubit_checks(gs: &[f64], cfg: &ShootingConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for &g in gs {
        let spec = three_site_spec(g)?;
        let exact = three_qubit_optimal(g)?;
        let solved = solve_best(&spec, &seed_guesses(&spec), cfg);
        let (tau, dev) = match &solved {
            Ok(r) => {
                let dev = r
                    .protocol
                    .times
                    .iter()
                    .zip(&r.protocol.couplings)
                    .map(|(&t, j)| j.max_abs_diff(&exact.coupling_matrix(t)))
                    .fold(0.0, f64::max);
                (r.j0_tau, dev / spec.j0())
            }
            Err(_) => (f64::NAN, f64::NAN),
        };
        out.push(Check::new("three-qubit", format!("g={} time", g), tau, exact.tau, 1e-6));
        out.push(Check::new("three-qubit", format!("g={} couplings", g), dev, 0.0, 1e-6));
    }
    Ok(out)
}

/// Curves of transfer time against the long-link weight `g` for three sites:
/// optimal (solver, continued in `g`), direct hop, unweighted chain and the
/// weighted two-link chain.
pub fn g_sweep_series(gs: &[f64], cfg: &ShootingConfig) -> Result<Vec<SeriesPoint>> {
    let mut out = Vec::new();
    let specs: Vec<LatticeSpec> = gs.iter().map(|&g| three_site_spec(g)).collect::<Result<_>>()?;
    if let Some(first) = specs.first() {
        let seed = solve_best(first, &seed_guesses(first), cfg)?;
        out.push(SeriesPoint { series: String::from("optimal"), x: gs[0], y: seed.j0_tau });
        for (g, r) in gs[1..].iter().zip(continuation_sweep(&specs[1..], &seed, cfg)?) {
            out.push(SeriesPoint { series: String::from("optimal"), x: *g, y: r.map_or(f64::NAN, |r| r.j0_tau) });
        }
    }
    for &g in gs {
        out.push(SeriesPoint { series: String::from("direct-hop"), x: g, y: direct_hop_time(g) });
    }
    for &g in gs {
        out.push(SeriesPoint { series: String::from("nn-chain"), x: g, y: nn_chain_time_3q() });
    }
    for &g in gs {
        let y = weighted_nn_chain_3q(g).map_or(f64::NAN, |s| s.tau);
        out.push(SeriesPoint { series: String::from("weighted-chain"), x: g, y });
    }
    Ok(out)
}

/// Optimal times below the classical estimate for `5 <= N <= 12` and below
/// every trajectory of the supplied lattices.
pub fn advantage_checks(points: &[SweepPoint], timings: &[(usize, Vec<TrajectoryTiming>)]) -> Vec<Check> {
    let mut out = Vec::new();
    for p in points.iter().filter(|p| (5..=12).contains(&p.n)) {
        let t = p.j0_tau().unwrap_or(f64::NAN);
        out.push(Check::below("advantage", format!("N={} vs classical estimate", p.n), t, classical_bound(p.n)));
    }
    for (n, ts) in timings {
        let t = points.iter().find(|p| p.n == *n).and_then(|p| p.j0_tau()).unwrap_or(f64::NAN);
        let best = if ts.iter().all(|t| t.converged) {
            ts.iter().map(|t| t.j0_tau).fold(f64::INFINITY, f64::min)
        } else {
            f64::NAN
        };
        out.push(Check::below("advantage", format!("N={} vs fastest trajectory", n), t, best));
    }
    out
}
