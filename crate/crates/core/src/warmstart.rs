//! Initial guesses for shooting: closed-form seeds and recurrent extrapolation
//! over previously solved lattice sizes.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::LatticeSpec;
use crate::shooting::{solve_best, solve_instance, ShootingConfig, ShootingResult, ShootingUnknowns};
use crate::spline::monotone_cubic;

/// Points of the common site grid used for extrapolation.
pub const GRID_SIZE: usize = 25;

/// Trailing sizes entering the extrapolation across `N`.
pub const HISTORY: usize = 4;

/// Power-law estimate of `L0` for the quadratic all-to-all family.
pub fn fitted_l0(n: usize) -> f64 {
    0.5 * libm::pow(n as f64, 1.6) + 0.9
}

/// `y_m(0) = -0.05 + 1/sqrt(2 (N - m + 1))` for `m = 2..N`, `L0 = 0.5 N^1.6 + 0.9`.
pub fn formula_guess(n: usize) -> ShootingUnknowns {
    let y_tail = (2..=n).map(|m| -0.05 + 1.0 / libm::sqrt(2.0 * (n - m + 1) as f64)).collect();
    ShootingUnknowns::new(y_tail, fitted_l0(n))
}

// Typical weight of the links the excitation must cross.
fn weight_scale(spec: &LatticeSpec) -> f64 {
    let n = spec.n_sites();
    let nn: Vec<f64> = (0..n - 1).filter_map(|m| spec.weight(m, m + 1)).collect();
    let ws: Vec<f64> = if nn.is_empty() {
        spec.allowed_pairs().into_iter().filter_map(|(m, k)| spec.weight(m, k)).collect()
    } else {
        nn
    };
    if ws.is_empty() {
        return 1.0;
    }
    libm::exp(ws.iter().map(|w| libm::log(*w)).sum::<f64>() / ws.len() as f64)
}

/// Multi-start seeds: a flat `y` profile with `L0` spread around the fitted
/// value, and a direct-hop profile when the end-to-end link is allowed.
pub fn seed_guesses(spec: &LatticeSpec) -> Vec<ShootingUnknowns> {
    let n = spec.n_sites();
    let flat = 1.0 / libm::sqrt(2.0 * (n - 1) as f64);
    let base = fitted_l0(n) * weight_scale(spec);
    let mut out: Vec<ShootingUnknowns> = [1.0, 0.7, 1.4, 0.5, 2.0, 0.35, 0.25]
        .iter()
        .map(|k| ShootingUnknowns::new(vec![flat; n - 1], base * k))
        .collect();
    if n > 2 {
        if let Some(g) = spec.weight(0, n - 1) {
            let mut y = vec![0.02; n - 1];
            y[n - 2] = libm::sqrt(0.5 - 0.0004 * (n - 2) as f64);
            out.push(ShootingUnknowns::new(y, g * FRAC_PI_2));
        }
    }
    out
}

/// Converged solution of one lattice size, as stored for warm starts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolutionRecord {
    pub profile_key: String,
    pub n: usize,
    /// Full `y(0)` including `y_1 = 0`.
    pub y0: Vec<f64>,
    /// Unit-horizon `L0`.
    pub l0: f64,
    pub j0_tau: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl SolutionRecord {
    pub fn from_result(spec: &LatticeSpec, r: &ShootingResult) -> Self {
        let mut y0 = vec![0.0];
        y0.extend_from_slice(&r.unknowns.y_tail);
        Self {
            profile_key: spec.profile_key(),
            n: spec.n_sites(),
            y0,
            l0: r.unknowns.l0,
            j0_tau: r.j0_tau,
            diagnostics: r.protocol.diagnostics.clone(),
        }
    }

    pub fn unknowns(&self) -> ShootingUnknowns {
        ShootingUnknowns::new(self.y0[1..].to_vec(), self.l0)
    }
}

/// Converged solutions keyed by `(profile key, N)`; later inserts replace earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GuessLibrary {
    records: BTreeMap<(String, usize), SolutionRecord>,
}

impl GuessLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, record: SolutionRecord) {
        self.records.insert((record.profile_key.clone(), record.n), record);
    }

    pub fn get(&self, profile_key: &str, n: usize) -> Option<&SolutionRecord> {
        self.records.get(&(String::from(profile_key), n))
    }

    /// Stored sizes for a profile, ascending.
    pub fn sizes(&self, profile_key: &str) -> Vec<usize> {
        self.records.keys().filter(|(k, _)| k == profile_key).map(|(_, n)| *n).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &SolutionRecord> {
        self.records.values()
    }
}

/// Resamples a site profile to `len` points over a normalized coordinate with
/// a monotone cubic interpolant.
pub fn resample(values: &[f64], len: usize) -> Result<Vec<f64>> {
    if values.is_empty() || len == 0 {
        return Err(Error::Mismatch(String::from("cannot resample an empty profile")));
    }
    if values.len() == 1 {
        return Ok(vec![values[0]; len]);
    }
    if len == 1 {
        return Ok(vec![values[values.len() - 1]]);
    }
    let xs: Vec<f64> = (0..values.len()).map(|i| i as f64 / (values.len() - 1) as f64).collect();
    let s = monotone_cubic(&xs, values)?;
    Ok((0..len).map(|i| s.eval(i as f64 / (len - 1) as f64)).collect())
}

/// Moves unit-horizon unknowns to a lattice with `n` sites.
pub fn resample_unknowns(u: &ShootingUnknowns, n: usize) -> Result<ShootingUnknowns> {
    if n < 2 {
        return Err(Error::InvalidSpec(String::from("need at least 2 sites")));
    }
    Ok(ShootingUnknowns::new(resample(&u.y_tail, n - 1)?, u.l0))
}

// Least-squares quadratic through (xs, ys), evaluated at x.
fn quadratic_extrapolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = xs.len();
    if k == 1 {
        return ys[0];
    }
    let deg = (k - 1).min(2);
    let x0 = xs[k - 1];
    let a = DMatrix::from_fn(k, deg + 1, |i, j| libm::pow(xs[i] - x0, j as f64));
    let b = DVector::from_column_slice(ys);
    let coef = a.svd(true, true).solve(&b, 1e-14).expect("SVD was computed with U and V");
    (0..=deg).map(|j| coef[j] * libm::pow(x - x0, j as f64)).sum()
}

/// Guess for `target_n` from stored solutions: resample each stored profile to
/// the common grid, fit each grid point and `L0` across the trailing sizes,
/// extrapolate and resample to the target size.
pub fn extrapolate_guess(lib: &GuessLibrary, profile_key: &str, target_n: usize) -> Result<ShootingUnknowns> {
    if target_n < 2 {
        return Err(Error::InvalidSpec(String::from("need at least 2 sites")));
    }
    if let Some(r) = lib.get(profile_key, target_n) {
        let grid = resample(&r.y0[1..], GRID_SIZE)?;
        return Ok(ShootingUnknowns::new(resample(&grid, target_n - 1)?, r.l0));
    }
    let usable: Vec<usize> = lib.sizes(profile_key).into_iter().filter(|&n| n >= 3 && n < target_n).collect();
    if usable.len() < HISTORY {
        return Err(Error::InsufficientHistory { available: usable.len(), required: HISTORY });
    }
    let trailing = &usable[usable.len() - HISTORY..];
    let mut grids = Vec::with_capacity(HISTORY);
    let mut l0s = Vec::with_capacity(HISTORY);
    for &n in trailing {
        let r = lib.get(profile_key, n).expect("size listed by the library");
        grids.push(resample(&r.y0[1..], GRID_SIZE)?);
        l0s.push(r.l0);
    }
    let xs: Vec<f64> = trailing.iter().map(|&n| n as f64).collect();
    let t = target_n as f64;
    let grid: Vec<f64> = (0..GRID_SIZE)
        .map(|i| {
            let ys: Vec<f64> = grids.iter().map(|g| g[i]).collect();
            quadratic_extrapolate(&xs, &ys, t)
        })
        .collect();
    let l0 = quadratic_extrapolate(&xs, &l0s, t);
    Ok(ShootingUnknowns::new(resample(&grid, target_n - 1)?, l0))
}

/// Solves one size of a sweep: extrapolated guess first, multi-start seeds as fallback.
pub fn warm_solve(spec: &LatticeSpec, lib: &GuessLibrary, cfg: &ShootingConfig) -> Result<ShootingResult> {
    let key = spec.profile_key();
    if let Ok(g) = extrapolate_guess(lib, &key, spec.n_sites()) {
        if let Ok(r) = solve_instance(spec, &g, cfg) {
            return Ok(r);
        }
    }
    solve_best(spec, &seed_guesses(spec), cfg)
}

/// Solves sizes `sizes` in order with warm-start recursion, storing every
/// converged result in `lib`.
pub fn size_sweep(
    template: &LatticeSpec,
    sizes: &[usize],
    lib: &mut GuessLibrary,
    cfg: &ShootingConfig,
) -> Vec<(usize, Result<ShootingResult>)> {
    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let r = template.resized(n).and_then(|spec| {
            let r = warm_solve(&spec, lib, cfg)?;
            lib.insert(SolutionRecord::from_result(&spec, &r));
            Ok(r)
        });
        out.push((n, r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(key: &str, n: usize, y: Vec<f64>, l0: f64) -> SolutionRecord {
        SolutionRecord { profile_key: String::from(key), n, y0: y, l0, j0_tau: 0.0, diagnostics: BTreeMap::new() }
    }

    #[test]
    fn formula_values() {
        let g = formula_guess(5);
        assert!((g.l0 - 7.466_319_511).abs() < 1e-9);
        assert!((g.y_tail[3] - 0.65711).abs() < 5e-6);
        assert!((g.y_tail[0] - 0.30355).abs() < 5e-6);
    }

    #[test]
    fn constant_history_extrapolates_to_constant() {
        let mut lib = GuessLibrary::new();
        for n in 3..=8 {
            lib.insert(record("k", n, vec![0.3; n], 2.0));
        }
        let g = extrapolate_guess(&lib, "k", 11).unwrap();
        assert_eq!(g.y_tail.len(), 10);
        assert!(g.y_tail.iter().all(|v| (v - 0.3).abs() < 1e-12));
        assert!((g.l0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_history_is_exact() {
        let mut lib = GuessLibrary::new();
        for n in 4..=7 {
            let x = n as f64;
            lib.insert(record("k", n, vec![0.1 * x; n], 1.0 + 0.5 * x * x));
        }
        let g = extrapolate_guess(&lib, "k", 9).unwrap();
        assert!((g.l0 - (1.0 + 0.5 * 81.0)).abs() < 1e-9);
        assert!(g.y_tail.iter().all(|v| (v - 0.9).abs() < 1e-9));
    }

    #[test]
    fn insufficient_history() {
        let mut lib = GuessLibrary::new();
        lib.insert(record("k", 3, vec![0.0, 0.5, 0.5], 3.0));
        assert!(matches!(
            extrapolate_guess(&lib, "k", 6),
            Err(Error::InsufficientHistory { available: 1, required: 4 })
        ));
    }

    #[test]
    fn stored_size_round_trip() {
        let mut lib = GuessLibrary::new();
        let n = 12;
        let y: Vec<f64> = (0..n).map(|m| if m == 0 { 0.0 } else { 0.3 - 0.1 * libm::pow(m as f64 / n as f64, 3.0) }).collect();
        lib.insert(record("k", n, y.clone(), 3.0));
        let g = extrapolate_guess(&lib, "k", n).unwrap();
        for (a, b) in g.y_tail.iter().zip(&y[1..]) {
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn latest_record_wins() {
        let mut lib = GuessLibrary::new();
        lib.insert(record("k", 4, vec![0.0; 4], 1.0));
        lib.insert(record("k", 4, vec![0.0; 4], 2.0));
        assert_eq!(lib.len(), 1);
        assert_eq!(lib.get("k", 4).unwrap().l0, 2.0);
        assert_eq!(lib.sizes("k"), vec![4]);
        assert!(lib.sizes("other").is_empty());
    }
}
