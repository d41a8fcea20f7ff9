//! Lattice instances, the chiral single-excitation Hamiltonian and the
//! quadratic coupling constraint.
//!
//! Sites are 0-based throughout this module. A coupling `J[m][n]` with
//! `m < n` spans hop distance `p = n - m` and enters the site-basis
//! Hamiltonian with phase `i^(p-1)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// `i^k` for any integer `k`.
pub fn i_pow(k: i64) -> C64 {
    match k.rem_euclid(4) {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// Modulus of a complex number.
#[inline]
pub fn cabs(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

/// Penalty weights `g` on couplings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum WeightProfile {
    /// `g_p = p^k`.
    Power { exponent: f64 },
    /// `g_p = values[p - 1]`.
    PerDistance { values: Vec<f64> },
    /// Full symmetric `n x n` matrix (row-major); the diagonal is ignored.
    Matrix { n: usize, values: Vec<f64> },
}

impl WeightProfile {
    pub fn power(exponent: f64) -> Self {
        WeightProfile::Power { exponent }
    }

    /// The headline family `g_p = p^2`.
    pub fn quadratic() -> Self {
        Self::power(2.0)
    }

    pub fn unpenalized() -> Self {
        Self::power(0.0)
    }

    /// Weight of the pair `(m, n)`, `m != n`, 0-based.
    pub fn pair_weight(&self, m: usize, n: usize) -> Option<f64> {
        if m == n {
            return None;
        }
        let p = m.abs_diff(n);
        match self {
            WeightProfile::Power { exponent } => Some(libm::pow(p as f64, *exponent)),
            WeightProfile::PerDistance { values } => values.get(p - 1).copied(),
            WeightProfile::Matrix { n: size, values } => {
                if m < *size && n < *size {
                    values.get(m * size + n).copied()
                } else {
                    None
                }
            }
        }
    }

    /// Weight for a hop distance, when the profile is distance-based.
    pub fn distance_weight(&self, p: usize) -> Option<f64> {
        match self {
            WeightProfile::Power { exponent } if p >= 1 => Some(libm::pow(p as f64, *exponent)),
            WeightProfile::PerDistance { values } if p >= 1 => values.get(p - 1).copied(),
            _ => None,
        }
    }

    /// Canonical textual form, independent of lattice size for
    /// distance-based profiles.
    pub fn key(&self) -> String {
        match self {
            WeightProfile::Power { exponent } => format!("power:{}", fmt_f64(*exponent)),
            WeightProfile::PerDistance { values } => {
                let parts: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
                format!("list:{}", parts.join(","))
            }
            WeightProfile::Matrix { n, values } => {
                let parts: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
                format!("matrix:{}:{}", n, parts.join(","))
            }
        }
    }
}

fn fmt_f64(v: f64) -> String {
    // Shortest round-trip representation.
    format!("{:?}", v)
}

/// Which site pairs may carry a coupling.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Mask {
    AllToAll,
    NearestNeighbor,
    /// Explicit unordered pairs, 0-based.
    Pairs { pairs: Vec<(usize, usize)> },
}

impl Mask {
    pub fn key(&self) -> String {
        match self {
            Mask::AllToAll => String::from("all"),
            Mask::NearestNeighbor => String::from("nn"),
            Mask::Pairs { pairs } => {
                let mut sorted: Vec<(usize, usize)> =
                    pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
                sorted.sort_unstable();
                sorted.dedup();
                let parts: Vec<String> = sorted.iter().map(|(a, b)| format!("{}-{}", a, b)).collect();
                format!("pairs:{}", parts.join(","))
            }
        }
    }
}

/// One solver instance: lattice size, weights, coupling mask and resource `J0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "SpecRepr", into = "SpecRepr"))]
pub struct LatticeSpec {
    n_sites: usize,
    profile: WeightProfile,
    mask: Mask,
    j0: f64,
    weight: Vec<f64>,
    allowed: Vec<bool>,
}

impl LatticeSpec {
    pub fn new(n_sites: usize, profile: WeightProfile, mask: Mask, j0: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 sites, got {}", n_sites)));
        }
        if !(j0 > 0.0 && j0.is_finite()) {
            return Err(Error::InvalidSpec(format!("resource J0 must be positive, got {}", j0)));
        }
        let n = n_sites;
        let mut allowed = vec![false; n * n];
        match &mask {
            Mask::AllToAll => {
                for m in 0..n {
                    for k in 0..n {
                        allowed[m * n + k] = m != k;
                    }
                }
            }
            Mask::NearestNeighbor => {
                for m in 0..n - 1 {
                    allowed[m * n + m + 1] = true;
                    allowed[(m + 1) * n + m] = true;
                }
            }
            Mask::Pairs { pairs } => {
                for &(a, b) in pairs {
                    if a == b || a >= n || b >= n {
                        return Err(Error::InvalidSpec(format!("mask pair ({}, {}) is invalid", a, b)));
                    }
                    allowed[a * n + b] = true;
                    allowed[b * n + a] = true;
                }
            }
        }
        if let WeightProfile::Matrix { n: size, values } = &profile {
            if *size != n || values.len() != n * n {
                return Err(Error::InvalidSpec(String::from("weight matrix does not match lattice size")));
            }
            for m in 0..n {
                for k in m + 1..n {
                    if values[m * n + k] != values[k * n + m] {
                        return Err(Error::InvalidSpec(String::from("weight matrix is not symmetric")));
                    }
                }
            }
        }
        let mut weight = vec![0.0; n * n];
        for m in 0..n {
            for k in 0..n {
                if !allowed[m * n + k] {
                    continue;
                }
                let g = profile.pair_weight(m, k).ok_or_else(|| {
                    Error::InvalidSpec(format!("no weight for pair ({}, {})", m, k))
                })?;
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::InvalidSpec(format!(
                        "weight for pair ({}, {}) must be positive, got {}",
                        m, k, g
                    )));
                }
                weight[m * n + k] = g;
            }
        }
        Ok(Self { n_sites, profile, mask, j0, weight, allowed })
    }

    /// All-to-all lattice with `J0 = 1`.
    pub fn all_to_all(n_sites: usize, profile: WeightProfile) -> Result<Self> {
        Self::new(n_sites, profile, Mask::AllToAll, 1.0)
    }

    /// Nearest-neighbour chain with per-link weights and `J0 = 1`.
    pub fn chain(link_weights: &[f64]) -> Result<Self> {
        let n = link_weights.len() + 1;
        let mut values = vec![1.0; n * n];
        for (k, &w) in link_weights.iter().enumerate() {
            values[k * n + k + 1] = w;
            values[(k + 1) * n + k] = w;
        }
        Self::new(n, WeightProfile::Matrix { n, values }, Mask::NearestNeighbor, 1.0)
    }

    pub fn with_j0(mut self, j0: f64) -> Result<Self> {
        if !(j0 > 0.0 && j0.is_finite()) {
            return Err(Error::InvalidSpec(format!("resource J0 must be positive, got {}", j0)));
        }
        self.j0 = j0;
        Ok(self)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn profile(&self) -> &WeightProfile {
        &self.profile
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    #[inline]
    pub fn is_allowed(&self, m: usize, n: usize) -> bool {
        self.allowed[m * self.n_sites + n]
    }

    /// Weight of an allowed pair; `None` for masked-out pairs and `m == n`.
    #[inline]
    pub fn weight(&self, m: usize, n: usize) -> Option<f64> {
        if self.is_allowed(m, n) {
            Some(self.weight[m * self.n_sites + n])
        } else {
            None
        }
    }

    /// Allowed unordered pairs `(m, n)` with `m < n`, row-major order.
    pub fn allowed_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_sites;
        let mut out = Vec::new();
        for m in 0..n {
            for k in m + 1..n {
                if self.is_allowed(m, k) {
                    out.push((m, k));
                }
            }
        }
        out
    }

    /// Key identifying the weight profile and mask (not the size).
    pub fn profile_key(&self) -> String {
        format!("{}|{}", self.profile.key(), self.mask.key())
    }

    /// Same profile and mask on a lattice of a different size.
    pub fn resized(&self, n_sites: usize) -> Result<Self> {
        Self::new(n_sites, self.profile.clone(), self.mask.clone(), self.j0)
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
struct SpecRepr {
    n_sites: usize,
    profile: WeightProfile,
    mask: Mask,
    j0: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<SpecRepr> for LatticeSpec {
    type Error = Error;

    fn try_from(r: SpecRepr) -> Result<Self> {
        LatticeSpec::new(r.n_sites, r.profile, r.mask, r.j0)
    }
}

#[cfg(feature = "serde")]
impl From<LatticeSpec> for SpecRepr {
    fn from(s: LatticeSpec) -> Self {
        SpecRepr { n_sites: s.n_sites, profile: s.profile, mask: s.mask, j0: s.j0 }
    }
}

/// Real symmetric coupling matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingMatrix {
    n: usize,
    values: Vec<f64>,
}

impl CouplingMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; n * n] }
    }

    /// Build from `(m, n, J)` triples; each pair is mirrored.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize, f64)]) -> Self {
        let mut j = Self::zeros(n);
        for &(a, b, v) in pairs {
            j.set(a, b, v);
        }
        j
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.values[m * self.n + n]
    }

    /// Sets `J[m][n] = J[n][m] = v`. Diagonal writes are ignored.
    pub fn set(&mut self, m: usize, n: usize, v: f64) {
        if m == n {
            return;
        }
        self.values[m * self.n + n] = v;
        self.values[n * self.n + m] = v;
    }

    pub fn max_abs_diff(&self, other: &CouplingMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { n: self.n, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Checks that every nonzero entry is an allowed pair.
    pub fn check_mask(&self, spec: &LatticeSpec) -> Result<()> {
        if self.n != spec.n_sites() {
            return Err(Error::Mismatch(format!(
                "coupling matrix is {}x{}, lattice has {} sites",
                self.n, self.n, spec.n_sites()
            )));
        }
        for m in 0..self.n {
            for k in m + 1..self.n {
                if self.get(m, k) != 0.0 && !spec.is_allowed(m, k) {
                    return Err(Error::ConstraintViolation { m, n: k });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Basis {
    Site,
    /// Rotated by `Q = diag(i^(m-1))`; chiral operators are purely imaginary here.
    Q,
}

/// Dense complex operator tagged with its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    pub values: DMatrix<C64>,
    pub basis: Basis,
}

impl HermitianOperator {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Largest elementwise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> f64 {
        let h = &self.values;
        let mut worst: f64 = 0.0;
        for m in 0..h.nrows() {
            for n in 0..h.ncols() {
                worst = worst.max(cabs(h[(m, n)] - h[(n, m)].conj()));
            }
        }
        worst
    }

    /// Largest real part of any entry (zero for chiral operators in the Q basis).
    pub fn max_real_part(&self) -> f64 {
        self.values.iter().map(|z| z.re.abs()).fold(0.0, f64::max)
    }

    /// Change basis: site -> Q applies `Q H Q^-1`, Q -> site the inverse.
    pub fn to_basis(&self, basis: Basis) -> HermitianOperator {
        if basis == self.basis {
            return self.clone();
        }
        let sign = if basis == Basis::Q { 1 } else { -1 };
        let n = self.n();
        let values = DMatrix::from_fn(n, n, |m, k| {
            self.values[(m, k)] * i_pow(sign * (m as i64 - k as i64))
        });
        HermitianOperator { values, basis }
    }

    /// `Σ H Σ` with the antiunitary chiral operator `Σ = diag((-1)^m) K`,
    /// evaluated in the site basis.
    pub fn chiral_conjugate(&self) -> HermitianOperator {
        let site = self.to_basis(Basis::Site);
        let n = site.n();
        let values = DMatrix::from_fn(n, n, |m, k| {
            let s = if (m + k) % 2 == 0 { 1.0 } else { -1.0 };
            site.values[(m, k)].conj() * s
        });
        HermitianOperator { values, basis: Basis::Site }.to_basis(self.basis)
    }

    /// `max |Σ H Σ + H|`, zero when `H` anticommutes with the chiral operator.
    pub fn chiral_anticommutator_residual(&self) -> f64 {
        let c = self.chiral_conjugate();
        (&c.values + &self.values).iter().map(|z| cabs(*z)).fold(0.0, f64::max)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.values.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Chiral Hamiltonian for the coupling matrix `j` in the requested basis.
pub fn build_hamiltonian(spec: &LatticeSpec, j: &CouplingMatrix, basis: Basis) -> Result<HermitianOperator> {
    j.check_mask(spec)?;
    Ok(hamiltonian_unchecked(j, basis))
}

pub(crate) fn hamiltonian_unchecked(j: &CouplingMatrix, basis: Basis) -> HermitianOperator {
    let n = j.n();
    let mut h = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for m in 0..n {
        for k in m + 1..n {
            let v = j.get(m, k);
            if v == 0.0 {
                continue;
            }
            let upper = match basis {
                Basis::Site => i_pow((k - m) as i64 - 1) * v,
                Basis::Q => C64::new(0.0, -v),
            };
            h[(m, k)] = upper;
            h[(k, m)] = upper.conj();
        }
    }
    HermitianOperator { values: h, basis }
}

/// `Σ g J^2` over allowed pairs, each unordered pair counted once.
pub fn constraint_norm(spec: &LatticeSpec, j: &CouplingMatrix) -> f64 {
    spec.allowed_pairs()
        .into_iter()
        .map(|(m, k)| {
            let v = j.get(m, k);
            spec.weight(m, k).unwrap_or(0.0) * v * v
        })
        .sum()
}

/// Trace form `Tr(G(H) H) = 2 Σ g J^2`.
pub fn trace_norm_squared(spec: &LatticeSpec, j: &CouplingMatrix) -> f64 {
    2.0 * constraint_norm(spec, j)
}

/// Currents `j_{1,n} = 2 J_{1,n} psi_1 psi_n` out of the first site, for
/// `n = 2..N` (index 0 of the result is `n = 2`).
pub fn probability_currents(psi_q: &[C64], j: &CouplingMatrix) -> Vec<f64> {
    let n = j.n().min(psi_q.len());
    (1..n).map(|k| 2.0 * j.get(0, k) * (psi_q[0] * psi_q[k]).re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec3() -> LatticeSpec {
        LatticeSpec::all_to_all(3, WeightProfile::PerDistance { values: vec![1.0, 3.0] }).unwrap()
    }

    #[test]
    fn two_site_hamiltonian_site_basis() {
        let spec = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
        let j = CouplingMatrix::from_pairs(2, &[(0, 1, 1.0)]);
        let h = build_hamiltonian(&spec, &j, Basis::Site).unwrap();
        assert_eq!(h.values[(0, 1)], C64::new(1.0, 0.0));
        assert_eq!(h.values[(1, 0)], C64::new(1.0, 0.0));
        assert_eq!(h.values[(0, 0)], C64::new(0.0, 0.0));
    }

    #[test]
    fn two_site_hamiltonian_q_basis_is_imaginary() {
        let spec = LatticeSpec::all_to_all(2, WeightProfile::quadratic()).unwrap();
        let j = CouplingMatrix::from_pairs(2, &[(0, 1, 1.0)]);
        let h = build_hamiltonian(&spec, &j, Basis::Q).unwrap();
        assert_eq!(h.values[(0, 1)], C64::new(0.0, -1.0));
        assert_eq!(h.values[(1, 0)], C64::new(0.0, 1.0));
        assert_eq!(h.max_real_part(), 0.0);
    }

    #[test]
    fn next_nearest_hop_carries_phase_i() {
        let spec = spec3();
        let j = CouplingMatrix::from_pairs(3, &[(0, 2, 1.0)]);
        let h = build_hamiltonian(&spec, &j, Basis::Site).unwrap();
        assert_eq!(h.values[(0, 2)], C64::new(0.0, 1.0));
        assert_eq!(h.values[(2, 0)], C64::new(0.0, -1.0));
    }

    #[test]
    fn masked_coupling_is_rejected() {
        let spec = LatticeSpec::chain(&[1.0, 1.0]).unwrap();
        let j = CouplingMatrix::from_pairs(3, &[(0, 2, 0.5)]);
        assert_eq!(
            build_hamiltonian(&spec, &j, Basis::Site),
            Err(Error::ConstraintViolation { m: 0, n: 2 })
        );
    }

    #[test]
    fn constraint_norm_examples() {
        let spec = spec3();
        let j = CouplingMatrix::from_pairs(3, &[(0, 1, 0.6), (1, 2, 0.8)]);
        assert!((constraint_norm(&spec, &j) - 1.0).abs() < 1e-15);
        assert_eq!(constraint_norm(&spec, &CouplingMatrix::zeros(3)), 0.0);
        assert!((trace_norm_squared(&spec, &j) - 2.0).abs() < 1e-15);

        // three-qubit optimum at g = 3: A^2 + g B^2 = 1
        let g = 3.0;
        let a = libm::sqrt((g - 2.0) * (3.0 * g - 2.0) / ((g - 1.0) * (3.0 * g - 4.0)));
        let b = 1.0 / libm::sqrt((g - 1.0) * (3.0 * g - 4.0));
        assert!((a - 0.83666).abs() < 1e-5 && (b - 0.31623).abs() < 1e-5);
        let j = CouplingMatrix::from_pairs(3, &[(0, 1, a), (0, 2, b)]);
        assert!((constraint_norm(&spec, &j) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn currents_examples() {
        let j = CouplingMatrix::from_pairs(3, &[(0, 1, 0.3), (0, 2, 0.7), (1, 2, 0.2)]);
        let psi = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        assert!(probability_currents(&psi, &j).iter().all(|&c| c == 0.0));

        let j = CouplingMatrix::from_pairs(2, &[(0, 1, 1.0)]);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let c = probability_currents(&[C64::new(s, 0.0), C64::new(s, 0.0)], &j);
        assert!((c[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        assert!(LatticeSpec::all_to_all(1, WeightProfile::quadratic()).is_err());
        assert!(LatticeSpec::new(3, WeightProfile::quadratic(), Mask::AllToAll, 0.0).is_err());
        assert!(LatticeSpec::all_to_all(4, WeightProfile::PerDistance { values: vec![1.0, 4.0] }).is_err());
        assert!(LatticeSpec::all_to_all(3, WeightProfile::PerDistance { values: vec![1.0, -4.0] }).is_err());
        let pairs = Mask::Pairs { pairs: vec![(0, 2)] };
        let spec = LatticeSpec::new(3, WeightProfile::quadratic(), pairs, 1.0).unwrap();
        assert!(spec.is_allowed(2, 0) && !spec.is_allowed(0, 1));
        assert_eq!(spec.allowed_pairs(), vec![(0, 2)]);
    }

    #[test]
    fn profile_key_is_size_independent() {
        let a = LatticeSpec::all_to_all(4, WeightProfile::quadratic()).unwrap();
        let b = LatticeSpec::all_to_all(9, WeightProfile::quadratic()).unwrap();
        assert_eq!(a.profile_key(), b.profile_key());
        assert_eq!(a.profile_key(), "power:2.0|all");
    }
}
