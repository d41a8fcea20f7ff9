//! Complete elliptic integral of the first kind and Jacobi elliptic functions,
//! parameter convention `m = k^2`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const MAX_AGM: usize = 64;

fn check_parameter(m: f64) -> Result<()> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::Domain(format!("elliptic parameter must lie in [0, 1), got {}", m)));
    }
    Ok(())
}

/// `K(m)` via the arithmetic-geometric mean.
pub fn complete_k(m: f64) -> Result<f64> {
    check_parameter(m)?;
    let mut a = 1.0;
    let mut b = libm::sqrt(1.0 - m);
    for _ in 0..MAX_AGM {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = libm::sqrt(a * b);
        a = an;
    }
    Ok(FRAC_PI_2 / a)
}

/// Values of the Jacobi elliptic functions at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
    pub am: f64,
}

/// `sn, cn, dn, am` by the descending Landen (AGM) scheme.
pub fn jacobi(u: f64, m: f64) -> Result<Jacobi> {
    check_parameter(m)?;
    if m == 0.0 {
        return Ok(Jacobi { sn: libm::sin(u), cn: libm::cos(u), dn: 1.0, am: u });
    }
    let mut a = Vec::with_capacity(16);
    let mut c = Vec::with_capacity(16);
    a.push(1.0);
    c.push(libm::sqrt(m));
    let mut b = libm::sqrt(1.0 - m);
    while c[c.len() - 1].abs() > 1e-16 && a.len() < MAX_AGM {
        let ai = a[a.len() - 1];
        a.push(0.5 * (ai + b));
        c.push(0.5 * (ai - b));
        b = libm::sqrt(ai * b);
    }
    let n = a.len() - 1;
    let mut phi = libm::ldexp(a[n] * u, n as i32);
    for i in (1..=n).rev() {
        phi = 0.5 * (phi + libm::asin(c[i] / a[i] * libm::sin(phi)));
    }
    let sn = libm::sin(phi);
    let cn = libm::cos(phi);
    let dn = libm::sqrt(1.0 - m * sn * sn);
    Ok(Jacobi { sn, cn, dn, am: phi })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Composite Gauss-Legendre quadrature of 1/sqrt(1 - m sin^2 t) on [0, pi/2].
    fn k_quadrature(m: f64) -> f64 {
        const X: [f64; 5] = [0.0, 0.5384693101056831, 0.906179845938664, -0.5384693101056831, -0.906179845938664];
        const W: [f64; 5] = [
            0.5688888888888889,
            0.47862867049936647,
            0.23692688505618908,
            0.47862867049936647,
            0.23692688505618908,
        ];
        let panels = 400;
        let h = FRAC_PI_2 / panels as f64;
        let mut sum = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(&W) {
                let t = mid + 0.5 * h * x;
                let s = libm::sin(t);
                sum += 0.5 * h * w / libm::sqrt(1.0 - m * s * s);
            }
        }
        sum
    }

    #[test]
    fn zero_argument() {
        for &m in &[0.0, 0.3, 0.9] {
            let j = jacobi(0.0, m).unwrap();
            assert_eq!((j.sn, j.cn, j.dn), (0.0, 1.0, 1.0));
        }
        assert!((complete_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn circular_limit() {
        let j = jacobi(0.7, 0.0).unwrap();
        assert!((j.sn - libm::sin(0.7)).abs() < 1e-15);
        assert!((j.cn - libm::cos(0.7)).abs() < 1e-15);
    }

    #[test]
    fn k_matches_quadrature() {
        for &m in &[0.0, 0.1, 0.3, 0.5, 0.7, 0.9] {
            let k = complete_k(m).unwrap();
            assert!((k - k_quadrature(m)).abs() < 1e-10, "m = {}", m);
        }
    }

    #[test]
    fn known_values() {
        // K(1/2) = Gamma(1/4)^2 / (4 sqrt(pi))
        assert!((complete_k(0.5).unwrap() - 1.854_074_677_301_372).abs() < 1e-14);
        // sn(K) = 1, cn(K) = 0, dn(K) = sqrt(1 - m)
        let m = 0.7;
        let j = jacobi(complete_k(m).unwrap(), m).unwrap();
        assert!((j.sn - 1.0).abs() < 1e-12 && j.cn.abs() < 1e-10);
        assert!((j.dn - libm::sqrt(1.0 - m)).abs() < 1e-10);
    }

    #[test]
    fn derivative_system() {
        let m = 0.6;
        let h = 1e-5;
        for k in 0..20 {
            let u = 0.37 * k as f64;
            let p = jacobi(u + h, m).unwrap();
            let q = jacobi(u - h, m).unwrap();
            let j = jacobi(u, m).unwrap();
            assert!(((p.sn - q.sn) / (2.0 * h) - j.cn * j.dn).abs() < 1e-8);
            assert!(((p.cn - q.cn) / (2.0 * h) + j.sn * j.dn).abs() < 1e-8);
            assert!(((p.dn - q.dn) / (2.0 * h) + m * j.sn * j.cn).abs() < 1e-8);
            assert!(((p.am - q.am) / (2.0 * h) - j.dn).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_parameter_outside_domain() {
        assert!(complete_k(1.0).is_err());
        assert!(jacobi(0.1, -0.1).is_err());
        assert!(jacobi(0.1, 1.5).is_err());
    }
}
