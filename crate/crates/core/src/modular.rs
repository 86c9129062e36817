//! Upper half-plane arithmetic, branch-consistent powers, theta nullwerte
//! and their transformation factors, and quadratic Gauss sums.
//!
//! Everything here is a pure function of its arguments. The square-root
//! convention is fixed once and for all: `(-i*tau)^k = exp(k*log(tau/i))`
//! with the branch of `log(tau/i)` that vanishes at `tau = i`. Since
//! `tau/i = -i*tau` has positive real part whenever `Im tau > 0`, this is
//! the principal logarithm and is continuous on the whole half-plane.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::{Error, Result};

/// A point `re + i*im` of the open upper half-plane (`im > 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlanePoint {
    re: f64,
    im: f64,
}

impl HalfPlanePoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::domain("half-plane point must be finite"));
        }
        if im <= 0.0 {
            return Err(Error::domain(format!(
                "half-plane point needs im > 0, got im = {im}"
            )));
        }
        Ok(HalfPlanePoint { re, im })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Horizontal translate `tau + t`.
    pub fn translate(&self, t: f64) -> Result<Self> {
        HalfPlanePoint::new(self.re + t, self.im)
    }

    /// The involution `tau -> -1/tau`, which preserves the half-plane.
    pub fn neg_inv(&self) -> Self {
        let n = self.re * self.re + self.im * self.im;
        HalfPlanePoint {
            re: -self.re / n,
            im: self.im / n,
        }
    }
}

/// `(-i*tau)^k` with the continuous branch that equals 1 at `tau = i`.
///
/// Valid for any real exponent `k`; multiplicative in `k` by construction.
pub fn branch_power(tau: HalfPlanePoint, k: f64) -> Result<Complex64> {
    if !k.is_finite() {
        return Err(Error::domain("branch_power exponent must be finite"));
    }
    // -i*tau = im + i*(-re) lies in the right half-plane, so the principal
    // logarithm is the continuous branch vanishing at tau = i.
    let w = Complex64::new(tau.im, -tau.re);
    Ok((k * w.ln()).exp())
}

/// Which theta nullwert to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaKind {
    /// `sum_n q^((n+1/2)^2)` with `q = e^{pi i tau}`.
    Theta2,
    /// `sum_n q^(n^2)`.
    Theta3,
    /// `sum_n (-1)^n q^(n^2)`.
    Theta4,
}

const THETA_TERM_CAP: u64 = 200_000;

/// Number of terms so that the geometric majorant of the q-series tail is
/// below `tol`: the tail past `n = N` is dominated by
/// `|q|^(N^2) / (1 - |q|)`, so we solve `pi*im*n^2 >= -log(tol*(1-|q|))`
/// and add a small safety margin.
fn theta_terms(im: f64, tol: f64) -> Result<u64> {
    let q_abs = (-PI * im).exp();
    let target = -(tol * (1.0 - q_abs)).ln();
    let n = if target <= 0.0 {
        1
    } else {
        (target / (PI * im)).sqrt().ceil() as u64 + 5
    };
    if n > THETA_TERM_CAP {
        return Err(Error::Unconverged {
            what: "theta q-series truncation",
            requested: tol,
            achieved: f64::INFINITY,
        });
    }
    Ok(n)
}

/// Evaluate a theta nullwert by its q-series, truncated so the analytic
/// tail bound is below `tol`.
pub fn theta_nullwert(which: ThetaKind, tau: HalfPlanePoint, tol: f64) -> Result<Complex64> {
    if !(tol > 0.0) {
        return Err(Error::domain("theta tolerance must be positive"));
    }
    let n_max = theta_terms(tau.im, tol)?;
    let pit = Complex64::new(0.0, PI) * tau.as_complex();
    let mut sum = Complex64::new(0.0, 0.0);
    match which {
        ThetaKind::Theta2 => {
            for n in 0..=n_max {
                let e = n as f64 + 0.5;
                sum += (pit * (e * e)).exp();
            }
            sum *= 2.0;
        }
        ThetaKind::Theta3 => {
            sum = Complex64::new(1.0, 0.0);
            for n in 1..=n_max {
                sum += 2.0 * (pit * ((n * n) as f64)).exp();
            }
        }
        ThetaKind::Theta4 => {
            sum = Complex64::new(1.0, 0.0);
            for n in 1..=n_max {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sum += 2.0 * sign * (pit * ((n * n) as f64)).exp();
            }
        }
    }
    Ok(sum)
}

/// The quadratic Gauss sum `G_q(a) = sum_{m=1..q} e^{2 pi i a m^2 / q}`.
///
/// Exact finite summation; phases are reduced modulo `q` in integer
/// arithmetic before any floating-point work.
pub fn gauss_sum(q: i64, a: i64) -> Result<Complex64> {
    if q < 1 {
        return Err(Error::domain("gauss_sum needs q >= 1"));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for m in 1..=q {
        let mm = (m as i128 * m as i128).rem_euclid(q as i128);
        let ph = (a as i128 * mm).rem_euclid(q as i128) as f64;
        sum += Complex64::from_polar(1.0, 2.0 * PI * ph / q as f64);
    }
    Ok(sum)
}

/// The normalized Gauss sum attached to a coprime bottom row `(c, d)` with
/// `c > 0`: `G_{2c}(d)/2` for even `c` and `G_c(2d)` for odd `c`.
///
/// Satisfies `g^8 = c^4`, in particular `|g| = sqrt(c)`.
#[derive(Debug, Clone, Copy)]
pub struct GaussSumValue {
    pub c: i64,
    pub d: i64,
    pub value: Complex64,
}

pub fn g_small(c: i64, d: i64) -> Result<GaussSumValue> {
    if c < 1 {
        return Err(Error::domain("g_small needs c >= 1"));
    }
    if gcd(c, d) != 1 {
        return Err(Error::domain(format!("g_small needs gcd(c,d)=1, got ({c},{d})")));
    }
    let value = if c % 2 == 0 {
        0.5 * gauss_sum(2 * c, d.rem_euclid(2 * c))?
    } else {
        gauss_sum(c, (2 * d).rem_euclid(c))?
    };
    Ok(GaussSumValue { c, d, value })
}

/// `j(M, tau)^{-p}` for the theta transformation factor of the matrix class
/// with bottom row `(c, d)`, computed without evaluating any theta series:
/// `g_c(d)^{-p} * (-i(tau + d/c))^{-p/2}`.
///
/// Requires `c > 0`, `gcd(c,d) = 1` and `c, d` of opposite parity (the
/// theta-group pattern). Agrees with the direct nullwert quotient
/// `(Theta3(M tau)/Theta3(tau))^{-p}`.
pub fn theta_cocycle_power(c: i64, d: i64, tau: HalfPlanePoint, p: i32) -> Result<Complex64> {
    if c <= 0 {
        return Err(Error::domain("theta_cocycle_power needs c > 0"));
    }
    if gcd(c, d) != 1 {
        return Err(Error::domain("theta_cocycle_power needs gcd(c,d) = 1"));
    }
    if (c % 2 == 0) == (d.rem_euclid(2) == 0) {
        return Err(Error::domain(
            "theta_cocycle_power needs c, d of opposite parity",
        ));
    }
    let g = g_small(c, d)?.value;
    let shift = tau.translate(d as f64 / c as f64)?;
    Ok(g.powi(-p) * branch_power(shift, -(p as f64) / 2.0)?)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Extended Euclid: the inverse of `a` modulo `m` (`m >= 1`, `gcd(a,m) = 1`),
/// returned in `[0, m)`.
pub fn mod_inverse(a: i64, m: i64) -> Result<i64> {
    if m < 1 {
        return Err(Error::domain("mod_inverse needs m >= 1"));
    }
    if m == 1 {
        return Ok(0);
    }
    let a = a.rem_euclid(m);
    let (mut old_r, mut r) = (a, m);
    let (mut old_s, mut s) = (1i64, 0i64);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    if old_r != 1 {
        return Err(Error::domain(format!(
            "mod_inverse: {a} not invertible mod {m}"
        )));
    }
    Ok(old_s.rem_euclid(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd::Dd;

    fn hp(re: f64, im: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(re, im).unwrap()
    }

    /// Dense theta summation in double-double arithmetic; oracle only.
    fn theta_oracle(which: ThetaKind, tau: HalfPlanePoint, n_max: i64) -> Complex64 {
        // accumulate re/im parts in Dd
        let (mut sr, mut si) = (Dd::ZERO, Dd::ZERO);
        for n in -n_max..=n_max {
            let e = match which {
                ThetaKind::Theta2 => (n as f64 + 0.5) * (n as f64 + 0.5),
                _ => (n * n) as f64,
            };
            let z = Complex64::new(0.0, PI) * tau.as_complex() * e;
            let mut t = z.exp();
            if matches!(which, ThetaKind::Theta4) && n.rem_euclid(2) == 1 {
                t = -t;
            }
            sr = sr.add(Dd::from_f64(t.re));
            si = si.add(Dd::from_f64(t.im));
        }
        Complex64::new(sr.to_f64(), si.to_f64())
    }

    #[test]
    fn branch_power_anchors() {
        // at tau = i the value is 1 for every exponent
        let v = branch_power(hp(0.0, 1.0), 7.5).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        // (-i * 2i)^(1/2) = sqrt(2)
        let v = branch_power(hp(0.0, 2.0), 0.5).unwrap();
        assert!((v - Complex64::new(2f64.sqrt(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn branch_power_square_consistency() {
        // value at tau = 1+i has positive real part and squares to -i(1+i) = 1-i
        let v = branch_power(hp(1.0, 1.0), 0.5).unwrap();
        assert!(v.re > 0.0);
        assert!((v * v - Complex64::new(1.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn branch_power_multiplicative_in_exponent() {
        for &(x, y) in &[(0.3, 0.7), (-1.2, 0.11), (2.5, 3.0)] {
            let tau = hp(x, y);
            for &(k1, k2) in &[(0.5, 0.5), (1.25, -3.0), (2.0, 2.5)] {
                let a = branch_power(tau, k1).unwrap() * branch_power(tau, k2).unwrap();
                let b = branch_power(tau, k1 + k2).unwrap();
                assert!((a - b).norm() / b.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn theta3_reference_value() {
        // Theta3(i) = pi^(1/4)/Gamma(3/4); frozen from the dense oracle.
        let v = theta_nullwert(ThetaKind::Theta3, hp(0.0, 1.0), 1e-14).unwrap();
        assert!((v.re - 1.08643481121330801).abs() < 1e-13);
        assert!(v.im.abs() < 1e-15);
        let o = theta_oracle(ThetaKind::Theta3, hp(0.0, 1.0), 50);
        assert!((v - o).norm() < 1e-14);
    }

    #[test]
    fn theta3_two_periodic() {
        let t1 = theta_nullwert(ThetaKind::Theta3, hp(0.3, 0.7), 1e-13).unwrap();
        let t2 = theta_nullwert(ThetaKind::Theta3, hp(2.3, 0.7), 1e-13).unwrap();
        assert!((t1 - t2).norm() < 1e-12);
    }

    #[test]
    fn jacobi_identity() {
        let tol = 1e-13;
        for &(x, y) in &[(0.0, 1.0), (0.4, 0.8), (-0.9, 0.35)] {
            let tau = hp(x, y);
            let t2 = theta_nullwert(ThetaKind::Theta2, tau, tol).unwrap();
            let t3 = theta_nullwert(ThetaKind::Theta3, tau, tol).unwrap();
            let t4 = theta_nullwert(ThetaKind::Theta4, tau, tol).unwrap();
            let resid = (t2.powi(4) + t4.powi(4) - t3.powi(4)).norm();
            assert!(resid < 10.0 * tol, "jacobi residual {resid}");
        }
    }

    #[test]
    fn theta_truncation_cap_small_im() {
        assert!(theta_nullwert(ThetaKind::Theta3, hp(0.0, 1e-12), 1e-10).is_err());
    }

    #[test]
    fn gauss_sum_values() {
        // G_4(1) = 2 + 2i by direct 4-term summation
        let g = gauss_sum(4, 1).unwrap();
        assert!((g - Complex64::new(2.0, 2.0)).norm() < 1e-14);
        // G_4(1)^2 = 8i
        assert!((g * g - Complex64::new(0.0, 8.0)).norm() < 1e-13);
        // g_2(1) = 1 + i
        let g21 = g_small(2, 1).unwrap().value;
        assert!((g21 - Complex64::new(1.0, 1.0)).norm() < 1e-14);
        assert!((g21.norm() - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn g_small_eighth_power_is_c_fourth() {
        for c in 1..=200i64 {
            for d in -(2 * c)..=(2 * c) {
                if gcd(c, d) != 1 {
                    continue;
                }
                if (c % 2 == 0) == (d.rem_euclid(2) == 0) {
                    continue; // only theta-group rows arise in practice
                }
                let g = g_small(c, d).unwrap().value;
                let lhs = g.powu(8);
                let rhs = (c as f64).powi(4);
                assert!(
                    (lhs - Complex64::new(rhs, 0.0)).norm() / rhs < 1e-10,
                    "g_{c}({d})^8 != c^4"
                );
                assert!((g.norm() - (c as f64).sqrt()).abs() / (c as f64).sqrt() < 1e-12);
            }
        }
    }

    #[test]
    fn cocycle_inversion_anchor() {
        // bottom row (1,0) is the inversion: j^2 at tau = i is (-i*i) = 1,
        // and at tau = 2i gives (-i*2i)^{-1} = 1/2.
        let v = theta_cocycle_power(1, 0, hp(0.0, 1.0), 2).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let v = theta_cocycle_power(1, 0, hp(0.0, 2.0), 2).unwrap();
        assert!((v - Complex64::new(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn cocycle_matches_theta_quotient() {
        // row (2,1) acts as tau -> tau/(2 tau + 1)
        let tau = hp(0.1, 0.9);
        let m_tau = {
            let t = tau.as_complex();
            let w = t / (2.0 * t + 1.0);
            HalfPlanePoint::new(w.re, w.im).unwrap()
        };
        let tol = 1e-13;
        let t3m = theta_nullwert(ThetaKind::Theta3, m_tau, tol).unwrap();
        let t3 = theta_nullwert(ThetaKind::Theta3, tau, tol).unwrap();
        let quotient = (t3m / t3).powi(-8);
        let cocycle = theta_cocycle_power(2, 1, tau, 8).unwrap();
        assert!((quotient - cocycle).norm() / cocycle.norm() < 1e-9);
    }

    #[test]
    fn cocycle_rejects_bad_rows() {
        assert!(theta_cocycle_power(0, 1, hp(0.0, 1.0), 2).is_err());
        assert!(theta_cocycle_power(2, 4, hp(0.0, 1.0), 2).is_err());
        assert!(theta_cocycle_power(3, 5, hp(0.0, 1.0), 2).is_err()); // both odd
    }

    #[test]
    fn half_plane_rejects_lower() {
        assert!(HalfPlanePoint::new(0.0, 0.0).is_err());
        assert!(HalfPlanePoint::new(1.0, -2.0).is_err());
        assert!(HalfPlanePoint::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn mod_inverse_basic() {
        assert_eq!(mod_inverse(3, 7).unwrap(), 5);
        assert_eq!(mod_inverse(1, 1).unwrap(), 0);
        assert!(mod_inverse(2, 4).is_err());
    }
}
