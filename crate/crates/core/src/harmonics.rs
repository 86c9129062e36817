//! Zonal spherical harmonics, sphere quadrature with probability measure,
//! lift operators, and the harmonic Gaussian test family.
//!
//! Harmonic polynomials are sparse monomial maps with (preferably integer)
//! complex coefficients; harmonicity is checked by exact coefficient
//! arithmetic. All sphere integrals use probability surface measure.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::modular::{branch_power, HalfPlanePoint};
use crate::quadrature1d::gauss_jacobi;
use crate::{Error, Result};

/// `dim H_m(R^d) = binom(d+m-1, d-1) - binom(d+m-3, d-1)`, exact.
pub fn dim_harmonics(d: u32, m: u32) -> i64 {
    fn binom(n: i64, k: i64) -> i64 {
        if k < 0 || n < 0 || k > n {
            return 0;
        }
        let k = k.min(n - k);
        let mut num: i128 = 1;
        let mut den: i128 = 1;
        for j in 0..k {
            num *= (n - j) as i128;
            den *= (j + 1) as i128;
        }
        (num / den) as i64
    }
    let (d, m) = (d as i64, m as i64);
    binom(d + m - 1, d - 1) - binom(d + m - 3, d - 1)
}

/// Zonal kernel of degree `m` on the sphere in dimension `d`.
#[derive(Debug, Clone, Copy)]
pub struct ZonalKernel {
    pub d: u32,
    pub m: u32,
}

/// `C_m^lambda(1)` for `lambda = (d-2)/2`, as `binom(m + d - 3, m)`.
fn gegenbauer_at_one(d: u32, m: u32) -> f64 {
    let mut v = 1.0f64;
    for j in 1..=m {
        v *= (d as f64 - 3.0 + j as f64) / j as f64;
    }
    v
}

/// Normalized zonal values `Z_m(t) = dim_m C_m^lambda(t)/C_m^lambda(1)` for
/// all `m <= m_max` in one upward recurrence sweep (`d = 2` uses the
/// Chebyshev form `2 cos(m theta)`).
pub fn zonal_sweep(d: u32, m_max: u32, t: f64, out: &mut Vec<f64>) {
    out.clear();
    if d == 2 {
        let theta = t.clamp(-1.0, 1.0).acos();
        for m in 0..=m_max {
            out.push(if m == 0 { 1.0 } else { 2.0 * (m as f64 * theta).cos() });
        }
        return;
    }
    let lambda = (d as f64 - 2.0) / 2.0;
    let mut c_prev = 1.0; // C_0
    let mut c_cur = 2.0 * lambda * t; // C_1
    for m in 0..=m_max {
        let c_m = match m {
            0 => 1.0,
            1 => c_cur,
            _ => {
                let mf = m as f64;
                let next = (2.0 * (mf + lambda - 1.0) * t * c_cur
                    - (mf + 2.0 * lambda - 2.0) * c_prev)
                    / mf;
                c_prev = c_cur;
                c_cur = next;
                next
            }
        };
        out.push(dim_harmonics(d, m) as f64 * c_m / gegenbauer_at_one(d, m));
    }
}

/// Zonal kernel value at `t` in `[-1, 1]`; equals `dim H_m` at `t = 1`.
pub fn zonal_eval(kernel: ZonalKernel, t: f64) -> Result<f64> {
    if kernel.d < 2 {
        return Err(Error::domain("zonal_eval needs d >= 2"));
    }
    if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&t) {
        return Err(Error::domain("zonal_eval needs |t| <= 1"));
    }
    let mut buf = Vec::new();
    zonal_sweep(kernel.d, kernel.m, t.clamp(-1.0, 1.0), &mut buf);
    Ok(buf[kernel.m as usize])
}

/// Zonal kernel extended to vectors by homogeneity:
/// `Z_m(x, y) = |x|^m |y|^m Z_m(x_hat . y_hat)`.
pub fn zonal_vec(kernel: ZonalKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    let nx = norm(x);
    let ny = norm(y);
    if nx == 0.0 || ny == 0.0 {
        return Ok(if kernel.m == 0 { 1.0 } else { 0.0 });
    }
    let t = (dot(x, y) / (nx * ny)).clamp(-1.0, 1.0);
    Ok(nx.powi(kernel.m as i32) * ny.powi(kernel.m as i32) * zonal_eval(kernel, t)?)
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

// ---------------------------------------------------------------------------
// sphere quadrature
// ---------------------------------------------------------------------------

/// Node/weight set on the unit sphere with probability normalization and a
/// declared polynomial exactness degree.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    pub d: u32,
    /// Flat storage: node `i` occupies `coords[i*d .. (i+1)*d]`.
    pub coords: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: u32,
}

impl SphereQuadrature {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d as usize..(i + 1) * self.d as usize]
    }

    /// Probability-measure integral over the sphere.
    pub fn integrate<F: Fn(&[f64]) -> Complex64>(&self, f: F) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..self.len() {
            s += self.weights[i] * f(self.node(i));
        }
        s
    }

    /// The same rule rotated by an orthogonal matrix (row-major `d x d`).
    pub fn rotated(&self, q: &[f64]) -> SphereQuadrature {
        let d = self.d as usize;
        assert_eq!(q.len(), d * d);
        let mut coords = vec![0.0; self.coords.len()];
        for i in 0..self.len() {
            let x = self.node(i);
            for row in 0..d {
                let mut s = 0.0;
                for (col, &xc) in x.iter().enumerate() {
                    s += q[row * d + col] * xc;
                }
                coords[i * d + row] = s;
            }
        }
        SphereQuadrature {
            d: self.d,
            coords,
            weights: self.weights.clone(),
            exact_degree: self.exact_degree,
        }
    }
}

/// Product rule: Gauss-Jacobi in each polar cosine (the `sin`-power factor
/// of the surface measure is the Jacobi weight), uniform in the final
/// angle, normalized to total mass one. Exact for polynomials of total
/// degree up to `exact_degree`: odd inner degrees cancel by node symmetry,
/// even ones make every polar integrand polynomial.
pub fn build_quadrature(d: u32, exact_degree: u32) -> Result<SphereQuadrature> {
    if d < 2 {
        return Err(Error::domain("build_quadrature needs d >= 2"));
    }
    if exact_degree > 220 {
        return Err(Error::domain(
            "requested exactness degree is impractically large",
        ));
    }
    let deg = exact_degree.max(1);
    let n_phi = (deg + 1) as usize;
    if d == 2 {
        let mut coords = Vec::with_capacity(2 * n_phi);
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            coords.push(phi.cos());
            coords.push(phi.sin());
        }
        return Ok(SphereQuadrature {
            d,
            coords,
            weights: vec![1.0 / n_phi as f64; n_phi],
            exact_degree,
        });
    }
    let n_polar = ((deg + 1) as usize).div_ceil(2);
    let rules: Vec<_> = (1..=(d - 2))
        .map(|j| gauss_jacobi(n_polar, (d as f64 - 2.0 - j as f64) / 2.0))
        .collect();

    let polar_dims = (d - 2) as usize;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; polar_dims];
    loop {
        let mut w_polar = 1.0f64;
        let mut ts = Vec::with_capacity(polar_dims);
        for (j, &i) in idx.iter().enumerate() {
            w_polar *= rules[j].weights[i];
            ts.push(rules[j].nodes[i]);
        }
        for jphi in 0..n_phi {
            let phi = 2.0 * PI * jphi as f64 / n_phi as f64;
            let mut sin_prod = 1.0f64;
            for &t in &ts {
                coords.push(sin_prod * t);
                sin_prod *= (1.0 - t * t).max(0.0).sqrt();
            }
            coords.push(sin_prod * phi.cos());
            coords.push(sin_prod * phi.sin());
            weights.push(w_polar);
        }
        let mut carry = true;
        for slot in idx.iter_mut().rev() {
            if carry {
                *slot += 1;
                if *slot == n_polar {
                    *slot = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    let mass: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= mass;
    }
    Ok(SphereQuadrature {
        d,
        coords,
        weights,
        exact_degree,
    })
}

/// Closed-form monomial moment over the probability sphere measure: zero
/// for any odd exponent, else `prod_i (a_i-1)!! / prod_{j<|a|/2} (d+2j)`.
pub fn monomial_moment(d: u32, alpha: &[u32]) -> f64 {
    if alpha.iter().any(|&a| a % 2 == 1) {
        return 0.0;
    }
    let total: u32 = alpha.iter().sum();
    let mut num = 1.0f64;
    for &a in alpha {
        let mut k = a as i64 - 1;
        while k >= 2 {
            num *= k as f64;
            k -= 2;
        }
    }
    let mut den = 1.0f64;
    for j in 0..(total / 2) {
        den *= d as f64 + 2.0 * j as f64;
    }
    num / den
}

// ---------------------------------------------------------------------------
// harmonic polynomials
// ---------------------------------------------------------------------------

/// Sparse homogeneous harmonic polynomial as a monomial-coefficient map.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicPolynomial {
    pub d: u32,
    terms: BTreeMap<Vec<u8>, Complex64>,
}

impl HarmonicPolynomial {
    /// Build from raw terms; rejects non-homogeneous or non-harmonic input.
    /// Intended for exactly-representable (integer or dyadic) coefficients,
    /// for which the Laplacian check is exact.
    pub fn from_terms(d: u32, raw: Vec<(Vec<u8>, Complex64)>) -> Result<Self> {
        let mut terms = BTreeMap::new();
        let mut degree: Option<u32> = None;
        for (mono, coef) in raw {
            if mono.len() != d as usize {
                return Err(Error::domain("monomial arity must match dimension"));
            }
            let deg: u32 = mono.iter().map(|&e| e as u32).sum();
            match degree {
                None => degree = Some(deg),
                Some(d0) if d0 != deg => {
                    return Err(Error::domain("polynomial must be homogeneous"))
                }
                _ => {}
            }
            if coef != Complex64::new(0.0, 0.0) {
                *terms.entry(mono).or_insert(Complex64::new(0.0, 0.0)) += coef;
            }
        }
        let p = HarmonicPolynomial { d, terms };
        if !p.laplacian_terms().is_empty() {
            return Err(Error::domain("polynomial is not harmonic"));
        }
        Ok(p)
    }

    pub fn constant(d: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0u8; d as usize], Complex64::new(1.0, 0.0));
        HarmonicPolynomial { d, terms }
    }

    /// The coordinate function `x_i`.
    pub fn coordinate(d: u32, i: usize) -> Self {
        let mut mono = vec![0u8; d as usize];
        mono[i] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(mono, Complex64::new(1.0, 0.0));
        HarmonicPolynomial { d, terms }
    }

    /// `x_i x_j`, `i != j`.
    pub fn coordinate_product(d: u32, i: usize, j: usize) -> Self {
        assert_ne!(i, j);
        let mut mono = vec![0u8; d as usize];
        mono[i] = 1;
        mono[j] = 1;
        let mut terms = BTreeMap::new();
        terms.insert(mono, Complex64::new(1.0, 0.0));
        HarmonicPolynomial { d, terms }
    }

    /// `x_i^2 - x_j^2`, `i != j`.
    pub fn square_difference(d: u32, i: usize, j: usize) -> Self {
        assert_ne!(i, j);
        let mut terms = BTreeMap::new();
        let mut m1 = vec![0u8; d as usize];
        m1[i] = 2;
        let mut m2 = vec![0u8; d as usize];
        m2[j] = 2;
        terms.insert(m1, Complex64::new(1.0, 0.0));
        terms.insert(m2, Complex64::new(-1.0, 0.0));
        HarmonicPolynomial { d, terms }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .next()
            .map(|m| m.iter().map(|&e| e as u32).sum())
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (mono, coef) in &self.terms {
            let mut prod = 1.0f64;
            for (xi, &e) in x.iter().zip(mono) {
                for _ in 0..e {
                    prod *= xi;
                }
            }
            s += coef * prod;
        }
        s
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        HarmonicPolynomial {
            d: self.d,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    /// Coefficient-wise Laplacian terms; empty iff harmonic (exact for
    /// exactly-representable coefficients).
    pub fn laplacian_terms(&self) -> BTreeMap<Vec<u8>, Complex64> {
        let mut out: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        for (mono, coef) in &self.terms {
            for i in 0..self.d as usize {
                if mono[i] >= 2 {
                    let e = mono[i] as f64;
                    let mut m2 = mono.clone();
                    m2[i] -= 2;
                    *out.entry(m2).or_insert(Complex64::new(0.0, 0.0)) += coef * e * (e - 1.0);
                }
            }
        }
        out.retain(|_, c| *c != Complex64::new(0.0, 0.0));
        out
    }

    pub fn is_harmonic(&self) -> bool {
        self.laplacian_terms().is_empty()
    }

    /// Partial derivative, exact coefficient arithmetic.
    pub fn derivative_terms(&self, i: usize) -> BTreeMap<Vec<u8>, Complex64> {
        let mut out: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        for (mono, coef) in &self.terms {
            if mono[i] >= 1 {
                let mut m2 = mono.clone();
                m2[i] -= 1;
                *out.entry(m2).or_insert(Complex64::new(0.0, 0.0)) += coef * mono[i] as f64;
            }
        }
        out
    }

    /// `x -> u(Q^T x)` for an orthogonal `Q` (row-major).
    pub fn rotated(&self, q: &[f64]) -> Self {
        let d = self.d as usize;
        let mut acc: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
        for (mono, coef) in &self.terms {
            let mut part: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
            part.insert(vec![0u8; d], *coef);
            for (i, &e) in mono.iter().enumerate() {
                for _ in 0..e {
                    // multiply by the linear form (Q^T x)_i = sum_j q_{ji} x_j
                    let mut next: BTreeMap<Vec<u8>, Complex64> = BTreeMap::new();
                    for (m, c) in &part {
                        for j in 0..d {
                            let q_ji = q[j * d + i];
                            if q_ji == 0.0 {
                                continue;
                            }
                            let mut m2 = m.clone();
                            m2[j] += 1;
                            *next.entry(m2).or_insert(Complex64::new(0.0, 0.0)) += c * q_ji;
                        }
                    }
                    part = next;
                }
            }
            for (m, c) in part {
                *acc.entry(m).or_insert(Complex64::new(0.0, 0.0)) += c;
            }
        }
        acc.retain(|_, c| c.norm() > 1e-15);
        HarmonicPolynomial { d: self.d, terms: acc }
    }

    /// `L^2(S)` inner product `<self, other>` by quadrature.
    pub fn inner_product(&self, other: &HarmonicPolynomial, quad: &SphereQuadrature) -> Complex64 {
        quad.integrate(|z| self.eval(z) * other.eval(z).conj())
    }

    pub fn l2_norm(&self, quad: &SphereQuadrature) -> f64 {
        self.inner_product(self, quad).re.max(0.0).sqrt()
    }
}

// ---------------------------------------------------------------------------
// harmonic Gaussians and lifts
// ---------------------------------------------------------------------------

/// `f(x) = scale * u0(x) e^{i pi tau |x|^2}` with `u0` harmonic homogeneous:
/// the analytic test family, closed under the Fourier transform.
#[derive(Debug, Clone)]
pub struct HarmonicGaussian {
    pub d: u32,
    pub u0: HarmonicPolynomial,
    pub tau: HalfPlanePoint,
    pub scale: Complex64,
}

impl HarmonicGaussian {
    pub fn new(u0: HarmonicPolynomial, tau: HalfPlanePoint) -> Self {
        HarmonicGaussian {
            d: u0.d,
            u0,
            tau,
            scale: Complex64::new(1.0, 0.0),
        }
    }

    pub fn m0(&self) -> u32 {
        self.u0.degree()
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        let r2 = dot(x, x);
        self.scale * self.u0.eval(x) * (Complex64::new(0.0, PI * r2) * self.tau.as_complex()).exp()
    }

    /// The rotated function `x -> f(Q^T x)`.
    pub fn rotated(&self, q: &[f64]) -> Self {
        HarmonicGaussian {
            d: self.d,
            u0: self.u0.rotated(q),
            tau: self.tau,
            scale: self.scale,
        }
    }
}

/// Closed-form Fourier transform of a harmonic Gaussian:
/// `(-i)^{m0} (-i tau)^{-(d + 2 m0)/2} u0(x) e^{i pi (-1/tau) |x|^2}`.
pub fn hecke_funk_transform(f: &HarmonicGaussian) -> Result<HarmonicGaussian> {
    let m0 = f.m0();
    let pref =
        Complex64::new(0.0, -1.0).powu(m0) * branch_power(f.tau, -((f.d + 2 * m0) as f64) / 2.0)?;
    Ok(HarmonicGaussian {
        d: f.d,
        u0: f.u0.clone(),
        tau: f.tau.neg_inv(),
        scale: f.scale * pref,
    })
}

/// Lift of a harmonic Gaussian against a harmonic polynomial `u`: the value
/// at radius `y` of the radial function `L_u f` on `R^p`. The value itself
/// does not depend on `p` (the same sphere integral defines every lift);
/// `p` is kept for interface symmetry and validated.
///
/// Analytic path: `scale * <u0, u> e^{i pi tau y^2} y^{m0 - m}`, where the
/// inner product is an exact-degree quadrature and vanishes identically for
/// mismatched degrees.
pub fn lift(
    f: &HarmonicGaussian,
    u: &HarmonicPolynomial,
    p: u32,
    y: f64,
    quad: &SphereQuadrature,
) -> Result<Complex64> {
    if p == 0 {
        return Err(Error::domain("lift needs p >= 1"));
    }
    if !(y >= 0.0) {
        return Err(Error::domain("lift needs y >= 0"));
    }
    let m0 = f.m0();
    let m = u.degree();
    if quad.exact_degree < m0 + m {
        return Err(Error::QuadratureDegree {
            have: quad.exact_degree,
            need: m0 + m,
        });
    }
    let inner = f.u0.inner_product(u, quad);
    if y == 0.0 {
        // Taylor branch at the origin: only the degree-matched term survives
        return Ok(if m0 == m {
            f.scale * inner
        } else {
            Complex64::new(0.0, 0.0)
        });
    }
    if m0 != m {
        // the inner product is exactly zero under an exact-degree rule;
        // return the collapsed value rather than amplifying its roundoff
        return Ok(f.scale * inner);
    }
    let gauss = (Complex64::new(0.0, PI * y * y) * f.tau.as_complex()).exp();
    Ok(f.scale * inner * gauss)
}

/// Lift of a sampled function by direct quadrature (`y > 0` only):
/// `y^{-m} int f(y zeta) conj(u(zeta)) dzeta`.
pub fn lift_sampled<F: Fn(&[f64]) -> Complex64>(
    f: F,
    u: &HarmonicPolynomial,
    y: f64,
    quad: &SphereQuadrature,
) -> Result<Complex64> {
    if !(y > 0.0) {
        return Err(Error::domain("sampled lift needs y > 0"));
    }
    let d = quad.d as usize;
    let m = u.degree();
    let mut s = Complex64::new(0.0, 0.0);
    let mut buf = vec![0.0f64; d];
    for i in 0..quad.len() {
        let z = quad.node(i);
        for (b, &zj) in buf.iter_mut().zip(z) {
            *b = y * zj;
        }
        s += quad.weights[i] * f(&buf) * u.eval(z).conj();
    }
    Ok(s / y.powi(m as i32))
}
