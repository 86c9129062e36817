//! Bessel functions of the first kind for orders `nu = p/2 - 1`.
//!
//! The power series is summed in double-double arithmetic: the series is
//! alternating with terms up to ~e^x, so plain f64 loses ~x/ln(10) digits
//! to cancellation. Beyond `x_switch` the standard large-argument
//! asymptotic expansion takes over, truncated at its smallest term.

use crate::dd::{gamma_half_integer, Dd};
use crate::{Error, Result};

/// Order of a Bessel function; stored as `2*nu` so half-integers are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BesselOrder {
    two_nu: u32,
}

impl BesselOrder {
    pub fn new(two_nu: u32) -> Result<Self> {
        if two_nu == 0 {
            return Err(Error::domain("bessel order must be positive"));
        }
        Ok(BesselOrder { two_nu })
    }

    /// The order `p/2 - 1` arising from a coefficient family in dimension `p`.
    pub fn from_dimension(p: u32) -> Result<Self> {
        if p < 3 {
            return Err(Error::domain("dimension must be >= 3 for a positive order"));
        }
        Ok(BesselOrder { two_nu: p - 2 })
    }

    pub fn nu(&self) -> f64 {
        self.two_nu as f64 / 2.0
    }

    pub fn two_nu(&self) -> u32 {
        self.two_nu
    }
}

/// `J_nu(x)` for `x >= 0`, absolute accuracy ~`tol` (not below ~1e-14).
pub fn bessel_j(order: BesselOrder, x: f64, tol: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain("bessel_j needs x >= 0"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("bessel_j needs tol > 0"));
    }
    let nu = order.nu();
    if x == 0.0 {
        return Ok(0.0); // nu > 0 always here
    }
    let x_switch = 30.0 + 2.0 * nu;
    if x <= x_switch {
        series_j(order, x)
    } else {
        asymptotic_j(nu, x, tol)
    }
}

/// Power series in double-double; stops on term ratio. The largest term is
/// ~e^x, so the DD accumulation keeps absolute error near 1e-32 * e^x,
/// far below f64 resolution for x <= ~60.
fn series_j(order: BesselOrder, x: f64) -> Result<f64> {
    let half = Dd::from_f64(x / 2.0);
    let half_sq = half.mul(half);
    let nu = order.nu();
    // leading term (x/2)^nu / Gamma(nu+1)
    let mut lead = Dd::ONE;
    // (x/2)^nu: integer or half-integer exponent
    let k = order.two_nu();
    for _ in 0..(k / 2) {
        lead = lead.mul(half);
    }
    if k % 2 == 1 {
        lead = lead.mul_f64((x / 2.0).sqrt());
    }
    let gamma = gamma_half_integer(order.two_nu() + 2); // Gamma(nu + 1)
    let mut term = lead.div(gamma);
    let mut sum = term;
    let mut j = 0u32;
    loop {
        let denom = ((j + 1) as f64) * (nu + 1.0 + j as f64);
        term = term.mul(half_sq).div_f64(-denom);
        sum = sum.add(term);
        j += 1;
        if j > 4 && term.abs().to_f64() < 1e-30 * (1.0 + sum.abs().to_f64()) {
            break;
        }
        if j > 2000 {
            return Err(Error::Unconverged {
                what: "bessel power series",
                requested: 1e-30,
                achieved: term.abs().to_f64(),
            });
        }
    }
    Ok(sum.to_f64())
}

/// Hankel large-argument expansion, truncated at the smallest term.
/// For half-integer orders the expansion terminates and is exact.
fn asymptotic_j(nu: f64, x: f64, tol: f64) -> Result<f64> {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0; // cos-series
    let mut q = 0.0; // sin-series
    // a_k = prod_{j=1..k} (mu - (2j-1)^2) / (k! 8^k); alternate into P and Q
    let mut a = 1.0f64;
    let mut best = f64::INFINITY;
    let mut terminated = false;
    let mut k = 1u32;
    loop {
        let odd = 2.0 * k as f64 - 1.0;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a == 0.0 {
            terminated = true; // exact termination at half-integer order
            break;
        }
        let mag = a.abs();
        if mag > best {
            break; // smallest term reached; stop before divergence
        }
        best = mag;
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        k += 1;
        if k > 60 {
            break;
        }
    }
    if !terminated && best > tol && best.is_finite() {
        return Err(Error::Unconverged {
            what: "bessel asymptotic expansion",
            requested: tol,
            achieved: best,
        });
    }
    let omega = x - nu * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
    let amp = (2.0 / (std::f64::consts::PI * x)).sqrt();
    Ok(amp * (omega.cos() * p - omega.sin() * q))
}

/// `ln` of a rigorous upper bound for `|J_nu(x)|`: 1 for `x >= nu`, and the
/// exponential order-decay bound `exp(nu(tanh(a) - a))`, `sech(a) = x/nu`,
/// below the turning point. Used to gate series truncations, never to
/// produce values.
pub fn bessel_j_log_envelope(nu: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x >= nu {
        return 0.0;
    }
    let ratio = x / nu; // sech(a)
    let s = (1.0 - ratio * ratio).sqrt(); // tanh(a)
    let a = (nu / x + (nu * nu / (x * x) - 1.0).sqrt()).ln(); // arccosh(nu/x)
    nu * (s - a)
}
