//! Black-Scholes put pricing in total-variance form, normal functions,
//! implied total variance inversion and the ATM skew identity.
//!
//! Everything here is parameterized by total variance `Σ = σ²(T − t)`, not by
//! annualized volatility. Rates and dividends are zero.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsrError};

/// `1 / sqrt(2π)`.
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

const INVERSION_MAX_ITER: usize = 200;
const INITIAL_UPPER_BRACKET: f64 = 16.0;
const MAX_UPPER_BRACKET: f64 = 1.0e6;

/// Implied total variance `σ²(T − t)`; nonnegative and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TotalVariance(f64);

impl TotalVariance {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(Self(value))
        } else {
            Err(SsrError::Domain(format!(
                "total variance must be finite and nonnegative, got {value}"
            )))
        }
    }

    pub const fn zero() -> Self {
        Self(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Annualized volatility over a horizon `tau`.
    pub fn annualized_vol(self, tau: f64) -> f64 {
        (self.0 / tau).sqrt()
    }
}

impl TryFrom<f64> for TotalVariance {
    type Error = SsrError;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TotalVariance> for f64 {
    fn from(v: TotalVariance) -> f64 {
        v.0
    }
}

/// A put price observation at one strike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PutQuote {
    pub spot: f64,
    pub strike: f64,
    pub price: f64,
}

impl PutQuote {
    pub fn new(spot: f64, strike: f64, price: f64) -> Self {
        Self {
            spot,
            strike,
            price,
        }
    }

    pub fn intrinsic(&self) -> f64 {
        (self.strike - self.spot).max(0.0)
    }
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

fn d_plus_minus(spot: f64, strike: f64, total_var: f64) -> (f64, f64) {
    let sd = total_var.sqrt();
    let m = (spot / strike).ln();
    ((m + 0.5 * total_var) / sd, (m - 0.5 * total_var) / sd)
}

/// Black-Scholes put price `K Φ(−d₋) − s Φ(−d₊)` with zero rates.
///
/// At zero total variance this is the intrinsic value.
pub fn bs_put(spot: f64, strike: f64, total_var: TotalVariance) -> f64 {
    let intrinsic = (strike - spot).max(0.0);
    let v = total_var.value();
    if v == 0.0 {
        return intrinsic;
    }
    let (d_plus, d_minus) = d_plus_minus(spot, strike, v);
    let price = strike * norm_cdf(-d_minus) - spot * norm_cdf(-d_plus);
    price.max(intrinsic)
}

/// Derivative of the put price with respect to total variance,
/// `s φ(d₊) / (2√Σ)` (equal to `K φ(d₋) / (2√Σ)`).
pub fn bs_put_dtotalvar(spot: f64, strike: f64, total_var: TotalVariance) -> Result<f64> {
    let v = total_var.value();
    if v <= 0.0 {
        return Err(SsrError::Domain(
            "put sensitivity to total variance is singular at zero total variance".into(),
        ));
    }
    let (d_plus, _) = d_plus_minus(spot, strike, v);
    Ok(spot * norm_pdf(d_plus) / (2.0 * v.sqrt()))
}

/// Inverts [`bs_put`] for the total variance.
///
/// Safeguarded Newton iteration inside a bracket that starts at `[0, 16]` and
/// grows by doubling when the price needs more variance than that.
pub fn implied_total_variance(quote: PutQuote) -> Result<TotalVariance> {
    let PutQuote {
        spot,
        strike,
        price,
    } = quote;
    if !(spot > 0.0 && strike > 0.0 && spot.is_finite() && strike.is_finite()) {
        return Err(SsrError::Domain(format!(
            "spot and strike must be positive, got spot={spot}, strike={strike}"
        )));
    }
    let lower = quote.intrinsic();
    if !(price > lower && price < strike) {
        return Err(SsrError::NoArbitrageViolation {
            price,
            lower,
            upper: strike,
        });
    }

    let price_at = |v: f64| bs_put(spot, strike, TotalVariance(v));

    let mut lo = 0.0_f64;
    let mut hi = INITIAL_UPPER_BRACKET;
    while price_at(hi) < price {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_UPPER_BRACKET {
            return Err(SsrError::NumericalDegeneracy(format!(
                "put price {price} needs total variance above {MAX_UPPER_BRACKET}"
            )));
        }
    }

    // ATM-style first guess from the time value.
    let time_value = price - lower;
    let scale = spot.min(strike);
    let mut x = (2.0 * std::f64::consts::PI * (time_value / scale).powi(2)).clamp(1e-10, 4.0);
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }

    for _ in 0..INVERSION_MAX_ITER {
        let f = price_at(x) - price;
        if f == 0.0 {
            return TotalVariance::new(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let vega = bs_put_dtotalvar(spot, strike, TotalVariance(x)).unwrap_or(0.0);
        let mut next = x - f / vega;
        if !(next.is_finite() && next > lo && next < hi) {
            next = if lo > 0.0 && hi > 4.0 * lo {
                (lo * hi).sqrt()
            } else if lo == 0.0 {
                0.05 * hi
            } else {
                0.5 * (lo + hi)
            };
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x || hi - lo <= 4.0 * f64::EPSILON * hi {
            return TotalVariance::new(next);
        }
        x = next;
    }
    TotalVariance::new(x)
}

/// ATM strike-derivative of implied total variance from the digital probability
/// `P[S_t > S_T]`:
///
/// `Σ'(S) = 2√Σ / (S φ(√Σ/2)) · (digital − Φ(√Σ/2))`.
pub fn atm_skew_from_digital(
    spot: f64,
    total_var_atm: TotalVariance,
    digital_prob: f64,
) -> Result<f64> {
    let v = total_var_atm.value();
    if v <= 0.0 {
        return Err(SsrError::Domain(
            "ATM skew identity is singular at zero total variance".into(),
        ));
    }
    if !(spot > 0.0) || !(0.0..=1.0).contains(&digital_prob) {
        return Err(SsrError::Domain(format!(
            "need spot > 0 and digital probability in [0, 1], got spot={spot}, p={digital_prob}"
        )));
    }
    let half_sd = 0.5 * v.sqrt();
    Ok(2.0 * v.sqrt() / (spot * norm_pdf(half_sd)) * (digital_prob - norm_cdf(half_sd)))
}
