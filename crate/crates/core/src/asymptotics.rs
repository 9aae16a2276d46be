//! Short-maturity and small vol-of-vol limits of the SSR, with the Gaussian
//! moments behind them, and the sweep plans that probe convergence to them.

use serde::Serialize;

use crate::error::{Result, SsrError};
use crate::math_core::{norm_pdf, FRAC_1_SQRT_2PI};
use crate::model::{EffectiveKernel, ForwardVarianceCurve, KernelSpec};
use crate::quadrature::{gauss_hermite, integrate, integrate_piecewise, Tolerance};

pub const DEFAULT_TOL: f64 = 1e-8;

/// Moments of the limiting Gaussian pair `(Z₁, Z₂)` as `T → 0`, with
/// `E[Z₁²] = 1`, and the scaled limits of `X` and `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianLimitMoments {
    pub e_z1z2: f64,
    pub e_z2sq: f64,
    pub g0: f64,
    pub hurst: f64,
    pub x_scaled_limit: f64,
    pub y_scaled_limit: f64,
}

impl GaussianLimitMoments {
    pub fn correlation(&self) -> f64 {
        self.e_z1z2 / self.e_z2sq.sqrt()
    }
}

/// `A = ∫V₀`, `B = ∫V₀k`, `C = ∫V₀k²`, `D = ∫√V₀(s) ∫_s^T V₀(u) k(u−s) du ds` over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallVolMoments {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitKind {
    ShortMaturity,
    SmallVol,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LimitComponents {
    ShortMaturity(GaussianLimitMoments),
    SmallVol(SmallVolMoments),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitReport {
    pub kind: LimitKind,
    pub value: f64,
    pub components: LimitComponents,
    pub quadrature_error_estimate: f64,
}

/// `lim_{T→0} R = H + 3/2`, valid when `u^{1/2−H} k(u) → g(0+) > 0`.
pub fn short_maturity_limit(kernel: &EffectiveKernel) -> Result<LimitReport> {
    let (h, g0) = match (kernel.hurst(), kernel.g0()) {
        (Some(h), Some(g0)) => (h, g0),
        _ => {
            return Err(SsrError::HypothesisNotSatisfied(
                "short-maturity limit needs u^(1/2-H) k(u) -> g(0+) > 0".into(),
            ))
        }
    };
    let p = h + 0.5;
    let moments = GaussianLimitMoments {
        e_z1z2: 2.0 * g0 / (2.0 * h + 1.0),
        e_z2sq: g0 * g0 / (2.0 * h),
        g0,
        hurst: h,
        x_scaled_limit: g0 * FRAC_1_SQRT_2PI / (2.0 * h + 1.0),
        y_scaled_limit: g0 * FRAC_1_SQRT_2PI / (2.0 * p * (p + 1.0)),
    };
    Ok(LimitReport {
        kind: LimitKind::ShortMaturity,
        value: h + 1.5,
        components: LimitComponents::ShortMaturity(moments),
        quadrature_error_estimate: 0.0,
    })
}

/// `lim_{ε→0} R = A·B / (√V₀(0)·D)`. Flat curves with a single kernel use
/// closed forms; everything else goes through [`small_vol_limit_quadrature`].
pub fn small_vol_limit(
    curve: &ForwardVarianceCurve,
    kernel: &EffectiveKernel,
    maturity: f64,
    tol: f64,
) -> Result<LimitReport> {
    check_inputs(kernel, maturity, tol)?;
    match closed_form_moments(curve, kernel, maturity) {
        Some(m) => finish_small_vol(curve, m, 0.0, 0.0, 0.0),
        None => small_vol_limit_quadrature(curve, kernel, maturity, tol),
    }
}

/// Same as [`small_vol_limit`] but always by quadrature.
pub fn small_vol_limit_quadrature(
    curve: &ForwardVarianceCurve,
    kernel: &EffectiveKernel,
    maturity: f64,
    tol: f64,
) -> Result<LimitReport> {
    check_inputs(kernel, maturity, tol)?;
    let (m, err) = quadrature_moments(curve, kernel, maturity, tol)?;
    finish_small_vol(curve, m, err.a, err.b, err.d)
}

/// Limits of `X(ε)/ε` and `Y(ε)/ε`. Their ratio is the small vol-of-vol limit.
pub fn small_vol_component_limits(
    curve: &ForwardVarianceCurve,
    kernel: &EffectiveKernel,
    maturity: f64,
) -> Result<(f64, f64)> {
    let report = small_vol_limit(curve, kernel, maturity, DEFAULT_TOL)?;
    let m = match report.components {
        LimitComponents::SmallVol(m) => m,
        LimitComponents::ShortMaturity(_) => unreachable!("small-vol report"),
    };
    let v00 = curve.eval(0.0)?;
    let phi = norm_pdf(0.5 * m.a.sqrt());
    let x = m.b * phi / (2.0 * (v00 * m.a).sqrt());
    let y = phi * m.d / (2.0 * m.a.powf(1.5));
    Ok((x, y))
}

/// `E[1{Z₁<0} e^{Z₁} Z₂]` for `Z₁ ~ N(−A/2, A)`, `Cov(Z₁, Z₂) = B`, `E[Z₂] = −B`,
/// in closed form: `−B φ(√A/2) / √A`.
pub fn bivariate_digital_moment(a: f64, b: f64) -> f64 {
    -b * norm_pdf(0.5 * a.sqrt()) / a.sqrt()
}

/// [`bivariate_digital_moment`] by two-dimensional quadrature: Gauss–Hermite
/// across the part of `Z₂` independent of `Z₁`, adaptive Gauss–Kronrod along
/// `Z₁` up to the indicator's cut. `var_z2` is any variance `≥ B²/A`; the
/// answer does not depend on it.
pub fn bivariate_digital_moment_quadrature(a: f64, b: f64, var_z2: f64, nodes: usize) -> f64 {
    let sa = a.sqrt();
    let resid = (var_z2 - b * b / a).max(0.0).sqrt();
    let (y, w) = gauss_hermite(nodes);
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    // Z₁ = −A/2 + √A x, Z₂ = −B + (B/√A) x + resid·√2 y
    let inner = |x: f64| -> f64 {
        y.iter()
            .zip(&w)
            .map(|(&yj, &wj)| wj * inv_sqrt_pi * (-b + b / sa * x + resid * std::f64::consts::SQRT_2 * yj))
            .sum()
    };
    // φ(x) e^{Z₁} = φ(x − √A); Z₁ < 0 ⟺ x < √A/2
    let cut = 0.5 * sa;
    let lower = sa - 40.0;
    integrate(
        |x| norm_pdf(x - sa) * inner(x),
        lower,
        cut,
        Tolerance::new(1e-17, 1e-14),
    )
    .value
}

fn check_inputs(kernel: &EffectiveKernel, maturity: f64, tol: f64) -> Result<()> {
    if !(maturity.is_finite() && maturity > 0.0) {
        return Err(SsrError::Domain(format!("maturity must be positive, got {maturity}")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(SsrError::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if kernel.is_identically_zero() {
        return Err(SsrError::HypothesisNotSatisfied(
            "small vol-of-vol limit needs a kernel that is not identically zero".into(),
        ));
    }
    Ok(())
}

fn finish_small_vol(
    curve: &ForwardVarianceCurve,
    m: SmallVolMoments,
    err_a: f64,
    err_b: f64,
    err_d: f64,
) -> Result<LimitReport> {
    // a quadrature value within its own error bar of zero counts as zero
    let b_zero = m.b == 0.0 || m.b.abs() <= 10.0 * err_b;
    let d_zero = m.d == 0.0 || m.d.abs() <= 10.0 * err_d;
    match (b_zero, d_zero) {
        (true, true) => {
            return Err(SsrError::HypothesisNotSatisfied(
                "both B and D vanish; the small vol-of-vol limit is 0/0".into(),
            ))
        }
        (false, true) => {
            return Err(SsrError::DegenerateDenominator(format!(
                "D vanishes while B = {}",
                m.b
            )))
        }
        _ => {}
    }
    let denom = curve.eval(0.0)?.sqrt() * m.d;
    let value = m.a * m.b / denom;
    // first-order propagation; stays finite when B = 0
    let error = value.abs() * (err_a / m.a + err_d / m.d.abs()) + m.a * err_b / denom.abs();
    Ok(LimitReport {
        kind: LimitKind::SmallVol,
        value,
        components: LimitComponents::SmallVol(m),
        quadrature_error_estimate: error,
    })
}

/// `(x − 1 + e^{−x}) / x²`, stable near zero.
fn exp_d_factor(x: f64) -> f64 {
    if x < 1e-2 {
        // Taylor series, truncation below 1e-16 for x < 1e-2
        let mut term = 0.5;
        let mut sum = 0.0;
        for n in 2..10 {
            sum += term;
            term *= -x / (n as f64 + 1.0);
        }
        sum
    } else {
        (x + (-x).exp_m1()) / (x * x)
    }
}

pub(crate) fn closed_form_moments(
    curve: &ForwardVarianceCurve,
    kernel: &EffectiveKernel,
    t: f64,
) -> Option<SmallVolMoments> {
    let v = match curve {
        ForwardVarianceCurve::Flat { v0 } => *v0,
        ForwardVarianceCurve::PiecewiseLinear { .. } => return None,
    };
    let [(rho, k)] = kernel.components() else {
        return None;
    };
    let (b, c, d) = match *k {
        KernelSpec::Power { a, hurst } => {
            let p = hurst + 0.5;
            (
                v * rho * a * t.powf(p) / p,
                v * rho * rho * a * a * t.powf(2.0 * hurst) / (2.0 * hurst),
                v.powf(1.5) * rho * a * t.powf(p + 1.0) / (p * (p + 1.0)),
            )
        }
        KernelSpec::Exponential { a, b } => (
            v * rho * a * -(-b * t).exp_m1() / b,
            v * rho * rho * a * a * -(-2.0 * b * t).exp_m1() / (2.0 * b),
            v.powf(1.5) * rho * a * t * t * exp_d_factor(b * t),
        ),
    };
    Some(SmallVolMoments { a: v * t, b, c, d })
}

/// `(A, B, C, D)` with their quadrature error estimates.
pub fn quadrature_moments(
    curve: &ForwardVarianceCurve,
    kernel: &EffectiveKernel,
    t: f64,
    tol: f64,
) -> Result<(SmallVolMoments, SmallVolMoments)> {
    // the curve must cover [0, T]; fail early instead of inside an integrand
    curve.eval(t)?;
    let v0 = |s: f64| curve.eval(s.clamp(0.0, t)).expect("curve covers [0, T]");
    let h = kernel.singularity_exponent();
    let p = h + 0.5;
    let inv_p = 1.0 / p;
    let knots = curve.breakpoints(0.0, t);
    let rel = Tolerance::relative(0.05 * tol);

    let a = curve.integral(0.0, t)?;

    // s = v^{1/p}: V₀(s) k(s) ds = V₀(s) g(s) / p dv
    let b_breaks: Vec<f64> = knots.iter().map(|s| s.powf(p)).collect();
    let b = integrate_piecewise(
        |v| {
            let s = v.powf(inv_p);
            v0(s) * kernel.regularized(s) * inv_p
        },
        &b_breaks,
        rel,
    );

    // s = w^{1/(2H)}: V₀(s) k(s)² ds = V₀(s) g(s)² / (2H) dw
    let two_h = 2.0 * h;
    let c_breaks: Vec<f64> = knots.iter().map(|s| s.powf(two_h)).collect();
    let c = integrate_piecewise(
        |w| {
            let s = w.powf(1.0 / two_h);
            let g = kernel.regularized(s);
            v0(s) * g * g / two_h
        },
        &c_breaks,
        rel,
    );

    // inner: ∫_s^T V₀(u) k(u − s) du with u − s = v^{1/p}
    let inner_tol = Tolerance::new(1e-300, 0.01 * tol);
    let inner = |s: f64| -> f64 {
        let span = t - s;
        if span <= 0.0 {
            return 0.0;
        }
        let mut breaks = vec![0.0];
        breaks.extend(
            knots
                .iter()
                .filter(|&&k| k > s && k < t)
                .map(|&k| (k - s).powf(p)),
        );
        breaks.push(span.powf(p));
        integrate_piecewise(
            |v| {
                let lag = v.powf(inv_p);
                v0(s + lag) * kernel.regularized(lag) * inv_p
            },
            &breaks,
            inner_tol,
        )
        .value
    };
    let d = integrate_piecewise(|s| v0(s).sqrt() * inner(s), &knots, rel);

    let value = SmallVolMoments {
        a,
        b: b.value,
        c: c.value,
        d: d.value,
    };
    let error = SmallVolMoments {
        a: 0.0,
        b: b.error,
        c: c.error,
        // the inner tolerance is two decades below the outer one
        d: d.error + 0.01 * tol * d.value.abs(),
    };
    Ok((value, error))
}

/// The variable a sweep varies while everything else, the seed included, stays fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVariable {
    Epsilon,
    Maturity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPlan {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub seed: u64,
    /// Limit the sweep is expected to approach.
    pub limit: LimitKind,
}

pub fn epsilon_sweep_schedule(values: &[f64], seed: u64) -> Result<SweepPlan> {
    check_schedule(values, "epsilon", true)?;
    Ok(SweepPlan {
        variable: SweepVariable::Epsilon,
        values: values.to_vec(),
        seed,
        limit: LimitKind::SmallVol,
    })
}

pub fn maturity_sweep_schedule(values: &[f64], seed: u64) -> Result<SweepPlan> {
    check_schedule(values, "maturity", false)?;
    Ok(SweepPlan {
        variable: SweepVariable::Maturity,
        values: values.to_vec(),
        seed,
        limit: LimitKind::ShortMaturity,
    })
}

/// Values must be finite, positive (or nonnegative when `allow_zero`) and
/// strictly monotone in either direction.
fn check_schedule(values: &[f64], name: &str, allow_zero: bool) -> Result<()> {
    if values.is_empty() {
        return Err(SsrError::InvalidSchedule(format!("empty {name} schedule")));
    }
    for &v in values {
        let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
        if !ok {
            return Err(SsrError::InvalidSchedule(format!("{name} value {v} is not positive")));
        }
    }
    if let Some(w) = values.windows(2).find(|w| w[0] == w[1]) {
        return Err(SsrError::InvalidSchedule(format!("duplicate {name} value {}", w[0])));
    }
    let increasing = values.windows(2).all(|w| w[0] < w[1]);
    let decreasing = values.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(SsrError::InvalidSchedule(format!("{name} values are not sorted")));
    }
    Ok(())
}
