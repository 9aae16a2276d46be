//! Nested-simulation regression estimator of the SSR, straight from its
//! definition: the slope of ATM-vol increments on log returns over a short
//! horizon `h`, divided by the ATM skew.
//!
//! Outer paths run the model on `[0, h]` and carry the Gaussian state that
//! fixes the conditional forward variance curve
//! `ξ_h(s) = V₀(s) exp(ε G(s) − ε²/2 Var G(s))`, `G(s) = Σᵢ ∫_0^h kᵢ(s − u) dWⁱ_u`.
//! Given `F_h` the model on `[h, T]` is again of the same type, started from
//! `(S_h, ξ_h)`, so each outer path prices its own ATM put with inner paths.

use serde::Serialize;

use super::{simulate, McSettings, SkewEstimate};
use crate::error::{Result, SsrError};
use crate::math_core::{implied_total_variance, PutQuote};
use crate::model::{ForwardVarianceCurve, ModelConfig};
use crate::sim::{
    Executor, GaussianDraw, GaussianVariable, JointCovariance, PathGenerator, RngStreamSpec,
    StreamDomain, TimeGrid,
};

/// Largest tolerated share of outer samples whose inner put cannot be inverted.
pub const MAX_DISCARD_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSettings {
    /// Increment horizon `h`.
    pub horizon: f64,
    pub n_outer: usize,
    /// Inner paths per outer sample, in antithetic pairs.
    pub n_inner: usize,
    /// Steps on the full `[0, T]`; `[0, h]` and `[h, T]` share the spacing.
    pub n_steps: usize,
    pub seed: u64,
}

impl RegressionSettings {
    /// Horizon defaults to `T / 64`.
    pub fn new(maturity: f64, n_steps: usize, n_outer: usize, n_inner: usize, seed: u64) -> Self {
        Self {
            horizon: maturity / 64.0,
            n_outer,
            n_inner,
            n_steps,
            seed,
        }
    }

    fn validate(&self, maturity: f64) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon < maturity) {
            return Err(SsrError::Validation(format!(
                "increment horizon must lie in (0, T), got h = {} with T = {maturity}",
                self.horizon
            )));
        }
        if self.n_outer < 3 {
            return Err(SsrError::Validation(format!(
                "need at least 3 outer paths, got {}",
                self.n_outer
            )));
        }
        if self.n_inner < 2 || !self.n_inner.is_multiple_of(2) {
            return Err(SsrError::Validation(format!(
                "inner path count must be even and at least 2, got {}",
                self.n_inner
            )));
        }
        if self.n_steps < 4 {
            return Err(SsrError::Validation(format!(
                "need at least 4 time steps, got {}",
                self.n_steps
            )));
        }
        Ok(())
    }

    /// `(outer, inner)` step counts.
    fn split_steps(&self, maturity: f64) -> (usize, usize) {
        let outer = ((self.n_steps as f64 * self.horizon / maturity).round() as usize).max(2);
        let inner = self.n_steps.saturating_sub(outer).max(2);
        (outer, inner)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionEstimate {
    /// Through-the-origin OLS slope of `σ_h − σ₀` on `log(S_h / S₀)`.
    pub slope: f64,
    pub slope_se: f64,
    /// ATM skew `σ'₀` the slope is normalized by.
    pub skew: f64,
    pub skew_se: f64,
    pub r_reg: f64,
    pub r_reg_se: f64,
    pub horizon: f64,
    pub n_outer: usize,
    pub n_inner: usize,
    pub discarded: usize,
    /// ATM vol of the reference inner run, the baseline of the increments.
    pub reference_vol: f64,
}

/// Runs the skew on `mc` paths, then the nested regression.
pub fn estimate_ssr_regression(
    config: &ModelConfig,
    settings: &RegressionSettings,
    mc: &McSettings,
    executor: &Executor,
) -> Result<RegressionEstimate> {
    check_defined(config)?;
    let summary = simulate(config, &[config.epsilon], mc, executor)?;
    let skew = SkewEstimate::from_summary(&summary[0])?;
    estimate_ssr_regression_with_skew(config, settings, &skew, executor)
}

fn check_defined(config: &ModelConfig) -> Result<()> {
    if config.epsilon == 0.0 || config.effective_kernel()?.is_identically_zero() {
        return Err(SsrError::UndefinedSsr(
            "the smile is flat: zero vol-of-vol or a vanishing kernel gives zero skew".into(),
        ));
    }
    Ok(())
}

/// Nested regression normalized by a skew estimated elsewhere.
pub fn estimate_ssr_regression_with_skew(
    config: &ModelConfig,
    settings: &RegressionSettings,
    skew: &SkewEstimate,
    executor: &Executor,
) -> Result<RegressionEstimate> {
    check_defined(config)?;
    let t = config.maturity;
    settings.validate(t)?;
    if skew.skew_fd == 0.0 {
        return Err(SsrError::UndefinedSsr("ATM skew is zero".into()));
    }
    let h = settings.horizon;
    let eps = config.epsilon;
    let (n_out, n_in) = settings.split_steps(t);
    let kernel = config.effective_kernel()?;

    let outer_grid = TimeGrid::new(h, n_out)?;
    let inner_grid = TimeGrid::new(t - h, n_in)?;
    let layout = outer_layout(&outer_grid, &inner_grid);
    let outer_cov = JointCovariance::build(&kernel, &outer_grid, layout)?;
    let variances: Vec<f64> = (0..outer_cov.dim()).map(|i| outer_cov.matrix()[(i, i)]).collect();

    let inner = PathGenerator::from_kernel(&kernel, inner_grid)?;
    let n_pairs = settings.n_inner / 2;
    // inner draws are shared by every outer sample
    let draws: Vec<GaussianDraw> = executor.map_indexed(n_pairs, |j| {
        let mut d = GaussianDraw::with_steps(n_in);
        inner.draw(
            RngStreamSpec::new(settings.seed, j as u64).in_domain(StreamDomain::Inner),
            &mut d,
        );
        d
    });

    let knot_times: Vec<f64> = (0..=n_in).map(|j| h + inner_grid.time(j)).collect();
    let inner_vol = |spot: f64, curve: &ForwardVarianceCurve| -> Result<f64> {
        let sc = inner.scenario_for(spot, curve, eps)?;
        let mut payoff_sum = 0.0;
        for d in &draws {
            for sign in [1.0, -1.0] {
                let s_t = inner.terminal(&sc, d, sign).log_spot.exp();
                payoff_sum += (spot - s_t).max(0.0);
            }
        }
        let put = payoff_sum / (2 * n_pairs) as f64;
        let var = implied_total_variance(PutQuote::new(spot, spot, put))?;
        Ok(var.annualized_vol(t - h))
    };

    let reference_curve = ForwardVarianceCurve::piecewise_linear(
        knot_times
            .iter()
            .map(|&s| Ok((s - h, config.curve.eval(s)?)))
            .collect::<Result<_>>()?,
    )?;
    let reference_vol = inner_vol(config.spot0, &reference_curve)?;

    let samples: Vec<Option<(f64, f64)>> = executor.map_indexed(settings.n_outer, |i| {
        let mut normals = vec![0.0; outer_cov.dim()];
        let mut z = vec![0.0; outer_cov.dim()];
        let mut rng = RngStreamSpec::new(settings.seed, i as u64)
            .in_domain(StreamDomain::Outer)
            .rng();
        outer_cov.sample_into(&mut rng, &mut normals, &mut z);

        let dt = outer_grid.dt();
        let mut log_spot = config.spot0.ln();
        for j in 0..n_out {
            let v0 = config.curve.eval(outer_grid.time(j)).ok()?;
            let v = if j == 0 {
                v0
            } else {
                let x = z[n_out + j - 1];
                v0 * (eps * x - 0.5 * eps * eps * variances[n_out + j - 1]).exp()
            };
            log_spot += v.sqrt() * z[j] - 0.5 * v * dt;
        }
        // ξ_h at h + τ_j: X(h) for j = 0, then the extra rows
        let knots: Option<Vec<(f64, f64)>> = (0..=n_in)
            .map(|j| {
                let row = 2 * n_out - 1 + j;
                let g = z[row];
                let v0 = config.curve.eval(knot_times[j]).ok()?;
                Some((knot_times[j] - h, v0 * (eps * g - 0.5 * eps * eps * variances[row]).exp()))
            })
            .collect();
        let curve = ForwardVarianceCurve::piecewise_linear(knots?).ok()?;
        let spot_h = log_spot.exp();
        let vol = inner_vol(spot_h, &curve).ok()?;
        Some((log_spot - config.spot0.ln(), vol - reference_vol))
    });

    let kept: Vec<(f64, f64)> = samples.iter().flatten().copied().collect();
    let discarded = settings.n_outer - kept.len();
    if discarded as f64 > MAX_DISCARD_FRACTION * settings.n_outer as f64 {
        return Err(SsrError::EstimatorFailure(format!(
            "{discarded} of {} outer samples had an uninvertible inner put",
            settings.n_outer
        )));
    }
    let (slope, slope_se) = ols_through_origin(&kept)?;
    let r_reg = slope / skew.skew_fd;
    let r_reg_se = r_reg.abs() * (slope_se / slope).hypot(skew.skew_fd_se / skew.skew_fd);
    Ok(RegressionEstimate {
        slope,
        slope_se,
        skew: skew.skew_fd,
        skew_se: skew.skew_fd_se,
        r_reg,
        r_reg_se,
        horizon: h,
        n_outer: settings.n_outer,
        n_inner: settings.n_inner,
        discarded,
        reference_vol,
    })
}

/// Outer Gaussian vector: `ΔB` on the outer cells, `X(t_m)` at the outer
/// grid points (the last one is `G(h)`), then `G(h + τ_j)` for `j = 1..=n_in`.
fn outer_layout(outer: &TimeGrid, inner: &TimeGrid) -> Vec<GaussianVariable> {
    let h = outer.maturity();
    let n_out = outer.n_steps();
    (0..n_out)
        .map(GaussianVariable::BrownianCell)
        .chain((1..=n_out).map(|m| {
            let t = outer.time(m);
            GaussianVariable::Volterra { at: t, horizon: t }
        }))
        .chain((1..=inner.n_steps()).map(|j| GaussianVariable::Volterra {
            at: h + inner.time(j),
            horizon: h,
        }))
        .collect()
}

/// Slope and standard error of `y = βx + e`.
fn ols_through_origin(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let n = points.len();
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    if n < 2 || sxx == 0.0 {
        return Err(SsrError::EstimatorFailure(
            "regression needs at least two points with nonzero returns".into(),
        ));
    }
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let rss: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    Ok((slope, (rss / (n - 1) as f64 / sxx).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Factor, KernelSpec};

    fn config(rho: f64, eps: f64) -> ModelConfig {
        ModelConfig::new(
            1.0,
            1.0,
            ForwardVarianceCurve::flat(0.04).unwrap(),
            vec![Factor {
                rho,
                kernel: KernelSpec::Exponential { a: 1.0, b: 1.0 },
            }],
            eps,
        )
        .unwrap()
    }

    #[test]
    fn ols_recovers_exact_line() {
        let pts: Vec<(f64, f64)> = (1..20).map(|i| (i as f64 * 0.1 - 1.0, 0.3 * (i as f64 * 0.1 - 1.0))).collect();
        let (b, se) = ols_through_origin(&pts).unwrap();
        assert!((b - 0.3).abs() < 1e-15);
        assert!(se < 1e-15);
        assert!(ols_through_origin(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
    }

    #[test]
    fn zero_epsilon_is_undefined() {
        let s = RegressionSettings::new(1.0, 16, 10, 100, 1);
        let mc = McSettings::new(1000, 16, 1, true).unwrap();
        let r = estimate_ssr_regression(&config(0.6, 0.0), &s, &mc, &Executor::new(1).unwrap());
        assert!(matches!(r, Err(SsrError::UndefinedSsr(_))));
    }

    #[test]
    fn step_split_shares_spacing() {
        let s = RegressionSettings::new(1.0, 256, 10, 100, 1);
        assert_eq!(s.split_steps(1.0), (4, 252));
        assert!((s.horizon - 1.0 / 64.0).abs() < 1e-18);
    }

    #[test]
    fn slope_sign_follows_correlation() {
        let exec = Executor::new(1).unwrap();
        for rho in [0.6, -0.6] {
            let cfg = config(rho, 1.0);
            let s = RegressionSettings {
                horizon: 1.0 / 16.0,
                ..RegressionSettings::new(1.0, 32, 60, 400, 11)
            };
            let mc = McSettings::new(20_000, 32, 11, true).unwrap();
            let r = estimate_ssr_regression(&cfg, &s, &mc, &exec).unwrap();
            assert_eq!(r.slope.signum(), rho.signum(), "{r:?}");
            assert_eq!(r.skew.signum(), rho.signum(), "{r:?}");
            assert!(r.r_reg > 0.0);
            assert_eq!(r.discarded, 0);
        }
    }
}
