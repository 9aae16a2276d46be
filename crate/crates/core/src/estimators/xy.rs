use serde::Serialize;

use super::{
    observe, simulate, McSettings, McSummary, DEFAULT_LOG_STRIKE_STEP, MIN_PATHS, OBS_DIGITAL,
    OBS_DIM, OBS_PUT, OBS_X,
};
use crate::error::{Result, SsrError};
use crate::math_core::{
    bs_put_dtotalvar, implied_total_variance, norm_cdf, norm_pdf, PutQuote, TotalVariance,
};
use crate::model::ModelConfig;
use crate::sim::{Executor, Moments, PathBundle, PathTerminal};

/// `X`, `Y` and `R = X / Y` at `t = 0` with delta-method standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsrEstimate {
    pub epsilon: f64,
    pub x: f64,
    pub x_se: f64,
    pub y: f64,
    pub y_se: f64,
    pub r: f64,
    pub r_se: f64,
    /// Covariance of the `X` and `Y` estimators.
    pub xy_cov: f64,
    pub n_paths: usize,
    pub atm_total_var: TotalVariance,
    pub digital_prob: f64,
    pub put_price: f64,
    /// `|Y| ≤ 2·Y_se`: the ratio is not resolved and `r_se` is inflated to
    /// the scale of `X / Y_se`.
    pub degenerate_denominator: bool,
}

impl SsrEstimate {
    pub fn from_summary(s: &McSummary) -> Result<Self> {
        let spot = s.spot0;
        let put = s.mean(OBS_PUT);
        let digital = s.mean(OBS_DIGITAL);
        let total_var = implied_total_variance(PutQuote::new(spot, spot, put))?;
        let sqrt_var = total_var.value().sqrt();
        let vega = bs_put_dtotalvar(spot, spot, total_var)?;
        let half_sd = 0.5 * sqrt_var;

        let cx = -s.epsilon / (2.0 * spot * s.initial_variance.sqrt());
        // + 0.0 normalizes the −0 produced at ε = 0
        let x = cx * s.mean(OBS_X) + 0.0;
        let y = digital - norm_cdf(half_sd);

        let mut gx = [0.0; OBS_DIM];
        gx[OBS_X] = cx;
        let mut gy = [0.0; OBS_DIM];
        gy[OBS_DIGITAL] = 1.0;
        gy[OBS_PUT] = -norm_pdf(half_sd) / (4.0 * sqrt_var) / vega;
        let var_x = s.delta_variance(&gx);
        let var_y = s.delta_variance(&gy);
        let xy_cov = s.delta_covariance(&gx, &gy);
        let (x_se, y_se) = (var_x.max(0.0).sqrt(), var_y.max(0.0).sqrt());

        // at ε = 0 both X and the true Y vanish and the ratio has no value
        let r = if y != 0.0 && s.epsilon > 0.0 { x / y } else { f64::NAN };
        let mut gr = [0.0; OBS_DIM];
        for i in 0..OBS_DIM {
            gr[i] = gx[i] / y - x * gy[i] / (y * y);
        }
        let mut r_se = s.delta_variance(&gr).max(0.0).sqrt();
        let degenerate_denominator = y.abs() <= 2.0 * y_se;
        if r.is_nan() {
            r_se = f64::NAN;
        } else if degenerate_denominator && y_se > 0.0 {
            r_se = r_se.max((x.abs() + x_se) / y_se);
        }
        Ok(Self {
            epsilon: s.epsilon,
            x,
            x_se,
            y,
            y_se,
            r,
            r_se,
            xy_cov,
            n_paths: s.n_paths,
            atm_total_var: total_var,
            digital_prob: digital,
            put_price: put,
            degenerate_denominator,
        })
    }

    /// `DegenerateDenominator` when the ratio is not resolved.
    pub fn check_denominator(&self) -> Result<()> {
        if self.degenerate_denominator {
            Err(SsrError::DegenerateDenominator(format!(
                "Y = {:e} is within 2 standard errors ({:e}) of zero",
                self.y, self.y_se
            )))
        } else {
            Ok(())
        }
    }
}

/// Simulates `config` at its own ε and estimates `X`, `Y`, `R`.
pub fn estimate_xy(config: &ModelConfig, settings: &McSettings, executor: &Executor) -> Result<SsrEstimate> {
    let summaries = simulate(config, &[config.epsilon], settings, executor)?;
    SsrEstimate::from_summary(&summaries[0])
}

/// Estimate from an explicit stream of paths, each path its own sample.
pub fn estimate_xy_from_paths(
    paths: impl IntoIterator<Item = PathBundle>,
    config: &ModelConfig,
) -> Result<SsrEstimate> {
    let mut moments = Moments::new(OBS_DIM);
    let mut obs = [0.0; OBS_DIM];
    for p in paths {
        let terminal = PathTerminal {
            log_spot: p.log_spot[p.log_spot.len() - 1],
            integral: p.integral,
        };
        observe(config.spot0, DEFAULT_LOG_STRIKE_STEP, terminal, &mut obs);
        moments.push(&obs);
    }
    let n_paths = moments.count() as usize;
    if n_paths < MIN_PATHS {
        return Err(SsrError::Validation(format!(
            "at least {MIN_PATHS} paths are required, got {n_paths}"
        )));
    }
    SsrEstimate::from_summary(&McSummary {
        epsilon: config.epsilon,
        spot0: config.spot0,
        maturity: config.maturity,
        initial_variance: config.curve.eval(0.0)?,
        log_strike_step: DEFAULT_LOG_STRIKE_STEP,
        n_paths,
        moments,
    })
}

/// `(K − S)₊` as an unevaluated sum `hi + lo` that is exact.
pub fn put_payoff_split(strike: f64, spot: f64) -> (f64, f64) {
    if strike <= spot {
        return (0.0, 0.0);
    }
    // TwoSum of strike and −spot
    let hi = strike - spot;
    let b_virtual = hi - strike;
    let a_virtual = hi - b_virtual;
    let lo = (strike - a_virtual) + (-spot - b_virtual);
    (hi, lo)
}

/// `1{K > S}·S` evaluated as `K·1{K > S} − (K − S)₊`. With the payoff held
/// exactly, `K − hi` is exact and the result equals `S` bit for bit.
pub fn digital_weighted_spot(strike: f64, spot: f64) -> f64 {
    if strike > spot {
        let (hi, lo) = put_payoff_split(strike, spot);
        (strike - hi) - lo
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Factor, ForwardVarianceCurve, KernelSpec};
    use crate::sim::{generate_paths, TimeGrid};
    use proptest::prelude::*;

    fn config(eps: f64) -> ModelConfig {
        ModelConfig::new(
            1.0,
            1.0,
            ForwardVarianceCurve::flat(0.04).unwrap(),
            vec![Factor {
                rho: 0.6,
                kernel: KernelSpec::Exponential { a: 1.0, b: 1.0 },
            }],
            eps,
        )
        .unwrap()
    }

    #[test]
    fn identity_is_exact_where_naive_form_is_not() {
        let (k, s) = (1.0, 0.1);
        assert_ne!(k - (k - s), s);
        assert_eq!(digital_weighted_spot(k, s), s);
        assert_eq!(digital_weighted_spot(1.0, 1.0), 0.0);
        assert_eq!(digital_weighted_spot(1.0, 2.0), 0.0);
        let (hi, lo) = put_payoff_split(1.0, 0.1);
        assert_eq!(hi, 0.9);
        assert!(lo != 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(4096))]

        #[test]
        fn identity_is_bit_exact(k in 1e-3f64..1e3, log_ratio in -40.0f64..0.0) {
            let s = k * log_ratio.exp();
            if s < k {
                prop_assert_eq!(digital_weighted_spot(k, s), s);
            }
        }
    }

    #[test]
    fn zero_epsilon_has_zero_x() {
        let cfg = config(0.0);
        let s = McSettings::new(4000, 16, 3, true).unwrap();
        let e = estimate_xy(&cfg, &s, &Executor::new(1).unwrap()).unwrap();
        assert_eq!(e.x, 0.0);
        assert!(e.x.is_sign_positive());
        assert!(e.y.abs() < 4.0 * e.y_se, "{e:?}");
        assert!((0.0..=1.0).contains(&e.digital_prob));
        assert!(e.atm_total_var.value() > 0.0);
        assert!(e.r.is_nan() && e.r_se.is_nan());
    }

    #[test]
    fn stream_estimator_matches_fold() {
        let cfg = config(0.5);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let paths: Vec<_> = generate_paths(&cfg, grid, 2000, 9, false).unwrap().collect();
        let a = estimate_xy_from_paths(paths, &cfg).unwrap();
        let s = McSettings::new(2000, 16, 9, false).unwrap();
        let b = estimate_xy(&cfg, &s, &Executor::new(1).unwrap()).unwrap();
        assert!((a.x - b.x).abs() <= 1e-12 * b.x.abs());
        assert!((a.y - b.y).abs() <= 1e-12);
        assert!(a.x > 0.0);
        assert!(estimate_xy_from_paths(Vec::new(), &cfg).is_err());
    }
}
