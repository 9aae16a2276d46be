use serde::Serialize;

use super::{
    simulate, McSettings, McSummary, OBS_DIGITAL, OBS_DIM, OBS_PUT, OBS_PUT_DOWN, OBS_PUT_UP,
};
use crate::error::Result;
use crate::math_core::{
    atm_skew_from_digital, bs_put_dtotalvar, implied_total_variance, norm_cdf, norm_pdf, PutQuote,
    TotalVariance,
};
use crate::model::ModelConfig;
use crate::sim::Executor;

/// ATM skew `dσ/dk` of annualized implied vol in log-strike, two ways from
/// the same paths: a central difference of inverted vols at `k = ±δ`, and
/// the digital identity `σ' = (P[S₀ > S_T] − Φ(√Σ/2)) / (φ(√Σ/2) √T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewEstimate {
    pub skew_fd: f64,
    pub skew_fd_se: f64,
    pub skew_digital: f64,
    pub skew_digital_se: f64,
    /// Standard error of `skew_fd − skew_digital` accounting for their correlation.
    pub difference_se: f64,
    pub log_strike_step: f64,
    /// `dΣ/dk` by central difference.
    pub total_var_skew_fd: f64,
    /// `S₀ · Σ'(S₀)` from the digital identity.
    pub total_var_skew_digital: f64,
    pub atm_total_var: TotalVariance,
    pub maturity: f64,
}

impl SkewEstimate {
    pub fn from_summary(s: &McSummary) -> Result<Self> {
        let spot = s.spot0;
        let t = s.maturity;
        let delta = s.log_strike_step;
        let sqrt_t = t.sqrt();

        let (up_strike, down_strike) = (spot * delta.exp(), spot * (-delta).exp());
        let invert = |strike: f64, obs: usize| -> Result<(TotalVariance, f64)> {
            let v = implied_total_variance(PutQuote::new(spot, strike, s.mean(obs)))?;
            Ok((v, bs_put_dtotalvar(spot, strike, v)?))
        };
        let (var_up, vega_up) = invert(up_strike, OBS_PUT_UP)?;
        let (var_down, vega_down) = invert(down_strike, OBS_PUT_DOWN)?;
        let (var_atm, vega_atm) = invert(spot, OBS_PUT)?;

        let vol_up = (var_up.value() / t).sqrt();
        let vol_down = (var_down.value() / t).sqrt();
        let skew_fd = central_difference(vol_up, vol_down, delta);
        let mut g_fd = [0.0; OBS_DIM];
        g_fd[OBS_PUT_UP] = 1.0 / (2.0 * vol_up * t * vega_up) / (2.0 * delta);
        g_fd[OBS_PUT_DOWN] = -1.0 / (2.0 * vol_down * t * vega_down) / (2.0 * delta);

        let digital = s.mean(OBS_DIGITAL);
        let sqrt_var = var_atm.value().sqrt();
        let half_sd = 0.5 * sqrt_var;
        let phi = norm_pdf(half_sd);
        let y = digital - norm_cdf(half_sd);
        let skew_digital = y / (phi * sqrt_t);
        let mut g_dig = [0.0; OBS_DIM];
        g_dig[OBS_DIGITAL] = 1.0 / (phi * sqrt_t);
        // ∂Y/∂Σ = −φ/(4√Σ) and ∂(1/φ(√Σ/2))/∂Σ = 1/(8φ)
        let dy_dvar = -phi / (4.0 * sqrt_var);
        g_dig[OBS_PUT] = (dy_dvar / phi + y / (8.0 * phi)) / (vega_atm * sqrt_t);

        let mut g_diff = [0.0; OBS_DIM];
        for i in 0..OBS_DIM {
            g_diff[i] = g_fd[i] - g_dig[i];
        }

        Ok(Self {
            skew_fd,
            skew_fd_se: s.delta_variance(&g_fd).max(0.0).sqrt(),
            skew_digital,
            skew_digital_se: s.delta_variance(&g_dig).max(0.0).sqrt(),
            difference_se: s.delta_variance(&g_diff).max(0.0).sqrt(),
            log_strike_step: delta,
            total_var_skew_fd: central_difference(var_up.value(), var_down.value(), delta),
            total_var_skew_digital: spot * atm_skew_from_digital(spot, var_atm, digital)?,
            atm_total_var: var_atm,
            maturity: t,
        })
    }

    /// `sqrt(se_fd² + se_digital²)`, ignoring the correlation of the two.
    pub fn combined_se(&self) -> f64 {
        self.skew_fd_se.hypot(self.skew_digital_se)
    }

    /// ATM implied vol `σ₀ = √(Σ/T)`.
    pub fn atm_vol(&self) -> f64 {
        self.atm_total_var.annualized_vol(self.maturity)
    }
}

/// `(f(δ) − f(−δ)) / 2δ`.
pub fn central_difference(at_plus: f64, at_minus: f64, step: f64) -> f64 {
    (at_plus - at_minus) / (2.0 * step)
}

/// Simulates `config` at its own ε and estimates the ATM skew.
pub fn estimate_skew_fd(config: &ModelConfig, settings: &McSettings, executor: &Executor) -> Result<SkewEstimate> {
    let summaries = simulate(config, &[config.epsilon], settings, executor)?;
    SkewEstimate::from_summary(&summaries[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Factor, ForwardVarianceCurve, KernelSpec};

    #[test]
    fn central_difference_is_second_order() {
        // smooth smile with a cubic term: the error is σ'''δ²/6 exactly
        let smile = |k: f64| 0.2 - 0.1 * k + 0.3 * k * k + 0.5 * k * k * k;
        let err = |d: f64| central_difference(smile(d), smile(-d), d) - -0.1;
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 4.0).abs() < 1e-6, "{ratio}");
        let richardson = (4.0 * central_difference(smile(0.01), smile(-0.01), 0.01)
            - central_difference(smile(0.02), smile(-0.02), 0.02))
            / 3.0;
        assert!((richardson + 0.1).abs() < 1e-12);
    }

    #[test]
    fn flat_smile_at_zero_epsilon() {
        let cfg = ModelConfig::new(
            1.0,
            1.0,
            ForwardVarianceCurve::flat(0.04).unwrap(),
            vec![Factor {
                rho: 0.6,
                kernel: KernelSpec::Exponential { a: 1.0, b: 1.0 },
            }],
            0.0,
        )
        .unwrap();
        let s = McSettings::new(20_000, 16, 4, true).unwrap();
        let k = estimate_skew_fd(&cfg, &s, &Executor::new(1).unwrap()).unwrap();
        assert!(k.skew_fd.abs() < 4.0 * k.skew_fd_se.max(1e-6), "{k:?}");
        assert!(k.skew_digital.abs() < 4.0 * k.skew_digital_se, "{k:?}");
        assert!((k.atm_vol() - 0.2).abs() < 0.01);
    }
}
