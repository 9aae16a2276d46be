//! Monte Carlo estimators at `t = 0`: the `X / Y` representation of the SSR,
//! the ATM skew, and the nested regression estimator.
//!
//! One simulation pass accumulates, per ε, the sample moments of a small
//! observation vector; every estimate is a smooth function of its means and
//! gets its standard error by the delta method.

pub mod regression;
pub mod skew;
pub mod xy;

pub use regression::{estimate_ssr_regression, RegressionEstimate, RegressionSettings};
pub use skew::{estimate_skew_fd, SkewEstimate};
pub use xy::{digital_weighted_spot, estimate_xy, estimate_xy_from_paths, put_payoff_split, SsrEstimate};

use crate::error::{Result, SsrError};
use crate::model::ModelConfig;
use crate::sim::{
    Executor, GaussianDraw, Moments, PathGenerator, PathTerminal, RngStreamSpec, Scenario, TimeGrid,
};

/// Log-strike half-width of the finite-difference skew.
pub const DEFAULT_LOG_STRIKE_STEP: f64 = 0.01;

/// Fewest paths an estimate is computed from.
pub const MIN_PATHS: usize = 1000;

// observation vector, one per path (or antithetic pair average)
pub(crate) const OBS_X: usize = 0;
pub(crate) const OBS_DIGITAL: usize = 1;
pub(crate) const OBS_PUT: usize = 2;
pub(crate) const OBS_PUT_UP: usize = 3;
pub(crate) const OBS_PUT_DOWN: usize = 4;
pub(crate) const OBS_SPOT: usize = 5;
pub(crate) const OBS_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub log_strike_step: f64,
}

impl McSettings {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64, antithetic: bool) -> Result<Self> {
        let s = Self {
            n_paths,
            n_steps,
            seed,
            antithetic,
            log_strike_step: DEFAULT_LOG_STRIKE_STEP,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < MIN_PATHS {
            return Err(SsrError::Validation(format!(
                "at least {MIN_PATHS} paths are required, got {}",
                self.n_paths
            )));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(SsrError::Validation(format!(
                "antithetic sampling needs an even path count, got {}",
                self.n_paths
            )));
        }
        if self.n_steps < 2 {
            return Err(SsrError::Validation(format!(
                "need at least 2 time steps, got {}",
                self.n_steps
            )));
        }
        if !(self.log_strike_step.is_finite() && self.log_strike_step > 0.0) {
            return Err(SsrError::Validation(format!(
                "log-strike step must be positive, got {}",
                self.log_strike_step
            )));
        }
        Ok(())
    }

    /// Independent sampling units: paths, or antithetic pairs.
    pub fn n_units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

/// Sample moments of the observation vector for one ε.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub epsilon: f64,
    pub spot0: f64,
    pub maturity: f64,
    pub initial_variance: f64,
    pub log_strike_step: f64,
    pub n_paths: usize,
    pub moments: Moments,
}

impl McSummary {
    pub fn mean(&self, obs: usize) -> f64 {
        self.moments.mean()[obs]
    }

    pub fn std_error(&self, obs: usize) -> f64 {
        self.moments.std_error(obs)
    }

    /// Sample mean of `S_T`; equals `S₀` up to noise.
    pub fn mean_terminal_spot(&self) -> (f64, f64) {
        (self.mean(OBS_SPOT), self.std_error(OBS_SPOT))
    }

    /// Variance of `Σ gᵢ · meanᵢ` for a gradient over the observation vector.
    pub(crate) fn delta_variance(&self, grad: &[f64; OBS_DIM]) -> f64 {
        self.delta_covariance(grad, grad)
    }

    pub(crate) fn delta_covariance(&self, g1: &[f64; OBS_DIM], g2: &[f64; OBS_DIM]) -> f64 {
        let cov = self.moments.mean_covariance();
        let mut total = 0.0;
        for i in 0..OBS_DIM {
            if g1[i] == 0.0 {
                continue;
            }
            for j in 0..OBS_DIM {
                total += g1[i] * cov[i][j] * g2[j];
            }
        }
        total
    }
}

pub(crate) fn observe(
    spot0: f64,
    log_strike_step: f64,
    terminal: PathTerminal,
    out: &mut [f64; OBS_DIM],
) {
    let s = terminal.log_spot.exp();
    let k = spot0;
    let digital = if k > s { 1.0 } else { 0.0 };
    out[OBS_X] = digital_weighted_spot(k, s) * terminal.integral;
    out[OBS_DIGITAL] = digital;
    out[OBS_PUT] = (k - s).max(0.0);
    out[OBS_PUT_UP] = (k * log_strike_step.exp() - s).max(0.0);
    out[OBS_PUT_DOWN] = (k * (-log_strike_step).exp() - s).max(0.0);
    out[OBS_SPOT] = s;
}

/// Simulates once and accumulates one [`McSummary`] per ε. All ε values share
/// the Gaussian draws (common random numbers).
pub fn simulate(
    config: &ModelConfig,
    epsilons: &[f64],
    settings: &McSettings,
    executor: &Executor,
) -> Result<Vec<McSummary>> {
    settings.validate()?;
    for &eps in epsilons {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(SsrError::Validation(format!("epsilon must be nonnegative, got {eps}")));
        }
    }
    let grid = TimeGrid::new(config.maturity, settings.n_steps)?;
    let generator = PathGenerator::new(config, grid)?;
    let scenarios: Vec<Scenario> = epsilons
        .iter()
        .map(|&eps| generator.scenario_for(config.spot0, &config.curve, eps))
        .collect::<Result<_>>()?;
    let per_eps = run_units(&generator, &scenarios, settings, executor);
    Ok(epsilons
        .iter()
        .zip(per_eps)
        .zip(&scenarios)
        .map(|((&epsilon, moments), sc)| McSummary {
            epsilon,
            spot0: config.spot0,
            maturity: config.maturity,
            initial_variance: sc.initial_variance(),
            log_strike_step: settings.log_strike_step,
            n_paths: settings.n_paths,
            moments,
        })
        .collect())
}

fn run_units(
    generator: &PathGenerator,
    scenarios: &[Scenario],
    settings: &McSettings,
    executor: &Executor,
) -> Vec<Moments> {
    let n_steps = generator.grid().n_steps();
    let chunk = |range: std::ops::Range<usize>| {
        let mut acc = vec![Moments::new(OBS_DIM); scenarios.len()];
        let mut draw = GaussianDraw::with_steps(n_steps);
        let mut plus = [0.0; OBS_DIM];
        let mut minus = [0.0; OBS_DIM];
        for unit in range {
            generator.draw(RngStreamSpec::new(settings.seed, unit as u64), &mut draw);
            for (sc, m) in scenarios.iter().zip(acc.iter_mut()) {
                let t = generator.terminal(sc, &draw, 1.0);
                observe(sc.spot0, settings.log_strike_step, t, &mut plus);
                if settings.antithetic {
                    let t = generator.terminal(sc, &draw, -1.0);
                    observe(sc.spot0, settings.log_strike_step, t, &mut minus);
                    for (p, q) in plus.iter_mut().zip(&minus) {
                        *p = 0.5 * (*p + q);
                    }
                }
                m.push(&plus);
            }
        }
        acc
    };
    let merge = |a: Vec<Moments>, b: Vec<Moments>| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect();
    executor
        .map_reduce(settings.n_units(), chunk, merge)
        .unwrap_or_else(|| vec![Moments::new(OBS_DIM); scenarios.len()])
}
