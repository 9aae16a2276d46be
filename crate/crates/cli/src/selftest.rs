//! Reduced-scale invariant suites behind `ssr-lab selftest`.
//!
//! Every suite is deterministic (fixed grids or the run seed) and the whole
//! run stays well under a minute on one core.

use std::time::Instant;

use ssr_core::asymptotics::{
    bivariate_digital_moment, bivariate_digital_moment_quadrature, small_vol_component_limits,
    small_vol_limit, small_vol_limit_quadrature, DEFAULT_TOL,
};
use ssr_core::estimators::{digital_weighted_spot, put_payoff_split, simulate, McSettings, SsrEstimate};
use ssr_core::math_core::{bs_put, implied_total_variance, PutQuote, TotalVariance};
use ssr_core::model::{mixing_matrix, CorrelationVector, Factor, ForwardVarianceCurve, KernelSpec, ModelConfig};
use ssr_core::sim::{generate_paths, Executor, TimeGrid};
use ssr_core::Result;

use crate::output::{Field, Table};

pub const SUITES: &[&str] = &["math_core", "model", "asymptotics", "sim", "estimators", "determinism"];

pub const SELFTEST_COLUMNS: &[&str] = &["suite", "status", "checks", "detail"];

/// Tolerance scale of one suite; zero makes every check of the suite fail.
#[derive(Debug, Clone, Copy)]
struct Tol {
    scale: f64,
}

/// Check counter and first failure of a suite.
struct Checks {
    tol: Tol,
    count: u64,
    failure: Option<String>,
    worst: Vec<String>,
}

impl Checks {
    fn new(tol: Tol) -> Self {
        Self {
            tol,
            count: 0,
            failure: None,
            worst: Vec::new(),
        }
    }

    /// Passes when `err < bound · scale`, so a zero scale fails every check.
    fn within(&mut self, what: &str, err: f64, bound: f64) {
        self.count += 1;
        if !(err < bound * self.tol.scale) && self.failure.is_none() {
            self.failure = Some(format!("{what}: {err:.3e} exceeds {:.3e}", bound * self.tol.scale));
        }
    }

    fn holds(&mut self, what: &str, ok: bool) {
        self.within(what, if ok { 0.0 } else { 1.0 }, 0.5);
    }

    fn note(&mut self, what: &str, value: f64) {
        self.worst.push(format!("{what}={value:.3e}"));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub checks: u64,
    pub detail: String,
    pub seconds: f64,
}

/// Runs every suite; `broken` names a suite whose tolerances are zeroed.
pub fn run_selftest(seed: u64, workers: usize, broken: Option<&str>) -> Result<Vec<SuiteResult>> {
    let exec = Executor::new(workers)?;
    let mut results = Vec::new();
    for &name in SUITES {
        let tol = Tol {
            scale: if broken == Some(name) { 0.0 } else { 1.0 },
        };
        let mut checks = Checks::new(tol);
        let start = Instant::now();
        let outcome = match name {
            "math_core" => math_core_suite(&mut checks),
            "model" => model_suite(&mut checks),
            "asymptotics" => asymptotics_suite(&mut checks),
            "sim" => sim_suite(&mut checks, seed, &exec),
            "estimators" => estimators_suite(&mut checks, seed, &exec),
            "determinism" => determinism_suite(&mut checks, seed),
            _ => unreachable!("suite list"),
        };
        let seconds = start.elapsed().as_secs_f64();
        if let Err(e) = outcome {
            checks.failure.get_or_insert(format!("error: {e}"));
        }
        let passed = checks.failure.is_none();
        let detail = checks.failure.clone().unwrap_or_else(|| checks.worst.join(" "));
        results.push(SuiteResult {
            name,
            passed,
            checks: checks.count,
            detail,
            seconds,
        });
    }
    Ok(results)
}

pub fn results_table(results: &[SuiteResult]) -> Table {
    let mut t = Table::new(SELFTEST_COLUMNS);
    for r in results {
        t.row()
            .set("suite", Field::text(r.name))
            .set("status", Field::text(if r.passed { "pass" } else { "fail" }))
            .set("checks", Field::Int(r.checks))
            .set("detail", Field::text(r.detail.clone()));
    }
    t
}

fn math_core_suite(c: &mut Checks) -> Result<()> {
    let mut worst: f64 = 0.0;
    for spot in [0.5, 1.0, 3.0, 100.0] {
        for i in 0..25 {
            // Σ from 1e-4 to 2 log-uniformly
            let var = 1e-4 * (2e4f64).powf(i as f64 / 24.0);
            let half_width = 2f64.ln().min(4.0 * var.sqrt());
            for j in 0..21 {
                let m = -half_width + 2.0 * half_width * j as f64 / 20.0;
                let strike = spot * m.exp();
                let price = bs_put(spot, strike, TotalVariance::new(var)?);
                let intrinsic = (strike - spot).max(0.0);
                c.holds("put price inside no-arbitrage bounds", price > intrinsic && price < strike);
                let back = implied_total_variance(PutQuote::new(spot, strike, price))?;
                let err = (back.value() - var).abs();
                worst = worst.max(err);
                c.within("implied total variance round trip", err, 1e-8);
            }
        }
    }
    c.note("max_roundtrip_err", worst);
    Ok(())
}

fn model_suite(c: &mut Checks) -> Result<()> {
    let mut worst: f64 = 0.0;
    for d in 1..=5 {
        for i in 0..40 {
            // deterministic directions, norms up to 0.99
            let norm = 0.99 * (i as f64 + 0.5) / 40.0;
            let raw: Vec<f64> = (0..d).map(|k| ((i * 7 + k * 13) as f64 * 0.731).sin() + 0.05).collect();
            let len = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            let rho: Vec<f64> = raw.iter().map(|x| norm * x / len).collect();
            let l = mixing_matrix(&CorrelationVector::new(rho.clone())?);
            let mut resid: f64 = 0.0;
            for r in 0..d {
                for s in 0..d {
                    let llt: f64 = (0..d).map(|k| l[(r, k)] * l[(s, k)]).sum();
                    let target = if r == s { 1.0 } else { 0.0 } - rho[r] * rho[s];
                    resid = resid.max((llt - target).abs());
                }
            }
            worst = worst.max(resid);
            c.within("mixing matrix LL^T = I - rho rho^T", resid, 1e-12);
        }
    }
    c.note("max_residual", worst);
    Ok(())
}

fn flat_config(kernel: KernelSpec, rho: f64, maturity: f64, epsilon: f64) -> Result<ModelConfig> {
    ModelConfig::new(
        1.0,
        maturity,
        ForwardVarianceCurve::flat(0.04)?,
        vec![Factor { rho, kernel }],
        epsilon,
    )
}

fn asymptotics_suite(c: &mut Checks) -> Result<()> {
    let mut worst: f64 = 0.0;
    for h in [0.05, 0.1, 0.25, 0.5] {
        let cfg = flat_config(KernelSpec::Power { a: 1.0, hurst: h }, 0.6, 1.0, 1.0)?;
        let r = small_vol_limit_quadrature(&cfg.curve, &cfg.effective_kernel()?, 1.0, DEFAULT_TOL)?;
        let err = (r.value - (h + 1.5)).abs();
        worst = worst.max(err);
        c.within("flat power small vol-of-vol limit = H + 3/2", err, 1e-8);
    }
    let cfg = flat_config(KernelSpec::Exponential { a: 1.0, b: 1.0 }, 0.6, 1.0, 0.05)?;
    let kernel = cfg.effective_kernel()?;
    let closed = small_vol_limit(&cfg.curve, &kernel, 1.0, DEFAULT_TOL)?;
    let quad = small_vol_limit_quadrature(&cfg.curve, &kernel, 1.0, DEFAULT_TOL)?;
    c.within("exponential limit = e - 1", (closed.value - (std::f64::consts::E - 1.0)).abs(), 1e-12);
    c.within("closed form = quadrature", (closed.value - quad.value).abs(), 1e-8);
    for (a, b, v2) in [(0.04, 0.015, 0.02), (0.5, -0.3, 0.5), (1.7, 0.9, 3.0)] {
        let err = (bivariate_digital_moment(a, b) - bivariate_digital_moment_quadrature(a, b, v2, 20)).abs();
        worst = worst.max(err);
        c.within("bivariate digital moment oracle", err, 1e-10);
    }
    c.note("max_err", worst);
    Ok(())
}

fn sim_suite(c: &mut Checks, seed: u64, exec: &Executor) -> Result<()> {
    let rough = ModelConfig::new(
        1.0,
        0.5,
        ForwardVarianceCurve::flat(0.04)?,
        vec![Factor {
            rho: -0.7,
            kernel: KernelSpec::Power { a: 1.0, hurst: 0.1 },
        }],
        1.0,
    )?;
    let settings = McSettings::new(40_000, 32, seed, true)?;
    let s = &simulate(&rough, &[0.0, 1.0], &settings, exec)?;
    for summary in s {
        let (mean, se) = summary.mean_terminal_spot();
        let z = (mean - rough.spot0).abs() / se;
        c.note(&format!("martingale_z(eps={})", summary.epsilon), z);
        c.within("E[S_T] = S_0 within 3.5 se", z, 3.5);
    }

    // ε = 0: variance is the forward curve on every path
    let zero = rough.with_epsilon(0.0)?;
    let grid = TimeGrid::new(zero.maturity, 32)?;
    for p in generate_paths(&zero, grid, 64, seed, false)? {
        c.holds("deterministic variance at epsilon = 0", p.variance.iter().all(|&v| v == 0.04));
    }
    Ok(())
}

fn estimators_suite(c: &mut Checks, seed: u64, exec: &Executor) -> Result<()> {
    let cfg = flat_config(KernelSpec::Exponential { a: 1.0, b: 1.0 }, 0.6, 1.0, 0.05)?;
    let grid = TimeGrid::new(1.0, 32)?;
    let mut mismatches = 0u64;
    for p in generate_paths(&cfg.with_epsilon(1.0)?, grid, 20_000, seed, true)? {
        let s = p.terminal_spot();
        for k in [0.8, 1.0, 1.25] {
            let direct = if k > s { s } else { 0.0 };
            let (hi, lo) = put_payoff_split(k, s);
            let identity = if k > s { (k - hi) - lo } else { 0.0 };
            if direct.to_bits() != digital_weighted_spot(k, s).to_bits() || direct.to_bits() != identity.to_bits() {
                mismatches += 1;
            }
        }
    }
    c.within("pathwise identity mismatches", mismatches as f64, 0.5);

    let settings = McSettings::new(40_000, 64, seed, true)?;
    let s = simulate(&cfg, &[0.0, cfg.epsilon], &settings, exec)?;
    let at_zero = SsrEstimate::from_summary(&s[0])?;
    c.holds("X = 0 at epsilon = 0", at_zero.x == 0.0 && at_zero.degenerate_denominator);

    let est = SsrEstimate::from_summary(&s[1])?;
    let (x_lim, y_lim) = small_vol_component_limits(&cfg.curve, &cfg.effective_kernel()?, cfg.maturity)?;
    let eps = cfg.epsilon;
    let zx = (est.x / eps - x_lim).abs() / (est.x_se / eps);
    let zy = (est.y / eps - y_lim).abs() / (est.y_se / eps);
    c.note("x_over_eps_z", zx);
    c.note("y_over_eps_z", zy);
    c.within("X/eps near its limit (se units)", zx, 4.0);
    c.within("Y/eps near its limit (se units)", zy, 4.0);
    Ok(())
}

fn determinism_suite(c: &mut Checks, seed: u64) -> Result<()> {
    let cfg = flat_config(KernelSpec::Power { a: 0.3, hurst: 0.1 }, 0.6, 0.1, 1.0)?;
    let settings = McSettings::new(8_000, 16, seed, true)?;
    let one = simulate(&cfg, &[0.5, 1.0], &settings, &Executor::new(1)?)?;
    let three = simulate(&cfg, &[0.5, 1.0], &settings, &Executor::new(3)?)?;
    let again = simulate(&cfg, &[0.5, 1.0], &settings, &Executor::new(3)?)?;
    c.holds("summaries independent of worker count", one == three);
    c.holds("summaries repeat exactly", three == again);
    Ok(())
}
