use std::path::Path;
use std::time::Instant;

use ssr_core::asymptotics::{
    epsilon_sweep_schedule, maturity_sweep_schedule, short_maturity_limit, small_vol_component_limits,
    small_vol_limit, LimitComponents, LimitReport, SweepPlan, DEFAULT_TOL,
};
use ssr_core::estimators::{simulate, McSettings, McSummary, SkewEstimate, SsrEstimate};
use ssr_core::model::{load_config_file, ModelConfig};
use ssr_core::sim::{generate_paths, write_path_dump, Executor, PathDumpHeader, TimeGrid};
use ssr_core::{Result, SsrError};

use crate::manifest::RunManifest;
use crate::output::{write_atomic, Field, Table};

pub const ESTIMATE_COLUMNS: &[&str] = &[
    "epsilon",
    "X",
    "X_se",
    "Y",
    "Y_se",
    "R",
    "R_se",
    "digital_prob",
    "atm_total_var",
    "atm_vol",
    "skew_fd",
    "skew_fd_se",
    "skew_eqSk",
    "skew_eqSk_se",
    "n_paths",
    "n_steps",
    "seed",
    "warning",
    "wall_time_s",
];

pub const SWEEP_COLUMNS: &[&str] = &[
    "row",
    "maturity",
    "epsilon",
    "X",
    "X_se",
    "Y",
    "Y_se",
    "R",
    "R_se",
    "digital_prob",
    "atm_total_var",
    "atm_vol",
    "skew_fd",
    "skew_fd_se",
    "skew_eqSk",
    "skew_eqSk_se",
    "n_paths",
    "n_steps",
    "seed",
    "warning",
    "wall_time_s",
    "status",
];

pub const LIMIT_COLUMNS: &[&str] = &[
    "maturity",
    "H",
    "g0",
    "short_maturity_status",
    "short_maturity",
    "E_Z1Z2",
    "E_Z2sq",
    "x_over_sqrtT_limit",
    "y_over_sqrtT_limit",
    "small_vol_status",
    "small_vol",
    "A",
    "B",
    "C",
    "D",
    "x_over_eps_limit",
    "y_over_eps_limit",
    "quadrature_error",
];

const DEGENERATE_WARNING: &str = "degenerate_denominator";

/// A finished command: its table and the warnings for standard error.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub warnings: Vec<String>,
}

/// Stable status label of an error, used in sweep and limit rows.
pub fn status_label(e: &SsrError) -> &'static str {
    match e {
        SsrError::NoArbitrageViolation { .. } => "no_arbitrage_violation",
        SsrError::Domain(_) => "domain_error",
        SsrError::InvalidCorrelation(_) => "invalid_correlation",
        SsrError::UnsupportedKernelMix(_) => "unsupported_kernel_mix",
        SsrError::Extrapolation { .. } => "extrapolation",
        SsrError::Parse(_) => "parse_error",
        SsrError::Validation(_) => "validation_error",
        SsrError::NumericalDegeneracy(_) => "numerical_degeneracy",
        SsrError::HypothesisNotSatisfied(_) => "hypothesis_not_satisfied",
        SsrError::DegenerateDenominator(_) => DEGENERATE_WARNING,
        SsrError::UndefinedSsr(_) => "undefined_ssr",
        SsrError::EstimatorFailure(_) => "estimator_failure",
        SsrError::InvalidSchedule(_) => "invalid_schedule",
        SsrError::Io(_) => "io_error",
    }
}

fn load(manifest: &RunManifest) -> Result<ModelConfig> {
    load_config_file(manifest.config_path()?)
}

fn mc_settings(manifest: &RunManifest) -> Result<McSettings> {
    McSettings::new(manifest.n_paths, manifest.n_steps, manifest.seed, manifest.antithetic)
}

fn executor(manifest: &RunManifest) -> Result<Executor> {
    Executor::new(manifest.workers.threads())
}

/// X, Y, R and both skews from one summary.
pub fn estimates(summary: &McSummary) -> Result<(SsrEstimate, SkewEstimate)> {
    Ok((SsrEstimate::from_summary(summary)?, SkewEstimate::from_summary(summary)?))
}

fn fill_run_fields(table: &mut Table, manifest: &RunManifest, epsilon: f64, wall: Option<f64>) {
    let row = table
        .last_row()
        .num("epsilon", epsilon)
        .set("n_paths", Field::Int(manifest.n_paths as u64))
        .set("n_steps", Field::Int(manifest.n_steps as u64))
        .set("seed", Field::Int(manifest.seed));
    if let Some(w) = wall.filter(|_| manifest.timing) {
        row.num("wall_time_s", w);
    }
}

fn fill_estimate(table: &mut Table, est: &SsrEstimate, skew: &SkewEstimate) {
    let row = table
        .last_row()
        .num("X", est.x)
        .num("X_se", est.x_se)
        .num("Y", est.y)
        .num("Y_se", est.y_se)
        .num("R", est.r)
        .num("R_se", est.r_se)
        .num("digital_prob", est.digital_prob)
        .num("atm_total_var", est.atm_total_var.value())
        .num("atm_vol", skew.atm_vol())
        .num("skew_fd", skew.skew_fd)
        .num("skew_fd_se", skew.skew_fd_se)
        .num("skew_eqSk", skew.skew_digital)
        .num("skew_eqSk_se", skew.skew_digital_se);
    if est.degenerate_denominator {
        row.set("warning", Field::text(DEGENERATE_WARNING));
    }
}

fn degenerate_message(est: &SsrEstimate) -> String {
    format!(
        "epsilon = {}: Y = {:e} is within 2 standard errors ({:e}) of zero; R is not resolved",
        est.epsilon, est.y, est.y_se
    )
}

pub fn cmd_estimate(manifest: &RunManifest, dump: Option<(&Path, usize)>) -> Result<Report> {
    let config = load(manifest)?;
    let settings = mc_settings(manifest)?;
    let exec = executor(manifest)?;
    let start = Instant::now();
    let summaries = simulate(&config, &[config.epsilon], &settings, &exec)?;
    let (est, skew) = estimates(&summaries[0])?;
    let wall = start.elapsed().as_secs_f64();

    if let Some((path, limit)) = dump {
        dump_paths(&config, manifest, path, limit)?;
    }

    let mut table = Table::new(ESTIMATE_COLUMNS);
    table.row();
    fill_run_fields(&mut table, manifest, config.epsilon, Some(wall));
    fill_estimate(&mut table, &est, &skew);
    let warnings = if est.degenerate_denominator {
        vec![degenerate_message(&est)]
    } else {
        Vec::new()
    };
    Ok(Report { table, warnings })
}

fn dump_paths(config: &ModelConfig, manifest: &RunManifest, path: &Path, limit: usize) -> Result<()> {
    let n = manifest.n_paths.min(limit);
    let grid = TimeGrid::new(config.maturity, manifest.n_steps)?;
    let header = PathDumpHeader {
        n_steps: manifest.n_steps as u64,
        n_paths: n as u64,
        seed: manifest.seed,
    };
    let paths = generate_paths(config, grid, n, manifest.seed, manifest.antithetic)?.take(n);
    let mut bytes = Vec::new();
    write_path_dump(&mut bytes, header, paths)?;
    write_atomic(path, &bytes)
}

pub fn cmd_limit(manifest: &RunManifest) -> Result<Report> {
    let config = load(manifest)?;
    let kernel = config.effective_kernel()?;
    let mut table = Table::new(LIMIT_COLUMNS);
    let mut warnings = Vec::new();
    table.row().num("maturity", config.maturity);
    if let Some(h) = kernel.hurst() {
        table.last_row().num("H", h);
    }
    if let Some(g0) = kernel.g0() {
        table.last_row().num("g0", g0);
    }

    match short_maturity_limit(&kernel) {
        Ok(LimitReport {
            value,
            components: LimitComponents::ShortMaturity(m),
            ..
        }) => {
            table
                .last_row()
                .set("short_maturity_status", Field::text("ok"))
                .num("short_maturity", value)
                .num("E_Z1Z2", m.e_z1z2)
                .num("E_Z2sq", m.e_z2sq)
                .num("x_over_sqrtT_limit", m.x_scaled_limit)
                .num("y_over_sqrtT_limit", m.y_scaled_limit);
        }
        Ok(_) => unreachable!("short-maturity report"),
        Err(e) => {
            warnings.push(format!("short-maturity limit: {e}"));
            table.last_row().set("short_maturity_status", Field::text(status_label(&e)));
        }
    }

    let small = small_vol_limit(&config.curve, &kernel, config.maturity, DEFAULT_TOL).and_then(|r| {
        let comps = small_vol_component_limits(&config.curve, &kernel, config.maturity)?;
        Ok((r, comps))
    });
    match small {
        Ok((
            LimitReport {
                value,
                components: LimitComponents::SmallVol(m),
                quadrature_error_estimate,
                ..
            },
            (x, y),
        )) => {
            table
                .last_row()
                .set("small_vol_status", Field::text("ok"))
                .num("small_vol", value)
                .num("A", m.a)
                .num("B", m.b)
                .num("C", m.c)
                .num("D", m.d)
                .num("x_over_eps_limit", x)
                .num("y_over_eps_limit", y)
                .num("quadrature_error", quadrature_error_estimate);
        }
        Ok(_) => unreachable!("small vol-of-vol report"),
        Err(e) => {
            warnings.push(format!("small vol-of-vol limit: {e}"));
            table.last_row().set("small_vol_status", Field::text(status_label(&e)));
        }
    }
    Ok(Report { table, warnings })
}

/// One sweep row before it is written.
struct SweepRow {
    maturity: f64,
    epsilon: f64,
    outcome: Result<(SsrEstimate, SkewEstimate)>,
    wall: f64,
}

pub fn cmd_sweep_eps(manifest: &RunManifest, values: &[f64]) -> Result<Report> {
    let config = load(manifest)?;
    let plan = epsilon_sweep_schedule(values, manifest.seed)?;
    let settings = mc_settings(manifest)?;
    let exec = executor(manifest)?;
    let kernel = config.effective_kernel()?;
    let limit = small_vol_limit(&config.curve, &kernel, config.maturity, DEFAULT_TOL);

    // one pass over common random numbers for every ε
    let start = Instant::now();
    let summaries = simulate(&config, &plan.values, &settings, &exec)?;
    let wall = start.elapsed().as_secs_f64();
    let rows = summaries
        .iter()
        .map(|s| SweepRow {
            maturity: config.maturity,
            epsilon: s.epsilon,
            outcome: estimates(s),
            wall,
        })
        .collect();
    Ok(sweep_table(manifest, &plan, (config.maturity, 0.0), limit, rows))
}

pub fn cmd_sweep_t(manifest: &RunManifest, values: &[f64]) -> Result<Report> {
    let config = load(manifest)?;
    let plan = maturity_sweep_schedule(values, manifest.seed)?;
    let settings = mc_settings(manifest)?;
    let exec = executor(manifest)?;
    let limit = config.effective_kernel().and_then(|k| short_maturity_limit(&k));

    let rows = plan
        .values
        .iter()
        .map(|&t| {
            let start = Instant::now();
            let outcome = config
                .with_maturity(t)
                .and_then(|c| simulate(&c, &[c.epsilon], &settings, &exec))
                .and_then(|s| estimates(&s[0]));
            SweepRow {
                maturity: t,
                epsilon: config.epsilon,
                outcome,
                wall: start.elapsed().as_secs_f64(),
            }
        })
        .collect();
    Ok(sweep_table(manifest, &plan, (0.0, config.epsilon), limit, rows))
}

/// Limit row first, then the rows sorted by the swept variable.
fn sweep_table(
    manifest: &RunManifest,
    plan: &SweepPlan,
    (limit_maturity, limit_epsilon): (f64, f64),
    limit: Result<LimitReport>,
    mut rows: Vec<SweepRow>,
) -> Report {
    use ssr_core::asymptotics::SweepVariable;
    let key = |r: &SweepRow| match plan.variable {
        SweepVariable::Epsilon => r.epsilon,
        SweepVariable::Maturity => r.maturity,
    };
    rows.sort_by(|a, b| key(a).total_cmp(&key(b)));

    let mut table = Table::new(SWEEP_COLUMNS);
    let mut warnings = Vec::new();
    table
        .row()
        .set("row", Field::text("limit"))
        .num("maturity", limit_maturity)
        .num("epsilon", limit_epsilon)
        .set("seed", Field::Int(plan.seed));
    match limit {
        Ok(r) => {
            table.last_row().num("R", r.value).set("status", Field::text("ok"));
        }
        Err(e) => {
            warnings.push(format!("limit row: {e}"));
            table.last_row().set("status", Field::text(status_label(&e)));
        }
    }

    for r in rows {
        table
            .row()
            .set("row", Field::text("mc"))
            .num("maturity", r.maturity);
        fill_run_fields(&mut table, manifest, r.epsilon, Some(r.wall));
        match r.outcome {
            Ok((est, skew)) => {
                fill_estimate(&mut table, &est, &skew);
                table.last_row().set("status", Field::text("ok"));
                if est.degenerate_denominator {
                    warnings.push(format!("maturity = {}: {}", r.maturity, degenerate_message(&est)));
                }
            }
            Err(e) => {
                warnings.push(format!("maturity = {}, epsilon = {}: {e}", r.maturity, r.epsilon));
                table.last_row().set("status", Field::text(status_label(&e)));
            }
        }
    }
    Report { table, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_labels_are_snake_case() {
        let errs = [
            SsrError::HypothesisNotSatisfied(String::new()),
            SsrError::DegenerateDenominator(String::new()),
            SsrError::NoArbitrageViolation {
                price: 0.0,
                lower: 0.0,
                upper: 1.0,
            },
        ];
        for e in &errs {
            let l = status_label(e);
            assert!(l.chars().all(|c| c.is_ascii_lowercase() || c == '_'), "{l}");
        }
        assert_eq!(status_label(&errs[0]), "hypothesis_not_satisfied");
    }

    #[test]
    fn column_sets_are_consistent() {
        for c in ESTIMATE_COLUMNS {
            assert!(SWEEP_COLUMNS.contains(c), "{c}");
        }
        let mut all = SWEEP_COLUMNS.to_vec();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), SWEEP_COLUMNS.len());
    }
}
