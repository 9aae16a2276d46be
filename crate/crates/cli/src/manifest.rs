use std::path::PathBuf;

use ssr_core::{Result, SsrError};

use crate::args::{CommonArgs, Format};

pub const MIN_STEPS: usize = 8;
pub const MAX_STEPS: usize = 4096;
pub const WORKERS_ENV: &str = "SSRLAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Estimate,
    Limit,
    SweepEps,
    SweepT,
    Selftest,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Estimate => "estimate",
            CommandKind::Limit => "limit",
            CommandKind::SweepEps => "sweep-eps",
            CommandKind::SweepT => "sweep-T",
            CommandKind::Selftest => "selftest",
        }
    }

    fn needs_config(self) -> bool {
        !matches!(self, CommandKind::Selftest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Fixed(usize),
}

impl Workers {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("auto") {
            return Ok(Workers::Auto);
        }
        match t.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Workers::Fixed(n)),
            _ => Err(SsrError::Validation(format!(
                "workers must be a positive integer or `auto`, got `{text}`"
            ))),
        }
    }

    /// Thread count for the executor, 0 meaning one per logical core.
    pub fn threads(self) -> usize {
        match self {
            Workers::Auto => 0,
            Workers::Fixed(n) => n,
        }
    }
}

/// Everything a run depends on. Two runs with equal manifests (worker count
/// and timing aside) write byte-identical output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: CommandKind,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub antithetic: bool,
    pub workers: Workers,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub timing: bool,
}

impl RunManifest {
    /// `env_workers` is the value of [`WORKERS_ENV`], used when `--workers` is absent.
    pub fn from_args(command: CommandKind, args: &CommonArgs, env_workers: Option<&str>) -> Result<Self> {
        let workers = match (&args.workers, env_workers) {
            (Some(w), _) => Workers::parse(w)?,
            (None, Some(w)) => Workers::parse(w)
                .map_err(|e| SsrError::Validation(format!("{WORKERS_ENV}: {e}")))?,
            (None, None) => Workers::Auto,
        };
        let m = Self {
            command,
            config_path: args.config.clone(),
            seed: args.seed,
            n_paths: args.paths,
            n_steps: args.steps,
            antithetic: args.antithetic,
            workers,
            output_path: args.out.clone(),
            format: args.format,
            timing: args.timing,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.command.needs_config() && self.config_path.is_none() {
            return Err(SsrError::Validation(format!(
                "{} needs --config <path>",
                self.command.name()
            )));
        }
        if self.n_paths < 2 {
            return Err(SsrError::Validation(format!("--paths must be at least 2, got {}", self.n_paths)));
        }
        if self.antithetic && !self.n_paths.is_multiple_of(2) {
            return Err(SsrError::Validation(format!(
                "--paths must be even with --antithetic, got {}",
                self.n_paths
            )));
        }
        if !(MIN_STEPS..=MAX_STEPS).contains(&self.n_steps) {
            return Err(SsrError::Validation(format!(
                "--steps must lie in [{MIN_STEPS}, {MAX_STEPS}], got {}",
                self.n_steps
            )));
        }
        Ok(())
    }

    pub fn config_path(&self) -> Result<&PathBuf> {
        self.config_path
            .as_ref()
            .ok_or_else(|| SsrError::Validation(format!("{} needs --config <path>", self.command.name())))
    }
}
